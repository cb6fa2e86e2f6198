//! Randers metrics `F = √h + ω` on a single coordinate chart, with exact
//! derivatives of `F²` from nested dual numbers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dual::{Dual, Real};
use crate::error::{GeoError, Result};
use crate::expr::Expr;
use crate::numeric::{norm, simpson, solve};
use crate::trajectory::Trajectory;

/// Speeds at or below this Euclidean norm count as the zero section.
pub const VELOCITY_FLOOR: f64 = 1e-12;

/// Open box `∏ (lo_k, hi_k)` in ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartDomain {
    bounds: Vec<(f64, f64)>,
}

impl ChartDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(GeoError::InvalidData("chart dimension must be at least 1".into()));
        }
        if let Some(k) = bounds.iter().position(|&(lo, hi)| !(lo < hi)) {
            return Err(GeoError::InvalidData(format!("chart axis {k} has an empty interval")));
        }
        Ok(ChartDomain { bounds })
    }

    /// The cube `(-r, r)ⁿ`.
    pub fn cube(dim: usize, r: f64) -> Self {
        ChartDomain { bounds: vec![(-r, r); dim] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() >= self.dim()
            && self.bounds.iter().zip(x).all(|(&(lo, hi), &xi)| lo < xi && xi < hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(GeoError::Domain { point: x.to_vec() })
        }
    }

    /// Validation sample grid used when no explicit samples are supplied.
    pub fn default_samples(&self) -> Vec<Vec<f64>> {
        self.sample_grid(if self.dim() <= 2 { 9 } else { 5 })
    }

    /// Tensor grid of `per_axis` points per axis, strictly inside the box
    /// (a margin of 5% of each side is kept free).
    pub fn sample_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let (a, b) = (lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
                crate::numeric::linspace(a, b, per_axis.max(2))
            })
            .collect();
        let mut out = vec![vec![]];
        for axis in axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Symmetric matrix field stored by its upper triangle.
#[derive(Clone, Debug)]
pub struct RiemannianField {
    dim: usize,
    upper: Vec<Expr>,
}

impl RiemannianField {
    /// Builds from a full `n×n` array; only the upper triangle is read.
    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(GeoError::InvalidData("metric matrix must be square".into()));
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(rows[i][j].clone());
            }
        }
        Ok(RiemannianField { dim: n, upper })
    }

    /// `c(x)·Id`.
    pub fn conformal_identity(dim: usize, c: Expr) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(if i == j { c.clone() } else { Expr::constant(0.0) });
            }
        }
        RiemannianField { dim, upper }
    }

    pub fn identity(dim: usize) -> Self {
        Self::conformal_identity(dim, Expr::constant(1.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.upper[self.idx(i, j)]
    }

    /// Row-major full matrix at `x`; symmetric by construction.
    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut m = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.upper[self.idx(i, j)].eval(x);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }

    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.eval(x))
    }

    /// Entry-wise map, used to build derived fields.
    pub fn map_entries(&self, f: impl Fn(usize, usize, &Expr) -> Expr) -> Self {
        let n = self.dim;
        let mut upper = Vec::with_capacity(self.upper.len());
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j, self.entry(i, j)));
            }
        }
        RiemannianField { dim: n, upper }
    }

    /// Smallest eigenvalue at `x`.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        self.matrix(x).symmetric_eigenvalues().min()
    }
}

/// Covector field `x ↦ ω(x)`.
#[derive(Clone, Debug)]
pub struct OneFormField {
    comps: Vec<Expr>,
}

impl OneFormField {
    pub fn new(comps: Vec<Expr>) -> Self {
        OneFormField { comps }
    }

    pub fn zero(dim: usize) -> Self {
        OneFormField { comps: vec![Expr::constant(0.0); dim] }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }

    /// `ω(x)·v`.
    pub fn apply<T: Real>(&self, x: &[T], v: &[T]) -> T {
        let mut acc = T::zero();
        for (c, &vi) in self.comps.iter().zip(v) {
            acc += c.eval(x) * vi;
        }
        acc
    }

    /// True when every component is the literal constant 0.
    pub fn is_identically_zero(&self) -> bool {
        self.comps.iter().all(|c| c.as_const() == Some(0.0))
    }

    pub fn negated(&self) -> Self {
        OneFormField { comps: self.comps.iter().map(|c| -c.clone()).collect() }
    }
}

/// Randers metric `R(x, v) = √(h_x(v, v)) + ω_x(v)` on a chart.
#[derive(Clone, Debug)]
pub struct RandersMetric {
    pub domain: ChartDomain,
    pub h: RiemannianField,
    pub omega: OneFormField,
}

/// `F²` and its first and second partials at `(x, v)`, in chart coordinates.
///
/// Mixed blocks follow `dqv[(i, j)] = ∂²F² / ∂xⁱ ∂vʲ`.
#[derive(Clone, Debug)]
pub struct FinslerJet {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub f: f64,
    pub f2: f64,
    pub dq: DVector<f64>,
    pub dv: DVector<f64>,
    pub dvv: DMatrix<f64>,
    pub dqv: DMatrix<f64>,
    pub dqq: DMatrix<f64>,
}

/// Generic-scalar jet used by the spray and its linearization.
#[derive(Clone, Debug)]
pub(crate) struct JetT<T> {
    pub f2: T,
    pub dq: Vec<T>,
    pub dv: Vec<T>,
    /// row-major n×n
    pub dvv: Vec<T>,
    /// row-major n×n, entry (i, j) = ∂xⁱ ∂vʲ F²
    pub dqv: Vec<T>,
    pub dqq: Vec<T>,
}

/// Outcome of a Randers-condition check over sample points.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub max_norm: f64,
    pub worst_point: Vec<f64>,
    pub margin: f64,
    pub passed: bool,
}

impl RandersMetric {
    /// Assembles a metric; call [`validate`](Self::validate) to check the Randers bound.
    pub fn new(domain: ChartDomain, h: RiemannianField, omega: OneFormField) -> Result<Self> {
        let n = domain.dim();
        if h.dim() != n || omega.dim() != n {
            return Err(GeoError::InvalidData(format!(
                "chart has dimension {n} but h is {}x{} and ω has {} components",
                h.dim(),
                h.dim(),
                omega.dim()
            )));
        }
        for (name, e) in h.upper.iter().map(|e| ("h", e)).chain(omega.comps.iter().map(|e| ("ω", e))) {
            if let Some(k) = e.max_var() {
                if k >= n {
                    return Err(GeoError::InvalidData(format!("{name} references x{k} on a {n}-dimensional chart")));
                }
            }
        }
        Ok(RandersMetric { domain, h, omega })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_riemannian(&self) -> bool {
        self.omega.is_identically_zero()
    }

    /// `h_x(u, w)`.
    pub fn h_inner<T: Real>(&self, x: &[T], u: &[T], w: &[T]) -> T {
        let n = self.dim();
        let m = self.h.eval(x);
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += m[i * n + j] * u[i] * w[j];
            }
        }
        acc
    }

    /// `F(x, v)` without the chart check.
    #[inline]
    pub fn f<T: Real>(&self, x: &[T], v: &[T]) -> T {
        let q = self.h_inner(x, v, v);
        let b = self.omega.apply(x, v);
        if q.value() <= 0.0 {
            // only reachable at v = 0, where √ has no derivative; keep the value
            return b;
        }
        q.sqrt() + b
    }

    #[inline]
    pub fn f2<T: Real>(&self, x: &[T], v: &[T]) -> T {
        let f = self.f(x, v);
        f * f
    }

    /// `R(x, v)`.
    pub fn evaluate(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        Ok(self.f(x, v))
    }

    /// `F²` and its derivatives up to second order.
    pub fn jet(&self, x: &[f64], v: &[f64]) -> Result<FinslerJet> {
        self.jet_with_floor(x, v, VELOCITY_FLOOR)
    }

    pub fn jet_with_floor(&self, x: &[f64], v: &[f64], floor: f64) -> Result<FinslerJet> {
        self.domain.check(x)?;
        let vn = norm(v);
        if !(vn > floor) {
            return Err(GeoError::Nondifferentiable { norm: vn });
        }
        Ok(self.jet_unchecked(x, v))
    }

    pub(crate) fn jet_unchecked(&self, x: &[f64], v: &[f64]) -> FinslerJet {
        let n = self.dim();
        let j = self.jet_generic(x, v);
        let f2 = j.f2;
        FinslerJet {
            x: DVector::from_column_slice(x),
            v: DVector::from_column_slice(v),
            f: self.f(x, v),
            f2,
            dq: DVector::from_vec(j.dq),
            dv: DVector::from_vec(j.dv),
            dvv: DMatrix::from_row_slice(n, n, &j.dvv),
            dqv: DMatrix::from_row_slice(n, n, &j.dqv),
            dqq: DMatrix::from_row_slice(n, n, &j.dqq),
        }
    }

    /// All partials of `F²` in `(x, v)` up to second order, by one nested-dual
    /// sweep per unordered pair of the `2n` variables.
    pub(crate) fn jet_generic<T: Real>(&self, x: &[T], v: &[T]) -> JetT<T> {
        let n = self.dim();
        let m = 2 * n;
        type D2<T> = Dual<Dual<T>>;
        let base: Vec<T> = x.iter().chain(v.iter()).copied().collect();
        let mut grad = vec![T::zero(); m];
        let mut hess = vec![T::zero(); m * m];
        let mut f2 = T::zero();
        let mut z: Vec<D2<T>> = base.iter().map(|&b| D2::constant(Dual::constant(b))).collect();
        for a in 0..m {
            z[a].eps.re = T::one();
            for b in a..m {
                z[b].re.eps = T::one();
                let val = self.f2(&z[..n], &z[n..]);
                z[b].re.eps = T::zero();
                hess[a * m + b] = val.eps.eps;
                hess[b * m + a] = val.eps.eps;
                if b == a {
                    grad[a] = val.eps.re;
                    f2 = val.re.re;
                }
            }
            z[a].eps.re = T::zero();
        }
        let block = |r0: usize, c0: usize| -> Vec<T> {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    out.push(hess[(r0 + i) * m + c0 + j]);
                }
            }
            out
        };
        JetT {
            f2,
            dq: grad[..n].to_vec(),
            dv: grad[n..].to_vec(),
            dvv: block(n, n),
            dqv: block(0, n),
            dqq: block(0, 0),
        }
    }

    /// The reversed metric `R̃(x, v) = R(x, −v)`, i.e. `(h, −ω)`.
    pub fn reverse(&self) -> RandersMetric {
        RandersMetric { domain: self.domain.clone(), h: self.h.clone(), omega: self.omega.negated() }
    }

    /// `‖ω‖_h = √(ωᵀ h⁻¹ ω)` at `x`.
    pub fn omega_norm(&self, x: &[f64]) -> Result<f64> {
        let h = self.h.eval(x);
        let w = self.omega.eval(x);
        let y = solve(&h, &w)?;
        Ok(w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }

    /// Checks positivity of `h` and the Randers bound `‖ω‖_h < 1 − margin`.
    pub fn validate(&self, samples: &[Vec<f64>]) -> Result<ValidationReport> {
        self.validate_with_margin(samples, 1e-6)
    }

    pub fn validate_with_margin(&self, samples: &[Vec<f64>], margin: f64) -> Result<ValidationReport> {
        if samples.is_empty() {
            return Err(GeoError::OutOfRange("validation needs at least one sample".into()));
        }
        let mut worst = (f64::NEG_INFINITY, samples[0].clone());
        for p in samples {
            self.domain.check(p)?;
            let lmin = self.h.min_eigenvalue(p);
            if !(lmin > 0.0) {
                return Err(GeoError::InvalidData(format!(
                    "h is not positive definite at {p:?} (smallest eigenvalue {lmin:e})"
                )));
            }
            let nrm = self.omega_norm(p)?;
            if !(nrm < 1.0) {
                return Err(GeoError::InvalidRanders { max_norm: nrm, point: p.clone() });
            }
            if nrm > worst.0 {
                worst = (nrm, p.clone());
            }
        }
        Ok(ValidationReport {
            max_norm: worst.0,
            worst_point: worst.1,
            margin,
            passed: worst.0 < 1.0 - margin,
        })
    }

    /// Randers length `∫ R(γ, γ̇)` by composite Simpson.
    pub fn length(&self, path: &Trajectory) -> Result<f64> {
        let vals = (0..path.len())
            .map(|i| self.evaluate(path.position(i), path.velocity(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(simpson(path.grid(), &vals))
    }
}

/// Energy `E(γ) = ½∫ F²(γ, γ̇) ds`, composite Simpson on the trajectory grid
/// (fourth order on uniform grids; exact for cubic integrands).
pub fn energy(metric: &RandersMetric, path: &Trajectory) -> Result<f64> {
    path.ensure_regular(VELOCITY_FLOOR)?;
    let vals = (0..path.len())
        .map(|i| metric.evaluate(path.position(i), path.velocity(i)).map(|f| 0.5 * f * f))
        .collect::<Result<Vec<_>>>()?;
    Ok(simpson(path.grid(), &vals))
}

/// Energy of a continuous path given as consecutive smooth segments.
pub fn energy_segments(metric: &RandersMetric, segments: &[Trajectory]) -> Result<f64> {
    segments.iter().map(|s| energy(metric, s)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wind(a: f64) -> RandersMetric {
        RandersMetric::new(
            ChartDomain::cube(2, 10.0),
            RiemannianField::identity(2),
            OneFormField::new(vec![Expr::constant(a), Expr::constant(0.0)]),
        )
        .unwrap()
    }

    fn curvy() -> RandersMetric {
        let h = RiemannianField::from_rows(vec![
            vec![Expr::parse("2 + sin(x0)").unwrap(), Expr::parse("0.3*x1").unwrap()],
            vec![Expr::parse("0.3*x1").unwrap(), Expr::parse("1 + x0^2").unwrap()],
        ])
        .unwrap();
        let w = OneFormField::new(vec![
            Expr::parse("0.2*cos(x1)").unwrap(),
            Expr::parse("0.1*x0*x1").unwrap(),
        ]);
        RandersMetric::new(ChartDomain::cube(2, 2.0), h, w).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let e = wind(0.0);
        assert_relative_eq!(e.evaluate(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_relative_eq!(wind(0.5).evaluate(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.5);
        assert_eq!(wind(0.5).evaluate(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(e.evaluate(&[11.0, 0.0], &[1.0, 0.0]), Err(GeoError::Domain { .. })));
    }

    #[test]
    fn euclidean_vertical_hessian_is_twice_identity() {
        let j = wind(0.0).jet(&[0.3, -0.2], &[0.7, 1.9]).unwrap();
        assert!((j.dvv - 2.0 * DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn jet_rejects_zero_velocity() {
        assert!(matches!(
            wind(0.5).jet(&[0.0, 0.0], &[0.0, 0.0]),
            Err(GeoError::Nondifferentiable { .. })
        ));
    }

    #[test]
    fn euler_identities() {
        let m = curvy();
        for (x, v) in [([0.1, 0.4], [1.0, -0.3]), ([-1.1, 0.7], [-0.2, 0.05])] {
            let j = m.jet(&x, &v).unwrap();
            let v = DVector::from_column_slice(&v);
            assert_relative_eq!(j.dv.dot(&v), 2.0 * j.f2, max_relative = 1e-12);
            assert!((&j.dvv * &v - &j.dv).norm() < 1e-12 * j.dv.norm());
        }
    }

    #[test]
    fn reverse_examples() {
        let m = wind(0.5);
        assert_relative_eq!(m.reverse().evaluate(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.5);
        let c = curvy();
        let rr = c.reverse().reverse();
        for (x, v) in [([0.1, 0.4], [1.0, -0.3]), ([1.5, -1.5], [0.3, 0.9])] {
            assert_eq!(rr.f(&x, &v), c.f(&x, &v));
            let vm = [-v[0], -v[1]];
            assert_eq!(c.reverse().f(&x, &v), c.f(&x, &vm));
        }
        let e = wind(0.0);
        assert_eq!(e.reverse().f(&[0.0, 0.0], &[1.0, 2.0]), e.f(&[0.0, 0.0], &[1.0, 2.0]));
    }

    #[test]
    fn validate_examples() {
        let pts = ChartDomain::cube(2, 10.0).sample_grid(5);
        let r = wind(0.0).validate(&pts).unwrap();
        assert_eq!(r.max_norm, 0.0);
        assert!(r.passed);
        let r = wind(0.5).validate(&pts).unwrap();
        assert_relative_eq!(r.max_norm, 0.5, epsilon = 1e-15);
        assert!(r.passed);
        assert!(matches!(wind(1.0).validate(&pts), Err(GeoError::InvalidRanders { .. })));
        assert!(wind(0.5).validate(&[]).is_err());
    }

    #[test]
    fn energy_examples() {
        let line = Trajectory::from_fn(2, 0.0, 1.0, 100, |s| (vec![2.0 * s, 0.0], vec![2.0, 0.0])).unwrap();
        assert_relative_eq!(energy(&wind(0.0), &line).unwrap(), 2.0, epsilon = 1e-14);
        let unit = Trajectory::from_fn(2, 0.0, 1.0, 100, |s| (vec![s, 0.0], vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(energy(&wind(0.5), &unit).unwrap(), 1.125, epsilon = 1e-14);
        let held = Trajectory::from_fn(2, 0.0, 1.0, 100, |s| {
            if s <= 0.5 {
                (vec![2.0 * s, 0.0], vec![2.0, 0.0])
            } else {
                (vec![1.0, 0.0], vec![0.0, 0.0])
            }
        })
        .unwrap();
        assert!(matches!(energy(&wind(0.0), &held), Err(GeoError::Regularity { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = RandersMetric::new(
            ChartDomain::cube(2, 1.0),
            RiemannianField::identity(3),
            OneFormField::zero(2),
        );
        assert!(r.is_err());
        let r = RandersMetric::new(
            ChartDomain::cube(2, 1.0),
            RiemannianField::identity(2),
            OneFormField::new(vec![Expr::var(2), Expr::constant(0.0)]),
        );
        assert!(r.is_err());
    }
}
