//! Standard stationary data, the canonical product metric `h − (ω − dt)²`
//! and the two maps between stationary spacetimes and Randers metrics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dual::Real;
use crate::error::{GeoError, Result};
use crate::expr::Expr;
use crate::finsler::{ChartDomain, OneFormField, RandersMetric, RiemannianField};

/// `g₀ + w⊗dt + dt⊗w − β dt²` on `S × ℝ`.
#[derive(Clone, Debug)]
pub struct StationaryData {
    pub domain: ChartDomain,
    pub g0: RiemannianField,
    pub w: OneFormField,
    pub beta: Expr,
}

impl StationaryData {
    pub fn validate(&self, samples: &[Vec<f64>]) -> Result<()> {
        let n = self.domain.dim();
        if self.g0.dim() != n || self.w.dim() != n {
            return Err(GeoError::InvalidData("stationary data dimensions disagree with the chart".into()));
        }
        for p in samples {
            self.domain.check(p)?;
            let b = self.beta.eval(p);
            if !(b > 0.0) {
                return Err(GeoError::InvalidData(format!("beta = {b} is not positive at {p:?}")));
            }
            let l = self.g0.min_eigenvalue(p);
            if !(l > 0.0) {
                return Err(GeoError::InvalidData(format!("g0 is not positive definite at {p:?}")));
            }
        }
        Ok(())
    }

    /// Multiplies all three fields by `λ(x)`.
    pub fn rescaled(&self, lambda: &Expr) -> StationaryData {
        StationaryData {
            domain: self.domain.clone(),
            g0: self.g0.map_entries(|_, _, e| lambda.clone() * e.clone()),
            w: OneFormField::new(self.w.comps().iter().map(|c| lambda.clone() * c.clone()).collect()),
            beta: lambda.clone() * self.beta.clone(),
        }
    }
}

/// Randers metric of the future-pointing null cone:
/// `h = g₀/β + (w/β)⊗(w/β)`, `ω = w/β`.
pub fn src_forward(data: &StationaryData) -> Result<RandersMetric> {
    data.validate(&data.domain.default_samples())?;
    let omega: Vec<Expr> = data.w.comps().iter().map(|c| c.clone() / data.beta.clone()).collect();
    let h = data
        .g0
        .map_entries(|i, j, g| g.clone() / data.beta.clone() + omega[i].clone() * omega[j].clone());
    RandersMetric::new(data.domain.clone(), h, OneFormField::new(omega))
}

/// Canonical representative `h − (ω − dt)²` of the conformal class attached to `R`.
pub fn src_backward(metric: &RandersMetric) -> Result<LorentzProduct> {
    metric.validate(&metric.domain.default_samples())?;
    Ok(LorentzProduct {
        domain: metric.domain.clone(),
        h: metric.h.clone(),
        omega: metric.omega.clone(),
    })
}

/// Tangent vector `(v, τ)` of `S × ℝ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpacetimeVector {
    pub v: Vec<f64>,
    pub tau: f64,
}

impl SpacetimeVector {
    pub fn new(v: Vec<f64>, tau: f64) -> Self {
        SpacetimeVector { v, tau }
    }

    pub fn from_slice(z: &[f64]) -> Self {
        let n = z.len() - 1;
        SpacetimeVector { v: z[..n].to_vec(), tau: z[n] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.v.clone();
        out.push(self.tau);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalClass {
    TimelikeFuture,
    TimelikePast,
    NullFuture,
    NullPast,
    Spacelike,
    Zero,
}

impl std::fmt::Display for CausalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CausalClass::TimelikeFuture => "timelike-future",
            CausalClass::TimelikePast => "timelike-past",
            CausalClass::NullFuture => "null-future",
            CausalClass::NullPast => "null-past",
            CausalClass::Spacelike => "spacelike",
            CausalClass::Zero => "zero",
        };
        f.write_str(s)
    }
}

/// Relative tolerance used to call a vector null.
pub const NULL_TOLERANCE: f64 = 1e-9;

/// `g((v,τ),(v',τ')) = h(v,v') − (ω(v) − τ)(ω(v') − τ')` with Killing field `∂_t`.
#[derive(Clone, Debug)]
pub struct LorentzProduct {
    pub domain: ChartDomain,
    pub h: RiemannianField,
    pub omega: OneFormField,
}

impl LorentzProduct {
    /// Spatial dimension `n`; the spacetime has dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Row-major `(n+1)×(n+1)` block matrix `[[h − ω⊗ω, ω], [ωᵀ, −1]]`.
    /// Only the spatial coordinates of `z` are read.
    pub fn matrix<T: Real>(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        let m = n + 1;
        let h = self.h.eval(&z[..n]);
        let w = self.omega.eval(&z[..n]);
        let mut g = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                g[i * m + j] = h[i * n + j] - w[i] * w[j];
            }
            g[i * m + n] = w[i];
            g[n * m + i] = w[i];
        }
        g[n * m + n] = -T::one();
        g
    }

    pub fn matrix_at(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.dim() + 1;
        DMatrix::from_row_slice(m, m, &self.matrix(p))
    }

    /// `∂_t` in chart components.
    pub fn killing(&self) -> SpacetimeVector {
        SpacetimeVector::new(vec![0.0; self.dim()], 1.0)
    }

    /// `g_p(A, B)` from the defining rule.
    pub fn g_eval(&self, p: &[f64], a: &SpacetimeVector, b: &SpacetimeVector) -> Result<f64> {
        self.domain.check(p)?;
        Ok(self.g_unchecked(p, a, b))
    }

    pub(crate) fn g_unchecked(&self, p: &[f64], a: &SpacetimeVector, b: &SpacetimeVector) -> f64 {
        let n = self.dim();
        let h = self.h.eval(&p[..n]);
        let mut hab = 0.0;
        for i in 0..n {
            for j in 0..n {
                hab += h[i * n + j] * a.v[i] * b.v[j];
            }
        }
        let wa = self.omega.apply(&p[..n], &a.v);
        let wb = self.omega.apply(&p[..n], &b.v);
        hab - (wa - a.tau) * (wb - b.tau)
    }

    /// Roots `τ₋ ≤ τ₊` of `h(v,v) − (ω(v) − τ)² = 0`.
    pub fn null_roots(&self, p: &[f64], v: &[f64]) -> (f64, f64) {
        let n = self.dim();
        let hv = self.h.eval(&p[..n]);
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += hv[i * n + j] * v[i] * v[j];
            }
        }
        let w = self.omega.apply(&p[..n], v);
        let r = q.max(0.0).sqrt();
        (w - r, w + r)
    }

    /// Causal character of `A` at `p`; future means `g(A, ∂_t) < 0`.
    pub fn causal_classify(&self, p: &[f64], a: &SpacetimeVector) -> CausalClass {
        classify_with(self.g_unchecked(p, a, a), self.g_unchecked(p, a, &self.killing()), a, |v| {
            let n = self.dim();
            let h = self.h.eval(&p[..n]);
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += h[i * n + j] * v[i] * v[j];
                }
            }
            q
        })
    }

    /// Number of negative eigenvalues of the matrix form at each sample.
    pub fn negative_eigenvalue_counts(&self, samples: &[Vec<f64>]) -> Vec<usize> {
        samples
            .iter()
            .map(|p| self.matrix_at(p).symmetric_eigenvalues().iter().filter(|&&l| l < 0.0).count())
            .collect()
    }

    /// Reinterprets as stationary data with `β = 1`, `g₀ = h − ω⊗ω`, `w = ω`.
    pub fn as_stationary_data(&self) -> StationaryData {
        let w = self.omega.comps().to_vec();
        StationaryData {
            domain: self.domain.clone(),
            g0: self.h.map_entries(|i, j, e| e.clone() - w[i].clone() * w[j].clone()),
            w: self.omega.clone(),
            beta: Expr::constant(1.0),
        }
    }
}

fn classify_with(gaa: f64, ga_t: f64, a: &SpacetimeVector, hnorm: impl Fn(&[f64]) -> f64) -> CausalClass {
    if a.tau == 0.0 && a.v.iter().all(|&x| x == 0.0) {
        return CausalClass::Zero;
    }
    let scale = hnorm(&a.v).abs() + ga_t * ga_t;
    if gaa.abs() <= NULL_TOLERANCE * scale {
        if ga_t < 0.0 {
            CausalClass::NullFuture
        } else {
            CausalClass::NullPast
        }
    } else if gaa < 0.0 {
        if ga_t < 0.0 {
            CausalClass::TimelikeFuture
        } else {
            CausalClass::TimelikePast
        }
    } else {
        CausalClass::Spacelike
    }
}

/// Metric used for Lorentzian geodesics: the canonical product metric,
/// optionally multiplied by a positive conformal factor `λ(x)`.
#[derive(Clone, Debug)]
pub struct SpacetimeMetric {
    pub product: LorentzProduct,
    pub conformal: Option<Expr>,
}

impl From<LorentzProduct> for SpacetimeMetric {
    fn from(product: LorentzProduct) -> Self {
        SpacetimeMetric { product, conformal: None }
    }
}

impl SpacetimeMetric {
    pub fn dim(&self) -> usize {
        self.product.dim() + 1
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.product.domain
    }

    pub fn matrix<T: Real>(&self, z: &[T]) -> Vec<T> {
        let mut g = self.product.matrix(z);
        if let Some(l) = &self.conformal {
            let lam = l.eval(&z[..self.product.dim()]);
            for e in g.iter_mut() {
                *e *= lam;
            }
        }
        g
    }

    pub fn matrix_at(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, &self.matrix(p))
    }

    pub fn inner(&self, p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let m = self.dim();
        let g = self.matrix(p);
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += g[i * m + j] * a[i] * b[j];
            }
        }
        acc
    }

    pub fn causal_classify(&self, p: &[f64], a: &SpacetimeVector) -> CausalClass {
        let av = a.to_vec();
        let mut t = vec![0.0; self.dim()];
        t[self.dim() - 1] = 1.0;
        let lam = self.conformal.as_ref().map_or(1.0, |l| l.eval(&p[..self.product.dim()]));
        classify_with(self.inner(p, &av, &av), self.inner(p, &av, &t), a, |v| {
            let n = self.product.dim();
            let h = self.product.h.eval(&p[..n]);
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += h[i * n + j] * v[i] * v[j];
                }
            }
            lam * q
        })
    }
}

/// `λ·g` as a general metric field; rejects nonpositive `λ` on the samples.
pub fn conformal_rescale(g: &LorentzProduct, lambda: &Expr, samples: &[Vec<f64>]) -> Result<SpacetimeMetric> {
    for p in samples {
        let l = lambda.eval(p);
        if !(l > 0.0) {
            return Err(GeoError::InvalidData(format!("conformal factor {l} is not positive at {p:?}")));
        }
    }
    Ok(SpacetimeMetric { product: g.clone(), conformal: Some(lambda.clone()) })
}
