//! Conjugate points and Morse indices on both sides of the correspondence.
//!
//! Base side: rank drops of the linearized spray flow, and the inertia of the
//! second variation of `E` on piecewise-linear `H¹₀` fields. Spacetime side:
//! rank drops of the full linearized Levi-Civita flow along the lifted null
//! geodesic, and the inertia of `r ↦ J(Ψ(x + rW))` from polarized second
//! differences.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::expr::Expr;
use crate::finsler::RandersMetric;
use crate::geodesic::{
    accel_jacobian, lorentz_geodesic_ivp, reparam_constant_h_speed, GeodesicOde, LorentzOde, SprayEvaluator,
    VariationalFlow,
};
use crate::lift::{lightlike_lift, lightlike_lift_segments, project, uhlenbeck_j_segments};
use crate::numeric::{dist, simpson};
use crate::pathspace::{four_term, PathGridH10, SampledField, SegmentedPath};
use crate::spacetime::{conformal_rescale, src_backward, CausalClass, LorentzProduct, SpacetimeMetric, SpacetimeVector};
use crate::trajectory::{argmin_golden, hausdorff, Trajectory};

/// Singular values below this fraction of the largest count toward multiplicity.
pub const MULTIPLICITY_THRESHOLD: f64 = 1e-6;
/// Parameter tolerance for conjugate-point refinement.
pub const BRACKET_TOLERANCE: f64 = 1e-8;
/// Eigenvalues within this distance of zero flag a degenerate Hessian.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Ratio `σ_min/σ_max` below which a grid minimum is refined.
const CANDIDATE_RATIO: f64 = 0.05;

/// Linearized geodesic flow with `J(0) = 0`, `J̇(0) = Id`, sampled with
/// `det J` and singular values on the integration grid.
#[derive(Clone, Debug)]
pub struct LinearizedFlow {
    flow: VariationalFlow,
    det: Vec<f64>,
    singular: Vec<Vec<f64>>,
}

impl LinearizedFlow {
    pub fn from_initial<O: GeodesicOde>(ode: &O, x0: &[f64], v0: &[f64], steps: usize) -> Result<Self> {
        let flow = VariationalFlow::integrate(ode, x0, v0, steps)?;
        let mut det = Vec::with_capacity(flow.len());
        let mut singular = Vec::with_capacity(flow.len());
        for i in 0..flow.len() {
            let j = flow.j_at(i);
            det.push(j.determinant());
            singular.push(sorted_singular_values(&j));
        }
        Ok(LinearizedFlow { flow, det, singular })
    }

    /// Flow along a geodesic sampled on a uniform grid of `[0, 1]`, started
    /// from its first sample.
    pub fn along<O: GeodesicOde>(ode: &O, geodesic: &Trajectory) -> Result<Self> {
        let g = geodesic.grid();
        if g[0] != 0.0 || g[g.len() - 1] != 1.0 {
            return Err(GeoError::OutOfRange("linearized flow needs a geodesic on [0, 1]".into()));
        }
        LinearizedFlow::from_initial(ode, geodesic.start(), geodesic.velocity(0), geodesic.len() - 1)
    }

    pub fn dim(&self) -> usize {
        self.flow.dim()
    }

    pub fn grid(&self) -> &[f64] {
        self.flow.grid()
    }

    pub fn det(&self) -> &[f64] {
        &self.det
    }

    /// Singular values at sample `i`, descending.
    pub fn singular_values(&self, i: usize) -> &[f64] {
        &self.singular[i]
    }

    pub fn j_at(&self, i: usize) -> DMatrix<f64> {
        self.flow.j_at(i)
    }

    pub fn j_eval<O: GeodesicOde>(&self, ode: &O, s: f64) -> Result<DMatrix<f64>> {
        self.flow.j_eval(ode, s)
    }

    /// The geodesic integrated alongside the variational matrices.
    pub fn geodesic(&self) -> Trajectory {
        self.flow.trajectory()
    }

    fn ratio(&self, i: usize) -> f64 {
        let sv = &self.singular[i];
        sv[sv.len() - 1] / sv[0]
    }
}

fn sorted_singular_values(j: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = j.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn ratio_of(j: &DMatrix<f64>) -> f64 {
    let sv = sorted_singular_values(j);
    if sv[0] == 0.0 {
        return 0.0;
    }
    sv[sv.len() - 1] / sv[0]
}

/// Largest relative deviation between dual-number and central-difference
/// Jacobians of the acceleration over the given states.
pub fn jacobian_agreement<O: GeodesicOde>(ode: &O, states: &[(Vec<f64>, Vec<f64>)], step: f64) -> Result<f64> {
    let d = ode.dim();
    let mut worst: f64 = 0.0;
    for (x, v) in states {
        let (_, ax, av) = accel_jacobian(ode, x, v)?;
        let scale = ax.abs().max().max(av.abs().max()).max(1.0);
        for k in 0..2 * d {
            let (mut xp, mut xm, mut vp, mut vm) = (x.clone(), x.clone(), v.clone(), v.clone());
            if k < d {
                xp[k] += step;
                xm[k] -= step;
            } else {
                vp[k - d] += step;
                vm[k - d] -= step;
            }
            let ap = ode.accel(&xp, &vp)?;
            let am = ode.accel(&xm, &vm)?;
            for i in 0..d {
                let fd = (ap[i] - am[i]) / (2.0 * step);
                let exact = if k < d { ax[(i, k)] } else { av[(i, k - d)] };
                worst = worst.max((fd - exact).abs() / scale);
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugatePoint {
    pub s: f64,
    pub multiplicity: usize,
    /// Width of the final refinement bracket.
    pub bracket_width: f64,
    /// `σ_min/σ_max` of `J(s)` at the reported parameter.
    pub sigma_ratio: f64,
}

/// Interior conjugate points and, separately, conjugacy at the endpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateScan {
    pub points: Vec<ConjugatePoint>,
    pub endpoint: Option<ConjugatePoint>,
    /// Smallest `σ_min/σ_max` among refined minima that were not zeros.
    pub rejected_min_ratio: Option<f64>,
}

impl ConjugateScan {
    pub fn index(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }
}

/// Locates zeros of `det J` on `(0, 1]`: sign changes refined by bisection,
/// and near-zero minima of `σ_min/σ_max` refined by golden section (these
/// catch even multiplicities, which leave the sign unchanged).
pub fn conjugate_points<O: GeodesicOde>(ode: &O, flow: &LinearizedFlow) -> Result<ConjugateScan> {
    let grid = flow.grid();
    let last = grid.len() - 1;
    let ratio_at = |s: f64| -> f64 { flow.j_eval(ode, s).map(|j| ratio_of(&j)).unwrap_or(f64::INFINITY) };
    let det_at = |s: f64| -> f64 { flow.j_eval(ode, s).map(|j| j.determinant()).unwrap_or(f64::NAN) };

    // (s*, bracket width, from sign change, cell)
    let mut found: Vec<(f64, f64, bool, usize)> = Vec::new();
    let mut rejected: Option<f64> = None;
    for i in 1..last {
        let (a, b) = (flow.det[i], flow.det[i + 1]);
        if a == 0.0 {
            continue;
        }
        if a.signum() != b.signum() {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            if b != 0.0 {
                while hi - lo > BRACKET_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if det_at(mid).signum() == a.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                found.push((0.5 * (lo + hi), hi - lo, true, i));
            } else {
                found.push((hi, 0.0, true, i));
            }
        }
    }
    for i in 1..=last {
        let r = flow.ratio(i);
        let left = flow.ratio(i - 1);
        let right = if i < last { flow.ratio(i + 1) } else { f64::INFINITY };
        let is_min = (i == 1 || r <= left) && r <= right;
        if !is_min || r >= CANDIDATE_RATIO {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], if i < last { grid[i + 1] } else { grid[i] });
        let (s, val) = argmin_golden(&ratio_at, &mut a, &mut b, 1e-10);
        let (s, val) = if i == last && r <= val { (grid[last], r) } else { (s, val) };
        if val < MULTIPLICITY_THRESHOLD {
            if !found.iter().any(|f| (f.0 - s).abs() < 1e-6) {
                found.push((s, b - a, false, i));
            }
        } else {
            rejected = Some(rejected.map_or(val, |x: f64| x.min(val)));
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut points = Vec::new();
    let mut endpoint = None;
    for (k, &(s, width, sign_change, cell)) in found.iter().enumerate() {
        if k > 0 && found[k - 1].3 == cell && (found[k - 1].0 - s).abs() > 1e-6 {
            return Err(GeoError::BracketAmbiguity { s_lo: grid[cell], s_hi: grid[(cell + 1).min(last)] });
        }
        let j = flow.j_eval(ode, s)?;
        let sv = sorted_singular_values(&j);
        let multiplicity = sv.iter().filter(|&&x| x < MULTIPLICITY_THRESHOLD * sv[0]).count();
        let odd = multiplicity % 2 == 1;
        let point = ConjugatePoint { s, multiplicity, bracket_width: width, sigma_ratio: sv[sv.len() - 1] / sv[0] };
        if s >= 1.0 - 1e-6 {
            endpoint = Some(point);
            continue;
        }
        if multiplicity == 0 || odd != sign_change {
            return Err(GeoError::BracketAmbiguity { s_lo: grid[cell], s_hi: grid[(cell + 1).min(last)] });
        }
        points.push(point);
    }
    if endpoint.is_none() && flow.ratio(last) < MULTIPLICITY_THRESHOLD {
        let sv = flow.singular_values(last);
        endpoint = Some(ConjugatePoint {
            s: 1.0,
            multiplicity: sv.iter().filter(|&&x| x < MULTIPLICITY_THRESHOLD * sv[0]).count(),
            bracket_width: 0.0,
            sigma_ratio: flow.ratio(last),
        });
    }
    Ok(ConjugateScan { points, endpoint, rejected_min_ratio: rejected })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMethod {
    ConjugateCount,
    HessianE,
    HessianJ,
    SpacetimeFlow,
}

/// Index of one geodesic by one method.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport {
    pub geodesic: String,
    pub method: IndexMethod,
    pub conjugate_points: Vec<ConjugatePoint>,
    pub mu: usize,
    pub endpoint_degenerate: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

/// `μ` as the sum of interior multiplicities; conjugacy at `s = 1` only sets the flag.
pub fn morse_index_cp<O: GeodesicOde>(ode: &O, flow: &LinearizedFlow, geodesic: &str, method: IndexMethod) -> Result<IndexReport> {
    let scan = conjugate_points(ode, flow)?;
    let mut diagnostics = BTreeMap::new();
    if let Some(w) = scan.points.iter().map(|p| p.bracket_width).reduce(f64::max) {
        diagnostics.insert("max_bracket_width".into(), w);
    }
    if let Some(r) = scan.rejected_min_ratio {
        diagnostics.insert("nearest_rejected_ratio".into(), r);
    }
    diagnostics.insert("final_sigma_ratio".into(), flow.ratio(flow.grid().len() - 1));
    Ok(IndexReport {
        geodesic: geodesic.to_string(),
        method,
        mu: scan.index(),
        conjugate_points: scan.points,
        endpoint_degenerate: scan.endpoint.is_some(),
        diagnostics,
    })
}

/// Symmetric matrix of a quadratic form in a basis, with its inertia.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteHessian {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub negative_count: usize,
    pub min_abs_eigenvalue: f64,
    /// `|λ|` of the negative eigenvalue closest to zero, if any.
    pub negative_margin: Option<f64>,
    pub degenerate: bool,
}

impl DiscreteHessian {
    pub fn from_matrix(mut matrix: DMatrix<f64>) -> Self {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        matrix = sym;
        let mut eigenvalues: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let negative_count = eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let min_abs_eigenvalue = eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        let negative_margin = eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| l.abs()).reduce(f64::min);
        DiscreteHessian {
            matrix,
            eigenvalues,
            negative_count,
            min_abs_eigenvalue,
            negative_margin,
            degenerate: min_abs_eigenvalue < DEGENERACY_THRESHOLD,
        }
    }

    pub fn report(&self, geodesic: &str, method: IndexMethod) -> IndexReport {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("min_abs_eigenvalue".into(), self.min_abs_eigenvalue);
        if let Some(m) = self.negative_margin {
            diagnostics.insert("negative_margin".into(), m);
        }
        diagnostics.insert("dimension".into(), self.eigenvalues.len() as f64);
        IndexReport {
            geodesic: geodesic.to_string(),
            method,
            conjugate_points: Vec::new(),
            mu: self.negative_count,
            endpoint_degenerate: self.degenerate,
            diagnostics,
        }
    }
}

/// Hat index pairs whose supports share an element, upper triangle.
fn overlapping_pairs(grid: &PathGridH10, dim: usize) -> Vec<(usize, usize)> {
    let m = grid.basis_len(dim);
    let mut out = Vec::new();
    for a in 0..m {
        for b in a..m {
            let (sa, sb) = (grid.support(dim, a), grid.support(dim, b));
            if sa.start < sb.end && sb.start < sa.end {
                out.push((a, b));
            }
        }
    }
    out
}

/// Second variation of `E` at `x` over the `dim·(N − 1)` hat fields of an
/// `N`-element grid, Simpson per element. Pairs with disjoint supports vanish
/// identically and are not integrated.
pub fn hessian_e(metric: &RandersMetric, x: &Trajectory, elements: usize) -> Result<DiscreteHessian> {
    let grid = PathGridH10::new(elements)?;
    let path = grid.sample_curve(x)?;
    hessian_e_on(metric, &grid, &path)
}

pub fn hessian_e_on(metric: &RandersMetric, grid: &PathGridH10, path: &SegmentedPath) -> Result<DiscreteHessian> {
    let dim = metric.dim();
    let jets = path
        .segments()
        .iter()
        .map(|seg| (0..seg.len()).map(|i| metric.jet(seg.position(i), seg.velocity(i))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let fields: Vec<SampledField> = (0..grid.basis_len(dim)).map(|k| grid.sample(&grid.basis_field(dim, k))).collect();
    let pairs = overlapping_pairs(grid, dim);
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (sa, sb) = (grid.support(dim, a), grid.support(dim, b));
            (sa.start.max(sb.start)..sa.end.min(sb.end))
                .map(|e| {
                    let s = grid.grid().points(e);
                    let vals: Vec<f64> = (0..s.len())
                        .map(|i| {
                            let (fa, fad) = fields[a].at(e, i);
                            let (fb, fbd) = fields[b].at(e, i);
                            0.5 * four_term(&jets[e][i], fa, fad, fb, fbd)
                        })
                        .collect();
                    simpson(&s, &vals)
                })
                .sum()
        })
        .collect();
    let m = grid.basis_len(dim);
    let mut h = DMatrix::zeros(m, m);
    for (&(a, b), v) in pairs.iter().zip(values) {
        h[(a, b)] = v;
        h[(b, a)] = v;
    }
    Ok(DiscreteHessian::from_matrix(h))
}

/// Second differences of `r ↦ J(Ψ(x + rW))` over hat pairs, with Richardson
/// extrapolation between two steps.
#[derive(Clone, Debug)]
pub struct HessianJ {
    pub step: f64,
    pub coarse: DMatrix<f64>,
    pub fine: DMatrix<f64>,
    pub hessian: DiscreteHessian,
    /// `‖H_r − H_{r/2}‖ / ‖H‖` (Frobenius).
    pub step_discrepancy: f64,
}

/// Default finite-difference step for [`hessian_j`].
pub const J_STEP: f64 = 1e-3;
/// Largest tolerated relative disagreement between the two steps.
pub const J_STEP_TOLERANCE: f64 = 1e-2;

/// Builds the Hessian of `J∘Ψ` at the base curve `x` by polarization:
/// `H_ab = [J(+a+b) − J(+a−b) − J(−a+b) + J(−a−b)] / (4r²)`, where each
/// term lifts the perturbed base curve to a lightlike curve and evaluates the
/// Uhlenbeck functional with `g`. Only elements in the joint support of the
/// pair are lifted, since the remaining elements contribute identical terms
/// that cancel exactly.
pub fn hessian_j(metric: &RandersMetric, g: &LorentzProduct, x: &Trajectory, elements: usize) -> Result<HessianJ> {
    hessian_j_with_step(metric, g, x, elements, J_STEP)
}

pub fn hessian_j_with_step(metric: &RandersMetric, g: &LorentzProduct, x: &Trajectory, elements: usize, step: f64) -> Result<HessianJ> {
    let grid = PathGridH10::new(elements)?;
    let path = grid.sample_curve(x)?;
    let dim = metric.dim();
    let m = grid.basis_len(dim);
    let fields: Vec<SampledField> = (0..m).map(|k| grid.sample(&grid.basis_field(dim, k))).collect();
    let pairs = overlapping_pairs(&grid, dim);
    let j_of = |a: usize, b: usize, ca: f64, cb: f64, r: f64| -> Result<f64> {
        let (sa, sb) = (grid.support(dim, a), grid.support(dim, b));
        let range = sa.start.min(sb.start)..sa.end.max(sb.end);
        let combined = fields[a].combine(ca, &fields[b], cb);
        let segs = path.perturbed_segments(&combined, r, range)?;
        let lifted = lightlike_lift_segments(metric, &segs, 0.0)?;
        let st: Vec<Trajectory> = lifted.into_iter().map(|l| l.into_spacetime()).collect();
        uhlenbeck_j_segments(g, &st)
    };
    let entry = |a: usize, b: usize, r: f64| -> Result<f64> {
        let pp = j_of(a, b, 1.0, 1.0, r)?;
        let pm = j_of(a, b, 1.0, -1.0, r)?;
        let mp = j_of(a, b, -1.0, 1.0, r)?;
        let mm = j_of(a, b, -1.0, -1.0, r)?;
        Ok(((pp - pm) - (mp - mm)) / (4.0 * r * r))
    };
    let values = pairs
        .par_iter()
        .map(|&(a, b)| Ok((entry(a, b, step)?, entry(a, b, 0.5 * step)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut coarse = DMatrix::zeros(m, m);
    let mut fine = DMatrix::zeros(m, m);
    for (&(a, b), (c, f)) in pairs.iter().zip(values) {
        coarse[(a, b)] = c;
        coarse[(b, a)] = c;
        fine[(a, b)] = f;
        fine[(b, a)] = f;
    }
    let extrapolated = (&fine * 4.0 - &coarse) / 3.0;
    let discrepancy = (&coarse - &fine).norm() / extrapolated.norm();
    if !(discrepancy < J_STEP_TOLERANCE) {
        return Err(GeoError::StepSize { step, refined: 0.5 * step, discrepancy });
    }
    Ok(HessianJ { step, coarse, fine, hessian: DiscreteHessian::from_matrix(extrapolated), step_discrepancy: discrepancy })
}

/// `‖H_J − 2H_E‖_F / ‖H_E‖_F`.
pub fn hessian_identity_defect(h_j: &DiscreteHessian, h_e: &DiscreteHessian) -> f64 {
    (&h_j.matrix - &h_e.matrix * 2.0).norm() / h_e.matrix.norm()
}

/// Initial data `(z₀, ż₀)` of the null geodesic lifting `x`: the base curve is
/// first brought to constant h-speed, then lifted with `t₀ = 0`.
pub fn lifted_initial_data(metric: &RandersMetric, x: &Trajectory) -> Result<(Vec<f64>, Vec<f64>, Trajectory)> {
    let xr = reparam_constant_h_speed(x, metric)?;
    let z = lightlike_lift(metric, &xr, 0.0)?;
    let st = z.spacetime();
    Ok((st.start().to_vec(), st.velocity(0).to_vec(), xr))
}

/// The four index computations for one base geodesic.
#[derive(Clone, Debug, Serialize)]
pub struct SrcIndexVerification {
    pub base_conjugate: IndexReport,
    pub base_hessian: IndexReport,
    pub spacetime_flow: IndexReport,
    pub spacetime_hessian: IndexReport,
    /// `‖H_J − 2H_E‖/‖H_E‖`.
    pub hessian_identity_defect: f64,
    pub hessian_j_step_discrepancy: f64,
    pub degenerate: bool,
    pub theorem_holds: bool,
}

impl SrcIndexVerification {
    pub fn mus(&self) -> [usize; 4] {
        [self.base_conjugate.mu, self.base_hessian.mu, self.spacetime_flow.mu, self.spacetime_hessian.mu]
    }
}

/// Options for [`verify_src_index`].
#[derive(Clone, Copy, Debug)]
pub struct IndexOptions {
    pub elements: usize,
    pub steps: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions { elements: 64, steps: crate::geodesic::DEFAULT_STEPS }
    }
}

/// Computes `μ(x)` by conjugate points and by `hessian_e`, and `μ(z)` by the
/// spacetime flow along the lifted null geodesic and by `hessian_j`.
///
/// The four integers must agree unless a degeneracy is detected, in which
/// case the conjugate-count flags of both sides must agree instead.
pub fn verify_src_index(metric: &RandersMetric, x: &Trajectory, name: &str, opts: IndexOptions) -> Result<SrcIndexVerification> {
    let spray = SprayEvaluator::new(metric);
    let base_flow = LinearizedFlow::from_initial(&spray, x.start(), x.velocity(0), opts.steps)?;
    let base_conjugate = morse_index_cp(&spray, &base_flow, name, IndexMethod::ConjugateCount)?;
    let h_e = hessian_e(metric, x, opts.elements)?;
    let base_hessian = h_e.report(name, IndexMethod::HessianE);

    let product = src_backward(metric)?;
    let g = SpacetimeMetric::from(product.clone());
    let (z0, zd0, _) = lifted_initial_data(metric, x)?;
    let lorentz = LorentzOde::new(&g);
    let st_flow = LinearizedFlow::from_initial(&lorentz, &z0, &zd0, opts.steps)?;
    let spacetime_flow = morse_index_cp(&lorentz, &st_flow, name, IndexMethod::SpacetimeFlow)?;
    let h_j = hessian_j(metric, &product, x, opts.elements)?;
    let mut spacetime_hessian = h_j.hessian.report(name, IndexMethod::HessianJ);
    spacetime_hessian.diagnostics.insert("step_discrepancy".into(), h_j.step_discrepancy);
    let defect = hessian_identity_defect(&h_j.hessian, &h_e);

    let degenerate = base_conjugate.endpoint_degenerate
        || spacetime_flow.endpoint_degenerate
        || base_hessian.endpoint_degenerate
        || spacetime_hessian.endpoint_degenerate;
    let theorem_holds = if degenerate {
        base_conjugate.endpoint_degenerate == spacetime_flow.endpoint_degenerate && base_conjugate.mu == spacetime_flow.mu
    } else {
        let mus = [base_conjugate.mu, base_hessian.mu, spacetime_flow.mu, spacetime_hessian.mu];
        mus.iter().all(|&m| m == mus[0])
    };
    Ok(SrcIndexVerification {
        base_conjugate,
        base_hessian,
        spacetime_flow,
        spacetime_hessian,
        hessian_identity_defect: defect,
        hessian_j_step_discrepancy: h_j.step_discrepancy,
        degenerate,
        theorem_holds,
    })
}

/// Outcome of comparing null geodesics of `g` and `λg` with matched data.
#[derive(Clone, Debug, Serialize)]
pub struct ConformalCheck {
    pub original: IndexReport,
    pub rescaled: IndexReport,
    /// Factor `∫₀¹ λ(z)/λ(z₀)` applied to the initial velocity.
    pub velocity_scale: f64,
    pub endpoint_mismatch: f64,
    pub hausdorff: f64,
    pub mu_unchanged: bool,
}

/// Integrates the null geodesic of `λg` with the initial direction of the
/// lift of `x`, scaled so that the `λg`-affine parameter also spans `[0, 1]`,
/// projects it to the base and compares images and indices.
pub fn conformal_index_check(metric: &RandersMetric, x: &Trajectory, lambda: &Expr, name: &str, steps: usize) -> Result<ConformalCheck> {
    let product = src_backward(metric)?;
    let g = SpacetimeMetric::from(product.clone());
    let gl = conformal_rescale(&product, lambda, &metric.domain.default_samples())?;
    let (z0, zd0, _) = lifted_initial_data(metric, x)?;
    let n = metric.dim();

    let zg = lorentz_geodesic_ivp(&g, &z0, &zd0, steps)?;
    let ratio: Vec<f64> = (0..zg.len()).map(|i| lambda.eval(&zg.position(i)[..n])).collect();
    let lam0 = lambda.eval(&z0[..n]);
    let k = simpson(zg.grid(), &ratio) / lam0;
    let zd_scaled: Vec<f64> = zd0.iter().map(|c| c * k).collect();

    let lorentz_g = LorentzOde::new(&g);
    let flow_g = LinearizedFlow::from_initial(&lorentz_g, &z0, &zd0, steps)?;
    let original = morse_index_cp(&lorentz_g, &flow_g, name, IndexMethod::SpacetimeFlow)?;

    let zl = lorentz_geodesic_ivp(&gl, &z0, &zd_scaled, steps)?;
    let base = project(&zl, metric)?;
    let mismatch = dist(base.end(), x.end());
    if mismatch > 1e-6 {
        return Err(GeoError::Reparametrization { mismatch });
    }
    let lorentz_l = LorentzOde::new(&gl);
    let flow_l = LinearizedFlow::from_initial(&lorentz_l, &z0, &zd_scaled, steps)?;
    let rescaled = morse_index_cp(&lorentz_l, &flow_l, name, IndexMethod::SpacetimeFlow)?;
    Ok(ConformalCheck {
        mu_unchanged: original.mu == rescaled.mu && original.endpoint_degenerate == rescaled.endpoint_degenerate,
        hausdorff: hausdorff(&base, x),
        original,
        rescaled,
        velocity_scale: k,
        endpoint_mismatch: mismatch,
    })
}

/// Index of the reversed-metric geodesic `q → p` and of the past-pointing
/// null geodesic of `g` obtained from its lift by `t ↦ −t`.
#[derive(Clone, Debug, Serialize)]
pub struct ReversedCheck {
    pub reversed_base: IndexReport,
    pub past_null: IndexReport,
}

pub fn reversed_index_check(metric: &RandersMetric, x: &Trajectory, name: &str, steps: usize) -> Result<ReversedCheck> {
    let rev = metric.reverse();
    let xr = x.reversed();
    let spray = SprayEvaluator::new(&rev);
    let base_flow = LinearizedFlow::from_initial(&spray, xr.start(), xr.velocity(0), steps)?;
    let reversed_base = morse_index_cp(&spray, &base_flow, name, IndexMethod::ConjugateCount)?;

    let (z0, zd0, _) = lifted_initial_data(&rev, &xr)?;
    let n = metric.dim();
    let (mut w0, mut wd0) = (z0.clone(), zd0.clone());
    w0[n] = -z0[n];
    wd0[n] = -zd0[n];
    let product = src_backward(metric)?;
    let class = product.causal_classify(&w0, &SpacetimeVector::from_slice(&wd0));
    if class != CausalClass::NullPast {
        return Err(GeoError::CausalCharacter { index: 0, class: class.to_string(), expected: CausalClass::NullPast.to_string() });
    }
    let g = SpacetimeMetric::from(product);
    let lorentz = LorentzOde::new(&g);
    let flow = LinearizedFlow::from_initial(&lorentz, &w0, &wd0, steps)?;
    let past_null = morse_index_cp(&lorentz, &flow, name, IndexMethod::SpacetimeFlow)?;
    Ok(ReversedCheck { reversed_base, past_null })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::{ChartDomain, OneFormField, RiemannianField};
    use crate::geodesic::finsler_geodesic_ivp;

    fn euclid() -> RandersMetric {
        RandersMetric::new(ChartDomain::cube(2, 5.0), RiemannianField::identity(2), OneFormField::zero(2)).unwrap()
    }

    fn sphere() -> RandersMetric {
        RandersMetric::new(
            ChartDomain::cube(2, 8.0),
            RiemannianField::conformal_identity(2, Expr::parse("4/(1 + x0^2 + x1^2)^2").unwrap()),
            OneFormField::zero(2),
        )
        .unwrap()
    }

    /// Equatorial geodesic from (1, 0) of total angle `l`.
    fn equator(l: f64) -> Trajectory {
        finsler_geodesic_ivp(&sphere(), &[1.0, 0.0], &[0.0, l], 1000).unwrap()
    }

    #[test]
    fn euclidean_flow_is_linear() {
        let m = euclid();
        let sp = SprayEvaluator::new(&m);
        let flow = LinearizedFlow::from_initial(&sp, &[0.0, 0.0], &[1.0, 0.5], 100).unwrap();
        for (i, s) in flow.grid().iter().enumerate() {
            assert!((flow.j_at(i) - DMatrix::identity(2, 2) * *s).abs().max() < 1e-13);
        }
        let scan = conjugate_points(&sp, &flow).unwrap();
        assert!(scan.points.is_empty() && scan.endpoint.is_none());
    }

    #[test]
    fn great_circle_conjugate_points() {
        let m = sphere();
        let sp = SprayEvaluator::new(&m);
        let pi = std::f64::consts::PI;
        for (l, mu) in [(0.5 * pi, 0), (1.5 * pi, 1), (2.5 * pi, 2)] {
            let flow = LinearizedFlow::from_initial(&sp, &[1.0, 0.0], &[0.0, l], 1000).unwrap();
            let rep = morse_index_cp(&sp, &flow, "sphere", IndexMethod::ConjugateCount).unwrap();
            assert_eq!(rep.mu, mu, "L = {l}");
            for (k, p) in rep.conjugate_points.iter().enumerate() {
                assert!((p.s - (k + 1) as f64 * pi / l).abs() < 1e-7, "{p:?}");
                assert_eq!(p.multiplicity, 1);
            }
            assert!(!rep.endpoint_degenerate);
        }
        let flow = LinearizedFlow::from_initial(&sp, &[1.0, 0.0], &[0.0, pi], 1000).unwrap();
        let rep = morse_index_cp(&sp, &flow, "sphere", IndexMethod::ConjugateCount).unwrap();
        assert_eq!(rep.mu, 0);
        assert!(rep.endpoint_degenerate);
    }

    #[test]
    fn dual_jacobians_match_differences() {
        let m = sphere();
        let sp = SprayEvaluator::new(&m);
        let states = vec![(vec![0.3, -0.2], vec![0.5, 1.0]), (vec![1.0, 0.4], vec![-0.2, 0.3])];
        assert!(jacobian_agreement(&sp, &states, 1e-5).unwrap() < 1e-5);
    }

    #[test]
    fn hessian_e_counts_match_conjugate_points() {
        let pi = std::f64::consts::PI;
        for (l, mu) in [(0.5 * pi, 0), (1.5 * pi, 1)] {
            let h = hessian_e(&sphere(), &equator(l), 32).unwrap();
            assert_eq!(h.negative_count, mu);
        }
        let line = Trajectory::from_fn(2, 0.0, 1.0, 100, |s| (vec![s, 0.0], vec![1.0, 0.0])).unwrap();
        let h = hessian_e(&euclid(), &line, 16).unwrap();
        assert_eq!(h.negative_count, 0);
        assert!(h.eigenvalues[0] > 0.0);
    }

    #[test]
    fn hessian_j_is_twice_hessian_e() {
        let m = sphere();
        let x = equator(1.5 * std::f64::consts::PI);
        let he = hessian_e(&m, &x, 16).unwrap();
        let hj = hessian_j(&m, &src_backward(&m).unwrap(), &x, 16).unwrap();
        assert!(hessian_identity_defect(&hj.hessian, &he) < 1e-3);
        assert_eq!(hj.hessian.negative_count, 1);
    }
}
