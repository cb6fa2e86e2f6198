//! Failure of twice Fréchet differentiability of the energy, measured.
//!
//! Along a regular curve `γ`, the family `η_ε = v∫(χ_ε − ε)`, `ξ_ε = w∫(χ_ε − ε)`
//! concentrates its derivative on a window `J_ε` of length `ε`. The residual
//! `∫ (∂_vF²(γ, γ̇ + η̇_ε) − ∂_vF²(γ, γ̇) − ∂_vvF²(γ, γ̇)η̇_ε)·ξ̇_ε` vanishes when
//! `F²` is quadratic in `v` and otherwise behaves like `c·ε`.

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::finsler::{RandersMetric, VELOCITY_FLOOR};
use crate::numeric::{fit_line, linspace, logspace, norm, simpson};
use crate::pathspace::{second_variation, PathGridH10, SampledField, SegmentGrid, SegmentedPath};
use crate::trajectory::{HermiteInterp, Trajectory};

/// Residuals below this are treated as exact zeros.
pub const NOISE_FLOOR: f64 = 1e-12;

/// `dE(γ)[φ_k]` for every hat field of `grid`.
pub fn gradient_e(metric: &RandersMetric, grid: &PathGridH10, path: &SegmentedPath) -> Result<Vec<f64>> {
    let n = metric.dim();
    let jets = path
        .segments()
        .iter()
        .map(|seg| (0..seg.len()).map(|i| metric.jet(seg.position(i), seg.velocity(i))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((0..grid.basis_len(n))
        .map(|k| {
            let field = grid.sample(&grid.basis_field(n, k));
            grid.support(n, k)
                .map(|e| {
                    let s = grid.grid().points(e);
                    let vals: Vec<f64> = (0..s.len())
                        .map(|i| {
                            let (w, wd) = field.at(e, i);
                            let j = &jets[e][i];
                            0.5 * (0..n).map(|c| j.dq[c] * w[c] + j.dv[c] * wd[c]).sum::<f64>()
                        })
                        .collect();
                    simpson(&s, &vals)
                })
                .sum()
        })
        .collect())
}

/// Second Gateaux differential `D²E(γ)[ξ, η]` from the four-term integrand.
pub fn gateaux_hessian_e(metric: &RandersMetric, path: &SegmentedPath, xi: &SampledField, eta: &SampledField) -> Result<f64> {
    second_variation(metric, path, xi, eta)
}

/// Fields `η_ε = v∫₀ˢ(χ_ε − ε)`, `ξ_ε = w∫₀ˢ(χ_ε − ε)` with `J_ε = [s₀, s₀ + ε]`
/// inside the window `J = [s₀, s₀ + ℓ]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonFamily {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub s0: f64,
    pub window: f64,
    pub epsilon: f64,
}

/// Uniform segments merged with the family breakpoints.
const FAMILY_SEGMENTS: usize = 64;
const FAMILY_PANELS: usize = 8;

pub fn build_family(v: Vec<f64>, w: Vec<f64>, s0: f64, window: f64, epsilon: f64) -> Result<EpsilonFamily> {
    if v.len() != w.len() || norm(&v) == 0.0 || norm(&w) == 0.0 {
        return Err(GeoError::OutOfRange("directions v, w must be nonzero and of equal length".into()));
    }
    if !(window > 0.0 && s0 >= 0.0 && s0 + window <= 1.0) {
        return Err(GeoError::OutOfRange(format!("window [{s0}, {}] must lie in [0, 1]", s0 + window)));
    }
    if !(epsilon > 0.0 && epsilon < window.min(1.0)) {
        return Err(GeoError::OutOfRange(format!("ε = {epsilon} must lie in (0, {window})")));
    }
    Ok(EpsilonFamily { v, w, s0, window, epsilon })
}

impl EpsilonFamily {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `J_ε`.
    pub fn set(&self) -> (f64, f64) {
        (self.s0, self.s0 + self.epsilon)
    }

    /// `∫₀ˢ (χ_ε − ε)`.
    pub fn profile(&self, s: f64) -> f64 {
        let (a, b) = self.set();
        let inside = (s.min(b) - a).max(0.0);
        inside - self.epsilon * s
    }

    fn profile_rate(&self, inside: bool) -> f64 {
        if inside {
            1.0 - self.epsilon
        } else {
            -self.epsilon
        }
    }

    pub fn eta(&self, s: f64) -> Vec<f64> {
        self.v.iter().map(|c| c * self.profile(s)).collect()
    }

    pub fn xi(&self, s: f64) -> Vec<f64> {
        self.w.iter().map(|c| c * self.profile(s)).collect()
    }

    /// `J_ε ⊂ J_ε'` for the other family's set.
    pub fn nested_in(&self, other: &EpsilonFamily) -> bool {
        let (a, b) = self.set();
        let (c, d) = other.set();
        c <= a && b <= d
    }

    /// `|v|(ε − ε²)^{1/2}`.
    pub fn eta_norm(&self) -> f64 {
        norm(&self.v) * (self.epsilon - self.epsilon * self.epsilon).sqrt()
    }

    /// Quadrature grid whose breaks include `0, s₀, s₀ + ε, 1`.
    pub fn grid(&self) -> SegmentGrid {
        let (a, b) = self.set();
        let mut breaks = linspace(0.0, 1.0, FAMILY_SEGMENTS + 1);
        breaks.extend([a, b]);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        if breaks.len() > 2 && (breaks[breaks.len() - 1] - breaks[breaks.len() - 2]).abs() < 1e-12 {
            breaks.remove(breaks.len() - 2);
        }
        SegmentGrid::new(breaks, FAMILY_PANELS).expect("sorted distinct breaks")
    }

    fn inside(&self, grid: &SegmentGrid, k: usize) -> bool {
        let (a, b) = self.set();
        let mid = 0.5 * (grid.breaks()[k] + grid.breaks()[k + 1]);
        mid > a && mid < b
    }

    /// `η_ε` sampled with exact one-sided derivatives.
    pub fn sample_eta(&self, grid: &SegmentGrid) -> SampledField {
        self.sample(grid, &self.v)
    }

    pub fn sample_xi(&self, grid: &SegmentGrid) -> SampledField {
        self.sample(grid, &self.w)
    }

    fn sample(&self, grid: &SegmentGrid, dir: &[f64]) -> SampledField {
        SampledField::from_fn(grid, dir.len(), |k, s| {
            let rate = self.profile_rate(self.inside(grid, k));
            (dir.iter().map(|c| c * self.profile(s)).collect(), dir.iter().map(|c| c * rate).collect())
        })
    }
}

/// Residual integrand at one point: `(∂_vF²(x, u + a) − ∂_vF²(x, u) − ∂_vvF²(x, u)a)·b`.
fn integrand(metric: &RandersMetric, x: &[f64], u: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    let n = x.len();
    let moved: Vec<f64> = u.iter().zip(a).map(|(p, q)| p + q).collect();
    let sp = norm(&moved);
    if !(sp > VELOCITY_FLOOR) {
        return Err(GeoError::Nondifferentiable { norm: sp });
    }
    let j1 = metric.jet(x, &moved)?;
    let j0 = metric.jet(x, u)?;
    let mut acc = 0.0;
    for r in 0..n {
        let lin: f64 = (0..n).map(|c| j0.dvv[(r, c)] * a[c]).sum();
        acc += (j1.dv[r] - j0.dv[r] - lin) * b[r];
    }
    Ok(acc)
}

/// Residual evaluated two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualValue {
    /// Quadrature over `[0, 1]` of the full integrand with breaks at `∂J_ε`.
    pub full: f64,
    /// Sum of the `J_ε` piece with `η̇ = (1−ε)v`, `ξ̇ = (1−ε)w` and the
    /// complement piece with `η̇ = −εv`, `ξ̇ = −εw`, on separate grids.
    pub split: f64,
}

pub fn residual(metric: &RandersMetric, gamma: &Trajectory, family: &EpsilonFamily) -> Result<ResidualValue> {
    let interp = HermiteInterp::new(gamma);
    residual_with(metric, &interp, family)
}

fn residual_with(metric: &RandersMetric, interp: &HermiteInterp<'_>, fam: &EpsilonFamily) -> Result<ResidualValue> {
    let grid = fam.grid();
    let eta = fam.sample_eta(&grid);
    let xi = fam.sample_xi(&grid);
    let mut full = 0.0;
    for k in 0..grid.segments() {
        let s = grid.points(k);
        let vals = s
            .iter()
            .enumerate()
            .map(|(i, &si)| {
                let (x, u) = interp.eval(si);
                integrand(metric, &x, &u, eta.at(k, i).1, xi.at(k, i).1)
            })
            .collect::<Result<Vec<_>>>()?;
        full += simpson(&s, &vals);
    }

    let eps = fam.epsilon;
    let (a, b) = fam.set();
    let piece = |lo: f64, hi: f64, panels: usize, rate: f64| -> Result<f64> {
        if hi - lo <= 0.0 {
            return Ok(0.0);
        }
        let s = linspace(lo, hi, panels + 1);
        let dv: Vec<f64> = fam.v.iter().map(|c| c * rate).collect();
        let dw: Vec<f64> = fam.w.iter().map(|c| c * rate).collect();
        let vals = s
            .iter()
            .map(|&si| {
                let (x, u) = interp.eval(si);
                integrand(metric, &x, &u, &dv, &dw)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(simpson(&s, &vals))
    };
    let panels = |len: f64| -> usize { (2 * ((len * 160.0).ceil() as usize)).max(16) };
    let split = piece(a, b, 32, 1.0 - eps)? + piece(0.0, a, panels(a), -eps)? + piece(b, 1.0, panels(1.0 - b), -eps)?;
    Ok(ResidualValue { full, split })
}

/// Witness directions for the residual at the midpoint of the window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `|(∂_vF²(u + v) − ∂_vF²(u) − ∂_vvF²(u)v)·w|` at the chosen pair.
    pub strength: f64,
}

fn direction_grid(n: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..36)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 18.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                digit
            })
            .collect();
        let l = norm(&d);
        if l > 0.0 {
            out.push(d.iter().map(|x| x / l).collect());
        }
    }
    out
}

/// Searches a coarse direction grid for `v = ±w` maximizing the residual
/// integrand at `s_mid`, with `|v| = ½·min|γ̇|` and `w` oriented so the
/// integrand is positive.
pub fn find_witness(metric: &RandersMetric, gamma: &Trajectory, s_mid: f64) -> Result<Witness> {
    let interp = HermiteInterp::new(gamma);
    let min_speed = (0..gamma.len()).map(|i| norm(gamma.velocity(i))).fold(f64::INFINITY, f64::min);
    let scale = 0.5 * min_speed;
    let (x, u) = interp.eval(s_mid);
    let mut best = Witness { v: vec![0.0; x.len()], w: vec![0.0; x.len()], strength: -1.0 };
    for dir in direction_grid(x.len()) {
        let v: Vec<f64> = dir.iter().map(|c| c * scale).collect();
        let val = integrand(metric, &x, &u, &v, &v)?;
        if val.abs() > best.strength {
            let w = if val >= 0.0 { v.clone() } else { v.iter().map(|c| -c).collect() };
            best = Witness { v, w, strength: val.abs() };
        }
    }
    Ok(best)
}

/// `(ε_k, Res(ε_k))` with `ε` strictly decreasing and a log–log fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualCurve {
    pub epsilon: Vec<f64>,
    pub residual: Vec<f64>,
    /// Split-route values, kept for the consistency check.
    pub residual_split: Vec<f64>,
}

impl ResidualCurve {
    pub fn route_disagreement(&self) -> f64 {
        self.residual.iter().zip(&self.residual_split).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Outcome of the scaling fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ScalingVerdict {
    /// Every residual is below the noise floor: `∂_vF²` is linear along the curve.
    Quadratic { max_abs_residual: f64 },
    /// `Res ≈ c·ε^slope` with signed `c` (`intercept`).
    Fitted { slope: f64, intercept: f64, log_intercept: f64 },
}

pub fn scaling_exponent(curve: &ResidualCurve) -> Result<ScalingVerdict> {
    if curve.epsilon.len() < 6 {
        return Err(GeoError::OutOfRange("need at least 6 residual samples".into()));
    }
    if curve.epsilon.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(GeoError::OutOfRange("ε values must be strictly decreasing".into()));
    }
    let max_abs = curve.residual.iter().map(|r| r.abs()).fold(0.0, f64::max);
    if max_abs < NOISE_FLOOR {
        return Ok(ScalingVerdict::Quadratic { max_abs_residual: max_abs });
    }
    let lx: Vec<f64> = curve.epsilon.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = curve.residual.iter().map(|r| r.abs().ln()).collect();
    let (slope, b) = fit_line(&lx, &ly);
    let positive = curve.residual.iter().all(|&r| r > 0.0);
    let negative = curve.residual.iter().all(|&r| r < 0.0);
    let sign = if positive {
        1.0
    } else if negative {
        -1.0
    } else {
        0.0
    };
    Ok(ScalingVerdict::Fitted { slope, intercept: sign * b.exp(), log_intercept: b })
}

/// Settings of a probe run.
#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub windows: Vec<f64>,
    pub window_length: f64,
    pub epsilons: Vec<f64>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        let mut epsilons = logspace(1e-4, 1e-1, 12);
        epsilons.reverse();
        ProbeOptions { windows: vec![0.1, 0.4, 0.7], window_length: 0.2, epsilons }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowProbe {
    pub s0: f64,
    pub witness: Witness,
    pub curve: ResidualCurve,
    pub verdict: ScalingVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub riemannian: bool,
    pub windows: Vec<WindowProbe>,
    /// Largest deviation of a window slope from the mean slope.
    pub slope_spread: Option<f64>,
    pub max_route_disagreement: f64,
    pub warning: Option<String>,
    pub passed: bool,
}

/// Runs the residual scan at every window position and applies the
/// dichotomy: Riemannian metrics must give the quadratic verdict, genuine
/// Randers metrics a positive-intercept slope in `[0.9, 1.1]` that is stable
/// to ±0.05 across windows.
pub fn probe(metric: &RandersMetric, gamma: &Trajectory, opts: &ProbeOptions) -> Result<ProbeReport> {
    let interp = HermiteInterp::new(gamma);
    let riemannian = metric.is_riemannian();
    let mut windows = Vec::new();
    for &s0 in &opts.windows {
        let witness = find_witness(metric, gamma, s0 + 0.5 * opts.window_length)?;
        let mut res = Vec::new();
        let mut split = Vec::new();
        for &eps in &opts.epsilons {
            let fam = build_family(witness.v.clone(), witness.w.clone(), s0, opts.window_length, eps)?;
            let r = residual_with(metric, &interp, &fam)?;
            res.push(r.full);
            split.push(r.split);
        }
        let curve = ResidualCurve { epsilon: opts.epsilons.clone(), residual: res, residual_split: split };
        let verdict = scaling_exponent(&curve)?;
        windows.push(WindowProbe { s0, witness, curve, verdict });
    }
    let slopes: Vec<f64> = windows
        .iter()
        .filter_map(|w| match w.verdict {
            ScalingVerdict::Fitted { slope, .. } => Some(slope),
            _ => None,
        })
        .collect();
    let slope_spread = if slopes.is_empty() {
        None
    } else {
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        Some(slopes.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max))
    };
    let max_route_disagreement = windows.iter().map(|w| w.curve.route_disagreement()).fold(0.0, f64::max);
    let mut warning = None;
    let passed = if riemannian {
        windows.iter().all(|w| matches!(w.verdict, ScalingVerdict::Quadratic { .. }))
    } else {
        if windows.iter().any(|w| matches!(w.verdict, ScalingVerdict::Quadratic { .. })) {
            warning = Some("residual below the noise floor for a non-quadratic metric; rotate the witness direction".into());
        }
        let each = windows.iter().all(|w| match w.verdict {
            ScalingVerdict::Fitted { slope, intercept, .. } => (0.9..=1.1).contains(&slope) && intercept > 0.0,
            _ => false,
        });
        each && slope_spread.is_some_and(|s| s <= 0.05)
    };
    Ok(ProbeReport { riemannian, windows, slope_spread, max_route_disagreement, warning, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::finsler::{ChartDomain, OneFormField, RiemannianField};
    use approx::assert_relative_eq;

    fn wind(a: f64) -> RandersMetric {
        RandersMetric::new(
            ChartDomain::cube(2, 5.0),
            RiemannianField::identity(2),
            OneFormField::new(vec![Expr::constant(a), Expr::constant(0.0)]),
        )
        .unwrap()
    }

    fn line() -> Trajectory {
        Trajectory::from_fn(2, 0.0, 1.0, 200, |s| (vec![s, 0.0], vec![1.0, 0.0])).unwrap()
    }

    #[test]
    fn family_invariants() {
        let f = build_family(vec![1.0, 0.0], vec![0.0, 1.0], 0.3, 0.5, 0.25).unwrap();
        assert_relative_eq!(f.eta_norm(), 0.433_012_701_892_219_3, epsilon = 1e-15);
        let g = f.grid();
        let eta = f.sample_eta(&g);
        assert_relative_eq!(eta.h10_inner(&eta).sqrt(), f.eta_norm(), epsilon = 1e-10);
        assert!(f.eta(1.0).iter().all(|c| c.abs() < 1e-15));
        let small = build_family(vec![1.0, 0.0], vec![0.0, 1.0], 0.3, 0.5, 0.1).unwrap();
        let big = build_family(vec![1.0, 0.0], vec![0.0, 1.0], 0.3, 0.5, 0.2).unwrap();
        assert!(small.nested_in(&big) && !big.nested_in(&small));
        assert!(build_family(vec![1.0, 0.0], vec![0.0, 1.0], 0.3, 0.5, 0.6).is_err());
        assert!(build_family(vec![0.0, 0.0], vec![0.0, 1.0], 0.3, 0.5, 0.1).is_err());
    }

    #[test]
    fn riemannian_residual_vanishes() {
        let f = build_family(vec![0.0, 0.5], vec![0.0, 0.5], 0.4, 0.2, 0.01).unwrap();
        let r = residual(&wind(0.0), &line(), &f).unwrap();
        assert!(r.full.abs() < 1e-12 && r.split.abs() < 1e-12);
    }

    #[test]
    fn wind_residual_is_linear_in_epsilon() {
        let m = wind(0.5);
        let rep = probe(&m, &line(), &ProbeOptions::default()).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_route_disagreement < 1e-9);
    }

    #[test]
    fn euclidean_probe_is_quadratic() {
        let rep = probe(&wind(0.0), &line(), &ProbeOptions::default()).unwrap();
        assert!(rep.passed);
        assert!(rep.windows.iter().all(|w| matches!(w.verdict, ScalingVerdict::Quadratic { .. })));
    }

    #[test]
    fn gradient_vanishes_on_lines_only() {
        let grid = PathGridH10::new(8).unwrap();
        let m = wind(0.0);
        let straight = SegmentedPath::from_fn(grid.grid(), 2, |s| (vec![s, 0.0], vec![1.0, 0.0])).unwrap();
        assert!(gradient_e(&m, &grid, &straight).unwrap().iter().all(|g| g.abs() < 1e-10));
        let arc = SegmentedPath::from_fn(grid.grid(), 2, |s| (vec![s, s * (1.0 - s)], vec![1.0, 1.0 - 2.0 * s])).unwrap();
        let g = gradient_e(&m, &grid, &arc).unwrap();
        assert!(g.iter().map(|x| x.abs()).fold(0.0, f64::max) > 1e-3);
    }
}
