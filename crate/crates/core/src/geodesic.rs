//! Geodesic initial- and boundary-value problems for Randers metrics and for
//! Lorentzian metrics on `S × ℝ`, plus Euler–Lagrange certificates.
//!
//! Both kinds of geodesics are written as `ẍ = a(x, ẋ)` and integrated with
//! classical fixed-step RK4 on `[0, 1]`. The same integrator, run on the
//! state augmented by the variational matrices, produces the linearized flow
//! used for shooting and for conjugate points.

use nalgebra::DMatrix;

use crate::dual::{Dual, Real};
use crate::error::{GeoError, Result};
use crate::finsler::{RandersMetric, VELOCITY_FLOOR};
use crate::numeric::{differentiate, dist, linspace, norm, solve};
use crate::spacetime::SpacetimeMetric;
use crate::trajectory::{HermiteInterp, Trajectory};

/// Default RK4 step count on `[0, 1]`.
pub const DEFAULT_STEPS: usize = 1000;

/// A second-order system `ẍ = a(x, ẋ)` on a chart.
pub trait GeodesicOde: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    fn accel<T: Real>(&self, x: &[T], v: &[T]) -> Result<Vec<T>>;
}

/// Geodesic spray of a Randers metric: the acceleration solves
/// `∂_vvF²·a = ∂_qF² − (∂_qvF²)ᵀ·v`, the Euler–Lagrange equation of `E`.
#[derive(Clone, Copy)]
pub struct SprayEvaluator<'a> {
    pub metric: &'a RandersMetric,
}

impl<'a> SprayEvaluator<'a> {
    pub fn new(metric: &'a RandersMetric) -> Self {
        SprayEvaluator { metric }
    }

    /// Acceleration at an `f64` state with the zero-section guard.
    pub fn acceleration(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.metric.domain.check(x)?;
        let vn = norm(v);
        if !(vn > VELOCITY_FLOOR) {
            return Err(GeoError::Nondifferentiable { norm: vn });
        }
        self.accel(x, v)
    }
}

impl GeodesicOde for SprayEvaluator<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.metric.domain.contains(x)
    }

    fn accel<T: Real>(&self, x: &[T], v: &[T]) -> Result<Vec<T>> {
        let n = self.metric.dim();
        let j = self.metric.jet_generic(x, v);
        let mut rhs = j.dq.clone();
        for (col, r) in rhs.iter_mut().enumerate() {
            for row in 0..n {
                *r -= j.dqv[row * n + col] * v[row];
            }
        }
        solve(&j.dvv, &rhs)
    }
}

/// Levi-Civita geodesic equation of a spacetime metric, with Christoffel
/// symbols from dual-number derivatives of the matrix field.
#[derive(Clone, Copy)]
pub struct LorentzOde<'a> {
    pub metric: &'a SpacetimeMetric,
}

impl<'a> LorentzOde<'a> {
    pub fn new(metric: &'a SpacetimeMetric) -> Self {
        LorentzOde { metric }
    }

    /// `∂_l g_ij` for all `l`, as `m` row-major matrices.
    fn metric_derivatives<T: Real>(&self, z: &[T]) -> Vec<Vec<T>> {
        let m = self.metric.dim();
        let mut zd: Vec<Dual<T>> = z.iter().map(|&c| Dual::constant(c)).collect();
        (0..m)
            .map(|l| {
                zd[l].eps = T::one();
                let g = self.metric.matrix(&zd);
                zd[l].eps = T::zero();
                g.into_iter().map(|e| e.eps).collect()
            })
            .collect()
    }

    /// `Γᵏ_ij` at `z`, laid out as `[k][i][j]`.
    pub fn christoffel(&self, z: &[f64]) -> Result<Vec<f64>> {
        let m = self.metric.dim();
        let g = self.metric.matrix(z);
        let dg = self.metric_derivatives(z);
        let mut out = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                let lowered: Vec<f64> = (0..m)
                    .map(|k| 0.5 * (dg[i][k * m + j] + dg[j][k * m + i] - dg[k][i * m + j]))
                    .collect();
                let raised = solve(&g, &lowered)?;
                for k in 0..m {
                    out[(k * m + i) * m + j] = raised[k];
                }
            }
        }
        Ok(out)
    }
}

impl GeodesicOde for LorentzOde<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.metric.domain().contains(x)
    }

    fn accel<T: Real>(&self, z: &[T], zd: &[T]) -> Result<Vec<T>> {
        let m = self.metric.dim();
        let g = self.metric.matrix(z);
        let dg = self.metric_derivatives(z);
        // Γ_kij żⁱżʲ = Σ ∂_i g_kj żⁱżʲ − ½ Σ ∂_k g_ij żⁱżʲ
        let mut rhs = vec![T::zero(); m];
        for k in 0..m {
            let mut acc = T::zero();
            for i in 0..m {
                for j in 0..m {
                    acc += (dg[i][k * m + j] - T::cst(0.5) * dg[k][i * m + j]) * zd[i] * zd[j];
                }
            }
            rhs[k] = -acc;
        }
        solve(&g, &rhs)
    }
}

/// `a(x, v)` together with `∂a/∂x` and `∂a/∂v` from one dual sweep per coordinate.
pub fn accel_jacobian<O: GeodesicOde>(ode: &O, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let d = ode.dim();
    let mut xd: Vec<Dual<f64>> = x.iter().map(|&c| Dual::constant(c)).collect();
    let mut vd: Vec<Dual<f64>> = v.iter().map(|&c| Dual::constant(c)).collect();
    let mut a = vec![0.0; d];
    let mut ax = DMatrix::zeros(d, d);
    let mut av = DMatrix::zeros(d, d);
    for k in 0..2 * d {
        if k < d {
            xd[k].eps = 1.0;
        } else {
            vd[k - d].eps = 1.0;
        }
        let out = ode.accel(&xd, &vd)?;
        for (i, o) in out.iter().enumerate() {
            a[i] = o.re;
            if k < d {
                ax[(i, k)] = o.eps;
            } else {
                av[(i, k - d)] = o.eps;
            }
        }
        if k < d {
            xd[k].eps = 0.0;
        } else {
            vd[k - d].eps = 0.0;
        }
    }
    Ok((a, ax, av))
}

fn rk4_step<F>(f: &F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(&y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(&y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(&y4)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn first_order<O: GeodesicOde>(ode: &O) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    move |y: &[f64]| {
        let d = ode.dim();
        let a = ode.accel(&y[..d], &y[d..])?;
        let mut out = y[d..].to_vec();
        out.extend(a);
        Ok(out)
    }
}

/// RK4 on `[0, 1]` with `steps` equal steps; errors when the path leaves the chart.
pub fn integrate<O: GeodesicOde>(ode: &O, x0: &[f64], v0: &[f64], steps: usize) -> Result<Trajectory> {
    let d = ode.dim();
    if steps == 0 {
        return Err(GeoError::OutOfRange("steps must be positive".into()));
    }
    if !ode.contains(x0) {
        return Err(GeoError::Domain { point: x0.to_vec() });
    }
    let grid = linspace(0.0, 1.0, steps + 1);
    let h = 1.0 / steps as f64;
    let f = first_order(ode);
    let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let mut pos = Vec::with_capacity((steps + 1) * d);
    let mut vel = Vec::with_capacity((steps + 1) * d);
    pos.extend_from_slice(&y[..d]);
    vel.extend_from_slice(&y[d..]);
    for (i, s) in grid.iter().enumerate().skip(1) {
        y = rk4_step(&f, &y, h).map_err(|e| match e {
            GeoError::Domain { .. } => GeoError::ChartExit { s: grid[i - 1] },
            other => other,
        })?;
        if !ode.contains(&y[..d]) || y.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::ChartExit { s: *s });
        }
        pos.extend_from_slice(&y[..d]);
        vel.extend_from_slice(&y[d..]);
    }
    Trajectory::new(d, grid, pos, vel)
}

/// Randers geodesic `γ(0) = x0`, `γ̇(0) = v0` on `[0, 1]`, logging F and the h-speed.
pub fn finsler_geodesic_ivp(metric: &RandersMetric, x0: &[f64], v0: &[f64], steps: usize) -> Result<Trajectory> {
    let vn = norm(v0);
    if !(vn > VELOCITY_FLOOR) {
        return Err(GeoError::Nondifferentiable { norm: vn });
    }
    let mut tr = integrate(&SprayEvaluator::new(metric), x0, v0, steps)?;
    log_finsler(metric, &mut tr);
    Ok(tr)
}

pub(crate) fn log_finsler(metric: &RandersMetric, tr: &mut Trajectory) {
    let (mut f, mut hs) = (Vec::with_capacity(tr.len()), Vec::with_capacity(tr.len()));
    for i in 0..tr.len() {
        let (x, v) = (tr.position(i), tr.velocity(i));
        f.push(metric.f(x, v));
        hs.push(metric.h_inner(x, v, v).max(0.0).sqrt());
    }
    tr.logs.finsler = Some(f);
    tr.logs.h_speed = Some(hs);
}

/// Lorentzian geodesic on `[0, 1]`, logging `g(ż, ż)` and `g(ż, ∂_t)`.
pub fn lorentz_geodesic_ivp(metric: &SpacetimeMetric, z0: &[f64], zdot0: &[f64], steps: usize) -> Result<Trajectory> {
    if zdot0.iter().any(|c| !c.is_finite()) {
        return Err(GeoError::OutOfRange("initial velocity must be finite".into()));
    }
    let mut tr = integrate(&LorentzOde::new(metric), z0, zdot0, steps)?;
    log_lorentz(metric, &mut tr);
    Ok(tr)
}

pub(crate) fn log_lorentz(metric: &SpacetimeMetric, tr: &mut Trajectory) {
    let m = metric.dim();
    let mut e_t = vec![0.0; m];
    e_t[m - 1] = 1.0;
    let (mut gn, mut gk) = (Vec::with_capacity(tr.len()), Vec::with_capacity(tr.len()));
    for i in 0..tr.len() {
        let (z, zd) = (tr.position(i), tr.velocity(i));
        gn.push(metric.inner(z, zd, zd));
        gk.push(metric.inner(z, zd, &e_t));
    }
    tr.logs.g_norm = Some(gn);
    tr.logs.g_killing = Some(gk);
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS5.iter().map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Reparametrizes a regular curve on `[0, 1]` so that `h(ẋ, ẋ)` is constant.
///
/// The h-arclength is accumulated cell by cell with 5-point Gauss–Legendre on
/// the Hermite interpolant and inverted by safeguarded Newton. New velocities
/// are `ẋ(s)·Λ/√h(ẋ(s), ẋ(s))`, so the h-speed equals the total length `Λ`
/// at every sample up to rounding. Endpoints are copied exactly.
pub fn reparam_constant_h_speed(traj: &Trajectory, metric: &RandersMetric) -> Result<Trajectory> {
    let interp = HermiteInterp::new(traj);
    reparam_with(traj, metric, &interp)
}

fn reparam_with(traj: &Trajectory, metric: &RandersMetric, interp: &HermiteInterp<'_>) -> Result<Trajectory> {
    let n = traj.len();
    let d = traj.dim();
    let speed_at = |s: f64| -> f64 {
        let (x, v) = interp.eval(s);
        metric.h_inner(&x, &v, &v).max(0.0).sqrt()
    };
    for i in 0..n {
        let (x, v) = (traj.position(i), traj.velocity(i));
        metric.domain.check(x)?;
        let sp = metric.h_inner(x, v, v).max(0.0).sqrt();
        if !(sp > VELOCITY_FLOOR) {
            return Err(GeoError::Regularity { index: i, speed: sp });
        }
    }
    let grid = traj.grid();
    let mut sigma = vec![0.0; n];
    for i in 1..n {
        sigma[i] = sigma[i - 1] + gauss5(speed_at, grid[i - 1], grid[i]);
    }
    let total = sigma[n - 1];
    let new_grid = linspace(0.0, 1.0, n);
    let mut pos = Vec::with_capacity(n * d);
    let mut vel = Vec::with_capacity(n * d);
    let mut hs = Vec::with_capacity(n);
    for (j, &u) in new_grid.iter().enumerate() {
        let s = if j == 0 {
            grid[0]
        } else if j == n - 1 {
            grid[n - 1]
        } else {
            let target = u * total;
            let cell = match sigma.binary_search_by(|x| x.total_cmp(&target)) {
                Ok(i) => i.min(n - 2),
                Err(i) => i.saturating_sub(1).min(n - 2),
            };
            let (a, b) = (grid[cell], grid[cell + 1]);
            let (mut lo, mut hi) = (a, b);
            let mut s = a + (b - a) * (target - sigma[cell]) / (sigma[cell + 1] - sigma[cell]);
            for _ in 0..60 {
                let val = sigma[cell] + gauss5(speed_at, a, s) - target;
                if val.abs() <= 1e-15 * total.max(1.0) {
                    break;
                }
                if val > 0.0 {
                    hi = s;
                } else {
                    lo = s;
                }
                let newton = s - val / speed_at(s);
                s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            }
            s
        };
        let (x, v) = if j == 0 || j == n - 1 {
            let i = if j == 0 { 0 } else { n - 1 };
            (traj.position(i).to_vec(), traj.velocity(i).to_vec())
        } else {
            interp.eval(s)
        };
        let sp = metric.h_inner(&x, &v, &v).max(0.0).sqrt();
        let scale = total / sp;
        pos.extend_from_slice(&x);
        let w: Vec<f64> = v.iter().map(|c| c * scale).collect();
        hs.push(metric.h_inner(&x, &w, &w).max(0.0).sqrt());
        vel.extend(w);
    }
    let mut out = Trajectory::new(d, new_grid, pos, vel)?;
    log_finsler(metric, &mut out);
    out.logs.h_speed = Some(hs);
    Ok(out)
}

/// Two-point problem `γ(0) = p`, `γ(1) = q` solved by Newton on `γ̇(0)`.
#[derive(Clone, Debug)]
pub struct ShootingProblem {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v0_guess: Option<Vec<f64>>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub steps: usize,
    /// Number of intermediate targets on the chart segment `p → q`; 0 disables continuation.
    pub continuation: usize,
}

impl ShootingProblem {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        ShootingProblem {
            p,
            q,
            v0_guess: None,
            max_iterations: 50,
            tolerance: 1e-10,
            steps: DEFAULT_STEPS,
            continuation: 0,
        }
    }

    pub fn with_guess(mut self, v0: Vec<f64>) -> Self {
        self.v0_guess = Some(v0);
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_continuation(mut self, stages: usize) -> Self {
        self.continuation = stages;
        self
    }
}

/// Converged shooting solution.
#[derive(Clone, Debug)]
pub struct ShootingSolution {
    pub trajectory: Trajectory,
    pub v0: Vec<f64>,
    pub iterations: usize,
    pub terminal_error: f64,
}

/// Solves the two-point problem by damped Newton; the Jacobian `∂γ(1)/∂γ̇(0)`
/// is the position block of the linearized flow at `s = 1`.
pub fn shoot_bvp(metric: &RandersMetric, problem: &ShootingProblem) -> Result<ShootingSolution> {
    let (p, q) = (&problem.p, &problem.q);
    metric.domain.check(p)?;
    metric.domain.check(q)?;
    if dist(p, q) == 0.0 {
        return Err(GeoError::OutOfRange("shooting endpoints must differ".into()));
    }
    let mut v0: Vec<f64> = match &problem.v0_guess {
        Some(v) => v.clone(),
        None => q.iter().zip(p).map(|(a, b)| a - b).collect(),
    };
    let mut total_iters = 0;
    let stages = problem.continuation;
    for k in 1..=stages {
        let frac = k as f64 / (stages + 1) as f64;
        let target: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + frac * (b - a)).collect();
        let sol = newton(metric, p, &target, v0.clone(), problem)?;
        total_iters += sol.iterations;
        let grow = (k + 1) as f64 / k as f64;
        v0 = sol.v0.iter().map(|c| c * grow).collect();
    }
    let mut sol = newton(metric, p, q, v0, problem)?;
    sol.iterations += total_iters;
    Ok(sol)
}

fn newton(metric: &RandersMetric, p: &[f64], q: &[f64], mut v0: Vec<f64>, pb: &ShootingProblem) -> Result<ShootingSolution> {
    let spray = SprayEvaluator::new(metric);
    let n = metric.dim();
    let residual_of = |v: &[f64]| -> Option<(Vec<f64>, f64)> {
        let tr = integrate(&spray, p, v, pb.steps).ok()?;
        let r: Vec<f64> = tr.end().iter().zip(q).map(|(a, b)| a - b).collect();
        let rn = norm(&r);
        Some((r, rn))
    };
    let (mut r, mut rn) = residual_of(&v0).ok_or(GeoError::NoConvergence { iterations: 0, residual: f64::INFINITY })?;
    let mut best = rn;
    for it in 0..pb.max_iterations {
        if rn < pb.tolerance {
            let mut tr = integrate(&spray, p, &v0, pb.steps)?;
            log_finsler(metric, &mut tr);
            return Ok(ShootingSolution { trajectory: tr, v0, iterations: it, terminal_error: rn });
        }
        let flow = VariationalFlow::integrate(&spray, p, &v0, pb.steps)?;
        let jac = flow.j_at(flow.len() - 1);
        let jv: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| jac[(i, k)]).collect();
        let step = solve(&jv, &r)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-4 {
            let trial: Vec<f64> = v0.iter().zip(&step).map(|(a, s)| a - alpha * s).collect();
            if let Some((r2, rn2)) = residual_of(&trial) {
                if rn2 < rn || rn2 < pb.tolerance {
                    v0 = trial;
                    r = r2;
                    rn = rn2;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        best = best.min(rn);
        if !accepted {
            return Err(GeoError::NoConvergence { iterations: it + 1, residual: best });
        }
    }
    if rn < pb.tolerance {
        let mut tr = integrate(&spray, p, &v0, pb.steps)?;
        log_finsler(metric, &mut tr);
        return Ok(ShootingSolution { trajectory: tr, v0, iterations: pb.max_iterations, terminal_error: rn });
    }
    Err(GeoError::NoConvergence { iterations: pb.max_iterations, residual: best })
}

/// `max ‖d/ds ∂_vF² − ∂_qF²‖` over interior samples, with the derivative taken
/// by five-point differences of `∂_vF²` along the grid.
pub fn el_residual(metric: &RandersMetric, traj: &Trajectory) -> Result<f64> {
    let n = metric.dim();
    let mut dv: Vec<f64> = Vec::with_capacity(traj.len() * n);
    let mut dq: Vec<f64> = Vec::with_capacity(traj.len() * n);
    for i in 0..traj.len() {
        let (x, v) = (traj.position(i), traj.velocity(i));
        let sp = norm(v);
        if !(sp > VELOCITY_FLOOR) {
            return Err(GeoError::Regularity { index: i, speed: sp });
        }
        let j = metric.jet(x, v)?;
        dv.extend(j.dv.iter());
        dq.extend(j.dq.iter());
    }
    let ddv = differentiate(traj.grid(), &dv, n);
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let r: f64 = (0..n).map(|k| (ddv[i * n + k] - dq[i * n + k]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `max ‖z̈ − a(z, ż)‖` over interior samples for the Levi-Civita equation of
/// `metric`, with `z̈` from five-point differences of the sampled velocities.
pub fn lorentz_el_residual(metric: &SpacetimeMetric, traj: &Trajectory) -> Result<f64> {
    let ode = LorentzOde::new(metric);
    let m = metric.dim();
    let acc = differentiate(traj.grid(), traj.velocities(), m);
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() - 1 {
        let a = ode.accel(traj.position(i), traj.velocity(i))?;
        let r: f64 = (0..m).map(|k| (acc[i * m + k] - a[k]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Geodesic together with the variational matrices `J = ∂x/∂ẋ(0)` and `J̇`,
/// integrated by RK4 on the augmented state with `J(0) = 0`, `J̇(0) = Id`.
#[derive(Clone, Debug)]
pub struct VariationalFlow {
    dim: usize,
    grid: Vec<f64>,
    /// augmented states `[x, v, J, J̇]` (matrices row-major) per grid point
    states: Vec<Vec<f64>>,
}

impl VariationalFlow {
    pub fn integrate<O: GeodesicOde>(ode: &O, x0: &[f64], v0: &[f64], steps: usize) -> Result<Self> {
        let d = ode.dim();
        let grid = linspace(0.0, 1.0, steps + 1);
        let h = 1.0 / steps as f64;
        let mut y = vec![0.0; 2 * d + 2 * d * d];
        y[..d].copy_from_slice(x0);
        y[d..2 * d].copy_from_slice(v0);
        for i in 0..d {
            y[2 * d + d * d + i * d + i] = 1.0;
        }
        let f = augmented_rhs(ode);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(y.clone());
        for s in grid.iter().skip(1) {
            y = rk4_step(&f, &y, h).map_err(|e| match e {
                GeoError::Domain { .. } => GeoError::ChartExit { s: *s },
                other => other,
            })?;
            if !ode.contains(&y[..d]) {
                return Err(GeoError::ChartExit { s: *s });
            }
            states.push(y.clone());
        }
        Ok(VariationalFlow { dim: d, grid, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    fn j_of(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_row_slice(d, d, &y[2 * d..2 * d + d * d])
    }

    /// `J(s_i)`.
    pub fn j_at(&self, i: usize) -> DMatrix<f64> {
        self.j_of(&self.states[i])
    }

    /// `J(s)` at an arbitrary parameter by one RK4 step from the preceding grid point.
    pub fn j_eval<O: GeodesicOde>(&self, ode: &O, s: f64) -> Result<DMatrix<f64>> {
        let i = match self.grid.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => return Ok(self.j_at(i)),
            Err(i) => i.saturating_sub(1).min(self.grid.len() - 1),
        };
        let h = s - self.grid[i];
        let y = rk4_step(&augmented_rhs(ode), &self.states[i], h)?;
        Ok(self.j_of(&y))
    }

    /// The geodesic itself as a trajectory.
    pub fn trajectory(&self) -> Trajectory {
        let d = self.dim;
        let pos = self.states.iter().flat_map(|y| y[..d].to_vec()).collect();
        let vel = self.states.iter().flat_map(|y| y[d..2 * d].to_vec()).collect();
        Trajectory::new(d, self.grid.clone(), pos, vel).expect("grid is valid by construction")
    }
}

fn augmented_rhs<O: GeodesicOde>(ode: &O) -> impl Fn(&[f64]) -> Result<Vec<f64>> + '_ {
    move |y: &[f64]| {
        let d = ode.dim();
        let (x, v) = (&y[..d], &y[d..2 * d]);
        let jm = DMatrix::from_row_slice(d, d, &y[2 * d..2 * d + d * d]);
        let km = DMatrix::from_row_slice(d, d, &y[2 * d + d * d..]);
        let (a, ax, av) = accel_jacobian(ode, x, v)?;
        let kdot = &ax * &jm + &av * &km;
        let mut out = Vec::with_capacity(y.len());
        out.extend_from_slice(v);
        out.extend(a);
        for i in 0..d {
            for k in 0..d {
                out.push(km[(i, k)]);
            }
        }
        for i in 0..d {
            for k in 0..d {
                out.push(kdot[(i, k)]);
            }
        }
        Ok(out)
    }
}
