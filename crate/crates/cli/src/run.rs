//! Dispatch of one experiment to the core library.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use src_geolab_core::geodesic::LorentzOde;
use src_geolab_core::index::lifted_initial_data;
use src_geolab_core::trajectory::absolute_drift;
use src_geolab_core::{
    conformal_index_check, el_residual, energy, hessian_e, lightlike_lift, lorentz_el_residual, morse_index_cp, probe,
    reparam_constant_h_speed, reversed_index_check, src_backward, uhlenbeck_j, verify_src_index, Expr, GeoError, IndexMethod,
    IndexOptions, LinearizedFlow, ProbeOptions, RandersMetric, ScalingVerdict, SpacetimeMetric, SprayEvaluator, Trajectory,
};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::report::{csv_columns, CaseReport, Status};
use crate::zoo::ZooEntry;

pub const DEFAULT_BASIS_N: usize = 64;
pub const DEFAULT_SAMPLES: usize = 100;

/// Thresholds behind the verdicts.
pub const EL_TOLERANCE: f64 = 1e-6;
pub const LIFT_EL_TOLERANCE: f64 = 1e-5;
pub const DRIFT_TOLERANCE: f64 = 1e-9;
pub const OFF_SHELL_TOLERANCE: f64 = 1e-8;
pub const HESSIAN_TOLERANCE: f64 = 1e-3;
pub const HAUSDORFF_TOLERANCE: f64 = 1e-5;
pub const ROUTE_TOLERANCE: f64 = 1e-9;

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub steps: Option<usize>,
    pub basis_n: Option<usize>,
    pub seed: Option<u64>,
}

/// A file produced by an experiment, relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

struct Body {
    verdicts: BTreeMap<String, bool>,
    result: Value,
    artifacts: Vec<Artifact>,
}

/// Conformal factor used by `conformal-check`.
pub fn conformal_factor(dim: usize) -> Expr {
    (0..dim).fold(Expr::constant(1.0), |acc, k| acc + Expr::constant(0.25) * Expr::var(k).powi(2))
}

pub fn run_case(index: usize, spec: &ExperimentSpec, entry: &ZooEntry, opts: &RunOptions) -> (CaseReport, Vec<Artifact>) {
    let start = Instant::now();
    let stem = spec.output.clone().unwrap_or_else(|| format!("{index:02}-{}-{}", spec.kind.as_str(), spec.case));
    let outcome = entry
        .build()
        .map_err(|e| GeoError::InvalidData(format!("{}: {}", e.field, e.message)))
        .and_then(|metric| dispatch(spec, entry, &metric, opts, &stem));
    let seconds = Some(start.elapsed().as_secs_f64());
    match outcome {
        Ok(body) => {
            let status = if body.verdicts.values().all(|&v| v) { Status::Pass } else { Status::Fail };
            let names = body.artifacts.iter().map(|a| a.name.clone()).collect();
            let report = CaseReport {
                index,
                spec: spec.clone(),
                status,
                verdicts: body.verdicts,
                result: body.result,
                error: None,
                artifacts: names,
                seconds,
            };
            (report, body.artifacts)
        }
        Err(e) => {
            let report = CaseReport {
                index,
                spec: spec.clone(),
                status: Status::NumericalFailure,
                verdicts: BTreeMap::new(),
                result: Value::Null,
                error: Some(e.to_string()),
                artifacts: Vec::new(),
                seconds,
            };
            (report, Vec::new())
        }
    }
}

fn dispatch(spec: &ExperimentSpec, entry: &ZooEntry, metric: &RandersMetric, opts: &RunOptions, stem: &str) -> Result<Body, GeoError> {
    let steps = opts.steps.or(spec.steps).unwrap_or(src_geolab_core::geodesic::DEFAULT_STEPS);
    let basis_n = opts.basis_n.or(spec.basis_n).unwrap_or(DEFAULT_BASIS_N);
    let sol = entry.shoot(metric, steps)?;
    let x = &sol.trajectory;
    let mut verdicts = BTreeMap::new();
    let mut artifacts = Vec::new();
    let result = match spec.kind {
        ExperimentKind::Geodesic => {
            let el = el_residual(metric, x)?;
            let length = metric.length(x)?;
            verdicts.insert("euler_lagrange".into(), el < EL_TOLERANCE);
            artifacts.push(trajectory_artifact(stem, x));
            json!({
                "v0": sol.v0,
                "iterations": sol.iterations,
                "terminal_error": sol.terminal_error,
                "el_residual": el,
                "length": length,
                "energy": energy(metric, x)?,
            })
        }
        ExperimentKind::Lift => {
            let seed = opts.seed.or(spec.seed).unwrap_or(0);
            let samples = spec.samples.unwrap_or(DEFAULT_SAMPLES);
            let r = reparam_constant_h_speed(x, metric)?;
            let lifted = lightlike_lift(metric, &r, 0.0)?;
            let g = SpacetimeMetric::from(src_backward(metric)?);
            let el = lorentz_el_residual(&g, lifted.spacetime())?;
            let logs = &lifted.spacetime().logs;
            let norm_drift = logs.g_norm.as_deref().map(absolute_drift).unwrap_or(f64::NAN);
            let killing_drift = logs.g_killing.as_deref().map(absolute_drift).unwrap_or(f64::NAN);
            let off_shell = off_shell_identity(metric, entry, samples, seed, steps)?;
            verdicts.insert("lift_euler_lagrange".into(), el < LIFT_EL_TOLERANCE);
            verdicts.insert("null_drift".into(), norm_drift < DRIFT_TOLERANCE);
            verdicts.insert("killing_drift".into(), killing_drift < DRIFT_TOLERANCE);
            verdicts.insert("off_shell_identity".into(), off_shell < OFF_SHELL_TOLERANCE);
            artifacts.push(trajectory_artifact(&format!("{stem}-lift"), lifted.spacetime()));
            json!({
                "lorentz_el_residual": el,
                "g_norm_drift": norm_drift,
                "g_killing_drift": killing_drift,
                "off_shell_max_relative_error": off_shell,
                "samples": samples,
                "seed": seed,
            })
        }
        ExperimentKind::Index => {
            let spray = SprayEvaluator::new(metric);
            let flow = LinearizedFlow::from_initial(&spray, x.start(), x.velocity(0), steps)?;
            let cp = morse_index_cp(&spray, &flow, &entry.name, IndexMethod::ConjugateCount)?;
            let he = hessian_e(metric, x, basis_n)?.report(&entry.name, IndexMethod::HessianE);
            let agree = cp.endpoint_degenerate || he.mu == cp.mu;
            verdicts.insert("methods_agree".into(), agree);
            if let Some(mu) = entry.expected_mu {
                verdicts.insert("expected_mu".into(), cp.mu == mu);
            }
            artifacts.push(detj_artifact(&format!("{stem}-detj"), &flow));
            json!({ "conjugate_count": cp, "hessian_e": he })
        }
        ExperimentKind::VerifySrc => {
            let v = verify_src_index(metric, x, &entry.name, IndexOptions { elements: basis_n, steps })?;
            let rev = reversed_index_check(metric, x, &entry.name, steps)?;
            verdicts.insert("index_equality".into(), v.theorem_holds);
            if !v.degenerate {
                verdicts.insert("hessian_identity".into(), v.hessian_identity_defect < HESSIAN_TOLERANCE);
            }
            if let Some(mu) = entry.expected_mu {
                verdicts.insert("expected_mu".into(), v.base_conjugate.mu == mu);
            }
            verdicts.insert("reversed_past_null".into(), rev.reversed_base.mu == rev.past_null.mu);
            let spray = SprayEvaluator::new(metric);
            artifacts.push(detj_artifact(&format!("{stem}-detj"), &LinearizedFlow::from_initial(&spray, x.start(), x.velocity(0), steps)?));
            let g = SpacetimeMetric::from(src_backward(metric)?);
            let (z0, zd0, _) = lifted_initial_data(metric, x)?;
            let st = LinearizedFlow::from_initial(&LorentzOde::new(&g), &z0, &zd0, steps)?;
            artifacts.push(detj_artifact(&format!("{stem}-detj-spacetime"), &st));
            json!({ "mu": v.mus(), "verification": v, "reversed": rev })
        }
        ExperimentKind::ConformalCheck => {
            let c = conformal_index_check(metric, x, &conformal_factor(metric.dim()), &entry.name, steps)?;
            verdicts.insert("images_coincide".into(), c.hausdorff < HAUSDORFF_TOLERANCE);
            verdicts.insert("mu_unchanged".into(), c.mu_unchanged);
            json!({ "lambda": "1 + |x|^2/4", "check": c })
        }
        ExperimentKind::Probe => {
            let mut popts = ProbeOptions::default();
            if let Some(eps) = &spec.epsilons {
                let mut e = eps.clone();
                e.sort_by(|a, b| b.total_cmp(a));
                popts.epsilons = e;
            }
            let rep = probe(metric, x, &popts)?;
            verdicts.insert("dichotomy".into(), rep.passed);
            verdicts.insert("routes_agree".into(), rep.max_route_disagreement < ROUTE_TOLERANCE);
            for (k, w) in rep.windows.iter().enumerate() {
                let abs: Vec<f64> = w.curve.residual.iter().map(|r| r.abs()).collect();
                artifacts.push(Artifact {
                    name: format!("{stem}-residual-{k}.csv"),
                    contents: csv_columns(&[("epsilon", &w.curve.epsilon), ("residual", &w.curve.residual), ("abs_residual", &abs)]),
                });
            }
            let windows: Vec<Value> = rep
                .windows
                .iter()
                .map(|w| {
                    let (slope, intercept, verdict) = match w.verdict {
                        ScalingVerdict::Quadratic { .. } => (None, None, "quadratic"),
                        ScalingVerdict::Fitted { slope, intercept, .. } => (Some(slope), Some(intercept), "fitted"),
                    };
                    json!({ "s0": w.s0, "v": w.witness.v, "w": w.witness.w, "slope": slope, "intercept": intercept,
                            "verdict": verdict, "fit": w.verdict })
                })
                .collect();
            json!({
                "metric": entry.metric.kind(),
                "riemannian": rep.riemannian,
                "windows": windows,
                "slope_spread": rep.slope_spread,
                "max_route_disagreement": rep.max_route_disagreement,
                "warning": rep.warning,
            })
        }
    };
    Ok(Body { verdicts, result, artifacts })
}

/// Largest `|J(Ψ(γ)) − 2E(γ)| / 2E(γ)` over random regular curves from `p` to `q`.
pub fn off_shell_identity(metric: &RandersMetric, entry: &ZooEntry, samples: usize, seed: u64, steps: usize) -> Result<f64, GeoError> {
    let g = src_backward(metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let curve = random_curve(&mut rng, &entry.geodesic.p, &entry.geodesic.q, steps)?;
        let e2 = 2.0 * energy(metric, &curve)?;
        let lifted = lightlike_lift(metric, &curve, 0.0)?;
        let j = uhlenbeck_j(&g, lifted.spacetime())?;
        worst = worst.max((j - e2).abs() / e2);
    }
    Ok(worst)
}

/// `p + s(q − p) + Σ_k c_k sin(kπs)` with three random modes of decaying size.
pub fn random_curve(rng: &mut impl Rng, p: &[f64], q: &[f64], steps: usize) -> Result<Trajectory, GeoError> {
    let n = p.len();
    let modes: Vec<Vec<f64>> = (1..=3).map(|k| (0..n).map(|_| rng.gen_range(-0.15..0.15) / k as f64).collect()).collect();
    let pi = std::f64::consts::PI;
    Trajectory::from_fn(n, 0.0, 1.0, steps, |s| {
        let mut x: Vec<f64> = (0..n).map(|i| p[i] + s * (q[i] - p[i])).collect();
        let mut v: Vec<f64> = (0..n).map(|i| q[i] - p[i]).collect();
        for (k, c) in modes.iter().enumerate() {
            let w = (k + 1) as f64 * pi;
            for i in 0..n {
                x[i] += c[i] * (w * s).sin();
                v[i] += c[i] * w * (w * s).cos();
            }
        }
        (x, v)
    })
}

fn trajectory_artifact(stem: &str, t: &Trajectory) -> Artifact {
    let mut buf = Vec::new();
    t.write_csv(&mut buf).expect("writing to memory");
    Artifact { name: format!("{stem}-trajectory.csv"), contents: String::from_utf8(buf).expect("ascii csv") }
}

fn detj_artifact(stem: &str, flow: &LinearizedFlow) -> Artifact {
    let (smin, smax): (Vec<f64>, Vec<f64>) = (0..flow.grid().len())
        .map(|i| {
            let sv = flow.singular_values(i);
            let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = sv.iter().cloned().fold(0.0, f64::max);
            (lo, hi)
        })
        .unzip();
    Artifact {
        name: format!("{stem}.csv"),
        contents: csv_columns(&[("s", flow.grid()), ("det", flow.det()), ("sigma_min", &smin), ("sigma_max", &smax)]),
    }
}
