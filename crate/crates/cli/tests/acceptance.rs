//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use src_geolab_cli::run::{conformal_factor, off_shell_identity, random_curve};
use src_geolab_cli::{builtin, ZooEntry};
use src_geolab_core::index::{hessian_identity_defect, hessian_j};
use src_geolab_core::trajectory::absolute_drift;
use src_geolab_core::{
    conformal_index_check, finsler_geodesic_ivp, gateaux_hessian_e, gradient_e, hessian_e, lightlike_lift, lorentz_el_residual,
    probe, reparam_constant_h_speed, src_backward, verify_src_index, IndexOptions, PathGridH10, ProbeOptions, RandersMetric,
    SpacetimeMetric, Trajectory,
};

struct Case {
    entry: ZooEntry,
    metric: RandersMetric,
    geodesic: Trajectory,
}

fn zoo() -> Vec<Case> {
    builtin()
        .into_iter()
        .map(|entry| {
            let metric = entry.build().expect("zoo entry builds");
            let geodesic = entry.shoot(&metric, 1000).expect("zoo geodesic converges").trajectory;
            Case { entry, metric, geodesic }
        })
        .collect()
}

fn find<'a>(zoo: &'a [Case], name: &str) -> &'a Case {
    zoo.iter().find(|c| c.entry.name == name).expect("zoo case")
}

type Outcome = Result<String, String>;

fn criterion_index(zoo: &[Case]) -> Outcome {
    let start = Instant::now();
    let expected = [
        ("euclid", Some(0)),
        ("wind05", Some(0)),
        ("sphere_l05", Some(0)),
        ("sphere_l15", Some(1)),
        ("sphere_l25", Some(2)),
        ("sphere_wind", None),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, mu) in expected {
        let c = find(zoo, name);
        let v = verify_src_index(&c.metric, &c.geodesic, name, IndexOptions { elements: 64, steps: 1000 }).map_err(|e| format!("{name}: {e}"))?;
        let mus = v.mus();
        let equal = mus.iter().all(|&m| m == mus[0]) && !v.degenerate;
        let matches = mu.is_none_or(|m| mus[0] == m);
        ok &= equal && matches;
        lines.push(format!("{name}={mus:?}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    let msg = format!("{} in {secs:.1}s", lines.join(" "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_lift(zoo: &[Case]) -> Outcome {
    let (mut el_max, mut norm_max, mut kill_max) = (0.0f64, 0.0f64, 0.0f64);
    for c in zoo {
        let r = reparam_constant_h_speed(&c.geodesic, &c.metric).map_err(|e| e.to_string())?;
        let z = lightlike_lift(&c.metric, &r, 0.0).map_err(|e| e.to_string())?;
        let g = SpacetimeMetric::from(src_backward(&c.metric).map_err(|e| e.to_string())?);
        el_max = el_max.max(lorentz_el_residual(&g, z.spacetime()).map_err(|e| e.to_string())?);
        norm_max = norm_max.max(absolute_drift(z.spacetime().logs.g_norm.as_deref().unwrap_or(&[f64::NAN])));
        kill_max = kill_max.max(absolute_drift(z.spacetime().logs.g_killing.as_deref().unwrap_or(&[f64::NAN])));
    }
    let msg = format!("{} geodesics: EL {el_max:.2e}, g(z',z') drift {norm_max:.2e}, g(z',dt) drift {kill_max:.2e}", zoo.len());
    if el_max < 1e-5 && norm_max < 1e-9 && kill_max < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_off_shell(zoo: &[Case]) -> Outcome {
    let mut worst = 0.0f64;
    for c in zoo {
        worst = worst.max(off_shell_identity(&c.metric, &c.entry, 100, 11, 1000).map_err(|e| e.to_string())?);
    }
    let msg = format!("100 curves x {} metrics, max relative error {worst:.2e}", zoo.len());
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_hessian(zoo: &[Case]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for c in zoo {
        let h_e = hessian_e(&c.metric, &c.geodesic, 64).map_err(|e| e.to_string())?;
        if h_e.degenerate {
            parts.push(format!("{}: skipped (degenerate)", c.entry.name));
            continue;
        }
        let product = src_backward(&c.metric).map_err(|e| e.to_string())?;
        let h_j = hessian_j(&c.metric, &product, &c.geodesic, 64).map_err(|e| e.to_string())?;
        let defect = hessian_identity_defect(&h_j.hessian, &h_e);
        ok &= defect < 1e-3;
        parts.push(format!("{}: {defect:.1e} (fd step {}, richardson gap {:.1e})", c.entry.name, h_j.step, h_j.step_discrepancy));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_conformal(zoo: &[Case]) -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for c in zoo {
        let lambda = conformal_factor(c.metric.dim());
        let chk = conformal_index_check(&c.metric, &c.geodesic, &lambda, &c.entry.name, 1000).map_err(|e| format!("{}: {e}", c.entry.name))?;
        worst = worst.max(chk.hausdorff);
        ok &= chk.mu_unchanged;
    }
    let msg = format!("{} cases, max Hausdorff {worst:.2e}, mu unchanged: {ok}", zoo.len());
    if ok && worst < 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_probe(zoo: &[Case]) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in zoo {
        let rep = probe(&c.metric, &c.geodesic, &ProbeOptions::default()).map_err(|e| format!("{}: {e}", c.entry.name))?;
        ok &= rep.passed;
        parts.push(match rep.slope_spread {
            None => format!("{}: quadratic", c.entry.name),
            Some(spread) => {
                let slopes: Vec<String> = rep
                    .windows
                    .iter()
                    .filter_map(|w| match w.verdict {
                        src_geolab_core::ScalingVerdict::Fitted { slope, .. } => Some(format!("{slope:.3}")),
                        _ => None,
                    })
                    .collect();
                format!("{}: slopes [{}] spread {spread:.3}", c.entry.name, slopes.join(", "))
            }
        });
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    let msg = format!("{} in {secs:.1}s", parts.join("; "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn criterion_hygiene(zoo: &[Case]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut grad_err, mut hess_err, mut jet_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut factors = Vec::new();
    for name in ["wind05", "sphere_wind", "polynomial", "stationary"] {
        let c = find(zoo, name);
        let m = &c.metric;
        let grid = PathGridH10::new(12).unwrap();
        let curve = random_curve(&mut rng, &c.entry.geodesic.p, &c.entry.geodesic.q, 400).unwrap();
        let path = grid.sample_curve(&curve).unwrap();
        let n = m.dim();

        let grad = gradient_e(m, &grid, &path).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let fd: Vec<f64> = (0..grid.basis_len(n))
            .map(|k| {
                let f = grid.sample(&grid.basis_field(n, k));
                let ep = path.perturbed(&f, h).unwrap().energy(m).unwrap();
                let em = path.perturbed(&f, -h).unwrap().energy(m).unwrap();
                (ep - em) / (2.0 * h)
            })
            .collect();
        grad_err = grad_err.max(relative_gap(&grad, &fd));

        let h = 1e-4;
        for _ in 0..4 {
            let a = grid.sample(&grid.basis_field(n, rng.gen_range(0..grid.basis_len(n))));
            let b = grid.sample(&grid.basis_field(n, rng.gen_range(0..grid.basis_len(n))));
            let xi = a.combine(1.0, &b, 0.5);
            let eta = b.combine(1.0, &a, -0.3);
            let exact = gateaux_hessian_e(m, &path, &xi, &eta).map_err(|e| e.to_string())?;
            let e = |sx: f64, se: f64| path.perturbed(&xi.combine(sx, &eta, se), 1.0).unwrap().energy(m).unwrap();
            let fd = (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h);
            hess_err = hess_err.max((exact - fd).abs() / exact.abs().max(1e-3));
        }

        for _ in 0..5 {
            let x: Vec<f64> = c.entry.geodesic.p.iter().zip(&c.entry.geodesic.q).map(|(p, q)| p + rng.gen_range(0.0..1.0) * (q - p)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jet = m.jet(&x, &v).map_err(|e| e.to_string())?;
            let d = 1e-5;
            let f2 = |x: &[f64], v: &[f64]| m.f2(x, v);
            let shift = |u: &[f64], k: usize, s: f64| {
                let mut w = u.to_vec();
                w[k] += s;
                w
            };
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for k in 0..n {
                analytic.push(jet.dq[k]);
                numeric.push((f2(&shift(&x, k, d), &v) - f2(&shift(&x, k, -d), &v)) / (2.0 * d));
                analytic.push(jet.dv[k]);
                numeric.push((f2(&x, &shift(&v, k, d)) - f2(&x, &shift(&v, k, -d))) / (2.0 * d));
                let dv_p = m.jet(&x, &shift(&v, k, d)).unwrap().dv;
                let dv_m = m.jet(&x, &shift(&v, k, -d)).unwrap().dv;
                let jq_p = m.jet(&shift(&x, k, d), &v).unwrap();
                let jq_m = m.jet(&shift(&x, k, -d), &v).unwrap();
                for r in 0..n {
                    analytic.push(jet.dvv[(r, k)]);
                    numeric.push((dv_p[r] - dv_m[r]) / (2.0 * d));
                    analytic.push(jet.dqq[(r, k)]);
                    numeric.push((jq_p.dq[r] - jq_m.dq[r]) / (2.0 * d));
                    analytic.push(jet.dqv[(k, r)]);
                    numeric.push((jq_p.dv[r] - jq_m.dv[r]) / (2.0 * d));
                }
            }
            jet_err = jet_err.max(relative_gap(&analytic, &numeric));
        }
    }
    // Constant-wind geodesics are straight lines that RK4 integrates exactly,
    // so the step-halving ratio is taken on curved cases.
    for name in ["sphere_l15", "sphere_wind", "polynomial", "stationary"] {
        let c = find(zoo, name);
        let m = &c.metric;
        let v0 = c.geodesic.velocity(0).to_vec();
        let end = |steps: usize| finsler_geodesic_ivp(m, &c.entry.geodesic.p, &v0, steps).unwrap().end().to_vec();
        let (a, b, cc) = (end(25), end(50), end(100));
        let d1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let d2: f64 = b.iter().zip(&cc).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        factors.push(d1 / d2);
    }
    let factors_ok = factors.iter().all(|f| (12.0..=20.0).contains(f));
    let fs: Vec<String> = factors.iter().map(|f| format!("{f:.2}")).collect();
    let msg = format!(
        "gradient {grad_err:.1e}, hessian {hess_err:.1e}, jet {jet_err:.1e}, RK4 factors [{}]",
        fs.join(", ")
    );
    if grad_err < 1e-5 && hess_err < 1e-4 && jet_err < 1e-5 && factors_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("src-geolab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let config = dir.join("config.json");
    let text = r#"{"zoo": [], "experiments": [
        {"kind": "verify-src", "case": "sphere_l15", "basis_n": 16},
        {"kind": "lift", "case": "wind05", "samples": 5, "seed": 3},
        {"kind": "probe", "case": "wind05"}
    ]}"#;
    std::fs::write(&config, text).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_src-geolab"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .arg("--canonical-output")
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.code() != Some(0) {
            return Err(format!("run exited with {:?}", status.status.code()));
        }
        reports.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    if reports[0] == reports[1] {
        Ok(format!("two canonical reports of {} bytes are identical", reports[0].len()))
    } else {
        Err("canonical reports differ".into())
    }
}

fn main() {
    let zoo = zoo();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 index equality", Box::new(|| criterion_index(&zoo))),
        ("2 lift certificate", Box::new(|| criterion_lift(&zoo))),
        ("3 off-shell identity J = 2E", Box::new(|| criterion_off_shell(&zoo))),
        ("4 Hessian identity", Box::new(|| criterion_hessian(&zoo))),
        ("5 conformal invariance", Box::new(|| criterion_conformal(&zoo))),
        ("6 regularity dichotomy", Box::new(|| criterion_probe(&zoo))),
        ("7 numerical hygiene", Box::new(|| criterion_hygiene(&zoo))),
        ("8 determinism", Box::new(criterion_determinism)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
