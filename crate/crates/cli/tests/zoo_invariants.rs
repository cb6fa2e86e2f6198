use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use src_geolab_cli::{builtin, parse_config};
use src_geolab_core::geodesic::LorentzOde;
use src_geolab_core::index::{hessian_e, lifted_initial_data};
use src_geolab_core::trajectory::{hausdorff, relative_drift};
use src_geolab_core::{
    conjugate_points, el_residual, finsler_geodesic_ivp, reversed_index_check, src_backward, CausalClass, LinearizedFlow,
    RandersMetric, SpacetimeMetric, SpacetimeVector, SprayEvaluator, Trajectory,
};

fn cases() -> Vec<(String, RandersMetric, Trajectory)> {
    builtin()
        .into_iter()
        .map(|e| {
            let m = e.build().unwrap();
            let x = e.shoot(&m, 1000).unwrap().trajectory;
            (e.name, m, x)
        })
        .collect()
}

fn random_state(rng: &mut ChaCha8Rng, m: &RandersMetric) -> (Vec<f64>, Vec<f64>) {
    let half = m.domain.bounds()[0].1 * 0.5;
    let x: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-half..half)).collect();
    let v: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (x, v)
}

#[test]
fn jets_satisfy_euler_identities_and_null_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, m, _) in cases() {
        let g = src_backward(&m).unwrap();
        for _ in 0..1000 {
            let (x, v) = random_state(&mut rng, &m);
            let j = m.jet(&x, &v).unwrap();
            let scale = j.f2.max(1.0);
            let dv_v: f64 = (0..m.dim()).map(|k| j.dv[k] * v[k]).sum();
            assert!((dv_v - 2.0 * j.f2).abs() < 1e-11 * scale, "{name}");
            for r in 0..m.dim() {
                let dvv_v: f64 = (0..m.dim()).map(|k| j.dvv[(r, k)] * v[k]).sum();
                assert!((dvv_v - j.dv[r]).abs() < 1e-10 * scale, "{name}");
            }
            let neg: Vec<f64> = v.iter().map(|c| -c).collect();
            let fut = SpacetimeVector::new(v.clone(), m.evaluate(&x, &v).unwrap());
            let past = SpacetimeVector::new(v.clone(), -m.evaluate(&x, &neg).unwrap());
            assert_eq!(g.causal_classify(&x, &fut), CausalClass::NullFuture, "{name}");
            assert_eq!(g.causal_classify(&x, &past), CausalClass::NullPast, "{name}");
        }
    }
}

#[test]
fn vertical_hessian_dichotomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, m, _) in cases() {
        let mut spread: f64 = 0.0;
        for _ in 0..50 {
            let (x, v) = random_state(&mut rng, &m);
            let (_, w) = random_state(&mut rng, &m);
            spread = spread.max((m.jet(&x, &v).unwrap().dvv - m.jet(&x, &w).unwrap().dvv).abs().max());
        }
        assert_eq!(spread < 1e-8, m.is_riemannian(), "{name}: spread {spread}");
    }
}

#[test]
fn one_negative_eigenvalue_everywhere() {
    for (name, m, _) in cases() {
        let g = src_backward(&m).unwrap();
        assert!(g.negative_eigenvalue_counts(&m.domain.default_samples()).iter().all(|&k| k == 1), "{name}");
    }
}

#[test]
fn shot_geodesics_are_geodesics() {
    for (name, m, x) in cases() {
        assert!(el_residual(&m, &x).unwrap() < 1e-6, "{name}");
        assert!(relative_drift(x.logs.finsler.as_ref().unwrap()) < 1e-7, "{name}");
        let back: Vec<f64> = x.velocity(x.len() - 1).iter().map(|c| -c).collect();
        let y = finsler_geodesic_ivp(&m.reverse(), x.end(), &back, 1000).unwrap();
        assert!(hausdorff(&x, &y) < 1e-6, "{name}");
    }
}

#[test]
fn index_methods_agree_across_resolutions() {
    for (name, m, x) in cases() {
        let spray = SprayEvaluator::new(&m);
        let flow = LinearizedFlow::from_initial(&spray, x.start(), x.velocity(0), 1000).unwrap();
        let mu = conjugate_points(&spray, &flow).unwrap().index();
        for n in [32, 64, 128] {
            let h = hessian_e(&m, &x, n).unwrap();
            assert!(!h.degenerate, "{name} N={n}");
            assert_eq!(h.negative_count, mu, "{name} N={n}");
        }
        let g = SpacetimeMetric::from(src_backward(&m).unwrap());
        let (z0, zd0, _) = lifted_initial_data(&m, &x).unwrap();
        let ode = LorentzOde::new(&g);
        let st = LinearizedFlow::from_initial(&ode, &z0, &zd0, 1000).unwrap();
        assert_eq!(conjugate_points(&ode, &st).unwrap().index(), mu, "{name}");
    }
}

#[test]
fn reversed_metric_matches_past_null_index() {
    for (name, m, x) in cases() {
        let r = reversed_index_check(&m, &x, &name, 1000).unwrap();
        assert_eq!(r.reversed_base.mu, r.past_null.mu, "{name}");
    }
}

#[test]
fn default_config_exercises_every_zoo_entry() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json")).unwrap();
    let loaded = parse_config(&text).unwrap();
    for e in &loaded.zoo {
        assert!(loaded.config.experiments.iter().any(|x| x.case == e.name), "{} unused", e.name);
    }
}
