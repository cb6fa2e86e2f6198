use proptest::prelude::*;
use src_geolab_core::index::hessian_e_on;
use src_geolab_core::lift::psi_prime_gram;
use src_geolab_core::trajectory::{hausdorff, relative_drift};
use src_geolab_core::*;

/// `h = [[1 + c0 x0², c2 x0 x1], [c2 x0 x1, 1 + c1 x1²]]`, `ω = (a0 + b x1, a1 − b x0)`.
fn metric(c: [f64; 3], a: [f64; 2], b: f64) -> RandersMetric {
    let e = |s: String| Expr::parse(&s).unwrap();
    let h = RiemannianField::from_rows(vec![
        vec![e(format!("1 + {}*x0^2", c[0])), e(format!("{}*x0*x1", c[2]))],
        vec![e(format!("{}*x0*x1", c[2])), e(format!("1 + {}*x1^2", c[1]))],
    ])
    .unwrap();
    let omega = OneFormField::new(vec![e(format!("{} + {}*x1", a[0], b)), e(format!("{} - {}*x0", a[1], b))]);
    let m = RandersMetric::new(ChartDomain::cube(2, 1.0), h, omega).unwrap();
    m.validate(&m.domain.default_samples()).unwrap();
    m
}

fn coeffs() -> impl Strategy<Value = ([f64; 3], [f64; 2], f64)> {
    (
        [0.0..0.3f64, 0.0..0.3f64, -0.1..0.1f64],
        [-0.4..0.4f64, -0.4..0.4f64],
        -0.2..0.2f64,
    )
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9..0.9f64, 2)
}

fn velocity() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 2).prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-4)
}

fn sphere() -> RandersMetric {
    RandersMetric::new(
        ChartDomain::cube(2, 4.0),
        RiemannianField::conformal_identity(2, Expr::parse("4/(1 + x0^2 + x1^2)^2").unwrap()),
        OneFormField::zero(2),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_homogeneity((c, a, b) in coeffs(), x in point(), v in velocity(), lambda in 0.01..50.0f64) {
        let m = metric(c, a, b);
        let scaled: Vec<f64> = v.iter().map(|c| c * lambda).collect();
        let f = m.evaluate(&x, &v).unwrap();
        prop_assert!((m.evaluate(&x, &scaled).unwrap() - lambda * f).abs() <= 1e-13 * lambda * f.abs().max(1.0));
    }

    #[test]
    fn euler_identities((c, a, b) in coeffs(), x in point(), v in velocity()) {
        let j = metric(c, a, b).jet(&x, &v).unwrap();
        let dv_v: f64 = (0..2).map(|k| j.dv[k] * v[k]).sum();
        prop_assert!((dv_v - 2.0 * j.f2).abs() < 1e-12 * j.f2.max(1.0));
        for r in 0..2 {
            let dvv_v: f64 = (0..2).map(|k| j.dvv[(r, k)] * v[k]).sum();
            prop_assert!((dvv_v - j.dv[r]).abs() < 1e-11 * j.f2.max(1.0));
            let dqv_v: f64 = (0..2).map(|k| j.dqv[(r, k)] * v[k]).sum();
            prop_assert!((dqv_v - 2.0 * j.dq[r]).abs() < 1e-11 * j.f2.max(1.0));
        }
    }

    #[test]
    fn vertical_hessian_constant_iff_riemannian((c, a, b) in coeffs(), x in point(), v in velocity(), w in velocity()) {
        let riem = metric(c, [0.0, 0.0], 0.0);
        let d = (riem.jet(&x, &v).unwrap().dvv - riem.jet(&x, &w).unwrap().dvv).abs().max();
        prop_assert!(d < 1e-8);
        prop_assume!(a[0].abs() + a[1].abs() > 0.05);
        let m = metric(c, a, b);
        let spread = [vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]
            .iter()
            .map(|u| (m.jet(&x, u).unwrap().dvv - m.jet(&x, &v).unwrap().dvv).abs().max())
            .fold(0.0, f64::max);
        prop_assert!(spread > 1e-8);
    }

    #[test]
    fn reverse_is_length_isometry((c, a, b) in coeffs(), amp in -0.3..0.3f64) {
        let m = metric(c, a, b);
        let gamma = Trajectory::from_fn(2, 0.0, 1.0, 400, |s| {
            (vec![-0.5 + s, amp * (std::f64::consts::PI * s).sin()], vec![1.0, amp * std::f64::consts::PI * (std::f64::consts::PI * s).cos()])
        }).unwrap();
        let l = m.length(&gamma).unwrap();
        let lr = m.reverse().length(&gamma.reversed()).unwrap();
        prop_assert!((l - lr).abs() < 1e-12 * l);
    }

    #[test]
    fn null_roots_classify((c, a, b) in coeffs(), x in point(), v in velocity()) {
        let m = metric(c, a, b);
        let g = src_backward(&m).unwrap();
        let neg: Vec<f64> = v.iter().map(|c| -c).collect();
        let fut = SpacetimeVector::new(v.clone(), m.evaluate(&x, &v).unwrap());
        let past = SpacetimeVector::new(v.clone(), -m.evaluate(&x, &neg).unwrap());
        prop_assert_eq!(g.causal_classify(&x, &fut), CausalClass::NullFuture);
        prop_assert_eq!(g.causal_classify(&x, &past), CausalClass::NullPast);
    }

    #[test]
    fn src_forward_ignores_conformal_factor((c, a, b) in coeffs(), k in 0.0..0.5f64, x in point(), v in velocity()) {
        let m = metric(c, a, b);
        let data = src_backward(&m).unwrap().as_stationary_data();
        let lambda = Expr::parse(&format!("1 + {k}*x0^2 + 0.1*x1")).unwrap();
        let m2 = src_forward(&data.rescaled(&lambda)).unwrap();
        let m1 = src_forward(&data).unwrap();
        prop_assert!((m1.evaluate(&x, &v).unwrap() - m2.evaluate(&x, &v).unwrap()).abs() < 1e-12);
        let (h1, h2) = (m1.h.matrix(&x), m2.h.matrix(&x));
        prop_assert!((h1 - h2).abs().max() < 1e-12);
        let (o1, o2) = (m1.omega.eval(&x), m2.omega.eval(&x));
        prop_assert!(o1.iter().zip(&o2).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn lorentzian_signature((c, a, b) in coeffs()) {
        let m = metric(c, a, b);
        let g = src_backward(&m).unwrap();
        prop_assert!(g.negative_eigenvalue_counts(&m.domain.default_samples()).iter().all(|&k| k == 1));
    }

    #[test]
    fn project_inverts_lift((c, a, b) in coeffs(), amp in -0.3..0.3f64) {
        let m = metric(c, a, b);
        let gamma = Trajectory::from_fn(2, 0.0, 1.0, 300, |s| {
            (vec![0.8 * s - 0.4, amp * s * s], vec![0.8, 2.0 * amp * s])
        }).unwrap();
        let z = lightlike_lift(&m, &gamma, 0.0).unwrap();
        let back = project(z.spacetime(), &m).unwrap();
        prop_assert_eq!(back.positions(), gamma.positions());
        prop_assert_eq!(back.velocities(), gamma.velocities());
    }

    #[test]
    fn psi_prime_is_admissible((c, a, b) in coeffs(), k in 1usize..4, amp in 0.1..1.0f64) {
        let m = metric(c, a, b);
        let f = shoot_bvp(&m, &ShootingProblem::new(vec![-0.3, -0.2], vec![0.4, 0.3]).with_steps(400)).unwrap().trajectory;
        let x = reparam_constant_h_speed(&f, &m).unwrap();
        let w = VariationField::from_fn(&x, |s| {
            let bump = amp * (k as f64 * std::f64::consts::PI * s).sin();
            vec![bump, 0.5 * bump * s]
        }).unwrap();
        let u = psi_prime(&m, &x, &w).unwrap();
        prop_assert!(u.admissibility_defect < 1e-9);
    }
}

#[test]
fn psi_prime_gram_is_nonsingular() {
    let m = metric([0.1, 0.2, 0.05], [0.3, -0.1], 0.1);
    let f = shoot_bvp(&m, &ShootingProblem::new(vec![-0.3, -0.2], vec![0.4, 0.3]).with_steps(400)).unwrap().trajectory;
    let x = reparam_constant_h_speed(&f, &m).unwrap();
    let fields: Vec<VariationField> = (1..=3)
        .flat_map(|k| {
            let x = &x;
            (0..2).map(move |c| {
                VariationField::from_fn(x, |s| {
                    let mut w = vec![0.0; 2];
                    w[c] = (k as f64 * std::f64::consts::PI * s).sin();
                    w
                })
                .unwrap()
            })
        })
        .collect();
    let (_, cond) = psi_prime_gram(&m, &x, &fields).unwrap();
    assert!(cond.is_finite() && cond < 1e8, "condition number {cond}");
}

#[test]
fn finsler_speed_is_conserved() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let x = finsler_geodesic_ivp(&m, &[-0.5, -0.2], &[0.9, 0.6], 1000).unwrap();
    assert!(relative_drift(x.logs.finsler.as_ref().unwrap()) < 1e-7);
}

#[test]
fn lorentz_conserved_quantities() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let g = SpacetimeMetric::from(src_backward(&m).unwrap());
    let v = [0.7, 0.4];
    let z = lorentz_geodesic_ivp(&g, &[-0.5, -0.2, 0.0], &[v[0], v[1], m.evaluate(&[-0.5, -0.2], &v).unwrap()], 1000).unwrap();
    let drift = |q: &Vec<f64>| q.iter().map(|x| (x - q[0]).abs()).fold(0.0, f64::max);
    assert!(drift(z.logs.g_norm.as_ref().unwrap()) < 1e-9);
    assert!(drift(z.logs.g_killing.as_ref().unwrap()) < 1e-9);
}

#[test]
fn rk4_order_under_step_halving() {
    let m = sphere();
    let end = |n| finsler_geodesic_ivp(&m, &[1.0, 0.0], &[0.3, 2.0], n).unwrap().end().to_vec();
    let (a, b, c) = (end(40), end(80), end(160));
    let d = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let factor = d(&a, &b) / d(&b, &c);
    assert!((12.0..=20.0).contains(&factor), "factor {factor}");
}

#[test]
fn reversed_metric_retraces_geodesic() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let x = shoot_bvp(&m, &ShootingProblem::new(vec![-0.4, -0.3], vec![0.5, 0.4])).unwrap().trajectory;
    let back: Vec<f64> = x.velocity(x.len() - 1).iter().map(|c| -c).collect();
    let y = finsler_geodesic_ivp(&m.reverse(), x.end(), &back, 1000).unwrap();
    assert!(hausdorff(&x, &y) < 1e-6);
}

#[test]
fn gateaux_hessian_reproduces_hessian_matrix() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let x = shoot_bvp(&m, &ShootingProblem::new(vec![-0.4, -0.3], vec![0.5, 0.4])).unwrap().trajectory;
    let grid = PathGridH10::new(8).unwrap();
    let path = grid.sample_curve(&x).unwrap();
    let h = hessian_e_on(&m, &grid, &path).unwrap();
    let scale = h.matrix.abs().max();
    for (a, b) in [(0, 0), (0, 1), (3, 4), (5, 7), (2, 9)] {
        let fa = grid.sample(&grid.basis_field(2, a));
        let fb = grid.sample(&grid.basis_field(2, b));
        let g = gateaux_hessian_e(&m, &path, &fa, &fb).unwrap();
        assert!((g - h.matrix[(a, b)]).abs() <= 1e-10 * scale, "entry ({a}, {b})");
    }
}

#[test]
fn gradient_vanishes_on_shot_geodesic() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let x = shoot_bvp(&m, &ShootingProblem::new(vec![-0.4, -0.3], vec![0.5, 0.4])).unwrap().trajectory;
    let grid = PathGridH10::new(16).unwrap();
    let g = gradient_e(&m, &grid, &grid.sample_curve(&x).unwrap()).unwrap();
    assert!(g.iter().all(|c| c.abs() < 1e-5));
}

#[test]
fn gateaux_hessian_is_symmetric() {
    let m = metric([0.2, 0.1, 0.05], [0.3, 0.2], 0.15);
    let grid = PathGridH10::new(8).unwrap();
    let path = SegmentedPath::from_fn(grid.grid(), 2, |s| (vec![s - 0.5, 0.3 * s * s], vec![1.0, 0.6 * s])).unwrap();
    let xi = grid.sample(&grid.basis_field(2, 3)).combine(1.0, &grid.sample(&grid.basis_field(2, 6)), 0.7);
    let eta = grid.sample(&grid.basis_field(2, 4)).combine(-0.4, &grid.sample(&grid.basis_field(2, 3)), 1.0);
    let ab = gateaux_hessian_e(&m, &path, &xi, &eta).unwrap();
    let ba = gateaux_hessian_e(&m, &path, &eta, &xi).unwrap();
    assert!((ab - ba).abs() < 1e-10);
}
