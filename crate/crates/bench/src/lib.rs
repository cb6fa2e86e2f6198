//! Fixtures shared by the benchmarks.

use src_geolab_core::{ChartDomain, Expr, OneFormField, RandersMetric, RiemannianField, ShootingProblem, Trajectory};

/// Stereographic unit sphere with rotational wind of strength `wind`.
pub fn sphere(wind: f64) -> RandersMetric {
    let sigma2 = Expr::parse("4/(1 + x0^2 + x1^2)^2").unwrap();
    let omega = if wind == 0.0 {
        OneFormField::zero(2)
    } else {
        let c = sigma2.clone() * Expr::constant(wind);
        OneFormField::new(vec![-(c.clone() * Expr::var(1)), c * Expr::var(0)])
    };
    RandersMetric::new(ChartDomain::cube(2, 4.0), RiemannianField::conformal_identity(2, sigma2), omega).unwrap()
}

/// Equatorial problem of angle `1.5π` from `(1, 0)`.
pub fn equator_problem() -> ShootingProblem {
    let l = 1.5 * std::f64::consts::PI;
    ShootingProblem::new(vec![1.0, 0.0], vec![l.cos(), l.sin()]).with_guess(vec![0.0, l])
}

pub fn equator(metric: &RandersMetric) -> Trajectory {
    src_geolab_core::shoot_bvp(metric, &equator_problem()).unwrap().trajectory
}
