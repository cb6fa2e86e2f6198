//! Named metrics with a reference geodesic each.

use serde::{Deserialize, Serialize};
use src_geolab_core::{
    shoot_bvp, src_forward, ChartDomain, Expr, GeoError, OneFormField, RandersMetric, RiemannianField, ShootingProblem,
    ShootingSolution, StationaryData,
};

use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// Euclidean `h` with the constant one-form `a`.
    EuclideanWind { a: Vec<f64> },
    /// Round sphere of radius `radius` in stereographic coordinates, with
    /// `wind` times the `h`-dual of the rotation field in the `x0, x1` plane
    /// divided by the radius.
    SphereStereographic { dim: usize, radius: f64, wind: f64 },
    /// Euclidean `h` with the exact one-form `a·d ln(1 + |x|²)`.
    RadialWind { dim: usize, a: f64 },
    /// Entry-wise expressions in `x0, x1, ...`.
    PolynomialCustom { h: Vec<Vec<String>>, omega: Vec<String> },
    /// Stationary data `(g0, w, beta)` mapped to its Randers metric.
    StationaryData { g0: Vec<Vec<String>>, w: Vec<String>, beta: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZooEntry {
    pub name: String,
    pub metric: MetricSpec,
    /// Half-width of the coordinate cube.
    pub chart: f64,
    pub geodesic: GeodesicSpec,
    /// Known Morse index of the reference geodesic, when there is an oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_mu: Option<usize>,
}

/// Validation failure with the offending field path relative to the entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_err(field: &str, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

fn parse_all(field: &str, src: &[String]) -> Result<Vec<Expr>, FieldError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| Expr::parse(s).map_err(|e| field_err(&format!("{field}[{i}]"), e.to_string())))
        .collect()
}

fn parse_rows(field: &str, rows: &[Vec<String>]) -> Result<Vec<Vec<Expr>>, FieldError> {
    rows.iter().enumerate().map(|(i, r)| parse_all(&format!("{field}[{i}]"), r)).collect()
}

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match self {
            MetricSpec::EuclideanWind { a } => a.len(),
            MetricSpec::SphereStereographic { dim, .. } | MetricSpec::RadialWind { dim, .. } => *dim,
            MetricSpec::PolynomialCustom { omega, .. } => omega.len(),
            MetricSpec::StationaryData { w, .. } => w.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MetricSpec::EuclideanWind { .. } => "euclidean_wind",
            MetricSpec::SphereStereographic { .. } => "sphere_stereographic",
            MetricSpec::RadialWind { .. } => "radial_wind",
            MetricSpec::PolynomialCustom { .. } => "polynomial_custom",
            MetricSpec::StationaryData { .. } => "stationary_data",
        }
    }

    /// Builds and validates the metric on the cube of half-width `chart`.
    pub fn build(&self, chart: f64) -> Result<RandersMetric, FieldError> {
        let n = self.dim();
        if n == 0 {
            return Err(field_err("metric", "dimension must be positive"));
        }
        if !(chart.is_finite() && chart > 0.0) {
            return Err(field_err("chart", "half-width must be positive"));
        }
        let domain = ChartDomain::cube(n, chart);
        let randers = |h, omega| RandersMetric::new(domain.clone(), h, omega).map_err(|e| field_err("metric", e.to_string()));
        let metric = match self {
            MetricSpec::EuclideanWind { a } => {
                let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(norm < 1.0) {
                    return Err(field_err("metric.a", format!("|a| = {norm} violates the Randers bound |a| < 1")));
                }
                randers(RiemannianField::identity(n), OneFormField::new(a.iter().map(|&c| Expr::constant(c)).collect()))?
            }
            MetricSpec::SphereStereographic { dim, radius, wind } => {
                if *dim < 2 {
                    return Err(field_err("metric.dim", "sphere charts need dim >= 2"));
                }
                if !(*radius > 0.0) {
                    return Err(field_err("metric.radius", "radius must be positive"));
                }
                if !(wind.abs() < 1.0) {
                    return Err(field_err("metric.wind", format!("|wind| = {} violates the Randers bound", wind.abs())));
                }
                let r2 = (0..n).fold(Expr::constant(1.0), |acc, k| acc + Expr::var(k).powi(2));
                let sigma2 = Expr::constant(4.0 * radius * radius) / r2.powi(2);
                let mut omega = vec![Expr::constant(0.0); n];
                if *wind != 0.0 {
                    let c = sigma2.clone() * Expr::constant(wind / radius);
                    omega[0] = -(c.clone() * Expr::var(1));
                    omega[1] = c * Expr::var(0);
                }
                randers(RiemannianField::conformal_identity(n, sigma2), OneFormField::new(omega))?
            }
            MetricSpec::RadialWind { a, .. } => {
                if !(a.abs() < 1.0) {
                    return Err(field_err("metric.a", format!("|a| = {} violates the Randers bound |a| < 1", a.abs())));
                }
                let r2 = (0..n).fold(Expr::constant(1.0), |acc, k| acc + Expr::var(k).powi(2));
                let omega = (0..n).map(|k| Expr::constant(2.0 * a) * Expr::var(k) / r2.clone()).collect();
                randers(RiemannianField::identity(n), OneFormField::new(omega))?
            }
            MetricSpec::PolynomialCustom { h, omega } => {
                let h = RiemannianField::from_rows(parse_rows("metric.h", h)?).map_err(|e| field_err("metric.h", e.to_string()))?;
                if h.dim() != n {
                    return Err(field_err("metric.h", "size does not match omega"));
                }
                randers(h, OneFormField::new(parse_all("metric.omega", omega)?))?
            }
            MetricSpec::StationaryData { g0, w, beta } => {
                let g0 = RiemannianField::from_rows(parse_rows("metric.g0", g0)?).map_err(|e| field_err("metric.g0", e.to_string()))?;
                if g0.dim() != n {
                    return Err(field_err("metric.g0", "size does not match w"));
                }
                let beta = Expr::parse(beta).map_err(|e| field_err("metric.beta", e.to_string()))?;
                let data = StationaryData { domain: domain.clone(), g0, w: OneFormField::new(parse_all("metric.w", w)?), beta };
                src_forward(&data).map_err(|e| field_err("metric", e.to_string()))?
            }
        };
        metric.validate(&metric.domain.default_samples()).map_err(|e| field_err("metric", e.to_string()))?;
        Ok(metric)
    }
}

impl ZooEntry {
    pub fn build(&self) -> Result<RandersMetric, FieldError> {
        let metric = self.metric.build(self.chart)?;
        let n = metric.dim();
        for (field, v) in [("geodesic.p", &self.geodesic.p), ("geodesic.q", &self.geodesic.q)] {
            if v.len() != n {
                return Err(field_err(field, format!("expected {n} components")));
            }
            metric.domain.check(v).map_err(|e| field_err(field, e.to_string()))?;
        }
        if let Some(g) = &self.geodesic.guess {
            if g.len() != n {
                return Err(field_err("geodesic.guess", format!("expected {n} components")));
            }
        }
        Ok(metric)
    }

    /// Shoots the reference geodesic.
    pub fn shoot(&self, metric: &RandersMetric, steps: usize) -> Result<ShootingSolution, GeoError> {
        let mut problem = ShootingProblem::new(self.geodesic.p.clone(), self.geodesic.q.clone()).with_steps(steps);
        if let Some(g) = &self.geodesic.guess {
            problem = problem.with_guess(g.clone());
        }
        if let Some(k) = self.geodesic.continuation {
            problem = problem.with_continuation(k);
        }
        shoot_bvp(metric, &problem)
    }
}

fn entry(name: &str, metric: MetricSpec, chart: f64, p: Vec<f64>, q: Vec<f64>, guess: Option<Vec<f64>>, mu: Option<usize>) -> ZooEntry {
    ZooEntry {
        name: name.into(),
        metric,
        chart,
        geodesic: GeodesicSpec { p, q, guess, continuation: None },
        expected_mu: mu,
    }
}

fn sphere(dim: usize, wind: f64) -> MetricSpec {
    MetricSpec::SphereStereographic { dim, radius: 1.0, wind }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Equatorial endpoint at angle `l` from `(1, 0, ..)`.
fn equator(dim: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; dim];
    q[0] = l.cos();
    q[1] = l.sin();
    let mut v = vec![0.0; dim];
    v[1] = l;
    (q, v)
}

fn unit(dim: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[0] = 1.0;
    p
}

/// Built-in metrics.
pub fn builtin() -> Vec<ZooEntry> {
    let mut zoo = vec![
        entry("euclid", MetricSpec::EuclideanWind { a: vec![0.0, 0.0] }, 3.0, vec![0.0, 0.0], vec![1.0, 0.5], None, Some(0)),
        entry("wind05", MetricSpec::EuclideanWind { a: vec![0.5, 0.0] }, 3.0, vec![0.0, 0.0], vec![1.0, 0.5], None, Some(0)),
    ];
    for (name, l, mu) in [("sphere_l05", 0.5, 0), ("sphere_l15", 1.5, 1), ("sphere_l25", 2.5, 2)] {
        let (q, v) = equator(2, l * PI);
        zoo.push(entry(name, sphere(2, 0.0), 4.0, unit(2), q, Some(v), Some(mu)));
    }
    let (q, v) = equator(2, 1.5 * PI);
    zoo.push(entry("sphere_wind", sphere(2, 0.3), 4.0, unit(2), q, Some(v), None));
    let (q, v) = equator(3, 1.5 * PI);
    zoo.push(entry("s3_l15", sphere(3, 0.0), 4.0, unit(3), q, Some(v), Some(2)));
    zoo.push(entry(
        "radial_wind",
        MetricSpec::RadialWind { dim: 2, a: 0.4 },
        3.0,
        vec![-0.5, 0.2],
        vec![1.0, 0.5],
        None,
        Some(0),
    ));
    zoo.push(entry(
        "polynomial",
        MetricSpec::PolynomialCustom {
            h: vec![strings(&["1 + 0.1*x0^2", "0.05*x0*x1"]), strings(&["0.05*x0*x1", "1 + 0.1*x1^2"])],
            omega: strings(&["0.2 + 0.1*x1", "-0.1*x0"]),
        },
        2.0,
        vec![0.0, 0.0],
        vec![1.0, 0.5],
        None,
        None,
    ));
    zoo.push(entry(
        "stationary",
        MetricSpec::StationaryData {
            g0: vec![strings(&["1 + 0.1*x1^2", "0"]), strings(&["0", "1"])],
            w: strings(&["0.2", "0.1*x0"]),
            beta: "1 + 0.05*x0^2".into(),
        },
        2.0,
        vec![0.0, 0.0],
        vec![1.0, 0.5],
        None,
        None,
    ));
    zoo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_entries_build() {
        let zoo = builtin();
        for e in &zoo {
            e.build().unwrap_or_else(|err| panic!("{}: {err:?}", e.name));
        }
        let mut names: Vec<_> = zoo.iter().map(|e| e.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), zoo.len());
    }

    #[test]
    fn wind_bound_names_field() {
        let err = MetricSpec::EuclideanWind { a: vec![1.2, 0.0] }.build(2.0).unwrap_err();
        assert_eq!(err.field, "metric.a");
    }

    #[test]
    fn sphere_wind_norm_bounded_by_wind() {
        let m = sphere(2, 0.3).build(4.0).unwrap();
        for x in m.domain.default_samples() {
            assert!(m.omega_norm(&x).unwrap() <= 0.3 + 1e-12);
        }
        assert!((m.omega_norm(&[1.0, 0.0]).unwrap() - 0.3).abs() < 1e-12);
    }
}
