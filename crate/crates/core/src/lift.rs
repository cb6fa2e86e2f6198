//! Curve maps between a Randers base and its stationary spacetime: the
//! lightlike lift, the projection, the lifted variation fields and the
//! Uhlenbeck functional.

use nalgebra::DMatrix;

use crate::error::{GeoError, Result};
use crate::finsler::{RandersMetric, VELOCITY_FLOOR};
use crate::geodesic::log_lorentz;
use crate::numeric::{cumulative_simpson, differentiate, simpson};
use crate::spacetime::{CausalClass, LorentzProduct, SpacetimeMetric, SpacetimeVector};
use crate::trajectory::Trajectory;

/// Absolute tolerance on `dt/ds − R(x, ẋ)` accepted by [`project`].
pub const LIFT_TOLERANCE: f64 = 1e-7;

fn product_of(metric: &RandersMetric) -> LorentzProduct {
    LorentzProduct { domain: metric.domain.clone(), h: metric.h.clone(), omega: metric.omega.clone() }
}

/// A base curve together with its time channel and the spacetime curve `(x, t)`.
#[derive(Clone, Debug)]
pub struct LiftedPath {
    base: Trajectory,
    t: Vec<f64>,
    spacetime: Trajectory,
}

impl LiftedPath {
    pub fn base(&self) -> &Trajectory {
        &self.base
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn spacetime(&self) -> &Trajectory {
        &self.spacetime
    }

    pub fn into_spacetime(self) -> Trajectory {
        self.spacetime
    }
}

/// `z(s) = (γ(s), t₀ + ∫₀ˢ R(γ, γ̇))`, with the time channel accumulated by
/// cumulative Simpson and `ṫ = R(γ, γ̇)` sampled exactly.
pub fn lightlike_lift(metric: &RandersMetric, gamma: &Trajectory, t0: f64) -> Result<LiftedPath> {
    let lifted = lift_unlogged(metric, gamma, t0)?;
    let mut lifted = lifted;
    log_lorentz(&SpacetimeMetric::from(product_of(metric)), &mut lifted.spacetime);
    let g = product_of(metric);
    for i in 0..lifted.spacetime.len() {
        let z = lifted.spacetime.position(i);
        let class = g.causal_classify(z, &SpacetimeVector::from_slice(lifted.spacetime.velocity(i)));
        if class != CausalClass::NullFuture {
            return Err(GeoError::CausalCharacter {
                index: i,
                class: class.to_string(),
                expected: CausalClass::NullFuture.to_string(),
            });
        }
    }
    Ok(lifted)
}

fn lift_unlogged(metric: &RandersMetric, gamma: &Trajectory, t0: f64) -> Result<LiftedPath> {
    gamma.ensure_regular(VELOCITY_FLOOR)?;
    let n = gamma.dim();
    let rdot = (0..gamma.len())
        .map(|i| metric.evaluate(gamma.position(i), gamma.velocity(i)))
        .collect::<Result<Vec<_>>>()?;
    let t: Vec<f64> = cumulative_simpson(gamma.grid(), &rdot).into_iter().map(|c| t0 + c).collect();
    let mut pos = Vec::with_capacity(gamma.len() * (n + 1));
    let mut vel = Vec::with_capacity(gamma.len() * (n + 1));
    for i in 0..gamma.len() {
        pos.extend_from_slice(gamma.position(i));
        pos.push(t[i]);
        vel.extend_from_slice(gamma.velocity(i));
        vel.push(rdot[i]);
    }
    let spacetime = Trajectory::new(n + 1, gamma.grid().to_vec(), pos, vel)?;
    Ok(LiftedPath { base: gamma.clone(), t, spacetime })
}

/// Lifts a continuous path given as consecutive segments, carrying `t` across
/// the segment joints.
pub fn lightlike_lift_segments(metric: &RandersMetric, segments: &[Trajectory], t0: f64) -> Result<Vec<LiftedPath>> {
    let mut t = t0;
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let l = lift_unlogged(metric, seg, t)?;
        t = *l.t.last().expect("segments have samples");
        out.push(l);
    }
    Ok(out)
}

/// Spatial part of a future-pointing null spacetime curve, after checking
/// `dt/ds = R(x, ẋ)` at every sample.
pub fn project(z: &Trajectory, metric: &RandersMetric) -> Result<Trajectory> {
    let n = metric.dim();
    if z.dim() != n + 1 {
        return Err(GeoError::OutOfRange(format!("expected a {}-dimensional spacetime curve", n + 1)));
    }
    let g = product_of(metric);
    for i in 0..z.len() {
        let (p, zd) = (z.position(i), z.velocity(i));
        metric.domain.check(&p[..n])?;
        let class = g.causal_classify(p, &SpacetimeVector::from_slice(zd));
        let r = metric.f(&p[..n], &zd[..n]);
        if class != CausalClass::NullFuture || (zd[n] - r).abs() > LIFT_TOLERANCE * r.abs().max(1.0) {
            return Err(GeoError::CausalCharacter {
                index: i,
                class: class.to_string(),
                expected: CausalClass::NullFuture.to_string(),
            });
        }
    }
    Ok(z.truncate_dim(n))
}

/// Endpoint-vanishing vector field sampled along a base curve.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationField {
    dim: usize,
    values: Vec<f64>,
}

impl VariationField {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 || values.len() < 2 * dim {
            return Err(GeoError::OutOfRange("variation field layout".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::OutOfRange("variation field must be finite".into()));
        }
        let last = values.len() - dim;
        if values[..dim].iter().chain(&values[last..]).any(|&v| v != 0.0) {
            return Err(GeoError::OutOfRange("variation field must vanish at both endpoints".into()));
        }
        Ok(VariationField { dim, values })
    }

    /// Samples `f(s)` on the grid of `x`; the end samples are forced to zero.
    pub fn from_fn(x: &Trajectory, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let dim = x.dim();
        let n = x.len();
        let mut values = Vec::with_capacity(n * dim);
        for (i, &s) in x.grid().iter().enumerate() {
            if i == 0 || i == n - 1 {
                values.extend(std::iter::repeat(0.0).take(dim));
            } else {
                values.extend(f(s));
            }
        }
        VariationField::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Lifted field `U = (W, u)` along the lift `z` of a base geodesic.
#[derive(Clone, Debug)]
pub struct AdmissibleVariation {
    pub w: VariationField,
    /// `u` from the closed form `h(W, ẋ)/√h(ẋ, ẋ) + ω(W)`.
    pub u: Vec<f64>,
    /// `u` from `∫₀ˢ R_x[W] + R_v[Ẇ]`, kept as a certificate.
    pub u_integral: Vec<f64>,
    pub z: LiftedPath,
    /// `max |u − u_integral|`.
    pub certificate_error: f64,
    /// `max |g(ż, U)|`.
    pub admissibility_defect: f64,
}

impl AdmissibleVariation {
    /// Spatial and temporal components at sample `i`.
    pub fn at(&self, i: usize) -> SpacetimeVector {
        SpacetimeVector::new(self.w.at(i).to_vec(), self.u[i])
    }

    /// Fails if the closed form and the integral disagree beyond `tol`.
    pub fn certify(&self, tol: f64) -> Result<()> {
        if self.certificate_error > tol {
            return Err(GeoError::Certificate {
                what: "lifted variation".into(),
                value: self.certificate_error,
                tolerance: tol,
            });
        }
        Ok(())
    }
}

/// Differential of the lift at a constant-h-speed geodesic `x` applied to `W`.
///
/// The time component is the closed form `R_v(x, ẋ)[W]`, using the logged
/// h-speed of `x` when present. The integral form is evaluated alongside and
/// its deviation recorded.
pub fn psi_prime(metric: &RandersMetric, x: &Trajectory, w: &VariationField) -> Result<AdmissibleVariation> {
    let n = metric.dim();
    if w.dim() != n || w.len() != x.len() {
        return Err(GeoError::OutOfRange("variation field does not match the curve".into()));
    }
    let z = lightlike_lift(metric, x, 0.0)?;
    let speed = match &x.logs.h_speed {
        Some(hs) => hs.iter().sum::<f64>() / hs.len() as f64,
        None => {
            let v = x.velocity(0);
            metric.h_inner(x.position(0), v, v).sqrt()
        }
    };
    let wdot = differentiate(x.grid(), w.values(), n);
    let mut u = Vec::with_capacity(x.len());
    let mut integrand = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (p, v, wi) = (x.position(i), x.velocity(i), w.at(i));
        u.push(metric.h_inner(p, wi, v) / speed + metric.omega.apply(p, wi));
        let jet = metric.jet(p, v)?;
        // R_x = ∂_qF²/(2F), R_v = ∂_vF²/(2F)
        let two_f = 2.0 * jet.f;
        let mut acc = 0.0;
        for k in 0..n {
            acc += (jet.dq[k] * wi[k] + jet.dv[k] * wdot[i * n + k]) / two_f;
        }
        integrand.push(acc);
    }
    let u_integral = cumulative_simpson(x.grid(), &integrand);
    let certificate_error = u.iter().zip(&u_integral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let g = product_of(metric);
    let mut admissibility_defect: f64 = 0.0;
    for i in 0..x.len() {
        let zi = z.spacetime();
        let zdot = SpacetimeVector::from_slice(zi.velocity(i));
        let ui = SpacetimeVector::new(w.at(i).to_vec(), u[i]);
        admissibility_defect = admissibility_defect.max(g.g_unchecked(zi.position(i), &zdot, &ui).abs());
    }
    Ok(AdmissibleVariation { w: w.clone(), u, u_integral, z, certificate_error, admissibility_defect })
}

/// Gram matrix of lifted fields in the discrete H¹ product `∫ U·U' + U̇·U̇'`
/// (Euclidean in chart components), with its 2-norm condition number.
pub fn psi_prime_gram(metric: &RandersMetric, x: &Trajectory, fields: &[VariationField]) -> Result<(DMatrix<f64>, f64)> {
    let m = metric.dim() + 1;
    let lifted = fields
        .iter()
        .map(|w| {
            let a = psi_prime(metric, x, w)?;
            let mut flat = Vec::with_capacity(x.len() * m);
            for i in 0..x.len() {
                flat.extend_from_slice(a.w.at(i));
                flat.push(a.u[i]);
            }
            let d = differentiate(x.grid(), &flat, m);
            Ok((flat, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = fields.len();
    let mut gram = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let vals: Vec<f64> = (0..x.len())
                .map(|i| {
                    (0..m)
                        .map(|c| {
                            lifted[a].0[i * m + c] * lifted[b].0[i * m + c] + lifted[a].1[i * m + c] * lifted[b].1[i * m + c]
                        })
                        .sum()
                })
                .collect();
            let v = simpson(x.grid(), &vals);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e.abs()), hi.max(e.abs())));
    Ok((gram, hi / lo))
}

/// `J(σ) = ∫ g(σ̇, σ̇) + (dt/ds)²` by composite Simpson on the curve's grid.
pub fn uhlenbeck_j(g: &LorentzProduct, sigma: &Trajectory) -> Result<f64> {
    let n = g.dim();
    if sigma.dim() != n + 1 {
        return Err(GeoError::OutOfRange(format!("expected a {}-dimensional spacetime curve", n + 1)));
    }
    let vals = (0..sigma.len())
        .map(|i| {
            let (p, a) = (sigma.position(i), SpacetimeVector::from_slice(sigma.velocity(i)));
            g.domain.check(&p[..n])?;
            Ok(g.g_unchecked(p, &a, &a) + a.tau * a.tau)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(simpson(sigma.grid(), &vals))
}

/// `J` of a spacetime path given as consecutive segments.
pub fn uhlenbeck_j_segments(g: &LorentzProduct, segments: &[Trajectory]) -> Result<f64> {
    segments.iter().map(|s| uhlenbeck_j(g, s)).sum()
}
