//! Sampled curves with velocities, monitored scalar logs and cubic Hermite
//! interpolation.

use std::io::Write;

use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::numeric::{differentiate, dist};

/// Per-sample scalars recorded while integrating. Each is `None` unless the
/// producing operation monitors it.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Logs {
    /// Finsler speed F(γ, γ̇).
    pub finsler: Option<Vec<f64>>,
    /// Riemannian speed √h(γ̇, γ̇).
    pub h_speed: Option<Vec<f64>>,
    /// g(ż, ż).
    pub g_norm: Option<Vec<f64>>,
    /// g(ż, ∂_t).
    pub g_killing: Option<Vec<f64>>,
}

impl Logs {
    /// Column names and data in CSV order.
    pub fn columns(&self) -> Vec<(&'static str, &Vec<f64>)> {
        let mut out = Vec::new();
        if let Some(v) = &self.finsler {
            out.push(("F", v));
        }
        if let Some(v) = &self.h_speed {
            out.push(("h_speed", v));
        }
        if let Some(v) = &self.g_norm {
            out.push(("g_norm", v));
        }
        if let Some(v) = &self.g_killing {
            out.push(("g_killing", v));
        }
        out
    }
}

/// A curve sampled on a strictly increasing parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    dim: usize,
    s: Vec<f64>,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    pub logs: Logs,
}

impl Trajectory {
    pub fn new(dim: usize, s: Vec<f64>, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if dim == 0 || s.len() < 2 {
            return Err(GeoError::OutOfRange("trajectory needs dim ≥ 1 and ≥ 2 samples".into()));
        }
        if positions.len() != s.len() * dim || velocities.len() != s.len() * dim {
            return Err(GeoError::OutOfRange("sample arrays have inconsistent lengths".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeoError::OutOfRange("parameter grid must be strictly increasing".into()));
        }
        Ok(Trajectory { dim, s, positions, velocities, logs: Logs::default() })
    }

    /// Samples a closed-form curve `s ↦ (γ(s), γ̇(s))` on a uniform grid of
    /// `intervals + 1` points over `[a, b]`.
    pub fn from_fn<F>(dim: usize, a: f64, b: f64, intervals: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>),
    {
        let s = crate::numeric::linspace(a, b, intervals + 1);
        let mut pos = Vec::with_capacity(s.len() * dim);
        let mut vel = Vec::with_capacity(s.len() * dim);
        for &si in &s {
            let (p, v) = f(si);
            pos.extend(p);
            vel.extend(v);
        }
        Self::new(dim, s, pos, vel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn start(&self) -> &[f64] {
        self.position(0)
    }

    pub fn end(&self) -> &[f64] {
        self.position(self.len() - 1)
    }

    /// Keeps the first `dim` coordinates of positions and velocities.
    pub fn truncate_dim(&self, dim: usize) -> Trajectory {
        let take = |data: &[f64]| -> Vec<f64> {
            data.chunks(self.dim).flat_map(|c| c[..dim].to_vec()).collect()
        };
        Trajectory {
            dim,
            s: self.s.clone(),
            positions: take(&self.positions),
            velocities: take(&self.velocities),
            logs: Logs::default(),
        }
    }

    /// Index of the first sample whose Euclidean chart speed is at or below `floor`.
    pub fn first_degenerate(&self, floor: f64) -> Option<(usize, f64)> {
        (0..self.len())
            .map(|i| (i, crate::numeric::norm(self.velocity(i))))
            .find(|&(_, sp)| !(sp > floor))
    }

    pub fn ensure_regular(&self, floor: f64) -> Result<()> {
        match self.first_degenerate(floor) {
            Some((index, speed)) => Err(GeoError::Regularity { index, speed }),
            None => Ok(()),
        }
    }

    /// Same samples traversed backwards on the reflected grid `s ↦ a + b − s`.
    pub fn reversed(&self) -> Trajectory {
        let (a, b) = (self.s[0], self.s[self.len() - 1]);
        let n = self.len();
        let mut s = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n * self.dim);
        let mut vel = Vec::with_capacity(n * self.dim);
        for i in (0..n).rev() {
            s.push(a + b - self.s[i]);
            pos.extend_from_slice(self.position(i));
            vel.extend(self.velocity(i).iter().map(|v| -v));
        }
        Trajectory { dim: self.dim, s, positions: pos, velocities: vel, logs: Logs::default() }
    }

    pub fn interpolator(&self) -> HermiteInterp<'_> {
        HermiteInterp::new(self)
    }

    /// Writes `s, x0.., v0.., logs..` as headered CSV with LF line endings.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.write_csv_with(out, &[])
    }

    /// Like [`write_csv`](Self::write_csv) with extra per-sample columns appended.
    pub fn write_csv_with<W: Write>(&self, mut out: W, extra: &[(&str, &[f64])]) -> std::io::Result<()> {
        let logs = self.logs.columns();
        let mut header = vec!["s".to_string()];
        header.extend((0..self.dim).map(|k| format!("x{k}")));
        header.extend((0..self.dim).map(|k| format!("v{k}")));
        header.extend(logs.iter().map(|(n, _)| n.to_string()));
        header.extend(extra.iter().map(|(n, _)| n.to_string()));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![fmt17(self.s[i])];
            row.extend(self.position(i).iter().map(|x| fmt17(*x)));
            row.extend(self.velocity(i).iter().map(|x| fmt17(*x)));
            row.extend(logs.iter().map(|(_, v)| fmt17(v[i])));
            row.extend(extra.iter().map(|(_, v)| fmt17(v[i])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Relative drift `max|q − q₀| / max(|q₀|, 1e-300)` of a logged scalar.
pub fn relative_drift(values: &[f64]) -> f64 {
    let q0 = values[0];
    let spread = values.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max);
    spread / q0.abs().max(1e-300)
}

/// Absolute drift `max|q − q₀|` of a logged scalar.
pub fn absolute_drift(values: &[f64]) -> f64 {
    let q0 = values[0];
    values.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max)
}

/// Cubic Hermite interpolation of positions (from position and velocity data)
/// and of velocities (from velocity data and finite-difference accelerations).
pub struct HermiteInterp<'a> {
    traj: &'a Trajectory,
    accel: Vec<f64>,
}

impl<'a> HermiteInterp<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let accel = differentiate(&traj.s, &traj.velocities, traj.dim);
        HermiteInterp { traj, accel }
    }

    pub fn with_accelerations(traj: &'a Trajectory, accel: Vec<f64>) -> Self {
        HermiteInterp { traj, accel }
    }

    pub fn acceleration(&self, i: usize) -> &[f64] {
        let d = self.traj.dim;
        &self.accel[i * d..(i + 1) * d]
    }

    fn cell(&self, s: f64) -> usize {
        let g = &self.traj.s;
        match g.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i.min(g.len() - 2),
            Err(i) => i.saturating_sub(1).min(g.len() - 2),
        }
    }

    /// Position and velocity at parameter `s` (clamped cells at the ends).
    pub fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let tr = self.traj;
        let i = self.cell(s);
        let (s0, s1) = (tr.s[i], tr.s[i + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d = tr.dim;
        let mut pos = vec![0.0; d];
        let mut vel = vec![0.0; d];
        for k in 0..d {
            let (p0, p1) = (tr.positions[i * d + k], tr.positions[(i + 1) * d + k]);
            let (v0, v1) = (tr.velocities[i * d + k], tr.velocities[(i + 1) * d + k]);
            let (a0, a1) = (self.accel[i * d + k], self.accel[(i + 1) * d + k]);
            pos[k] = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1;
            vel[k] = h00 * v0 + h10 * h * a0 + h01 * v1 + h11 * h * a1;
        }
        (pos, vel)
    }

    /// Position only, from the cubic through positions and velocities.
    pub fn position(&self, s: f64) -> Vec<f64> {
        self.eval(s).0
    }

    /// Euclidean distance from `p` to the interpolated curve, searching the
    /// cells adjacent to the nearest sample.
    pub fn distance_to(&self, p: &[f64], near: usize) -> f64 {
        let tr = self.traj;
        let lo = near.saturating_sub(1);
        let hi = (near + 1).min(tr.len() - 1);
        let mut best = dist(p, tr.position(near));
        for c in lo..hi {
            let (a, b) = (tr.s[c], tr.s[c + 1]);
            best = best.min(golden_min(|s| dist(p, &self.position(s)), a, b, 1e-13));
        }
        best
    }
}

/// Golden-section minimum value of a unimodal function on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    argmin_golden(&f, &mut a, &mut b, tol).1
}

/// Golden-section search; returns `(argmin, min)`.
pub fn argmin_golden<F: Fn(f64) -> f64>(f: &F, a: &mut f64, b: &mut f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = *b - r * (*b - *a);
    let mut d = *a + r * (*b - *a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (*b - *a).abs() > tol {
        if fc < fd {
            *b = d;
            d = c;
            fd = fc;
            c = *b - r * (*b - *a);
            fc = f(c);
        } else {
            *a = c;
            c = d;
            fc = fd;
            d = *a + r * (*b - *a);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (*a + *b), f(0.5 * (*a + *b)));
    for cand in [(c, fc), (d, fd)] {
        if cand.1 < best.1 {
            best = cand;
        }
    }
    best
}

/// Discrete Hausdorff distance between the images of two curves: sample points
/// of each are projected onto the Hermite interpolant of the other.
pub fn hausdorff(a: &Trajectory, b: &Trajectory) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}

fn one_sided(a: &Trajectory, b: &Trajectory) -> f64 {
    let interp = b.interpolator();
    let mut worst: f64 = 0.0;
    let mut hint = 0usize;
    for i in 0..a.len() {
        let p = a.position(i);
        // nearest sample of b: local walk from the previous hint, then a global
        // check so that non-monotone correspondences are handled
        let mut near = hint;
        let mut best = dist(p, b.position(near));
        for j in 0..b.len() {
            let dj = dist(p, b.position(j));
            if dj < best {
                best = dj;
                near = j;
            }
        }
        hint = near;
        worst = worst.max(interp.distance_to(p, near));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize) -> Trajectory {
        Trajectory::from_fn(2, 0.0, 1.0, n, |s| {
            let a = 2.0 * s;
            (vec![a.cos(), a.sin()], vec![-2.0 * a.sin(), 2.0 * a.cos()])
        })
        .unwrap()
    }

    #[test]
    fn rejects_nonincreasing_grid() {
        let r = Trajectory::new(1, vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn hermite_interpolation_is_fourth_order() {
        let tr = circle(100);
        let it = tr.interpolator();
        let mut err: f64 = 0.0;
        let mut verr: f64 = 0.0;
        for k in 0..997 {
            let s = k as f64 / 997.0;
            let (p, v) = it.eval(s);
            err = err.max(dist(&p, &[(2.0 * s).cos(), (2.0 * s).sin()]));
            verr = verr.max(dist(&v, &[-2.0 * (2.0 * s).sin(), 2.0 * (2.0 * s).cos()]));
        }
        assert!(err < 1e-9, "position error {err}");
        assert!(verr < 1e-7, "velocity error {verr}");
    }

    #[test]
    fn hausdorff_of_shifted_samplings_is_small() {
        let a = circle(200);
        let b = Trajectory::from_fn(2, 0.0, 1.0, 173, |s| {
            let a = 2.0 * s;
            (vec![a.cos(), a.sin()], vec![-2.0 * a.sin(), 2.0 * a.cos()])
        })
        .unwrap();
        assert!(hausdorff(&a, &b) < 1e-9);
        let c = Trajectory::from_fn(2, 0.0, 1.0, 200, |s| {
            let a = 2.0 * s;
            (vec![1.01 * a.cos(), 1.01 * a.sin()], vec![-2.02 * a.sin(), 2.02 * a.cos()])
        })
        .unwrap();
        assert!((hausdorff(&a, &c) - 0.01).abs() < 1e-8);
    }

    #[test]
    fn csv_has_documented_columns() {
        let mut tr = circle(4);
        tr.logs.finsler = Some(vec![2.0; 5]);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "s,x0,x1,v0,v1,F");
        assert_eq!(text.lines().count(), 6);
        assert!(!text.contains('\r'));
    }
}
