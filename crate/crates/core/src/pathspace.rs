//! Discretized `H¹₀` path space: segment quadrature grids, piecewise-linear
//! hat fields, sampled paths and fields, and the first and second variations
//! of the energy on them.

use crate::error::{GeoError, Result};
use crate::finsler::{energy_segments, RandersMetric};
use crate::numeric::{linspace, simpson};
use crate::trajectory::{HermiteInterp, Trajectory};

/// Consecutive parameter intervals, each split into an even number of
/// Simpson panels. Variations may have kinks at the breaks only.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentGrid {
    breaks: Vec<f64>,
    panels: usize,
}

impl SegmentGrid {
    pub fn new(breaks: Vec<f64>, panels: usize) -> Result<Self> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeoError::OutOfRange("segment breaks must be strictly increasing".into()));
        }
        if panels < 2 || panels % 2 != 0 {
            return Err(GeoError::OutOfRange("panels per segment must be even and ≥ 2".into()));
        }
        Ok(SegmentGrid { breaks, panels })
    }

    /// Uniform grid with `n` segments on `[0, 1]`.
    pub fn uniform(n: usize, panels: usize) -> Result<Self> {
        if n == 0 {
            return Err(GeoError::OutOfRange("need at least one segment".into()));
        }
        SegmentGrid::new(linspace(0.0, 1.0, n + 1), panels)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn segments(&self) -> usize {
        self.breaks.len() - 1
    }

    /// Quadrature points of segment `k`, endpoints included.
    pub fn points(&self, k: usize) -> Vec<f64> {
        linspace(self.breaks[k], self.breaks[k + 1], self.panels + 1)
    }

    /// Index of the segment containing `s` (right-continuous, last segment closed).
    pub fn segment_of(&self, s: f64) -> usize {
        match self.breaks.binary_search_by(|b| b.total_cmp(&s)) {
            Ok(i) => i.min(self.segments() - 1),
            Err(i) => i.saturating_sub(1).min(self.segments() - 1),
        }
    }
}

/// A continuous path stored as one smooth trajectory per segment.
#[derive(Clone, Debug)]
pub struct SegmentedPath {
    grid: SegmentGrid,
    segments: Vec<Trajectory>,
}

impl SegmentedPath {
    pub fn from_fn(grid: &SegmentGrid, dim: usize, f: impl Fn(f64) -> (Vec<f64>, Vec<f64>)) -> Result<Self> {
        let segments = (0..grid.segments())
            .map(|k| {
                let s = grid.points(k);
                let mut pos = Vec::with_capacity(s.len() * dim);
                let mut vel = Vec::with_capacity(s.len() * dim);
                for &si in &s {
                    let (x, v) = f(si);
                    pos.extend(x);
                    vel.extend(v);
                }
                Trajectory::new(dim, s, pos, vel)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SegmentedPath { grid: grid.clone(), segments })
    }

    /// Samples a smooth curve through its Hermite interpolant.
    pub fn from_interp(grid: &SegmentGrid, interp: &HermiteInterp<'_>, dim: usize) -> Result<Self> {
        SegmentedPath::from_fn(grid, dim, |s| interp.eval(s))
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn segments(&self) -> &[Trajectory] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.segments[0].dim()
    }

    /// `γ + r·ξ` on the same quadrature points.
    pub fn perturbed(&self, field: &SampledField, r: f64) -> Result<SegmentedPath> {
        let segments = self.perturbed_segments(field, r, 0..self.segments.len())?;
        Ok(SegmentedPath { grid: self.grid.clone(), segments })
    }

    /// Segments `range` of `γ + r·ξ`.
    pub fn perturbed_segments(&self, field: &SampledField, r: f64, range: std::ops::Range<usize>) -> Result<Vec<Trajectory>> {
        if field.grid != self.grid || field.dim != self.dim() {
            return Err(GeoError::OutOfRange("field and path live on different grids".into()));
        }
        range
            .map(|k| {
                let seg = &self.segments[k];
                let pos = seg.positions().iter().zip(&field.values[k]).map(|(x, w)| x + r * w).collect();
                let vel = seg.velocities().iter().zip(&field.derivs[k]).map(|(v, w)| v + r * w).collect();
                Trajectory::new(seg.dim(), seg.grid().to_vec(), pos, vel)
            })
            .collect::<Result<Vec<_>>>()
    }

    /// `E = ½∫F²`, Simpson per segment.
    pub fn energy(&self, metric: &RandersMetric) -> Result<f64> {
        energy_segments(metric, &self.segments)
    }
}

/// A vector field sampled on a segment grid with one-sided derivatives,
/// so fields with kinks at the breaks are represented exactly.
#[derive(Clone, Debug)]
pub struct SampledField {
    grid: SegmentGrid,
    dim: usize,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl SampledField {
    /// `f(k, s)` returns value and derivative at `s` as seen from segment `k`.
    pub fn from_fn(grid: &SegmentGrid, dim: usize, f: impl Fn(usize, f64) -> (Vec<f64>, Vec<f64>)) -> Self {
        let mut values = Vec::with_capacity(grid.segments());
        let mut derivs = Vec::with_capacity(grid.segments());
        for k in 0..grid.segments() {
            let (mut v, mut d) = (Vec::new(), Vec::new());
            for s in grid.points(k) {
                let (a, b) = f(k, s);
                v.extend(a);
                d.extend(b);
            }
            values.push(v);
            derivs.push(d);
        }
        SampledField { grid: grid.clone(), dim, values, derivs }
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value and derivative at point `i` of segment `k`.
    pub fn at(&self, k: usize, i: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        (&self.values[k][i * d..(i + 1) * d], &self.derivs[k][i * d..(i + 1) * d])
    }

    /// `ca·self + cb·other` on the shared grid.
    pub fn combine(&self, ca: f64, other: &SampledField, cb: f64) -> SampledField {
        let mix = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| ca * p + cb * q).collect()).collect()
        };
        SampledField {
            grid: self.grid.clone(),
            dim: self.dim,
            values: mix(&self.values, &other.values),
            derivs: mix(&self.derivs, &other.derivs),
        }
    }

    /// `∫ ξ̇·η̇`, Simpson per segment.
    pub fn h10_inner(&self, other: &SampledField) -> f64 {
        (0..self.grid.segments())
            .map(|k| {
                let s = self.grid.points(k);
                let vals: Vec<f64> = (0..s.len())
                    .map(|i| self.at(k, i).1.iter().zip(other.at(k, i).1).map(|(a, b)| a * b).sum())
                    .collect();
                simpson(&s, &vals)
            })
            .sum()
    }
}

/// Piecewise-linear, endpoint-vanishing vector field given by nodal values.
#[derive(Clone, Debug, PartialEq)]
pub struct H10Field {
    dim: usize,
    nodal: Vec<f64>,
}

impl H10Field {
    pub fn new(dim: usize, nodal: Vec<f64>) -> Result<Self> {
        if dim == 0 || nodal.len() % dim != 0 || nodal.len() < 2 * dim {
            return Err(GeoError::OutOfRange("nodal layout".into()));
        }
        let last = nodal.len() - dim;
        if nodal[..dim].iter().chain(&nodal[last..]).any(|&v| v != 0.0) {
            return Err(GeoError::OutOfRange("H¹₀ field must vanish at both endpoints".into()));
        }
        Ok(H10Field { dim, nodal })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodal[j * self.dim..(j + 1) * self.dim]
    }
}

/// Uniform `N`-element discretization of `H¹₀([0,1])` with hat functions and
/// the inner product `∫ ξ̇·η̇` (Euclidean auxiliary metric on the chart).
#[derive(Clone, Debug, PartialEq)]
pub struct PathGridH10 {
    elements: usize,
    grid: SegmentGrid,
}

/// Simpson panels per element used by default.
pub const DEFAULT_PANELS: usize = 4;

impl PathGridH10 {
    pub fn new(elements: usize) -> Result<Self> {
        PathGridH10::with_panels(elements, DEFAULT_PANELS)
    }

    pub fn with_panels(elements: usize, panels: usize) -> Result<Self> {
        if elements < 2 {
            return Err(GeoError::OutOfRange("need at least two elements".into()));
        }
        Ok(PathGridH10 { elements, grid: SegmentGrid::uniform(elements, panels)? })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.breaks()
    }

    /// Number of hat fields `dim·(N − 1)`.
    pub fn basis_len(&self, dim: usize) -> usize {
        dim * (self.elements - 1)
    }

    /// Hat at interior node `k / dim + 1` in component `k % dim`.
    pub fn basis_field(&self, dim: usize, k: usize) -> H10Field {
        let mut nodal = vec![0.0; (self.elements + 1) * dim];
        nodal[(k / dim + 1) * dim + k % dim] = 1.0;
        H10Field { dim, nodal }
    }

    /// Elements `[lo, hi)` on which basis field `k` is nonzero.
    pub fn support(&self, dim: usize, k: usize) -> std::ops::Range<usize> {
        let j = k / dim + 1;
        j - 1..j + 1
    }

    pub fn sample(&self, field: &H10Field) -> SampledField {
        let nodes = self.nodes();
        let d = field.dim;
        SampledField::from_fn(&self.grid, d, |k, s| {
            let h = nodes[k + 1] - nodes[k];
            let t = (s - nodes[k]) / h;
            let (a, b) = (field.node(k), field.node(k + 1));
            let val = (0..d).map(|c| (1.0 - t) * a[c] + t * b[c]).collect();
            let der = (0..d).map(|c| (b[c] - a[c]) / h).collect();
            (val, der)
        })
    }

    /// Exact `∫ ξ̇·η̇` for piecewise-linear fields.
    pub fn h10_inner(&self, a: &H10Field, b: &H10Field) -> f64 {
        let nodes = self.nodes();
        (0..self.elements)
            .map(|k| {
                let h = nodes[k + 1] - nodes[k];
                (0..a.dim)
                    .map(|c| (a.node(k + 1)[c] - a.node(k)[c]) * (b.node(k + 1)[c] - b.node(k)[c]))
                    .sum::<f64>()
                    / h
            })
            .sum()
    }

    /// Samples a curve on this grid through its Hermite interpolant.
    pub fn sample_curve(&self, traj: &Trajectory) -> Result<SegmentedPath> {
        SegmentedPath::from_interp(&self.grid, &HermiteInterp::new(traj), traj.dim())
    }
}

/// First variation `dE(γ)[ξ] = ½∫ ∂_qF²·ξ + ∂_vF²·ξ̇`.
pub fn first_variation(metric: &RandersMetric, path: &SegmentedPath, xi: &SampledField) -> Result<f64> {
    let n = metric.dim();
    let mut total = 0.0;
    for (k, seg) in path.segments().iter().enumerate() {
        let vals = (0..seg.len())
            .map(|i| {
                let j = metric.jet(seg.position(i), seg.velocity(i))?;
                let (w, wd) = xi.at(k, i);
                Ok(0.5 * (0..n).map(|c| j.dq[c] * w[c] + j.dv[c] * wd[c]).sum::<f64>())
            })
            .collect::<Result<Vec<_>>>()?;
        total += simpson(seg.grid(), &vals);
    }
    Ok(total)
}

/// Second variation
/// `½∫ ∂_qqF²[ξ,η] + ∂_qvF²[ξ,η̇] + ∂_qvF²[η,ξ̇] + ∂_vvF²[ξ̇,η̇]`.
pub fn second_variation(metric: &RandersMetric, path: &SegmentedPath, xi: &SampledField, eta: &SampledField) -> Result<f64> {
    let mut total = 0.0;
    for (k, seg) in path.segments().iter().enumerate() {
        let vals = (0..seg.len())
            .map(|i| {
                let j = metric.jet(seg.position(i), seg.velocity(i))?;
                let (a, ad) = xi.at(k, i);
                let (b, bd) = eta.at(k, i);
                Ok(0.5 * four_term(&j, a, ad, b, bd))
            })
            .collect::<Result<Vec<_>>>()?;
        total += simpson(seg.grid(), &vals);
    }
    Ok(total)
}

pub(crate) fn four_term(j: &crate::finsler::FinslerJet, a: &[f64], ad: &[f64], b: &[f64], bd: &[f64]) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            acc += a[r] * j.dqq[(r, c)] * b[c]
                + a[r] * j.dqv[(r, c)] * bd[c]
                + b[r] * j.dqv[(r, c)] * ad[c]
                + ad[r] * j.dvv[(r, c)] * bd[c];
        }
    }
    acc
}
