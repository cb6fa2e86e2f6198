//! Small dense solvers and quadrature/differencing rules on sampled grids.

use crate::dual::Real;
use crate::error::{GeoError, Result};

/// Solves `a·x = b` for a row-major `n×n` matrix by Gaussian elimination with
/// partial pivoting. Works at any dual nesting, pivoting on the plain value.
pub fn solve<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .value()
                    .abs()
                    .total_cmp(&m[j * n + col].value().abs())
            })
            .unwrap();
        if m[piv * n + col].value().abs() < 1e-300 {
            return Err(GeoError::Singular);
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let inv = T::one() / m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] * inv;
            if f.value() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = m[col * n + k];
                m[row * n + k] -= f * t;
            }
            let t = x[col];
            x[row] -= f * t;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Ok(x)
}

/// Finite-difference weights for the first derivative at `z` from values at
/// `nodes` (Fornberg's recursion restricted to orders 0 and 1).
pub fn fd_weights(z: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// Stencil indices for a five-point derivative at sample `i` of `len` samples.
pub fn stencil5(i: usize, len: usize) -> std::ops::Range<usize> {
    let width = 5.min(len);
    let start = i.saturating_sub(width / 2).min(len - width);
    start..start + width
}

/// Differentiates sampled vector data `values[i*dim..(i+1)*dim]` along the grid
/// `s` with five-point (fourth-order) stencils, one-sided near the ends.
pub fn differentiate(s: &[f64], values: &[f64], dim: usize) -> Vec<f64> {
    let len = s.len();
    let mut out = vec![0.0; values.len()];
    for i in 0..len {
        let r = stencil5(i, len);
        let w = fd_weights(s[i], &s[r.clone()]);
        for (wk, j) in w.iter().zip(r) {
            for d in 0..dim {
                out[i * dim + d] += wk * values[j * dim + d];
            }
        }
    }
    out
}

/// Exact integrals over `[x0,x1]` and `[x1,x2]` of the quadratic through three points.
fn quadratic_panel(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    let first = h0 / 6.0
        * (f[0] * (2.0 * h0 + 3.0 * h1) / (h0 + h1) + f[1] * (h0 + 3.0 * h1) / h1
            - f[2] * h0 * h0 / (h1 * (h0 + h1)));
    let second = h1 / 6.0
        * (f[2] * (2.0 * h1 + 3.0 * h0) / (h0 + h1) + f[1] * (h1 + 3.0 * h0) / h0
            - f[0] * h1 * h1 / (h0 * (h0 + h1)));
    (first, second)
}

/// Cumulative composite Simpson integral on a (possibly nonuniform) grid.
///
/// Pairs of intervals share one interpolating quadratic, so the final entry is
/// the composite Simpson rule. With an odd interval count the last interval
/// reuses the quadratic through the final three samples.
pub fn cumulative_simpson(s: &[f64], f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (s[1] - s[0]) * (f[0] + f[1]);
        return out;
    }
    let mut i = 0;
    while i + 2 < n {
        let (a, b) = quadratic_panel([s[i], s[i + 1], s[i + 2]], [f[i], f[i + 1], f[i + 2]]);
        out[i + 1] = out[i] + a;
        out[i + 2] = out[i + 1] + b;
        i += 2;
    }
    if i + 1 == n - 1 {
        let (_, b) = quadratic_panel([s[i - 1], s[i], s[i + 1]], [f[i - 1], f[i], f[i + 1]]);
        out[i + 1] = out[i] + b;
    }
    out
}

/// Composite Simpson integral on a (possibly nonuniform) grid.
pub fn simpson(s: &[f64], f: &[f64]) -> f64 {
    cumulative_simpson(s, f).last().copied().unwrap_or(0.0)
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_small_system() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert_relative_eq!(lhs, [1.0, 2.0, 3.0][r], epsilon = 1e-14);
        }
        assert_eq!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]), Err(GeoError::Singular));
    }

    #[test]
    fn fd_weights_are_exact_on_quartics() {
        let nodes = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = fd_weights(0.2, &nodes);
        let f = |x: f64| 1.0 - 2.0 * x + x.powi(3) - 4.0 * x.powi(4);
        let d: f64 = w.iter().zip(nodes).map(|(w, x)| w * f(x)).sum();
        let exact = -2.0 + 3.0 * 0.04 - 16.0 * 0.008;
        assert_relative_eq!(d, exact, epsilon = 1e-11);
    }

    #[test]
    fn simpson_is_exact_on_cubics_nonuniform() {
        let s = [0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let f: Vec<f64> = s.iter().map(|x| x * x).collect();
        // odd interval count exercises the trailing panel; quadratics stay exact
        assert_relative_eq!(simpson(&s, &f), 1.0 / 3.0, epsilon = 1e-14);
        let s = linspace(0.0, 1.0, 11);
        let f: Vec<f64> = s.iter().map(|x| x * x * x).collect();
        assert_relative_eq!(simpson(&s, &f), 0.25, epsilon = 1e-14);
        let c = cumulative_simpson(&s, &f);
        assert_relative_eq!(c[4], 0.4f64.powi(4) / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (m, b) = fit_line(&x, &y);
        assert_relative_eq!(m, 2.0, epsilon = 1e-14);
        assert_relative_eq!(b, -1.0, epsilon = 1e-14);
    }
}
