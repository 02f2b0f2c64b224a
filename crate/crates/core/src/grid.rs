//! Uniform-grid helpers shared by every scheme: nodes, quadrature,
//! finite-difference slopes, the tridiagonal solve and resampling.

/// Nodes `a + j (b - a) / n` for `j = 0..=n`, with the last node pinned to `b`.
pub fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let dx = (b - a) / n as f64;
    let mut x: Vec<f64> = (0..=n).map(|j| a + j as f64 * dx).collect();
    x[n] = b;
    x
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..n - 1].iter().sum();
    dx * (interior + 0.5 * (values[0] + values[n - 1]))
}

/// Second-order one-sided slope at the first node.
pub fn slope_left(h: &[f64], dx: f64) -> f64 {
    (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dx)
}

/// Second-order one-sided slope at the last node.
pub fn slope_right(h: &[f64], dx: f64) -> f64 {
    let n = h.len() - 1;
    (3.0 * h[n] - 4.0 * h[n - 1] + h[n - 2]) / (2.0 * dx)
}

/// Central differences in the interior, 3-point one-sided at both ends.
pub fn node_slopes(h: &[f64], dx: f64) -> Vec<f64> {
    let n = h.len() - 1;
    let mut s = Vec::with_capacity(n + 1);
    s.push(slope_left(h, dx));
    for j in 1..n {
        s.push((h[j + 1] - h[j - 1]) / (2.0 * dx));
    }
    s.push(slope_right(h, dx));
    s
}

/// Arc length of the piecewise-linear interpolant.
pub fn polyline_length(h: &[f64], dx: f64) -> f64 {
    h.windows(2)
        .map(|p| (dx * dx + (p[1] - p[0]).powi(2)).sqrt())
        .sum()
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Linear interpolation of samples on the uniform grid over `[a, b]`.
/// Outside the interval the end values are held.
pub fn interpolate(a: f64, b: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len() - 1;
    let dx = (b - a) / n as f64;
    if x <= a {
        return values[0];
    }
    if x >= b {
        return values[n];
    }
    let t = (x - a) / dx;
    let j = (t.floor() as usize).min(n - 1);
    let frac = t - j as f64;
    values[j] * (1.0 - frac) + values[j + 1] * frac
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
