//! Gauss-Legendre rules and composite integration helpers.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are found by Newton iteration on `P_n` from the Chebyshev-like
/// initial guess; accurate to machine precision for `n` up to a few hundred.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// Composite 20-point Gauss-Legendre integration of `f` over `[a, b]` split
/// into `panels` equal panels.
pub fn composite_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(20);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(mid + 0.5 * width * xi);
        }
        total += 0.5 * width * acc;
    }
    total
}

/// Trapezoid sum on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Chebyshev-Lobatto grid on `[a, b]` (ascending) with Clenshaw-Curtis
/// weights and the spectral differentiation matrix.
pub struct ChebyshevGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub diff: DMatrix<f64>,
}

impl ChebyshevGrid {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 2, "need at least three nodes");
        let nf = n as f64;
        // Reference nodes x_j = −cos(πj/n), ascending on [−1, 1].
        let theta: Vec<f64> = (0..=n).map(|j| PI * j as f64 / nf).collect();
        let x: Vec<f64> = theta.iter().map(|t| -t.cos()).collect();
        let mut w = vec![0.0; n + 1];
        if n % 2 == 0 {
            w[0] = 1.0 / (nf * nf - 1.0);
        } else {
            w[0] = 1.0 / (nf * nf);
        }
        w[n] = w[0];
        for j in 1..n {
            let mut v = 1.0;
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta[j]).cos() / (4.0 * kf * kf - 1.0);
            }
            if n % 2 == 0 {
                v -= (nf * theta[j]).cos() / (nf * nf - 1.0);
            }
            w[j] = 2.0 * v / nf;
        }
        let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 } * if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i != j {
                    d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
                }
            }
            let row: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = -row;
        }
        let half = 0.5 * (b - a);
        Self {
            nodes: x.iter().map(|xi| 0.5 * (a + b) + half * xi).collect(),
            weights: w.iter().map(|wi| half * wi).collect(),
            diff: d / half,
        }
    }

    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        (&self.diff * DVector::from_column_slice(values)).iter().copied().collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_matches_closed_form() {
        let v = composite_gl(|x: f64| x.exp(), 0.0, 3.0, 4);
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_grid_is_spectral() {
        for n in [16, 17] {
            let g = ChebyshevGrid::new(n, 0.5, 2.0);
            let f: Vec<f64> = g.nodes.iter().map(|x| (2.0 * x).sin()).collect();
            let exact = 0.5 * ((1.0f64).cos() - (4.0f64).cos());
            assert!((g.integrate(&f) - exact).abs() < 1e-12);
            let df = g.differentiate(&f);
            for (x, d) in g.nodes.iter().zip(&df) {
                assert!((d - 2.0 * (2.0 * x).cos()).abs() < 1e-9);
            }
        }
    }
}
