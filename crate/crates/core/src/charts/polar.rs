//! Log-radial chart around a fixed point, one ODE per cross-section block.
//!
//! A `U(2)`-invariant Kähler metric `A(dr² + r²σ₁²) + B r²(σ₂² + σ₃²)` with a
//! radial conformal factor `h` gives, for the mode of degree `k` and Hopf
//! charge `m`, in `s = log r` and `u = f/h`,
//!
//! `□f = −h³/(ABρ²) ∂_s(Bρ ∂_s u) + h²((k(k+2) − m²)A + m²B)/(ABρ) · f`.
//!
//! The radial part is discretised in conservative form with `Bρ` sampled at
//! half nodes, so constants in `u` are annihilated exactly and the matrix is
//! symmetric for the weights `h⁻⁴ABρ²Δs`. Where `A = B = 1` and `h = r`, the
//! stencil reduces to `−δ² + c_Δ + k(k+2)` in `f`, which is the cylinder
//! operator.

use crate::cylinder_linear::{discrete_decay_rate, fitted_mass};
use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Condition at the small-radius edge of the chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InnerEdge {
    /// Edge next to the exceptional sphere: zero flux for Hopf-invariant
    /// modes, zero value for the others.
    Bolt,
    /// Exactly cylindrical end continuing to `s → −∞`.
    Cylinder,
}

/// Condition at the large-radius edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OuterEdge {
    /// The value at `s_n` is supplied by the caller.
    Dirichlet,
    /// Exactly cylindrical end continuing to `s → ∞`.
    Cylinder,
}

/// Metric weights and conformal factor at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialCoefficients {
    pub a: f64,
    pub b: f64,
    pub h: f64,
}

impl RadialCoefficients {
    pub const FLAT_CONE: fn(f64) -> RadialCoefficients = |r| RadialCoefficients { a: 1.0, b: 1.0, h: r };
}

/// A mode block: degree `k` and Hopf charge `|m|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Block {
    pub degree: usize,
    pub charge: usize,
}

#[derive(Clone, Debug)]
pub struct PolarChart {
    pub s0: f64,
    pub ds: f64,
    pub n: usize,
    pub inner: InnerEdge,
    pub outer: OuterEdge,
    pub coef: Vec<RadialCoefficients>,
    /// `Bρ` at `s_i − Δs/2`, `i = 0..=n`.
    flux: Vec<f64>,
    /// `h` at `s_{−1}` and `s_n`.
    h_ghost: [f64; 2],
}

impl PolarChart {
    /// Nodes `s_i = s0 + iΔs`, `i < n`. With a Dirichlet outer edge the
    /// boundary value lives at `s_n`.
    pub fn new<F>(s0: f64, ds: f64, n: usize, inner: InnerEdge, outer: OuterEdge, coefficients: F) -> Result<Self>
    where
        F: Fn(f64) -> RadialCoefficients,
    {
        if n < 5 || !(ds > 0.0) {
            return Err(Error::Config(format!("polar chart needs n ≥ 5 and Δs > 0 (n = {n}, Δs = {ds})")));
        }
        let coef: Vec<RadialCoefficients> = (0..n).map(|i| coefficients((s0 + i as f64 * ds).exp())).collect();
        if let Some(c) = coef.iter().find(|c| !(c.a > 0.0 && c.b > 0.0 && c.h > 0.0)) {
            return Err(Error::Positivity(format!("nonpositive radial coefficients {c:?}")));
        }
        let flux = (0..=n)
            .map(|i| {
                let s = s0 + (i as f64 - 0.5) * ds;
                coefficients(s.exp()).b * (2.0 * s).exp()
            })
            .collect();
        let h_ghost = [coefficients((s0 - ds).exp()).h, coefficients((s0 + n as f64 * ds).exp()).h];
        Ok(Self {
            s0,
            ds,
            n,
            inner,
            outer,
            coef,
            flux,
            h_ghost,
        })
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.ds
    }

    pub fn r(&self, i: usize) -> f64 {
        self.s(i).exp()
    }

    /// Radius of the outer edge node `s_n`.
    pub fn edge_radius(&self) -> f64 {
        self.s(self.n).exp()
    }

    /// `h` at the outer edge node.
    pub fn edge_h(&self) -> f64 {
        self.h_ghost[1]
    }

    /// `h` at the ghost node `s_{−1}`.
    pub fn inner_ghost_h(&self) -> f64 {
        self.h_ghost[0]
    }

    /// Radial quadrature weight of `dμ = h⁻⁴ dvol_ω` at node `i` (per unit
    /// cross-section measure).
    pub fn weight(&self, i: usize) -> f64 {
        let c = self.coef[i];
        let rho = (2.0 * self.s(i)).exp();
        c.a * c.b * rho * rho * self.ds / c.h.powi(4)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    fn row_scale(&self, i: usize) -> f64 {
        let c = self.coef[i];
        let rho = (2.0 * self.s(i)).exp();
        c.h.powi(3) / (c.a * c.b * rho * rho * self.ds * self.ds)
    }

    fn angular(&self, i: usize, block: Block) -> f64 {
        let c = self.coef[i];
        let rho = (2.0 * self.s(i)).exp();
        let (k, m) = (block.degree as f64, block.charge as f64);
        c.h * c.h * ((k * (k + 2.0) - m * m) * c.a + m * m * c.b) / (c.a * c.b * rho)
    }

    fn decay_ghost(&self, block: Block) -> f64 {
        let k = block.degree as f64;
        let mu = fitted_mass(self.ds) + k * (k + 2.0);
        (-discrete_decay_rate(mu, self.ds) * self.ds).exp()
    }

    /// Operator of one block acting on nodal values of `f`, edge conditions
    /// folded in. A Dirichlet edge value enters through
    /// [`Self::boundary_coupling`].
    pub fn block_operator(&self, block: Block) -> Tridiagonal {
        let n = self.n;
        let mut op = Tridiagonal::zeros(n);
        let h = |j: isize| -> f64 {
            if j < 0 {
                self.h_ghost[0]
            } else if j as usize >= n {
                self.h_ghost[1]
            } else {
                self.coef[j as usize].h
            }
        };
        for i in 0..n {
            let c = self.row_scale(i);
            let (fl, fr) = (self.flux[i], self.flux[i + 1]);
            let hi = self.coef[i].h;
            op.diag[i] = c * (fl + fr) / hi + self.angular(i, block);
            op.lower[i] = -c * fl / h(i as isize - 1);
            op.upper[i] = -c * fr / h(i as isize + 1);
        }
        match self.inner {
            InnerEdge::Bolt if block.charge == 0 => op.diag[0] -= self.row_scale(0) * self.flux[0] / self.coef[0].h,
            InnerEdge::Bolt => {}
            InnerEdge::Cylinder => op.diag[0] += op.lower[0] * self.decay_ghost(block),
        }
        op.lower[0] = 0.0;
        if self.outer == OuterEdge::Cylinder {
            op.diag[n - 1] += op.upper[n - 1] * self.decay_ghost(block);
        }
        op.upper[n - 1] = 0.0;
        op
    }

    /// Coefficient multiplying the Dirichlet edge value in the last row.
    pub fn boundary_coupling(&self) -> f64 {
        match self.outer {
            OuterEdge::Dirichlet => -self.row_scale(self.n - 1) * self.flux[self.n] / self.h_ghost[1],
            OuterEdge::Cylinder => 0.0,
        }
    }

    pub fn apply(&self, block: Block, f: &[f64], boundary: f64) -> Vec<f64> {
        let mut out = self.block_operator(block).apply(f);
        out[self.n - 1] += self.boundary_coupling() * boundary;
        out
    }

    pub fn solve(&self, block: Block, rhs: &[f64], boundary: f64) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Shape {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let mut b = rhs.to_vec();
        b[self.n - 1] -= self.boundary_coupling() * boundary;
        self.block_operator(block).solve(&b)
    }

    /// Eigenvalues of the block operator (self-adjoint for the chart
    /// weights), ascending.
    pub fn block_eigenvalues(&self, block: Block) -> Vec<f64> {
        let op = self.block_operator(block);
        let w = self.weights();
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = op.diag[i];
            if i + 1 < n {
                let off = op.upper[i] * (w[i] / w[i + 1]).sqrt();
                m[(i, i + 1)] = off;
                m[(i + 1, i)] = off;
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// First and second derivatives of uniformly sampled data, fourth order
/// (five-point stencils, one-sided near the ends).
pub fn fd_derivatives(values: &[f64], dx: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = values.len();
    if n < 5 {
        return Err(Error::Shape { expected: 5, got: n });
    }
    let f = values;
    let (c1, c2) = (1.0 / (12.0 * dx), 1.0 / (12.0 * dx * dx));
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let (a, b) = if i >= 2 && i + 2 < n {
            (
                f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2],
                -f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2],
            )
        } else {
            let (forward, off) = if i < 2 { (true, i) } else { (false, n - 1 - i) };
            let g = |j: usize| if forward { f[j] } else { f[n - 1 - j] };
            let sign = if forward { 1.0 } else { -1.0 };
            let (a, b) = if off == 0 {
                (
                    -25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4),
                    35.0 * g(0) - 104.0 * g(1) + 114.0 * g(2) - 56.0 * g(3) + 11.0 * g(4),
                )
            } else {
                (
                    -3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4),
                    11.0 * g(0) - 20.0 * g(1) + 6.0 * g(2) + 4.0 * g(3) - g(4),
                )
            };
            (sign * a, b)
        };
        d1[i] = a * c1;
        d2[i] = b * c2;
    }
    Ok((d1, d2))
}
