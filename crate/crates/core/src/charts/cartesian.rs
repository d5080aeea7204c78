//! Periodic Cartesian grid on `ℝ⁴/(pℤ⁴)` for the flat part of the torus.
//!
//! With flat `ω` and `u = f/h`, `□f = h³ L u` where `L` is the positive
//! Laplacian, discretised with the compact nine-point stencil. Nodes closer
//! than `r_in` to the origin form a hole whose values are prescribed.

use crate::error::{Error, Result};
use crate::hermitian::Herm2;
use crate::linalg::{conjugate_gradient, CgStats};
use num_complex::Complex64;

/// `n⁴` nodes `x = i·d` (`d = p/n`), coordinates wrapped into `[−p/2, p/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianGrid {
    pub n: usize,
    pub period: f64,
}

impl CartesianGrid {
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, m: [usize; 4]) -> usize {
        ((m[0] * self.n + m[1]) * self.n + m[2]) * self.n + m[3]
    }

    pub fn multi(&self, mut idx: usize) -> [usize; 4] {
        let mut m = [0; 4];
        for k in (0..4).rev() {
            m[k] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    pub fn position(&self, idx: usize) -> [f64; 4] {
        let d = self.spacing();
        let half = self.n / 2;
        self.multi(idx).map(|i| if i >= half { (i as f64 - self.n as f64) * d } else { i as f64 * d })
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.position(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Neighbour along axis `k` in direction `±1`.
    pub fn neighbor(&self, idx: usize, k: usize, forward: bool) -> usize {
        let mut m = self.multi(idx);
        m[k] = if forward { (m[k] + 1) % self.n } else { (m[k] + self.n - 1) % self.n };
        self.index(m)
    }

    /// Node index for a possibly out-of-range multi-index.
    pub fn wrap(&self, m: [i64; 4]) -> usize {
        let n = self.n as i64;
        self.index(m.map(|v| v.rem_euclid(n) as usize))
    }
}

/// The grid with a hole of radius `r_in` around the origin and the conformal
/// factor sampled at every node.
#[derive(Clone, Debug)]
pub struct CartesianChart {
    pub grid: CartesianGrid,
    pub r_in: f64,
    /// Conformal factor at each node.
    pub h: Vec<f64>,
    /// Node indices of the unknowns (`r ≥ r_in`).
    pub unknowns: Vec<usize>,
    /// Unknown number of each node, `usize::MAX` in the hole.
    slot: Vec<usize>,
    /// Per unknown, the eight neighbour node indices.
    stencil: Vec<[usize; 8]>,
}

impl CartesianChart {
    pub fn new<H: Fn(f64) -> f64>(grid: CartesianGrid, r_in: f64, h: H) -> Result<Self> {
        if grid.n < 4 || grid.n % 2 != 0 {
            return Err(Error::Config(format!("Cartesian grid needs an even n ≥ 4, got {}", grid.n)));
        }
        if !(r_in > 0.0 && r_in < 0.5 * grid.period) {
            return Err(Error::Config(format!("hole radius {r_in} does not fit the period {}", grid.period)));
        }
        let len = grid.len();
        let h: Vec<f64> = (0..len).map(|i| h(grid.radius(i))).collect();
        if (0..len).any(|i| grid.radius(i) >= 0.5 * r_in && !(h[i] > 0.0)) {
            return Err(Error::Positivity("conformal factor must be positive outside the hole core".into()));
        }
        let mut slot = vec![usize::MAX; len];
        let mut unknowns = Vec::new();
        for idx in 0..len {
            if grid.radius(idx) >= r_in {
                slot[idx] = unknowns.len();
                unknowns.push(idx);
            }
        }
        let stencil = unknowns
            .iter()
            .map(|&idx| {
                let mut s = [0; 8];
                for k in 0..4 {
                    s[2 * k] = grid.neighbor(idx, k, false);
                    s[2 * k + 1] = grid.neighbor(idx, k, true);
                }
                s
            })
            .collect();
        Ok(Self {
            grid,
            r_in,
            h,
            unknowns,
            slot,
            stencil,
        })
    }

    pub fn is_unknown(&self, idx: usize) -> bool {
        self.slot[idx] != usize::MAX
    }

    /// Positive Laplacian of nodal data at every unknown node (zero in the
    /// hole).
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.grid.spacing().powi(2);
        let mut out = vec![0.0; u.len()];
        for (k, &idx) in self.unknowns.iter().enumerate() {
            let s: f64 = self.stencil[k].iter().map(|&j| u[j]).sum();
            out[idx] = (8.0 * u[idx] - s) * inv;
        }
        out
    }

    /// `□f = h³ L(f/h)` at the unknown nodes.
    pub fn apply_box(&self, f: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = f.iter().zip(&self.h).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
        let mut out = self.laplacian(&u);
        for (o, h) in out.iter_mut().zip(&self.h) {
            *o *= h * h * h;
        }
        out
    }

    /// Solve `□f = ρ` at the unknowns; hole entries of `f` are the
    /// prescribed data and are left untouched. `f` also carries the initial
    /// guess.
    pub fn solve(&self, rho: &[f64], f: &mut [f64], tol: f64) -> Result<CgStats> {
        let len = self.grid.len();
        if rho.len() != len || f.len() != len {
            return Err(Error::Shape {
                expected: len,
                got: rho.len().min(f.len()),
            });
        }
        let inv = 1.0 / self.grid.spacing().powi(2);
        let mut b: Vec<f64> = self.unknowns.iter().map(|&i| rho[i] / self.h[i].powi(3)).collect();
        for (k, bk) in b.iter_mut().enumerate() {
            for &j in &self.stencil[k] {
                if self.slot[j] == usize::MAX {
                    *bk += inv * f[j] / self.h[j];
                }
            }
        }
        let mut x: Vec<f64> = self.unknowns.iter().map(|&i| f[i] / self.h[i]).collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            for (k, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for &j in &self.stencil[k] {
                    let t = self.slot[j];
                    if t != usize::MAX {
                        s += v[t];
                    }
                }
                *o = (8.0 * v[k] - s) * inv;
            }
        };
        let precondition = |r: &[f64], z: &mut [f64]| {
            let c = 1.0 / (8.0 * inv);
            for (zi, ri) in z.iter_mut().zip(r) {
                *zi = c * ri;
            }
        };
        let stats = conjugate_gradient(apply, precondition, &b, &mut x, tol, 20 * self.grid.n.pow(2) + 2000)?;
        for (k, &i) in self.unknowns.iter().enumerate() {
            f[i] = x[k] * self.h[i];
        }
        Ok(stats)
    }

    /// Periodic tensor-cubic interpolation of nodal data at `x`.
    pub fn interpolate(&self, values: &[f64], x: [f64; 4]) -> f64 {
        let d = self.grid.spacing();
        let mut base = [0i64; 4];
        let mut w = [[0.0; 4]; 4];
        for k in 0..4 {
            let xi = x[k] / d;
            let i0 = xi.floor();
            base[k] = i0 as i64 - 1;
            w[k] = cubic_weights(xi - i0);
        }
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let wab = w[0][a] * w[1][b];
                for c in 0..4 {
                    let wabc = wab * w[2][c];
                    for e in 0..4 {
                        let idx = self.grid.wrap([
                            base[0] + a as i64,
                            base[1] + b as i64,
                            base[2] + c as i64,
                            base[3] + e as i64,
                        ]);
                        acc += wabc * w[3][e] * values[idx];
                    }
                }
            }
        }
        acc
    }

    /// Complex Hessian `∂∂̄v` at a node: compact second differences on the
    /// diagonal (the stencil of `L`), centred cross differences off it.
    pub fn complex_hessian(&self, v: &[f64], idx: usize) -> Herm2 {
        let d = self.grid.spacing();
        let m = self.grid.multi(idx).map(|x| x as i64);
        let at = |off: [i64; 4]| v[self.grid.wrap([m[0] + off[0], m[1] + off[1], m[2] + off[2], m[3] + off[3]])];
        let e = |k: usize, s: i64| {
            let mut o = [0i64; 4];
            o[k] = s;
            o
        };
        let second = |k: usize| (at(e(k, 1)) - 2.0 * v[idx] + at(e(k, -1))) / (d * d);
        let mixed = |k: usize, l: usize| {
            let pp = at(add(e(k, 1), e(l, 1)));
            let pm = at(add(e(k, 1), e(l, -1)));
            let mp = at(add(e(k, -1), e(l, 1)));
            let mm = at(add(e(k, -1), e(l, -1)));
            (pp - pm - mp + mm) / (4.0 * d * d)
        };
        // z₁ = x₀ + i x₁, z₂ = x₂ + i x₃.
        Herm2 {
            a: 0.25 * (second(0) + second(1)),
            b: 0.25 * (second(2) + second(3)),
            c: Complex64::new(0.25 * (mixed(0, 2) + mixed(1, 3)), 0.25 * (mixed(0, 3) - mixed(1, 2))),
        }
    }

    /// Fourth-order `∂∂̄v`: five-point second differences and tensor products
    /// of five-point first differences.
    pub fn complex_hessian_fourth(&self, v: &[f64], idx: usize) -> Herm2 {
        let d = self.grid.spacing();
        let m = self.grid.multi(idx).map(|x| x as i64);
        let at = |off: [i64; 4]| v[self.grid.wrap([m[0] + off[0], m[1] + off[1], m[2] + off[2], m[3] + off[3]])];
        let e = |k: usize, s: i64| {
            let mut o = [0i64; 4];
            o[k] = s;
            o
        };
        const FIRST: [(i64, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
        let second = |k: usize| {
            (-at(e(k, 2)) + 16.0 * at(e(k, 1)) - 30.0 * v[idx] + 16.0 * at(e(k, -1)) - at(e(k, -2))) / (12.0 * d * d)
        };
        let mixed = |k: usize, l: usize| {
            let mut acc = 0.0;
            for (a, wa) in FIRST {
                for (b, wb) in FIRST {
                    acc += wa * wb * at(add(e(k, a), e(l, b)));
                }
            }
            acc / (144.0 * d * d)
        };
        Herm2 {
            a: 0.25 * (second(0) + second(1)),
            b: 0.25 * (second(2) + second(3)),
            c: Complex64::new(0.25 * (mixed(0, 2) + mixed(1, 3)), 0.25 * (mixed(0, 3) - mixed(1, 2))),
        }
    }

    /// `Σ values · d⁴`: integral over one period cell.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.grid.spacing().powi(4)
    }
}

fn add(a: [i64; 4], b: [i64; 4]) -> [i64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Lagrange weights for nodes at offsets `−1, 0, 1, 2` and position `t ∈ [0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}
