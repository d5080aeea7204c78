//! A polar chart around the fixed point coupled to the periodic Cartesian
//! chart through an overlapping annulus.
//!
//! The polar chart takes its outer-edge values (per mode, at `r_out`) from
//! the Cartesian solution; the Cartesian chart takes its hole values from the
//! polar solution. Both transfers act on `u = f/h`, so `f = h` passes through
//! unchanged. The coupled problem is reduced to the interface coefficients
//! `b` at `r_out`: one sweep maps `b ↦ S b + c(ρ)`, and solutions are the
//! fixed points.

use super::cartesian::{CartesianChart, CartesianGrid};
use super::polar::{Block, InnerEdge, OuterEdge, PolarChart, RadialCoefficients};
use crate::cross_section::{CrossSectionKind, CrossSectionSpec, EigenSystem, Point, Symmetry};
use crate::eguchi_hanson::quintic_step;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

/// Layout of a composite discretisation. Radii are in torus (X) units; the
/// polar chart works in units `scale` times larger.
#[derive(Clone, Debug)]
pub struct CompositeLayout {
    pub scale: f64,
    pub ds: f64,
    /// Innermost polar radius, polar units.
    pub r_min: f64,
    pub inner: InnerEdge,
    pub r_in: f64,
    pub r_blend: f64,
    pub r_out: f64,
    pub grid: CartesianGrid,
    pub max_degree: usize,
    pub symmetry: Symmetry,
    pub cg_tol: f64,
}

/// Field on both charts. `polar[j]` holds mode `j` at the polar nodes plus
/// the outer edge value; `cart` holds nodal values on the whole grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeField {
    pub polar: Vec<Vec<f64>>,
    pub cart: Vec<f64>,
}

impl CompositeField {
    pub fn axpy(&mut self, a: f64, x: &CompositeField) {
        for (p, q) in self.polar.iter_mut().zip(&x.polar) {
            for (u, v) in p.iter_mut().zip(q) {
                *u += a * v;
            }
        }
        for (u, v) in self.cart.iter_mut().zip(&x.cart) {
            *u += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            polar: self.polar.iter().map(|p| p.iter().map(|v| a * v).collect()).collect(),
            cart: self.cart.iter().map(|v| a * v).collect(),
        }
    }
}

/// Singular values of `I − S` and the resulting kernel count.
#[derive(Clone, Debug)]
pub struct InterfaceCensus {
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub dimension: usize,
    pub gap: f64,
    /// Interface vectors spanning the numerical kernel.
    pub kernel: Vec<Vec<f64>>,
}

pub struct Composite {
    pub layout: CompositeLayout,
    pub polar: PolarChart,
    pub cart: CartesianChart,
    pub system: Arc<EigenSystem>,
    pub blocks: Vec<Block>,
    zero_mode: usize,
    /// Hole nodes receiving polar data: node, first of four `s` nodes,
    /// Lagrange weights, mode values at the node's direction.
    fill: Vec<(usize, usize, [f64; 4], Vec<f64>)>,
    /// Interface sample points (X units).
    sphere: Vec<[f64; 4]>,
    edge_h: f64,
}

/// Smallest singular value ratio accepted as a kernel gap.
pub const KERNEL_GAP: f64 = 10.0;
/// Relative singular-value threshold for the numerical kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

impl Composite {
    /// `polar_coef` is in polar units; `cart_h` gives the conformal factor
    /// in X units. They must describe the same function on the overlap.
    pub fn new<P, C>(layout: CompositeLayout, polar_coef: P, cart_h: C) -> Result<Self>
    where
        P: Fn(f64) -> RadialCoefficients,
        C: Fn(f64) -> f64,
    {
        let l = &layout;
        if !(l.r_in < l.r_blend && l.r_blend < l.r_out && l.r_out < 0.5 * l.grid.period) {
            return Err(Error::Config(format!(
                "composite radii must satisfy r_in < r_blend < r_out < p/2 ({}, {}, {}, {})",
                l.r_in, l.r_blend, l.r_out, l.grid.period
            )));
        }
        let s_edge = (l.r_out * l.scale).ln();
        let n = ((s_edge - l.r_min.ln()) / l.ds).floor() as usize;
        let s0 = s_edge - n as f64 * l.ds;
        let polar = PolarChart::new(s0, l.ds, n, l.inner, OuterEdge::Dirichlet, &polar_coef)?;
        let cart = CartesianChart::new(l.grid, l.r_in, &cart_h)?;
        let d = l.grid.spacing();
        let r_fill = l.r_out - 4.5 * d;
        for r in [r_fill, 0.5 * (r_fill + l.r_out), l.r_out] {
            let (hp, hc) = (polar_coef(r * l.scale).h, l.scale * cart_h(r));
            if (hp - hc).abs() > 1e-12 * hc {
                return Err(Error::Config(format!("conformal factors disagree at r = {r}: {hp} vs {hc}")));
            }
        }
        if (r_fill * l.scale).ln() < s0 + l.ds {
            return Err(Error::Config("polar chart does not reach the Cartesian hole".into()));
        }
        let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3ModInvolution, 1.0, l.max_degree)?;
        let system = Arc::new(EigenSystem::new(&spec, l.symmetry)?);
        let blocks = system
            .modes
            .iter()
            .map(|m| Block {
                degree: m.degree,
                charge: m.charge,
            })
            .collect();
        let zero_mode = system
            .modes
            .iter()
            .position(|m| m.degree == 0)
            .ok_or_else(|| Error::Config("cross-section basis lacks the constant mode".into()))?;
        let mut fill = Vec::new();
        for idx in 0..l.grid.len() {
            let r = l.grid.radius(idx);
            if cart.is_unknown(idx) || r < r_fill {
                continue;
            }
            let x = l.grid.position(idx);
            let s = (r * l.scale).ln();
            let t = (s - s0) / l.ds;
            let base = (t.floor() as usize).saturating_sub(1).min(n - 3);
            let w = lagrange4(t - base as f64);
            let point = Point::Sphere(to_complex(x, 1.0 / r));
            let modes = (0..system.len()).map(|j| system.eval_mode(j, &point)).collect();
            fill.push((idx, base, w, modes));
        }
        let sphere = system
            .quadrature
            .points
            .iter()
            .map(|p| match p {
                Point::Sphere(z) => [z[0].re * l.r_out, z[0].im * l.r_out, z[1].re * l.r_out, z[1].im * l.r_out],
                Point::Angle(_) => unreachable!("sphere cross-section"),
            })
            .collect();
        let edge_h = cart_h(l.r_out);
        Ok(Self {
            layout,
            polar,
            cart,
            system,
            blocks,
            zero_mode,
            fill,
            sphere,
            edge_h,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.blocks.len()
    }

    pub fn zero_mode(&self) -> usize {
        self.zero_mode
    }

    pub fn zeros(&self) -> CompositeField {
        CompositeField {
            polar: vec![vec![0.0; self.polar.n + 1]; self.num_modes()],
            cart: vec![0.0; self.layout.grid.len()],
        }
    }

    /// Polar radius in X units.
    pub fn polar_radius(&self, i: usize) -> f64 {
        self.polar.r(i) / self.layout.scale
    }

    /// Weight of the polar chart in the partition of unity.
    pub fn polar_share(&self, r: f64) -> f64 {
        let l = &self.layout;
        1.0 - quintic_step((r - l.r_in) / (l.r_blend - l.r_in)).0
    }

    /// A radial function of the X-unit radius on both charts.
    pub fn from_radial<F: Fn(f64) -> f64>(&self, f: F) -> CompositeField {
        let mut out = self.zeros();
        let c = 1.0 / self.system.eval_mode(self.zero_mode, &Point::Sphere([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
        for i in 0..=self.polar.n {
            out.polar[self.zero_mode][i] = c * f(self.polar.r(i) / self.layout.scale);
        }
        for (idx, v) in out.cart.iter_mut().enumerate() {
            *v = f(self.layout.grid.radius(idx));
        }
        out
    }

    /// The conformal factor (X units) as a field.
    pub fn conformal_factor(&self) -> CompositeField {
        let s = 1.0 / self.layout.scale;
        let mut out = self.zeros();
        let c = 1.0 / self.system.eval_mode(self.zero_mode, &Point::Sphere([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]));
        for i in 0..self.polar.n {
            out.polar[self.zero_mode][i] = c * s * self.polar.coef[i].h;
        }
        out.polar[self.zero_mode][self.polar.n] = c * self.edge_h;
        out.cart.clone_from(&self.cart.h);
        out
    }

    /// Overwrite the hole values of `field.cart` from its polar part.
    pub fn fill_hole(&self, field: &mut CompositeField) {
        let n = self.polar.n;
        let u: Vec<Vec<f64>> = field
            .polar
            .iter()
            .map(|p| {
                (0..=n)
                    .map(|i| p[i] / if i < n { self.polar.coef[i].h } else { self.polar.edge_h() })
                    .collect()
            })
            .collect();
        for (idx, base, w, modes) in &self.fill {
            let mut acc = 0.0;
            for (j, y) in modes.iter().enumerate() {
                let uj = &u[j];
                acc += y * (w[0] * uj[*base] + w[1] * uj[base + 1] + w[2] * uj[base + 2] + w[3] * uj[base + 3]);
            }
            field.cart[*idx] = acc * self.layout.scale * self.cart.h[*idx];
        }
    }

    /// Mode coefficients at `r_out` of the Cartesian data.
    pub fn interface_values(&self, cart: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = cart.iter().zip(&self.cart.h).map(|(f, h)| if *h > 0.0 { f / h } else { 0.0 }).collect();
        let samples: Vec<f64> = self.sphere.iter().map(|x| self.edge_h * self.cart.interpolate(&u, *x)).collect();
        self.system.project(&samples).expect("interface samples match the quadrature")
    }

    /// One sweep: polar solve with edge data `b`, hole fill, Cartesian solve.
    /// Returns the field and the interface values it produces.
    pub fn sweep(&self, rho: &CompositeField, b: &[f64]) -> Result<(CompositeField, Vec<f64>)> {
        let mut out = self.zeros();
        let n = self.polar.n;
        for (j, block) in self.blocks.iter().enumerate() {
            let sol = self.polar.solve(*block, &rho.polar[j][..n], b[j])?;
            out.polar[j][..n].copy_from_slice(&sol);
            out.polar[j][n] = b[j];
        }
        self.fill_hole(&mut out);
        self.cart.solve(&rho.cart, &mut out.cart, self.layout.cg_tol)?;
        let iface = self.interface_values(&out.cart);
        Ok((out, iface))
    }

    /// Columns `S e_j`, and when `keep` is set the fields producing them.
    pub fn interface_map(&self, keep: bool) -> Result<(DMatrix<f64>, Vec<CompositeField>)> {
        let m = self.num_modes();
        let zero = self.zeros();
        let mut s = DMatrix::zeros(m, m);
        let mut fields = Vec::new();
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let (field, iface) = self.sweep(&zero, &e)?;
            for (i, v) in iface.iter().enumerate() {
                s[(i, j)] = *v;
            }
            if keep {
                fields.push(field);
            }
        }
        Ok((s, fields))
    }

    /// Kernel count from the singular values of `I − S`.
    pub fn census(&self, s: &DMatrix<f64>) -> Result<InterfaceCensus> {
        let m = s.nrows();
        let a = DMatrix::identity(m, m) - s;
        let svd = a.svd(false, true);
        let mut pairs: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let sv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let (dimension, threshold, gap) = kernel_count(&sv);
        let vt = svd.v_t.expect("right singular vectors requested");
        let kernel = pairs[..dimension].iter().map(|(_, k)| vt.row(*k).iter().copied().collect()).collect();
        Ok(InterfaceCensus {
            singular_values: sv,
            threshold,
            dimension,
            gap,
            kernel,
        })
    }

    /// `□` applied chart by chart: polar rows use the stored edge values,
    /// Cartesian rows the stored hole values.
    pub fn apply_box(&self, f: &CompositeField) -> CompositeField {
        let n = self.polar.n;
        let mut out = self.zeros();
        for (j, block) in self.blocks.iter().enumerate() {
            let v = self.polar.apply(*block, &f.polar[j][..n], f.polar[j][n]);
            out.polar[j][..n].copy_from_slice(&v);
        }
        out.cart = self.cart.apply_box(&f.cart);
        out
    }

    /// `∫ f g dμ` over the period cell, blended by the partition of unity.
    pub fn inner(&self, f: &CompositeField, g: &CompositeField) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.polar.n {
            let w = self.polar.weight(i) * self.polar_share(self.polar_radius(i));
            if w == 0.0 {
                continue;
            }
            let s: f64 = f.polar.iter().zip(&g.polar).map(|(a, b)| a[i] * b[i]).sum();
            acc += w * s;
        }
        let grid = &self.layout.grid;
        let d4 = grid.spacing().powi(4);
        for idx in 0..grid.len() {
            let w = 1.0 - self.polar_share(grid.radius(idx));
            if w > 0.0 {
                acc += w * d4 * f.cart[idx] * g.cart[idx] / self.cart.h[idx].powi(4);
            }
        }
        acc
    }

    pub fn norm(&self, f: &CompositeField) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `dμ`-weighted norm over the rows where each chart imposes its
    /// equation (all polar nodes, Cartesian unknowns), without blending.
    pub fn equation_norm(&self, f: &CompositeField) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.polar.n {
            let s: f64 = f.polar.iter().map(|p| p[i] * p[i]).sum();
            acc += self.polar.weight(i) * s;
        }
        let d4 = self.layout.grid.spacing().powi(4);
        for &idx in &self.cart.unknowns {
            acc += d4 * f.cart[idx] * f.cart[idx] / self.cart.h[idx].powi(4);
        }
        acc.sqrt()
    }

    /// Largest mismatch between stored transfer data and what the transfers
    /// produce: hole values against the polar part, edge values against the
    /// Cartesian part.
    pub fn transfer_mismatch(&self, f: &CompositeField) -> f64 {
        let mut g = f.clone();
        self.fill_hole(&mut g);
        let hole = g.cart.iter().zip(&f.cart).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let iface = self.interface_values(&f.cart);
        let n = self.polar.n;
        let edge = iface.iter().zip(&f.polar).map(|(a, p)| (a - p[n]).abs()).fold(0.0, f64::max);
        hole.max(edge)
    }
}

/// Kernel dimension, threshold and gap for ascending singular values.
pub fn kernel_count(sv: &[f64]) -> (usize, f64, f64) {
    let max = sv.last().copied().unwrap_or(0.0);
    let threshold = KERNEL_THRESHOLD * max;
    let dimension = sv.iter().take_while(|v| **v < threshold).count();
    let below = if dimension > 0 { sv[dimension - 1].max(f64::MIN_POSITIVE) } else { threshold };
    let above = sv.get(dimension).copied().unwrap_or(f64::INFINITY);
    (dimension, threshold, above / below)
}

fn to_complex(x: [f64; 4], scale: f64) -> [Complex64; 2] {
    [Complex64::new(x[0] * scale, x[1] * scale), Complex64::new(x[2] * scale, x[3] * scale)]
}

/// Lagrange weights for four consecutive nodes, position `t` measured from
/// the first.
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::charts::capped_radius;

    /// Flat orbifold model: cone end at the fixed point.
    pub(crate) fn flat_model(max_degree: usize, symmetry: Symmetry) -> Composite {
        let layout = CompositeLayout {
            scale: 1.0,
            ds: 0.05,
            r_min: 0.02,
            inner: InnerEdge::Cylinder,
            r_in: 0.18,
            r_blend: 0.235,
            r_out: 0.245,
            grid: CartesianGrid { n: 16, period: 0.5 },
            max_degree,
            symmetry,
            cg_tol: 1e-12,
        };
        Composite::new(
            layout,
            |r| RadialCoefficients {
                a: 1.0,
                b: 1.0,
                h: capped_radius(r),
            },
            capped_radius,
        )
        .unwrap()
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let w = lagrange4(1.3);
        let p = |x: f64| 2.0 - x + 0.5 * x * x - 0.1 * x * x * x;
        let v: f64 = (0..4).map(|k| w[k] * p(k as f64)).sum();
        assert!((v - p(1.3)).abs() < 1e-14);
    }

    #[test]
    fn conformal_factor_is_a_fixed_point() {
        let c = flat_model(4, Symmetry::CubicLattice);
        let mut h = c.conformal_factor();
        let kept = h.cart.clone();
        c.fill_hole(&mut h);
        for (a, b) in h.cart.iter().zip(&kept) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }
        let iface = c.interface_values(&h.cart);
        for (j, v) in iface.iter().enumerate() {
            assert!((v - h.polar[j][c.polar.n]).abs() < 1e-12, "mode {j}: {v}");
        }
        let boxed = c.apply_box(&h);
        assert!(c.norm(&boxed) < 1e-10 * c.norm(&h));
    }

    #[test]
    fn flat_model_has_one_dimensional_kernel() {
        let c = flat_model(4, Symmetry::CubicLattice);
        let (s, _) = c.interface_map(false).unwrap();
        let census = c.census(&s).unwrap();
        assert_eq!(census.dimension, 1, "{:?}", census.singular_values);
        assert!(census.gap >= KERNEL_GAP);
        let k = &census.kernel[0];
        let zm = c.zero_mode();
        let off: f64 = k.iter().enumerate().filter(|(j, _)| *j != zm).map(|(_, v)| v * v).sum();
        assert!(off.sqrt() < 1e-8);
    }
}
