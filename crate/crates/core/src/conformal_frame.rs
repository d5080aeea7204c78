//! The conformally rescaled frame `Θ = h⁻²ω` in which the glued manifold looks
//! like a long cylinder, and the operator `□f = h³Δ_ω(h⁻¹f)`.
//!
//! Everything here is pointwise algebra on jets: a real function is carried
//! by its value, holomorphic gradient `∂f` and complex Hessian `∂∂̄f`. Chart
//! code supplies the jets; the formulas below turn them into `Θ`, `Qf`, `V`
//! and `□f`.
//!
//! With `Δ_ω f = −4 tr(H_ω⁻¹ ∂∂̄f)` (nonnegative spectrum), the two routes are
//!
//! * forms: `□f = −8 (Qf ∧ Θ)/Θ²` with `Qf = h·∂∂̄(h⁻¹f)`,
//! * Riemannian: `□f = Δ_Θ f + V f` with `V = h³Δ_ω(h⁻¹)` and
//!   `Δ_Θ f = h²Δ_ω f + 2h⟨∇h, ∇f⟩_ω`.

use crate::error::{Error, Result};
use crate::hermitian::Herm2;
use crate::poly;
use num_complex::Complex64;

/// Value, `∂f/∂z_i` and `∂²f/∂z_i∂z̄_j` of a real function at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub dz: [Complex64; 2],
    pub hess: Herm2,
}

impl FieldJet {
    pub fn constant(c: f64) -> Self {
        Self {
            value: c,
            ..Default::default()
        }
    }

    /// Jet of `u(|z|²)` from `u, u′, u″`.
    pub fn radial(z: [Complex64; 2], u: f64, u1: f64, u2: f64) -> Self {
        Self {
            value: u,
            dz: [u1 * z[0].conj(), u1 * z[1].conj()],
            hess: Herm2::radial(u1, u2, z),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            value: self.value * c,
            dz: [self.dz[0] * c, self.dz[1] * c],
            hess: self.hess.scale(c),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            dz: [self.dz[0] + o.dz[0], self.dz[1] + o.dz[1]],
            hess: self.hess.add(&o.hess),
        }
    }

    /// `∂u ⊗ ∂̄v + ∂v ⊗ ∂̄u` as a Hermitian matrix.
    fn cross(u: &Self, v: &Self) -> Herm2 {
        let e = |i: usize, j: usize| u.dz[i] * v.dz[j].conj() + v.dz[i] * u.dz[j].conj();
        Herm2 {
            a: e(0, 0).re,
            b: e(1, 1).re,
            c: e(0, 1),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            value: self.value * o.value,
            dz: [
                self.dz[0] * o.value + o.dz[0] * self.value,
                self.dz[1] * o.value + o.dz[1] * self.value,
            ],
            hess: self
                .hess
                .scale(o.value)
                .add(&o.hess.scale(self.value))
                .add(&Self::cross(self, o)),
        }
    }

    /// Jet of `1/f`.
    pub fn recip(&self) -> Self {
        let v = self.value;
        let inv2 = 1.0 / (v * v);
        let own = Self::cross(self, self).scale(1.0 / (v * v * v));
        Self {
            value: 1.0 / v,
            dz: [-self.dz[0] * inv2, -self.dz[1] * inv2],
            hess: self.hess.scale(-inv2).add(&own),
        }
    }
}

impl From<poly::Jet> for FieldJet {
    fn from(j: poly::Jet) -> Self {
        Self {
            value: j.value,
            dz: j.dz,
            hess: Herm2 {
                a: j.hess[0][0].re,
                b: j.hess[1][1].re,
                c: j.hess[0][1],
            },
        }
    }
}

/// `Δ_ω f = −4 tr(H_ω⁻¹ ∂∂̄f)`.
pub fn laplacian(omega: &Herm2, f: &FieldJet) -> Result<f64> {
    let inv = omega
        .inverse()
        .ok_or_else(|| Error::Positivity("degenerate Kähler form".into()))?;
    Ok(-4.0 * inv.trace_product(&f.hess))
}

/// `⟨∇u, ∇v⟩_ω = 2 Σ (H⁻¹)_{ji}(∂_i u ∂̄_j v + ∂_i v ∂̄_j u)`.
pub fn gradient_pairing(omega: &Herm2, u: &FieldJet, v: &FieldJet) -> Result<f64> {
    let inv = omega
        .inverse()
        .ok_or_else(|| Error::Positivity("degenerate Kähler form".into()))?;
    Ok(2.0 * inv.trace_product(&FieldJet::cross(u, v)))
}

/// `Θ = h⁻²ω`.
pub fn theta(omega: &Herm2, h: f64) -> Herm2 {
    omega.scale(1.0 / (h * h))
}

/// Density of the `Θ`-volume against Euclidean volume: `det Θ = h⁻⁴ det ω`.
pub fn theta_density(omega: &Herm2, h: f64) -> f64 {
    theta(omega, h).det()
}

fn check_h(h: &FieldJet) -> Result<()> {
    if !(h.value > 0.0) {
        return Err(Error::Domain(format!("conformal factor must be positive, got {}", h.value)));
    }
    Ok(())
}

/// `V = h³Δ_ω(h⁻¹)`.
pub fn potential_v(omega: &Herm2, h: &FieldJet) -> Result<f64> {
    check_h(h)?;
    Ok(h.value.powi(3) * laplacian(omega, &h.recip())?)
}

/// `Qf = h·∂∂̄(h⁻¹f)`.
pub fn q_apply(h: &FieldJet, f: &FieldJet) -> Result<Herm2> {
    check_h(h)?;
    Ok(h.recip().mul(f).hess.scale(h.value))
}

/// `□f = −8(Qf ∧ Θ)/Θ²`.
pub fn box_via_forms(omega: &Herm2, h: &FieldJet, f: &FieldJet) -> Result<f64> {
    let q = q_apply(h, f)?;
    let th = theta(omega, h.value);
    let d = th.det();
    if !(d > 0.0) {
        return Err(Error::Positivity("Θ is not positive".into()));
    }
    Ok(-8.0 * q.wedge(&th) / d)
}

/// `Δ_Θ f = h²Δ_ω f + 2h⟨∇h, ∇f⟩_ω`.
pub fn theta_laplacian(omega: &Herm2, h: &FieldJet, f: &FieldJet) -> Result<f64> {
    check_h(h)?;
    let hv = h.value;
    Ok(hv * hv * laplacian(omega, f)? + 2.0 * hv * gradient_pairing(omega, h, f)?)
}

/// `□f = Δ_Θ f + V f`.
pub fn box_via_laplacian(omega: &Herm2, h: &FieldJet, f: &FieldJet) -> Result<f64> {
    Ok(theta_laplacian(omega, h, f)? + potential_v(omega, h)? * f.value)
}

/// Neck coordinate `t = log(R^{1/2}h)`, defined for `|t| < T = ½ log R`.
pub fn neck_coordinate(r_glue: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("conformal factor must be positive, got {h}")));
    }
    let t = (r_glue.sqrt() * h).ln();
    let half = neck_half_length(r_glue);
    if t.abs() >= half {
        return Err(Error::OutOfBand(format!("t = {t:.4} lies outside the neck (−{half:.4}, {half:.4})")));
    }
    Ok(t)
}

/// `T = ½ log R`.
pub fn neck_half_length(r_glue: f64) -> f64 {
    0.5 * r_glue.ln()
}

/// `V` for the flat metric computed from a second-order finite-difference
/// Laplacian of `1/h` in real coordinates with spacing `dx`.
pub fn discrete_flat_potential<F: Fn([f64; 4]) -> f64>(h: F, x: [f64; 4], dx: f64) -> f64 {
    let inv = |p: [f64; 4]| 1.0 / h(p);
    let centre = inv(x);
    let mut lap = 0.0;
    for axis in 0..4 {
        let mut p = x;
        p[axis] += dx;
        let up = inv(p);
        p[axis] -= 2.0 * dx;
        let down = inv(p);
        lap -= (up - 2.0 * centre + down) / (dx * dx);
    }
    h(x).powi(3) * lap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eguchi_hanson::{CutoffMetric, RadialProfile};
    use crate::fit::log_log_slope;
    use crate::poly::Poly;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rho(z: [Complex64; 2]) -> f64 {
        z[0].norm_sqr() + z[1].norm_sqr()
    }

    /// Jet of `|z| = ρ^{1/2}`.
    fn radius_jet(z: [Complex64; 2]) -> FieldJet {
        let r = rho(z);
        FieldJet::radial(z, r.sqrt(), 0.5 * r.powf(-0.5), -0.25 * r.powf(-1.5))
    }

    /// A non-radial test function `e^{−ρ}(1 + Re(z₁z̄₂) + |z₁|²)` from polynomial jets.
    fn test_function(z: [Complex64; 2]) -> FieldJet {
        let mut p = Poly::monomial([0, 0, 0, 0], c(1.0, 0.0));
        p.add_term([1, 0, 0, 1], c(0.5, 0.0));
        p.add_term([0, 1, 1, 0], c(0.5, 0.0));
        p.add_term([1, 0, 1, 0], c(1.0, 0.0));
        let pj: FieldJet = p.jet_table().eval(z).into();
        let r = rho(z);
        let e = (-r).exp();
        pj.mul(&FieldJet::radial(z, e, -e, e))
    }

    fn finite_difference_jet<F: Fn([Complex64; 2]) -> f64>(f: F, z: [Complex64; 2]) -> FieldJet {
        // Real partials, then ∂ = (∂x − i∂y)/2, ∂∂̄ from second differences.
        let h = 1e-4;
        let shift = |z: [Complex64; 2], k: usize, d: f64| {
            let mut w = z;
            let (i, im) = (k / 2, k % 2 == 1);
            w[i] += if im { c(0.0, d) } else { c(d, 0.0) };
            w
        };
        let d1 = |k: usize| (f(shift(z, k, h)) - f(shift(z, k, -h))) / (2.0 * h);
        let d2 = |k: usize, l: usize| {
            (f(shift(shift(z, k, h), l, h)) - f(shift(shift(z, k, h), l, -h)) - f(shift(shift(z, k, -h), l, h))
                + f(shift(shift(z, k, -h), l, -h)))
                / (4.0 * h * h)
        };
        let dz = [c(0.5 * d1(0), -0.5 * d1(1)), c(0.5 * d1(2), -0.5 * d1(3))];
        // ∂²/∂z_i∂z̄_j = ¼[(∂x_i∂x_j + ∂y_i∂y_j) + i(∂x_i∂y_j − ∂y_i∂x_j)]
        let e = |i: usize, j: usize| {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            c(0.25 * (d2(xi, xj) + d2(yi, yj)), 0.25 * (d2(xi, yj) - d2(yi, xj)))
        };
        FieldJet {
            value: f(z),
            dz,
            hess: Herm2 {
                a: e(0, 0).re,
                b: e(1, 1).re,
                c: e(0, 1),
            },
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let z = [c(0.3, -0.4), c(0.5, 0.2)];
        let f = test_function(z);
        let fd = finite_difference_jet(|w| test_function(w).value, z);
        assert!((f.dz[0] - fd.dz[0]).norm() < 1e-7 && (f.dz[1] - fd.dz[1]).norm() < 1e-7);
        assert!(f.hess.sub(&fd.hess).norm() < 1e-6);
        let g = f.recip();
        let gd = finite_difference_jet(|w| 1.0 / test_function(w).value, z);
        assert!(g.hess.sub(&gd.hess).norm() < 1e-5);
    }

    #[test]
    fn flat_potential_is_one() {
        let mut worst: f64 = 0.0;
        let mut seed = 1u64;
        for _ in 0..1000 {
            let mut next = || {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            };
            let z = [c(next(), next()), c(next(), next())];
            if rho(z) < 1e-6 {
                continue;
            }
            let v = potential_v(&Herm2::IDENTITY, &radius_jet(z)).unwrap();
            worst = worst.max((v - 1.0).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn discrete_flat_potential_is_second_order() {
        let x = [0.3, -0.2, 0.25, 0.1];
        let h = |p: [f64; 4]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dxs = [0.02, 0.01, 0.005, 0.0025];
        let errs: Vec<f64> = dxs.iter().map(|&d| (discrete_flat_potential(h, x, d) - 1.0).abs()).collect();
        let s = log_log_slope(&dxs, &errs).unwrap().slope;
        assert!((s - 2.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn constant_h_gives_zero_potential_and_q_is_hessian() {
        let z = [c(0.2, 0.1), c(-0.3, 0.6)];
        let om = RadialProfile::eguchi_hanson().kahler_matrix(z).unwrap();
        assert_eq!(potential_v(&om, &FieldJet::constant(2.0)).unwrap(), 0.0);
        let f = test_function(z);
        assert!(q_apply(&FieldJet::constant(1.0), &f).unwrap().sub(&f.hess).norm() < 1e-15);
        assert!(potential_v(&om, &FieldJet::constant(-1.0)).is_err());
    }

    #[test]
    fn q_kills_h_and_ignores_scale() {
        let z = [c(0.4, 0.1), c(-0.2, 0.3)];
        let h = radius_jet(z).mul(&test_function(z));
        assert!(q_apply(&h, &h).unwrap().norm() < 1e-13);
        let f = test_function(z).add(&FieldJet::radial(z, rho(z), 1.0, 0.0));
        let q1 = q_apply(&h, &f).unwrap();
        let q2 = q_apply(&h.scale(2.0), &f).unwrap();
        assert!(q1.sub(&q2).norm() < 1e-13 * q1.norm().max(1.0));
    }

    #[test]
    fn box_two_ways_agree() {
        // Eguchi-Hanson and cut-off metrics with a non-radial conformal factor.
        let m = CutoffMetric::new(16.0).unwrap();
        for z in [[c(0.8, 0.1), c(-0.3, 0.5)], [c(1.5, -0.7), c(0.9, 1.1)], [c(2.5, 0.3), c(-1.0, 0.4)]] {
            let om = m.kahler_matrix(z).unwrap();
            let h = radius_jet(z).mul(&FieldJet::constant(1.0).add(&test_function(z).scale(0.1)));
            let f = test_function(z);
            let a = box_via_forms(&om, &h, &f).unwrap();
            let b = box_via_laplacian(&om, &h, &f).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            assert!(box_via_forms(&om, &h, &h).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_h_scales_box() {
        let z = [c(0.6, 0.2), c(0.1, -0.9)];
        let om = RadialProfile::eguchi_hanson().kahler_matrix(z).unwrap();
        let h = radius_jet(z);
        let f = test_function(z);
        let a = box_via_laplacian(&om, &h, &f).unwrap();
        let b = box_via_laplacian(&om, &h.scale(3.0), &f).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-12 * b.abs());
        let va = potential_v(&om, &h).unwrap();
        let vb = potential_v(&om, &h.scale(3.0)).unwrap();
        assert!((vb - 9.0 * va).abs() < 1e-12 * vb.abs());
    }

    #[test]
    fn eh_far_field_potential() {
        // With h = r, V = (1 − ρ⁻²)/√(1 + ρ⁻²), so V − 1 ≈ −(3/2)r⁻⁴.
        let p = RadialProfile::eguchi_hanson();
        let rs = [4.0, 8.0, 16.0, 32.0];
        let devs: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let z = [c(r * 0.6, 0.0), c(0.0, r * 0.8)];
                1.0 - potential_v(&p.kahler_matrix(z).unwrap(), &radius_jet(z)).unwrap()
            })
            .collect();
        let fit = log_log_slope(&rs, &devs).unwrap();
        assert!((fit.slope + 4.0).abs() < 0.02, "{}", fit.slope);
        assert!((devs[3] * 32f64.powi(4) - 1.5).abs() < 1e-3);
        for (&r, d) in rs.iter().zip(&devs) {
            let q = r.powi(-4);
            let exact = 1.0 - (1.0 - q) / (1.0 + q).sqrt();
            assert!((d - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn neck_coordinate_values() {
        let r = 64.0;
        assert!(neck_coordinate(r, r.powf(-0.5)).unwrap().abs() < 1e-15);
        for s in [-1.5, 0.3, 1.9] {
            let t = neck_coordinate(r, r.powf(-0.5) * f64::exp(s)).unwrap();
            assert!((t - s).abs() < 1e-14);
        }
        assert!(matches!(neck_coordinate(r, 2.0), Err(Error::OutOfBand(_))));
        assert!(matches!(neck_coordinate(r, 0.5 / r), Err(Error::OutOfBand(_))));
    }

    proptest! {
        #[test]
        fn volume_weight(a in -2.0f64..2.0, b in -2.0f64..2.0, d in -2.0f64..2.0, e in -2.0f64..2.0, hv in 0.1f64..3.0) {
            let z = [c(a, b), c(d, e)];
            prop_assume!(rho(z) > 1e-3);
            let om = RadialProfile::eguchi_hanson().kahler_matrix(z).unwrap();
            // h⁴ dμ is the ω-volume.
            prop_assert!((theta_density(&om, hv) * hv.powi(4) - om.det()).abs() < 1e-12 * om.det());
        }
    }
}
