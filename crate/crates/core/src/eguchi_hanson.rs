//! The Eguchi-Hanson metric on the resolved quotient `ℂ²/±1`, its asymptotic
//! tail, and the cut-off metric that agrees with it near the exceptional
//! sphere and is exactly flat far out.
//!
//! All forms have radial potentials `ψ(ρ)` with `ρ = |z|²`, so their
//! coefficient matrices are `ψ′δ_ij + ψ″ z̄_i z_j` and their determinants are
//! `ψ′(ψ′ + ρψ″)`.

use crate::error::{Error, Result};
use crate::hermitian::Herm2;
use crate::quadrature::composite_gl;
use num_complex::Complex64;
use serde::Serialize;

/// Where the quadrature for `G` starts; beyond it the tail series is used.
pub const TAIL_REFERENCE: f64 = 1e6;

/// `ψ′` and `ψ″` of a radial potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialDerivs {
    pub d1: f64,
    pub d2: f64,
}

impl RadialDerivs {
    /// Coefficient of the radial and Hopf directions: `ψ′ + ρψ″`.
    pub fn radial_coefficient(&self, rho: f64) -> f64 {
        self.d1 + rho * self.d2
    }

    pub fn det(&self, rho: f64) -> f64 {
        self.d1 * self.radial_coefficient(rho)
    }

    pub fn matrix(&self, z: [Complex64; 2]) -> Herm2 {
        Herm2::radial(self.d1, self.d2, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProfileKind {
    /// `F(ρ) = ρ`, the flat metric.
    Euclidean,
    /// `F′(ρ) = √(1 + ρ⁻²)`.
    EguchiHanson,
}

/// Evaluated profile data at one `ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileValues {
    pub fp: f64,
    pub fpp: f64,
    /// `G = F − ρ`, normalized to vanish at infinity.
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

/// Radial Kähler potential with its tail coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    /// Fitted coefficients of `ρ⁻¹, ρ⁻², ρ⁻³` in the large-`ρ` expansion of `G`.
    pub tail: [f64; 3],
}

/// Minimal double-double arithmetic (error-free transforms with FMA).
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    fn add(&self, o: &Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let v = Self::renorm(s.hi, s.lo + t.hi);
        Self::renorm(v.hi, v.lo + t.lo)
    }

    fn mul(&self, o: &Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    fn div(&self, o: &Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(&o.mul(&Self::from(-q1)));
        let q2 = r.hi / o.hi;
        let r = r.add(&o.mul(&Self::from(-q2)));
        let q3 = r.hi / o.hi;
        Self::renorm(q1, q2).add(&Self::from(q3))
    }

    fn sqrt(&self) -> Self {
        let x = self.hi.sqrt();
        let sq = Self::from(x).mul(&Self::from(x));
        let corr = self.add(&Self::from(-sq.hi)).add(&Self::from(-sq.lo)).hi / (2.0 * x);
        Self::renorm(x, corr)
    }
}

/// `F′ − 1 = ρ⁻² / (√(1 + ρ⁻²) + 1)` without cancellation.
fn fp_minus_one(rho: f64) -> f64 {
    let q = 1.0 / (rho * rho);
    q / ((1.0 + q).sqrt() + 1.0)
}

/// `∫_ρ^∞ (F′ − 1) ds` by the series, valid for large `ρ`.
fn tail_integral(rho: f64) -> f64 {
    let x = 1.0 / (rho * rho);
    // √(1+x) − 1 = x/2 − x²/8 + x³/16 − 5x⁴/128; integrate term by term in s.
    (0.5 - x / 24.0 + x * x / 80.0 - 5.0 * x * x * x / 896.0) / rho
}

impl RadialProfile {
    pub fn euclidean() -> Self {
        Self {
            kind: ProfileKind::Euclidean,
            tail: [0.0; 3],
        }
    }

    pub fn eguchi_hanson() -> Self {
        let mut p = Self {
            kind: ProfileKind::EguchiHanson,
            tail: [0.0; 3],
        };
        let fit = p.fit_tail(10.0, 100.0, 64).expect("tail fit on a fixed window");
        p.tail = [fit[0], fit[1], fit[2]];
        p
    }

    pub fn fprime(&self, rho: f64) -> f64 {
        match self.kind {
            ProfileKind::Euclidean => 1.0,
            ProfileKind::EguchiHanson => (1.0 + 1.0 / (rho * rho)).sqrt(),
        }
    }

    pub fn fsecond(&self, rho: f64) -> f64 {
        match self.kind {
            ProfileKind::Euclidean => 0.0,
            ProfileKind::EguchiHanson => -1.0 / (rho.powi(3) * (1.0 + 1.0 / (rho * rho)).sqrt()),
        }
    }

    /// `G′ = F′ − 1`, without cancellation.
    pub fn g1(&self, rho: f64) -> f64 {
        match self.kind {
            ProfileKind::Euclidean => 0.0,
            ProfileKind::EguchiHanson => fp_minus_one(rho),
        }
    }

    /// `G(ρ) = −∫_ρ^∞ (F′ − 1)`, by Gauss-Legendre panels in `log s` up to
    /// [`TAIL_REFERENCE`] and the series beyond.
    pub fn g(&self, rho: f64) -> f64 {
        match self.kind {
            ProfileKind::Euclidean => 0.0,
            ProfileKind::EguchiHanson => {
                if rho >= TAIL_REFERENCE {
                    return -tail_integral(rho);
                }
                let (a, b) = (rho.ln(), TAIL_REFERENCE.ln());
                let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
                let inner = composite_gl(
                    |u| {
                        let s = u.exp();
                        fp_minus_one(s) * s
                    },
                    a,
                    b,
                    panels,
                );
                -(inner + tail_integral(TAIL_REFERENCE))
            }
        }
    }

    pub fn eval(&self, rho: f64) -> Result<ProfileValues> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("profile needs ρ > 0, got {rho}")));
        }
        let g1 = match self.kind {
            ProfileKind::Euclidean => 0.0,
            ProfileKind::EguchiHanson => fp_minus_one(rho),
        };
        Ok(ProfileValues {
            fp: self.fprime(rho),
            fpp: self.fsecond(rho),
            g: self.g(rho),
            g1,
            g2: self.fsecond(rho),
        })
    }

    /// `(F′)² + ρF′F″ − 1`, evaluated in double-double arithmetic so that
    /// rounding of `F′² ≈ ρ⁻²` does not swamp the result at small `ρ`.
    pub fn ma_identity_residual(&self, rho: f64) -> f64 {
        match self.kind {
            ProfileKind::Euclidean => 0.0,
            ProfileKind::EguchiHanson => {
                let r = Dd::from(rho);
                let q = Dd::from(1.0).div(&r.mul(&r));
                let fp = Dd::from(1.0).add(&q).sqrt();
                let fpp = Dd::from(-1.0).div(&r.mul(&r).mul(&r).mul(&fp));
                fp.mul(&fp).add(&r.mul(&fp).mul(&fpp)).add(&Dd::from(-1.0)).hi
            }
        }
    }

    pub fn derivs(&self, rho: f64) -> RadialDerivs {
        RadialDerivs {
            d1: self.fprime(rho),
            d2: self.fsecond(rho),
        }
    }

    /// Coefficient matrix of the form at `z`.
    pub fn kahler_matrix(&self, z: [Complex64; 2]) -> Result<Herm2> {
        let rho = z[0].norm_sqr() + z[1].norm_sqr();
        if rho == 0.0 {
            return Err(Error::SingularChart("the origin is not in the quotient chart".into()));
        }
        Ok(self.derivs(rho).matrix(z))
    }

    /// Least-squares fit of `G` on `[lo, hi]` by `Σ_{n=1}^{8} a_n ρ⁻ⁿ`.
    /// Returns `a_1, …, a_8`.
    pub fn fit_tail(&self, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
        const TERMS: usize = 8;
        if !(lo > 0.0 && hi > lo) || samples < TERMS {
            return Err(Error::Config(format!("bad tail-fit window [{lo}, {hi}] with {samples} samples")));
        }
        // Work in x = lo/ρ ∈ [lo/hi, 1] for conditioning.
        let mut a = nalgebra::DMatrix::zeros(samples, TERMS);
        let mut y = nalgebra::DVector::zeros(samples);
        for i in 0..samples {
            let rho = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
            let x = lo / rho;
            for n in 0..TERMS {
                a[(i, n)] = x.powi(n as i32 + 1);
            }
            y[i] = self.g(rho);
        }
        let svd = a.svd(true, true);
        let c = svd
            .solve(&y, 1e-14)
            .map_err(|e| Error::LinearSolver(e.to_string()))?;
        Ok((0..TERMS).map(|n| c[n] * lo.powi(n as i32 + 1)).collect())
    }

    /// Euclidean norms of `G`, `∇G`, `∇²G` at radius `r`.
    pub fn tail_derivative_norms(&self, r: f64) -> [f64; 3] {
        let rho = r * r;
        let g = self.g(rho);
        let g1 = self.eval(rho).map(|v| v.g1).unwrap_or(0.0);
        let g2 = self.fsecond(rho);
        // Radial second derivative and the three tangential eigenvalues of the Hessian.
        let radial = 2.0 * g1 + 4.0 * rho * g2;
        let tangential = 2.0 * g1;
        [
            g.abs(),
            (2.0 * r * g1).abs(),
            (radial * radial + 3.0 * tangential * tangential).sqrt(),
        ]
    }
}

/// `6x⁵ − 15x⁴ + 10x³` on `[0, 1]`, clamped, with two derivatives.
pub fn quintic_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let x2 = x * x;
        (
            x2 * x * (10.0 - 15.0 * x + 6.0 * x2),
            30.0 * x2 * (1.0 - x) * (1.0 - x),
            60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        )
    }
}

/// The cut function: 0 for `s ≤ ½`, 1 for `s ≥ 1`.
pub fn cut(s: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = quintic_step(2.0 * s - 1.0);
    (v, 2.0 * d1, 4.0 * d2)
}

/// Bound on `|β′|` for [`cut`]: `2 · 15/8`.
pub const CUT_SLOPE: f64 = 3.75;

/// `β_R = β(√(ρ/R))` and its first two `ρ`-derivatives.
pub fn cutoff_in_rho(rho: f64, r_cut: f64) -> (f64, f64, f64) {
    let s = (rho / r_cut).sqrt();
    let (b, bs, bss) = cut(s);
    if bs == 0.0 && bss == 0.0 {
        return (b, 0.0, 0.0);
    }
    let d1 = bs / (2.0 * r_cut * s);
    let d2 = (bss - bs / s) / (4.0 * r_cut * r_cut * s * s);
    (b, d1, d2)
}

/// The Eguchi-Hanson metric with its tail removed beyond `r = √R`:
/// potential `ρ + (1 − β_R)G`.
#[derive(Clone, Debug)]
pub struct CutoffMetric {
    pub r_cut: f64,
    pub profile: RadialProfile,
}

impl CutoffMetric {
    pub fn new(r_cut: f64) -> Result<Self> {
        Self::with_profile(r_cut, RadialProfile::eguchi_hanson())
    }

    pub fn with_profile(r_cut: f64, profile: RadialProfile) -> Result<Self> {
        if !(r_cut >= 1.0) {
            return Err(Error::Config(format!("cut parameter must be ≥ 1, got {r_cut}")));
        }
        Ok(Self { r_cut, profile })
    }

    /// Inner edge `√R/2` and outer edge `√R` of the gluing annulus, in `r`.
    pub fn annulus(&self) -> (f64, f64) {
        let s = self.r_cut.sqrt();
        (0.5 * s, s)
    }

    /// `ψ′, ψ″` of the cut-off potential.
    pub fn derivs(&self, rho: f64) -> RadialDerivs {
        let (b, b1, b2) = cutoff_in_rho(rho, self.r_cut);
        if b >= 1.0 {
            return RadialDerivs { d1: 1.0, d2: 0.0 };
        }
        let fp = self.profile.fprime(rho);
        let fpp = self.profile.fsecond(rho);
        if b == 0.0 && b1 == 0.0 {
            return RadialDerivs { d1: fp, d2: fpp };
        }
        let g = self.profile.g(rho);
        let g1 = self.profile.g1(rho);
        RadialDerivs {
            d1: 1.0 + (1.0 - b) * g1 - b1 * g,
            d2: (1.0 - b) * fpp - 2.0 * b1 * g1 - b2 * g,
        }
    }

    pub fn kahler_matrix(&self, z: [Complex64; 2]) -> Result<Herm2> {
        let rho = z[0].norm_sqr() + z[1].norm_sqr();
        if rho == 0.0 {
            return Err(Error::SingularChart("the origin is not in the quotient chart".into()));
        }
        Ok(self.derivs(rho).matrix(z))
    }

    /// `η = ω_Y²/ω_{R,Y}² − 1`, which is `1/det − 1` because `ω_Y` has unit
    /// determinant.
    pub fn eta(&self, rho: f64) -> Result<f64> {
        let d = self.derivs(rho);
        if !(d.d1 > 0.0 && d.radial_coefficient(rho) > 0.0) {
            return Err(Error::Positivity(format!(
                "cut-off metric degenerates at ρ = {rho:.4} (R = {})",
                self.r_cut
            )));
        }
        Ok(1.0 / d.det(rho) - 1.0)
    }
}

/// The correction form `𝒟(β_R G)` at `z`.
pub fn cutoff_form_correction(z: [Complex64; 2], r_cut: f64, profile: &RadialProfile) -> Herm2 {
    let rho = z[0].norm_sqr() + z[1].norm_sqr();
    let (b, b1, b2) = cutoff_in_rho(rho, r_cut);
    if b == 0.0 {
        return Herm2::ZERO;
    }
    let g = profile.g(rho);
    let g1 = profile.g1(rho);
    let g2 = profile.fsecond(rho);
    Herm2::radial(b1 * g + b * g1, b2 * g + 2.0 * b1 * g1 + b * g2, z)
}

/// `η` at `z` for the cut-off metric with parameter `r_cut`.
pub fn eta_on_annulus(z: [Complex64; 2], metric: &CutoffMetric) -> Result<f64> {
    metric.eta(z[0].norm_sqr() + z[1].norm_sqr())
}

/// `(z₁, z₂) ↦ (z₁², z₁z₂, z₂²)`, identifying the chart with the quadric cone.
pub fn quadric_map(z: [Complex64; 2]) -> [Complex64; 3] {
    [z[0] * z[0], z[0] * z[1], z[1] * z[1]]
}

/// `v² − uw` for a point `(u, v, w)`.
pub fn quadric_residual(p: [Complex64; 3]) -> Complex64 {
    p[1] * p[1] - p[0] * p[2]
}

/// Length of the closed curve `θ ↦ c(θ)` under the metric `metric`, scaled by
/// `scale` (so lengths multiply by `√scale`).
pub fn curve_length<C, M>(curve: C, metric: M, scale: f64, samples: usize) -> f64
where
    C: Fn(f64) -> ([Complex64; 2], [Complex64; 2]),
    M: Fn([Complex64; 2]) -> Herm2,
{
    let h = 2.0 * std::f64::consts::PI / samples as f64;
    (0..samples)
        .map(|i| {
            let (z, v) = curve(i as f64 * h);
            (scale * metric(z).norm_sqr(v)).sqrt() * h
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::log_log_slope;
    use proptest::prelude::*;

    fn closed_form_g(rho: f64) -> f64 {
        // Antiderivative of √(1+ρ⁻²) − 1 vanishing at infinity.
        1.0 / ((rho * rho + 1.0).sqrt() + rho) - (1.0 / rho).asinh()
    }

    #[test]
    fn profile_values_at_one() {
        let p = RadialProfile::eguchi_hanson();
        let v = p.eval(1.0).unwrap();
        assert!((v.fp - 2f64.sqrt()).abs() < 1e-15);
        assert!((v.fpp + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(p.ma_identity_residual(1.0).abs() < 1e-12);
        assert!(matches!(p.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(p.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn g_matches_closed_form() {
        let p = RadialProfile::eguchi_hanson();
        for &rho in &[0.01, 0.1, 1.0, 3.0, 50.0, 1e4, 1e7] {
            let want = closed_form_g(rho);
            assert!((p.g(rho) - want).abs() < 1e-13 * (1.0 + want.abs()), "ρ={rho}");
        }
        assert!(p.g(1e9).abs() < 1e-9);
        assert!((p.fprime(1e9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fsecond_is_derivative_of_fprime() {
        let p = RadialProfile::eguchi_hanson();
        for &rho in &[0.05, 0.7, 4.0] {
            let h = 1e-5 * rho;
            let fd = (p.fprime(rho + h) - p.fprime(rho - h)) / (2.0 * h);
            assert!((fd - p.fsecond(rho)).abs() < 1e-8 * fd.abs());
            let gd = (p.g(rho + h) - p.g(rho - h)) / (2.0 * h);
            assert!((gd - p.eval(rho).unwrap().g1).abs() < 1e-7 * gd.abs());
        }
    }

    #[test]
    fn tail_coefficients() {
        let p = RadialProfile::eguchi_hanson();
        assert!((p.tail[0] + 0.5).abs() < 1e-8, "{:?}", p.tail);
        assert!(p.tail[1].abs() < 1e-8);
        assert!((p.tail[2] - 1.0 / 24.0).abs() < 1e-6);
    }

    #[test]
    fn identity_sweep() {
        let p = RadialProfile::eguchi_hanson();
        let e = RadialProfile::euclidean();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let rho = 0.01 * 1e4f64.powf(i as f64 / 999.0);
            worst = worst.max(p.ma_identity_residual(rho).abs());
            assert_eq!(e.ma_identity_residual(rho), 0.0);
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn kahler_matrix_properties() {
        let p = RadialProfile::eguchi_hanson();
        let z = [Complex64::new(0.3, 0.2), Complex64::new(-0.4, 0.9)];
        let h = p.kahler_matrix(z).unwrap();
        assert!((h.det() - 1.0).abs() < 1e-12);
        assert!(h.eigenvalues()[0] > 0.0);
        let m = p.kahler_matrix([-z[0], -z[1]]).unwrap();
        assert_eq!(h, m);
        let flat = RadialProfile::euclidean().kahler_matrix(z).unwrap();
        assert_eq!(flat, Herm2::IDENTITY);
        assert!(p.kahler_matrix([Complex64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn cutoff_metric_regions() {
        let m = CutoffMetric::new(64.0).unwrap();
        let (a, b) = m.annulus();
        let p = &m.profile;
        let z = |r: f64| [Complex64::new(r * 0.6, 0.0), Complex64::new(0.0, r * 0.8)];
        // Inside: the correction vanishes and the metric is Eguchi-Hanson.
        let inner = z(0.9 * a);
        assert_eq!(cutoff_form_correction(inner, 64.0, p), Herm2::ZERO);
        assert_eq!(m.kahler_matrix(inner).unwrap(), p.kahler_matrix(inner).unwrap());
        assert!(m.eta(0.81 * a * a).unwrap().abs() < 1e-15);
        // Outside: ω_Y − 𝒟(β_R G) is the flat form.
        let outer = z(1.3 * b);
        let diff = p.kahler_matrix(outer).unwrap().sub(&cutoff_form_correction(outer, 64.0, p));
        assert!(diff.sub(&Herm2::IDENTITY).norm() < 1e-14);
        assert_eq!(m.kahler_matrix(outer).unwrap(), Herm2::IDENTITY);
        // On the annulus the two descriptions agree.
        for f in [0.55, 0.7, 0.95] {
            let w = z(f * b);
            let lhs = p.kahler_matrix(w).unwrap().sub(&cutoff_form_correction(w, 64.0, p));
            assert!(lhs.sub(&m.kahler_matrix(w).unwrap()).norm() < 1e-14);
        }
    }

    fn sup_over_annulus<F: Fn(f64) -> f64>(r_cut: f64, f: F) -> f64 {
        let (a, b) = (0.5 * r_cut.sqrt(), r_cut.sqrt());
        (0..=400)
            .map(|i| f((a + (b - a) * i as f64 / 400.0).powi(2)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn correction_and_eta_scale_like_inverse_square() {
        let p = RadialProfile::eguchi_hanson();
        let rs = [16.0, 64.0, 256.0];
        let corr: Vec<f64> = rs
            .iter()
            .map(|&r| {
                sup_over_annulus(r, |rho| {
                    let z = [Complex64::new(rho.sqrt(), 0.0), Complex64::new(0.0, 0.0)];
                    cutoff_form_correction(z, r, &p).norm()
                })
            })
            .collect();
        let etas: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let m = CutoffMetric::new(r).unwrap();
                sup_over_annulus(r, |rho| m.eta(rho).unwrap().abs())
            })
            .collect();
        let s1 = log_log_slope(&rs, &corr).unwrap().slope;
        let s2 = log_log_slope(&rs, &etas).unwrap().slope;
        assert!((s1 + 2.0).abs() <= 0.3, "{s1}");
        assert!((s2 + 2.0).abs() <= 0.3, "{s2}");
    }

    #[test]
    fn cutoff_positive_at_64() {
        let m = CutoffMetric::new(64.0).unwrap();
        for i in 0..2000 {
            let rho = 0.01 * 1e5f64.powf(i as f64 / 1999.0);
            assert!(m.eta(rho).is_ok());
            let d = m.derivs(rho);
            assert!(d.d1 > 0.0 && d.radial_coefficient(rho) > 0.0);
        }
    }

    #[test]
    fn derivative_decay_rates() {
        let p = RadialProfile::eguchi_hanson();
        let rs: Vec<f64> = (0..8).map(|i| 10.0 * 2f64.powi(i)).collect();
        let norms: Vec<[f64; 3]> = rs.iter().map(|&r| p.tail_derivative_norms(r)).collect();
        for j in 0..3 {
            let ys: Vec<f64> = norms.iter().map(|n| n[j]).collect();
            let s = log_log_slope(&rs, &ys).unwrap().slope;
            let want = -2.0 - j as f64;
            assert!((s - want).abs() <= 0.05 * want.abs(), "j={j}: {s}");
        }
    }

    #[test]
    fn rescaled_sphere_has_small_radius() {
        for r_cut in [16.0, 64.0, 256.0] {
            let m = CutoffMetric::new(r_cut).unwrap();
            let r = r_cut.sqrt();
            let fibre = |t: f64| {
                let e = Complex64::from_polar(r, t);
                ([e, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 1.0) * e, Complex64::new(0.0, 0.0)])
            };
            let horizontal = |t: f64| {
                let (c, s) = (t.cos(), t.sin());
                (
                    [Complex64::new(r * c, 0.0), Complex64::new(r * s, 0.0)],
                    [Complex64::new(-r * s, 0.0), Complex64::new(r * c, 0.0)],
                )
            };
            let scale = r_cut.powi(-2);
            let target = 2.0 * std::f64::consts::PI * r_cut.powf(-0.5);
            for len in [
                curve_length(fibre, |z| m.kahler_matrix(z).unwrap(), scale, 256),
                curve_length(horizontal, |z| m.kahler_matrix(z).unwrap(), scale, 256),
            ] {
                assert!((len - target).abs() < 1e-12, "{len} vs {target}");
            }
        }
    }

    proptest! {
        #[test]
        fn quadric_identity(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let z = [Complex64::new(a, b), Complex64::new(c, d)];
            let p = quadric_map(z);
            prop_assert!(quadric_residual(p).norm() <= 1e-12 * (1.0 + p[1].norm_sqr()));
            // z and −z land on the same point.
            prop_assert_eq!(quadric_map([-z[0], -z[1]]), p);
        }

        #[test]
        fn eh_matrix_positive_with_unit_det(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
            let z = [Complex64::new(a, b), Complex64::new(c, d)];
            prop_assume!(z[0].norm_sqr() + z[1].norm_sqr() > 1e-4);
            let h = RadialProfile::eguchi_hanson().kahler_matrix(z).unwrap();
            prop_assert!(h.eigenvalues()[0] > 0.0);
            prop_assert!((h.det() - 1.0).abs() < 1e-12);
        }
    }
}
