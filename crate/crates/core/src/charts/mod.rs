//! Discretisations of `□` used by the gluing and solver modules.
//!
//! Near a fixed point the geometry is `U(2)`-invariant, so it is handled by a
//! log-radial chart expanded in cross-section modes. The flat remainder of the
//! torus is a periodic Cartesian grid. The two overlap in an annulus and are
//! coupled through their interface values.

pub mod cartesian;
pub mod composite;
pub mod polar;

use crate::eguchi_hanson::quintic_step;

/// Radius (X units) below which the conformal factor equals the distance to
/// the fixed point.
pub const CAP_START: f64 = 0.15;
/// Radius beyond which the conformal factor is constant.
pub const CAP_END: f64 = 0.24;

/// Capped distance `H(r)`: `r` up to [`CAP_START`], constant `(a + b)/2`
/// from [`CAP_END`] on, with `H′ = 1 − step` in between.
pub fn capped_radius(r: f64) -> f64 {
    let (a, b) = (CAP_START, CAP_END);
    if r <= a {
        r
    } else if r >= b {
        0.5 * (a + b)
    } else {
        let y = (r - a) / (b - a);
        let y4 = y * y * y * y;
        r - (b - a) * y4 * (y * y - 3.0 * y + 2.5)
    }
}

/// `H′(r)`.
pub fn capped_radius_slope(r: f64) -> f64 {
    1.0 - quintic_step((r - CAP_START) / (CAP_END - CAP_START)).0
}

/// Distance function smoothed over the exceptional sphere: `r̃² = ρ + ½(1 − S(ρ))`
/// with `S` the quintic step on `[0, 1]`, so `r̃ = r` once `ρ ≥ 1` and
/// `r̃ → 1/√2` at the bolt.
pub fn smoothed_radius(rho: f64) -> f64 {
    (rho + 0.5 * (1.0 - quintic_step(rho).0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_is_monotone_and_smooth() {
        let mut prev = 0.0;
        for i in 1..=400 {
            let r = i as f64 * 0.001;
            let h = capped_radius(r);
            assert!(h >= prev);
            prev = h;
            let d = 1e-6;
            let fd = (capped_radius(r + d) - capped_radius(r - d)) / (2.0 * d);
            assert!((fd - capped_radius_slope(r)).abs() < 1e-6);
        }
        assert_eq!(capped_radius(0.1), 0.1);
        assert!((capped_radius(0.3) - 0.195).abs() < 1e-15);
        assert!((capped_radius(CAP_END) - 0.195).abs() < 1e-14);
    }

    #[test]
    fn smoothed_radius_limits() {
        assert!((smoothed_radius(0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(smoothed_radius(4.0), 2.0);
        let mut prev = 0.0;
        for i in 0..=200 {
            let v = smoothed_radius(i as f64 * 0.01);
            assert!(v > prev);
            prev = v;
        }
    }
}
