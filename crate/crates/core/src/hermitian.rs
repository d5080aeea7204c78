//! 2×2 Hermitian matrices, used for `(1,1)`-forms on `ℂ²`.
//!
//! A real `(1,1)`-form is stored as its coefficient matrix `H_ij` (the
//! coefficient of `dz_i ∧ dz̄_j`). The flat form is the identity, a form is
//! positive exactly when `H` is positive definite, and `α ∧ β` is
//! proportional to `½(tr α tr β − tr αβ)`, so `α ∧ α ∝ det α`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `[[a, c], [c̄, b]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Herm2 {
    pub a: f64,
    pub b: f64,
    pub c: Complex64,
}

impl Herm2 {
    pub const IDENTITY: Herm2 = Herm2 {
        a: 1.0,
        b: 1.0,
        c: Complex64 { re: 0.0, im: 0.0 },
    };

    pub const ZERO: Herm2 = Herm2 {
        a: 0.0,
        b: 0.0,
        c: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(a: f64, b: f64, c: Complex64) -> Self {
        Self { a, b, c }
    }

    /// `ψ′ δ_ij + ψ″ z̄_i z_j`: the complex Hessian of a radial potential
    /// `ψ(|z|²)`.
    pub fn radial(d1: f64, d2: f64, z: [Complex64; 2]) -> Self {
        Self {
            a: d1 + d2 * z[0].norm_sqr(),
            b: d1 + d2 * z[1].norm_sqr(),
            c: d2 * z[0].conj() * z[1],
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.b - self.c.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.a + self.b
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    /// `tr(self · o)`.
    pub fn trace_product(&self, o: &Self) -> f64 {
        self.a * o.a + self.b * o.b + 2.0 * (self.c * o.c.conj()).re
    }

    /// `½(tr α tr β − tr αβ)`; equals `det` on the diagonal.
    pub fn wedge(&self, o: &Self) -> f64 {
        0.5 * (self.trace() * o.trace() - self.trace_product(o))
    }

    /// Inverse, or `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return None;
        }
        Some(Self {
            a: self.b / d,
            b: self.a / d,
            c: -self.c / d,
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.a + self.b);
        let r = (0.25 * (self.a - self.b).powi(2) + self.c.norm_sqr()).sqrt();
        [m - r, m + r]
    }

    /// Smallest eigenvalue of `self` relative to `reference`, i.e. the least
    /// `μ` with `det(self − μ·reference) = 0`. `reference` must be positive.
    pub fn relative_min_eigenvalue(&self, reference: &Self) -> f64 {
        // det(A − μB) = det B μ² − wedge2 μ + det A, wedge2 = tr(adj(B) A).
        let db = reference.det();
        let cross = 2.0 * self.wedge(reference);
        let da = self.det();
        let disc = (cross * cross - 4.0 * db * da).max(0.0).sqrt();
        (cross - disc) / (2.0 * db)
    }

    pub fn is_positive(&self) -> bool {
        self.a > 0.0 && self.det() > 0.0
    }

    /// `v^T H v̄`, the squared length of a tangent vector `v`.
    pub fn norm_sqr(&self, v: [Complex64; 2]) -> f64 {
        let hv0 = self.a * v[0].conj() + self.c * v[1].conj();
        let hv1 = self.c.conj() * v[0].conj() + self.b * v[1].conj();
        (v[0] * hv0 + v[1] * hv1).re
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + 2.0 * self.c.norm_sqr()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    fn dense(h: &Herm2) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(h.a, 0.0),
            h.c,
            h.c.conj(),
            Complex64::new(h.b, 0.0),
        )
    }

    #[test]
    fn matches_dense_algebra() {
        let h = Herm2::new(2.0, 3.0, Complex64::new(0.4, -0.7));
        let g = Herm2::new(1.5, 0.5, Complex64::new(-0.2, 0.1));
        let (dh, dg) = (dense(&h), dense(&g));
        assert!((dh.determinant().re - h.det()).abs() < 1e-14);
        assert!(((dh * dg).trace().re - h.trace_product(&g)).abs() < 1e-14);
        let inv = dense(&h.inverse().unwrap());
        assert!((inv * dh - Matrix2::identity()).norm() < 1e-14);
        let ev = h.eigenvalues();
        for e in ev {
            let shifted = dense(&h.sub(&Herm2::IDENTITY.scale(e)));
            assert!(shifted.determinant().norm() < 1e-12);
        }
        assert!((h.wedge(&h) - h.det()).abs() < 1e-14);
        let mu = h.relative_min_eigenvalue(&g);
        assert!(h.sub(&g.scale(mu)).det().abs() < 1e-10);
        assert!(h.sub(&g.scale(mu - 1e-3)).is_positive());
    }

    #[test]
    fn radial_hessian_on_radial_vector() {
        let z = [Complex64::new(0.3, 0.4), Complex64::new(-1.0, 0.2)];
        let rho = z[0].norm_sqr() + z[1].norm_sqr();
        let h = Herm2::radial(1.3, -0.2, z);
        assert!((h.norm_sqr(z) - rho * (1.3 - 0.2 * rho)).abs() < 1e-12);
        assert!((h.det() - 1.3 * (1.3 - 0.2 * rho)).abs() < 1e-12);
    }
}
