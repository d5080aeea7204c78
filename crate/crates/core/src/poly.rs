//! Polynomials in `z₁, z₂, z̄₁, z̄₂` with complex coefficients.
//!
//! Used to carry spherical harmonics on `S³ ⊂ ℂ²` in closed form so that
//! their holomorphic and antiholomorphic derivatives are exact.

use num_complex::Complex64;
use std::collections::BTreeMap;

/// Exponents of `(z₁, z₂, z̄₁, z̄₂)`.
pub type Monomial = [u8; 4];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Monomial, Complex64>,
}

/// First and mixed second Wirtinger derivatives of a real polynomial at a point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet {
    pub value: f64,
    /// `∂P/∂z_i`.
    pub dz: [Complex64; 2],
    /// `∂²P/∂z_i∂z̄_j`.
    pub hess: [[Complex64; 2]; 2],
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(exp: Monomial, coef: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coef);
        p
    }

    pub fn add_term(&mut self, exp: Monomial, coef: Complex64) {
        let e = self.terms.entry(exp).or_insert(Complex64::new(0.0, 0.0));
        *e += coef;
        if e.norm() < 1e-300 {
            self.terms.remove(&exp);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term(*e, v * c);
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Self {
        let mut out = self.clone();
        for (e, v) in &other.terms {
            out.add_term(*e, *v);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            for (f, w) in &other.terms {
                let ne = [e[0] + f[0], e[1] + f[1], e[2] + f[2], e[3] + f[3]];
                out.add_term(ne, v * w);
            }
        }
        out
    }

    /// `|z|² = z₁z̄₁ + z₂z̄₂`.
    pub fn radius_squared() -> Self {
        let mut p = Self::monomial([1, 0, 1, 0], Complex64::new(1.0, 0.0));
        p.add_term([0, 1, 0, 1], Complex64::new(1.0, 0.0));
        p
    }

    /// Complex conjugate polynomial: `P̄(z) = conj(P(z))`.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term([e[2], e[3], e[0], e[1]], v.conj());
        }
        out
    }

    /// `(P + P̄)/2`.
    pub fn real_part(&self) -> Self {
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// `(P − P̄)/(2i)`.
    pub fn imag_part(&self) -> Self {
        self.add(&self.conj().scale(Complex64::new(-1.0, 0.0)))
            .scale(Complex64::new(0.0, -0.5))
    }

    /// Wirtinger derivative in `z_i` (`i = 0, 1`) or `z̄_i` (`i = 2, 3`).
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut ne = *e;
            ne[var] -= 1;
            out.add_term(ne, v * e[var] as f64);
        }
        out
    }

    /// Euclidean Laplacian `Σ ∂²/∂x² = 4 Σ ∂²/∂z_i∂z̄_i`.
    pub fn laplacian(&self) -> Self {
        let a = self.derivative(0).derivative(2);
        let b = self.derivative(1).derivative(3);
        a.add(&b).scale(Complex64::new(4.0, 0.0))
    }

    pub fn eval(&self, z: [Complex64; 2]) -> Complex64 {
        let zb = [z[0].conj(), z[1].conj()];
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, v) in &self.terms {
            acc += v
                * z[0].powu(e[0] as u32)
                * z[1].powu(e[1] as u32)
                * zb[0].powu(e[2] as u32)
                * zb[1].powu(e[3] as u32);
        }
        acc
    }

    /// Total degree, assuming the polynomial is homogeneous.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Precomputes derivative polynomials for repeated jet evaluation.
    pub fn jet_table(&self) -> JetPoly {
        let dz = [self.derivative(0), self.derivative(1)];
        let hess = [
            [dz[0].derivative(2), dz[0].derivative(3)],
            [dz[1].derivative(2), dz[1].derivative(3)],
        ];
        JetPoly {
            value: self.clone(),
            dz,
            hess,
        }
    }

    /// Apply a linear substitution of the form `z_i ↦ phase_i · z_{perm(i)}`,
    /// optionally followed by complex conjugation of the argument.
    pub fn substitute(&self, perm: [usize; 2], phase: [Complex64; 2], conjugate: bool) -> Self {
        // P(w) with w_i = phase_i z_{perm i} (or its conjugate).
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            let mut ne = [0u8; 4];
            let mut c = *v;
            for i in 0..2 {
                c *= phase[i].powu(e[i] as u32) * phase[i].conj().powu(e[i + 2] as u32);
                let target = perm[i];
                if conjugate {
                    ne[target + 2] += e[i];
                    ne[target] += e[i + 2];
                } else {
                    ne[target] += e[i];
                    ne[target + 2] += e[i + 2];
                }
            }
            out.add_term(ne, c);
        }
        out
    }
}

/// A real polynomial together with its Wirtinger derivative polynomials.
#[derive(Clone, Debug)]
pub struct JetPoly {
    pub value: Poly,
    pub dz: [Poly; 2],
    pub hess: [[Poly; 2]; 2],
}

impl JetPoly {
    pub fn eval(&self, z: [Complex64; 2]) -> Jet {
        Jet {
            value: self.value.eval(z).re,
            dz: [self.dz[0].eval(z), self.dz[1].eval(z)],
            hess: [
                [self.hess[0][0].eval(z), self.hess[0][1].eval(z)],
                [self.hess[1][0].eval(z), self.hess[1][1].eval(z)],
            ],
        }
    }
}

/// All monomials of bidegree `(p, q)`: holomorphic degree `p`, antiholomorphic `q`.
pub fn bidegree_monomials(p: usize, q: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for a in 0..=p {
        for c in 0..=q {
            out.push([a as u8, (p - a) as u8, c as u8, (q - c) as u8]);
        }
    }
    out
}
