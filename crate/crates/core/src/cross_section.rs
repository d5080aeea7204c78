//! Eigenbases of the Laplacian on the compact cross-sections used by the
//! cylindrical solves: the circle, the round three-sphere and its antipodal
//! quotient.
//!
//! Sphere modes are real harmonic polynomials restricted to `S³ ⊂ ℂ²`. They are
//! grouped by bidegree `(p, q)`, which fixes the degree `k = p + q` and the
//! Hopf charge `|p − q|`. The charge matters once the round metric is squashed
//! along the Hopf fibre.

use crate::error::{Error, Result};
use crate::poly::{bidegree_monomials, JetPoly, Poly};
use crate::quadrature::gauss_legendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossSectionKind {
    Circle,
    Sphere3,
    Sphere3ModInvolution,
}

impl std::str::FromStr for CrossSectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Self::Circle),
            "sphere3" => Ok(Self::Sphere3),
            "sphere3-mod-involution" => Ok(Self::Sphere3ModInvolution),
            other => Err(Error::Config(format!("unknown cross-section kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSpec {
    pub kind: CrossSectionKind,
    pub radius: f64,
    pub max_degree: usize,
}

impl CrossSectionSpec {
    pub fn new(kind: CrossSectionKind, radius: f64, max_degree: usize) -> Result<Self> {
        let spec = Self {
            kind,
            radius,
            max_degree,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!(
                "cross-section radius must be positive, got {}",
                self.radius
            )));
        }
        if self.max_degree > 24 {
            return Err(Error::Config(format!(
                "max_degree {} exceeds the supported limit 24",
                self.max_degree
            )));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            CrossSectionKind::Circle => 1,
            _ => 3,
        }
    }
}

/// Which functions on the sphere are admitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// Every mode up to the maximum degree.
    None,
    /// Invariant under `z_i ↦ i z_i`, `z₁ ↔ z₂` and `z ↦ z̄` (a group of
    /// order 64). These are the symmetries of the cubic lattice fixed points.
    CubicLattice,
}

/// One eigenfunction.
#[derive(Clone, Debug)]
pub struct Mode {
    /// Polynomial degree on the sphere, Fourier index on the circle.
    pub degree: usize,
    /// Absolute Hopf charge `|p − q|`; zero on the circle.
    pub charge: usize,
    pub eigenvalue: f64,
    kind: ModeKind,
}

#[derive(Clone, Debug)]
enum ModeKind {
    Cos(usize),
    Sin(usize),
    /// Real polynomial, orthonormal on the unit sphere.
    Sphere(Poly),
}

/// Quadrature on the cross-section. Sphere points are unit vectors in `ℂ²`
/// scaled by the radius; circle points carry the angle.
#[derive(Clone, Debug)]
pub struct AngularQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Angle(f64),
    Sphere([Complex64; 2]),
}

impl AngularQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Product rule exact for polynomials (or trigonometric polynomials) of
    /// degree ≤ `exactness`.
    pub fn build(spec: &CrossSectionSpec, exactness: usize) -> Self {
        let a = spec.radius;
        match spec.kind {
            CrossSectionKind::Circle => {
                let n = exactness + 1;
                let h = 2.0 * PI / n as f64;
                Self {
                    points: (0..n).map(|i| Point::Angle(i as f64 * h)).collect(),
                    weights: vec![a * h; n],
                }
            }
            _ => {
                // z₁ = √(1−σ) e^{iξ₁}, z₂ = √σ e^{iξ₂}; dvol = ½ dσ dξ₁ dξ₂.
                let n_xi = exactness + 1;
                let n_sigma = exactness / 4 + 1;
                let (x, w) = gauss_legendre(n_sigma);
                let h = 2.0 * PI / n_xi as f64;
                let scale = a.powi(3);
                let mut points = Vec::with_capacity(n_sigma * n_xi * n_xi);
                let mut weights = Vec::with_capacity(points.capacity());
                for (xs, ws) in x.iter().zip(&w) {
                    let sigma = 0.5 * (xs + 1.0);
                    let wsig = 0.5 * ws;
                    let (r1, r2) = ((1.0 - sigma).sqrt(), sigma.sqrt());
                    for i in 0..n_xi {
                        let e1 = Complex64::from_polar(r1 * a, i as f64 * h);
                        for j in 0..n_xi {
                            let e2 = Complex64::from_polar(r2 * a, j as f64 * h);
                            points.push(Point::Sphere([e1, e2]));
                            weights.push(0.5 * wsig * h * h * scale);
                        }
                    }
                }
                Self { points, weights }
            }
        }
    }
}

/// Orthonormal eigenbasis with values tabulated on a quadrature grid.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub spec: CrossSectionSpec,
    pub symmetry: Symmetry,
    pub modes: Vec<Mode>,
    pub quadrature: AngularQuadrature,
    /// `table[j][q]` is mode `j` at quadrature point `q`.
    table: Vec<Vec<f64>>,
}

/// Eigenbasis of every mode up to `max_degree`.
pub fn spectrum(spec: &CrossSectionSpec) -> Result<EigenSystem> {
    EigenSystem::new(spec, Symmetry::None)
}

impl EigenSystem {
    pub fn new(spec: &CrossSectionSpec, symmetry: Symmetry) -> Result<Self> {
        let exactness = 2 * spec.max_degree + 2;
        Self::with_exactness(spec, symmetry, exactness)
    }

    /// As [`EigenSystem::new`] with an explicit quadrature exactness, which must
    /// be at least `2·max_degree` for orthonormality to hold.
    pub fn with_exactness(spec: &CrossSectionSpec, symmetry: Symmetry, exactness: usize) -> Result<Self> {
        spec.validate()?;
        if exactness < 2 * spec.max_degree {
            return Err(Error::Config(format!(
                "quadrature exactness {exactness} is below 2·max_degree = {}",
                2 * spec.max_degree
            )));
        }
        if symmetry != Symmetry::None && spec.kind == CrossSectionKind::Circle {
            return Err(Error::Config("lattice symmetry applies to sphere cross-sections only".into()));
        }
        let quadrature = AngularQuadrature::build(spec, exactness);
        let modes = match spec.kind {
            CrossSectionKind::Circle => circle_modes(spec),
            _ => sphere_modes(spec, symmetry, &quadrature),
        };
        let mut sys = Self {
            spec: *spec,
            symmetry,
            modes,
            quadrature,
            table: Vec::new(),
        };
        sys.table = (0..sys.modes.len())
            .map(|j| sys.quadrature.points.iter().map(|p| sys.eval_mode(j, p)).collect())
            .collect();
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Distinct eigenvalues with their multiplicities.
    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for m in &self.modes {
            match out.last_mut() {
                Some((v, c)) if (m.eigenvalue - *v).abs() <= 1e-12 * (1.0 + v.abs()) => *c += 1,
                _ => out.push((m.eigenvalue, 1)),
            }
        }
        out
    }

    /// Mode `j` at a point of the cross-section.
    pub fn eval_mode(&self, j: usize, point: &Point) -> f64 {
        let a = self.spec.radius;
        match (&self.modes[j].kind, point) {
            (ModeKind::Cos(0), _) => 1.0 / (2.0 * PI * a).sqrt(),
            (ModeKind::Cos(n), Point::Angle(t)) => (*n as f64 * t).cos() / (PI * a).sqrt(),
            (ModeKind::Sin(n), Point::Angle(t)) => (*n as f64 * t).sin() / (PI * a).sqrt(),
            (ModeKind::Sphere(p), Point::Sphere(z)) => {
                let u = [z[0] / a, z[1] / a];
                p.eval(u).re / a.powf(1.5)
            }
            _ => panic!("point type does not match cross-section kind"),
        }
    }

    /// Values of mode `j` on the quadrature grid.
    pub fn mode_values(&self, j: usize) -> &[f64] {
        &self.table[j]
    }

    /// Polynomial of a sphere mode on the unit sphere, if any.
    pub fn mode_poly(&self, j: usize) -> Option<&Poly> {
        match &self.modes[j].kind {
            ModeKind::Sphere(p) => Some(p),
            _ => None,
        }
    }

    /// Wirtinger jets of every sphere mode, for Hessian evaluation off the sphere.
    pub fn jet_polys(&self) -> Vec<JetPoly> {
        self.modes
            .iter()
            .map(|m| match &m.kind {
                ModeKind::Sphere(p) => p.jet_table(),
                _ => Poly::zero().jet_table(),
            })
            .collect()
    }

    pub fn project(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let nq = self.quadrature.len();
        if samples.len() != nq {
            return Err(Error::Shape {
                expected: nq,
                got: samples.len(),
            });
        }
        let w = &self.quadrature.weights;
        Ok(self
            .table
            .iter()
            .map(|row| row.iter().zip(samples).zip(w).map(|((y, f), wq)| y * f * wq).sum())
            .collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.quadrature.len()];
        for (row, c) in self.table.iter().zip(coeffs) {
            for (o, y) in out.iter_mut().zip(row) {
                *o += c * y;
            }
        }
        Ok(out)
    }

    /// `∫ f g` on the quadrature grid.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.quadrature.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// Gram matrix of the tabulated modes.
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.inner(&self.table[i], &self.table[j]))
    }

    /// Eigenvalue of mode `j` for the Berger metric `A(dr² + r²σ₁²) + B r²(σ₂² + σ₃²)`
    /// restricted to the sphere of radius `r`, with `σ₁` the Hopf direction.
    pub fn berger_eigenvalue(&self, j: usize, a: f64, b: f64, r: f64) -> f64 {
        let m = &self.modes[j];
        berger_eigenvalue(m.degree, m.charge, a, b, r)
    }
}

/// `[(k(k+2) − m²)/B + m²/A] / r²` for degree `k` and Hopf charge `m`.
pub fn berger_eigenvalue(degree: usize, charge: usize, a: f64, b: f64, r: f64) -> f64 {
    let k = degree as f64;
    let m2 = (charge * charge) as f64;
    ((k * (k + 2.0) - m2) / b + m2 / a) / (r * r)
}

fn circle_modes(spec: &CrossSectionSpec) -> Vec<Mode> {
    let a2 = spec.radius * spec.radius;
    let mut modes = vec![Mode {
        degree: 0,
        charge: 0,
        eigenvalue: 0.0,
        kind: ModeKind::Cos(0),
    }];
    for n in 1..=spec.max_degree {
        let ev = (n * n) as f64 / a2;
        for kind in [ModeKind::Cos(n), ModeKind::Sin(n)] {
            modes.push(Mode {
                degree: n,
                charge: 0,
                eigenvalue: ev,
                kind,
            });
        }
    }
    modes
}

/// Holomorphic/antiholomorphic bidegree harmonics, orthonormal (complex inner
/// product) on the unit sphere.
struct ComplexHarmonics {
    by_bidegree: std::collections::HashMap<(usize, usize), Vec<Poly>>,
}

fn unit_sphere_values(p: &Poly, quad: &AngularQuadrature, radius: f64) -> Vec<Complex64> {
    quad.points
        .iter()
        .map(|pt| match pt {
            Point::Sphere(z) => p.eval([z[0] / radius, z[1] / radius]),
            Point::Angle(_) => unreachable!(),
        })
        .collect()
}

fn complex_inner(f: &[Complex64], g: &[Complex64], w: &[f64], vol: f64) -> Complex64 {
    // Normalized to the unit sphere.
    let s: Complex64 = f.iter().zip(g).zip(w).map(|((a, b), wq)| a.conj() * b * wq).sum();
    s / vol
}

impl ComplexHarmonics {
    fn build(max_degree: usize, quad: &AngularQuadrature, radius: f64) -> Self {
        // Quadrature weights rescaled to the unit sphere.
        let vol_scale = radius.powi(3);
        let w = &quad.weights;
        let mut by_bidegree: std::collections::HashMap<(usize, usize), Vec<Poly>> = Default::default();
        let r2 = Poly::radius_squared();
        for k in 0..=max_degree {
            for p in 0..=k {
                let q = k - p;
                let mut basis: Vec<(Poly, Vec<Complex64>)> = Vec::new();
                for e in bidegree_monomials(p, q) {
                    let mono = Poly::monomial(e, Complex64::new(1.0, 0.0));
                    let mut cand = mono.clone();
                    let mono_vals = unit_sphere_values(&mono, quad, radius);
                    // Remove the lower harmonic components, lifted by |z|^{2j}.
                    let mut lift = Poly::monomial([0, 0, 0, 0], Complex64::new(1.0, 0.0));
                    for j in 1..=p.min(q) {
                        lift = lift.mul(&r2);
                        if let Some(lower) = by_bidegree.get(&(p - j, q - j)) {
                            for h in lower {
                                let hv = unit_sphere_values(h, quad, radius);
                                let c = complex_inner(&hv, &mono_vals, w, vol_scale);
                                cand = cand.add(&h.mul(&lift).scale(-c));
                            }
                        }
                    }
                    let mut vals = unit_sphere_values(&cand, quad, radius);
                    for _ in 0..2 {
                        for (b, bv) in &basis {
                            let c = complex_inner(bv, &vals, w, vol_scale);
                            cand = cand.add(&b.scale(-c));
                            for (v, x) in vals.iter_mut().zip(bv) {
                                *v -= c * x;
                            }
                        }
                    }
                    let norm = complex_inner(&vals, &vals, w, vol_scale).re.sqrt();
                    if norm > 1e-8 {
                        let s = Complex64::new(1.0 / norm, 0.0);
                        basis.push((cand.scale(s), vals.iter().map(|v| v * s).collect()));
                    }
                }
                by_bidegree.insert((p, q), basis.into_iter().map(|(b, _)| b).collect());
            }
        }
        Self { by_bidegree }
    }
}

/// The 64 substitutions `z ↦ D·Π·z` or `D·Π·z̄` with `D` a diagonal of fourth
/// roots of unity and `Π` a permutation.
fn cubic_lattice_group() -> Vec<([usize; 2], [Complex64; 2], bool)> {
    let i_pow = |n: usize| Complex64::new(0.0, 1.0).powu(n as u32);
    let mut out = Vec::with_capacity(64);
    for a in 0..4 {
        for b in 0..4 {
            for perm in [[0, 1], [1, 0]] {
                for conj in [false, true] {
                    out.push((perm, [i_pow(a), i_pow(b)], conj));
                }
            }
        }
    }
    out
}

fn reynolds(p: &Poly, group: &[([usize; 2], [Complex64; 2], bool)]) -> Poly {
    let mut acc = Poly::zero();
    for (perm, phase, conj) in group {
        acc = acc.add(&p.substitute(*perm, *phase, *conj));
    }
    acc.scale(Complex64::new(1.0 / group.len() as f64, 0.0))
}

/// Real Gram-Schmidt on the quadrature grid (unit-sphere normalization).
fn orthonormalize_real(cands: Vec<Poly>, quad: &AngularQuadrature, radius: f64) -> Vec<Poly> {
    let vol = radius.powi(3);
    let w = &quad.weights;
    let mut basis: Vec<(Poly, Vec<f64>)> = Vec::new();
    for cand in cands {
        let mut p = cand;
        let mut vals: Vec<f64> = unit_sphere_values(&p, quad, radius).iter().map(|v| v.re).collect();
        let start: f64 = vals.iter().zip(w).map(|(v, wq)| v * v * wq).sum::<f64>() / vol;
        if start.sqrt() < 1e-12 {
            continue;
        }
        for _ in 0..2 {
            for (b, bv) in &basis {
                let c: f64 = bv.iter().zip(&vals).zip(w).map(|((x, y), wq)| x * y * wq).sum::<f64>() / vol;
                p = p.add(&b.scale(Complex64::new(-c, 0.0)));
                for (v, x) in vals.iter_mut().zip(bv) {
                    *v -= c * x;
                }
            }
        }
        let n2: f64 = vals.iter().zip(w).map(|(v, wq)| v * v * wq).sum::<f64>() / vol;
        if n2.sqrt() > 1e-8 * start.sqrt().max(1.0) {
            let s = 1.0 / n2.sqrt();
            basis.push((p.scale(Complex64::new(s, 0.0)), vals.iter().map(|v| v * s).collect()));
        }
    }
    basis.into_iter().map(|(p, _)| p).collect()
}

fn sphere_modes(spec: &CrossSectionSpec, symmetry: Symmetry, quad: &AngularQuadrature) -> Vec<Mode> {
    let a = spec.radius;
    let harmonics = ComplexHarmonics::build(spec.max_degree, quad, a);
    let group = cubic_lattice_group();
    let even_only = spec.kind == CrossSectionKind::Sphere3ModInvolution || symmetry == Symmetry::CubicLattice;
    let mut modes = Vec::new();
    for k in 0..=spec.max_degree {
        if even_only && k % 2 == 1 {
            continue;
        }
        let ev = (k * (k + 2)) as f64 / (a * a);
        // Sector with charge m pairs bidegrees (p, q) and (q, p), p ≥ q.
        for p in (k.div_ceil(2)..=k).rev() {
            let q = k - p;
            let charge = p - q;
            let mut cands = Vec::new();
            for h in &harmonics.by_bidegree[&(p, q)] {
                cands.push(h.real_part());
                cands.push(h.imag_part());
            }
            if symmetry == Symmetry::CubicLattice {
                cands = cands.iter().map(|c| reynolds(c, &group)).collect();
            }
            for poly in orthonormalize_real(cands, quad, a) {
                modes.push(Mode {
                    degree: k,
                    charge,
                    eigenvalue: ev,
                    kind: ModeKind::Sphere(poly),
                });
            }
        }
    }
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(kind: CrossSectionKind, deg: usize) -> EigenSystem {
        spectrum(&CrossSectionSpec::new(kind, 1.0, deg).unwrap()).unwrap()
    }

    #[test]
    fn circle_spectrum() {
        let s = sys(CrossSectionKind::Circle, 2);
        assert_eq!(s.eigenvalues(), vec![0.0, 1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn sphere_multiplicities() {
        let s = sys(CrossSectionKind::Sphere3, 4);
        let m = s.multiplicities();
        assert_eq!(m.len(), 5);
        for (k, (ev, mult)) in m.iter().enumerate() {
            assert!((ev - (k * (k + 2)) as f64).abs() < 1e-12);
            assert_eq!(*mult, (k + 1) * (k + 1));
        }
        let q = sys(CrossSectionKind::Sphere3ModInvolution, 4);
        let m: Vec<(f64, usize)> = q.multiplicities();
        assert_eq!(m, vec![(0.0, 1), (8.0, 9), (24.0, 25)]);
    }

    /// Galerkin discretization of the Laplace-Beltrami operator on the span of
    /// homogeneous monomials of degrees 3 and 4 in real coordinates. On the
    /// sphere this span is exactly the harmonics of degree ≤ 4.
    fn galerkin_spectrum(degrees: &[usize]) -> Vec<f64> {
        let mut exps: Vec<[usize; 4]> = Vec::new();
        for &d in degrees {
            for a in 0..=d {
                for b in 0..=d - a {
                    for c in 0..=d - a - b {
                        exps.push([a, b, c, d - a - b - c]);
                    }
                }
            }
        }
        let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3, 1.0, 6).unwrap();
        let quad = AngularQuadrature::build(&spec, 14);
        let n = exps.len();
        let mut mass: DMatrix<f64> = DMatrix::zeros(n, n);
        let mut stiff: DMatrix<f64> = DMatrix::zeros(n, n);
        for (pt, w) in quad.points.iter().zip(&quad.weights) {
            let Point::Sphere(z) = pt else { unreachable!() };
            let x = [z[0].re, z[0].im, z[1].re, z[1].im];
            let mut vals = vec![0.0; n];
            let mut grads = vec![[0.0; 4]; n];
            for (i, e) in exps.iter().enumerate() {
                let v: f64 = (0..4).map(|c| x[c].powi(e[c] as i32)).product();
                let mut g = [0.0; 4];
                for c in 0..4 {
                    if e[c] > 0 {
                        g[c] = e[c] as f64
                            * (0..4)
                                .map(|d| if d == c { x[d].powi(e[d] as i32 - 1) } else { x[d].powi(e[d] as i32) })
                                .product::<f64>();
                    }
                }
                let radial: f64 = (0..4).map(|c| g[c] * x[c]).sum();
                for c in 0..4 {
                    g[c] -= radial * x[c];
                }
                vals[i] = v;
                grads[i] = g;
            }
            for i in 0..n {
                for j in 0..n {
                    mass[(i, j)] += w * vals[i] * vals[j];
                    stiff[(i, j)] += w * (0..4).map(|c| grads[i][c] * grads[j][c]).sum::<f64>();
                }
            }
        }
        let l = mass.cholesky().expect("mass matrix positive definite").l();
        let linv = l.clone().try_inverse().unwrap();
        let sym = &linv * stiff * linv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn sphere_spectrum_matches_galerkin_oracle() {
        let oracle = galerkin_spectrum(&[3, 4]);
        let s = sys(CrossSectionKind::Sphere3, 4);
        assert_eq!(oracle.len(), s.len());
        for (a, b) in oracle.iter().zip(s.eigenvalues()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let even = galerkin_spectrum(&[4]);
        let q = sys(CrossSectionKind::Sphere3ModInvolution, 4);
        assert_eq!(even.len(), q.len());
        for (a, b) in even.iter().zip(q.eigenvalues()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn gram_is_identity() {
        for (kind, radius) in [
            (CrossSectionKind::Circle, 0.7),
            (CrossSectionKind::Sphere3, 1.3),
            (CrossSectionKind::Sphere3ModInvolution, 1.0),
        ] {
            let s = spectrum(&CrossSectionSpec::new(kind, radius, 6).unwrap()).unwrap();
            let g = s.gram();
            let err = (g - DMatrix::identity(s.len(), s.len())).amax();
            assert!(err < 1e-10, "{kind:?}: {err}");
        }
    }

    #[test]
    fn quotient_modes_are_even() {
        let s = sys(CrossSectionKind::Sphere3ModInvolution, 6);
        let z = [Complex64::new(0.3, -0.5), Complex64::new(0.1, 0.8)];
        let n = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
        let p = Point::Sphere([z[0] / n, z[1] / n]);
        let m = Point::Sphere([-z[0] / n, -z[1] / n]);
        for j in 0..s.len() {
            assert!((s.eval_mode(j, &p) - s.eval_mode(j, &m)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_and_single_mode_projections() {
        let s = sys(CrossSectionKind::Sphere3, 4);
        let c = 2.5;
        let coeffs = s.project(&vec![c; s.quadrature.len()]).unwrap();
        let vol = 2.0 * PI * PI;
        assert!((coeffs[0] - c * vol.sqrt()).abs() < 1e-10);
        assert!(coeffs[1..].iter().all(|x| x.abs() < 1e-10));
        let j = 7;
        let coeffs = s.project(s.mode_values(j)).unwrap();
        for (i, x) in coeffs.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-10);
        }
        assert!(s.reconstruct(&[1.0]).is_err());
    }

    #[test]
    fn laplacian_norm_matches_spectral_sum() {
        // Δ_S F = d(d+2)F − Δ_ℝ⁴F on the unit sphere for F homogeneous of degree d.
        let s = sys(CrossSectionKind::Sphere3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = s.reconstruct(&coeffs).unwrap();
        // Apply Δ through the polynomial representation, not the labels.
        let mut lap = vec![0.0; s.quadrature.len()];
        for (j, c) in coeffs.iter().enumerate() {
            let p = s.mode_poly(j).unwrap();
            let d = p.degree() as f64;
            let eucl = p.laplacian();
            for (q, pt) in s.quadrature.points.iter().enumerate() {
                let Point::Sphere(z) = pt else { unreachable!() };
                lap[q] += c * (d * (d + 2.0) * p.eval(*z).re - eucl.eval(*z).re);
            }
        }
        // ⟨g, (Δ+1)² g⟩ = ‖(Δ+1)g‖².
        let shifted: Vec<f64> = lap.iter().zip(&g).map(|(a, b)| a + b).collect();
        let lhs = s.inner(&shifted, &shifted);
        let rhs: f64 = coeffs
            .iter()
            .zip(s.eigenvalues())
            .map(|(c, l)| (l + 1.0).powi(2) * c * c)
            .sum();
        assert!((lhs - rhs).abs() < 1e-9 * rhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn symmetric_basis_is_invariant() {
        let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3, 1.0, 8).unwrap();
        let s = EigenSystem::new(&spec, Symmetry::CubicLattice).unwrap();
        assert_eq!(s.modes[0].degree, 0);
        assert!(s.len() > 5 && s.len() < 40);
        let g = s.gram();
        assert!((g - DMatrix::identity(s.len(), s.len())).amax() < 1e-10);
        let z = [Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.7)];
        let n = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
        let z = [z[0] / n, z[1] / n];
        let i = Complex64::new(0.0, 1.0);
        let images = [[i * z[0], z[1]], [z[1], z[0]], [z[0].conj(), z[1].conj()]];
        for j in 0..s.len() {
            let v = s.eval_mode(j, &Point::Sphere(z));
            for w in images {
                assert!((v - s.eval_mode(j, &Point::Sphere(w))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn berger_reduces_to_round() {
        assert!((berger_eigenvalue(4, 2, 1.0, 1.0, 2.0) - 24.0 / 4.0).abs() < 1e-14);
        // Hopf-invariant functions (charge 0) do not see the fibre coefficient.
        assert_eq!(berger_eigenvalue(2, 0, 0.3, 1.0, 1.0), 8.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_and_parseval(seed in 0u64..1000, deg in 0usize..5) {
            let s = sys(CrossSectionKind::Sphere3ModInvolution, deg);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = s.reconstruct(&coeffs).unwrap();
            let back = s.project(&f).unwrap();
            let num: f64 = back.iter().zip(&coeffs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!(num <= 1e-10 * den);
            let l2 = s.inner(&f, &f);
            prop_assert!((l2 - den * den).abs() <= 1e-10 * den * den);
        }

        #[test]
        fn circle_round_trip(seed in 0u64..1000, deg in 0usize..8, radius in 0.2f64..3.0) {
            let s = spectrum(&CrossSectionSpec::new(CrossSectionKind::Circle, radius, deg).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coeffs: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = s.project(&s.reconstruct(&coeffs).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
