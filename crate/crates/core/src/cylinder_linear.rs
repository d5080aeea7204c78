//! The operator `Δ + 1` on a cylinder `M × ℝ`, solved mode by mode.
//!
//! Each eigenmode of the cross-section gives the ODE `−f″ + (1 + λ)f = ρ` on a
//! uniform axial grid. The constant term is exponentially fitted: the discrete
//! operator uses `c_Δ = 2(cosh Δt − 1)/Δt²` in place of `1`, so that `e^{±t}`
//! are exact discrete solutions of `−δ²f + c_Δ f = 0`. This is the same
//! constant that appears when the flat Laplacian on `ℝ⁴` is written in the
//! cylindrical variable, so neck operators built elsewhere agree with this one
//! exactly. Truncation uses the exact discrete decay rate at both ends.

use crate::cross_section::{AngularQuadrature, EigenSystem, Point};
use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use rustfft::{num_complex::Complex, FftPlanner};
use std::sync::Arc;

/// `2(cosh Δt − 1)/Δt²`, the fitted replacement for the constant `1`.
pub fn fitted_mass(dt: f64) -> f64 {
    if dt < 1e-4 {
        1.0 + dt * dt / 12.0
    } else {
        2.0 * (dt.cosh() - 1.0) / (dt * dt)
    }
}

/// Decay rate `κ` of the discrete homogeneous solution `e^{−κt}` of
/// `−δ²f + μf = 0`: `2(cosh κΔt − 1)/Δt² = μ`.
pub fn discrete_decay_rate(mu: f64, dt: f64) -> f64 {
    (1.0 + 0.5 * mu * dt * dt).acosh() / dt
}

/// Uniform axial grid `t_i = start + i·dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxialGrid {
    pub start: f64,
    pub dt: f64,
    pub len: usize,
}

impl AxialGrid {
    /// Symmetric grid on `[−half_length, half_length]`.
    pub fn symmetric(half_length: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(half_length > 0.0) {
            return Err(Error::Config(format!(
                "axial grid needs positive spacing and length (dt = {dt}, L = {half_length})"
            )));
        }
        let steps = (2.0 * half_length / dt).round() as usize;
        Ok(Self {
            start: -0.5 * steps as f64 * dt,
            dt,
            len: steps + 1,
        })
    }

    pub fn t(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.t(i)).collect()
    }
}

/// Derivative count for `L²_k` norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SobolevIndex(u8);

impl SobolevIndex {
    pub const MAX: usize = 5;

    pub fn new(k: usize) -> Result<Self> {
        if k > Self::MAX {
            return Err(Error::UnsupportedIndex(k));
        }
        Ok(Self(k as u8))
    }

    pub fn k(&self) -> usize {
        self.0 as usize
    }
}

/// A function on `M × [−L, L]` stored as mode coefficients per axial sample.
#[derive(Clone, Debug)]
pub struct CylinderField {
    pub system: Arc<EigenSystem>,
    pub grid: AxialGrid,
    /// `coeffs[j][i]` is mode `j` at `t_i`.
    pub coeffs: Vec<Vec<f64>>,
}

impl CylinderField {
    pub fn zeros(system: Arc<EigenSystem>, grid: AxialGrid) -> Self {
        let coeffs = vec![vec![0.0; grid.len]; system.len()];
        Self { system, grid, coeffs }
    }

    /// Field with coefficient `f(mode, t)`.
    pub fn from_fn<F: Fn(usize, f64) -> f64>(system: Arc<EigenSystem>, grid: AxialGrid, f: F) -> Self {
        let coeffs = (0..system.len())
            .map(|j| (0..grid.len).map(|i| f(j, grid.t(i))).collect())
            .collect();
        Self { system, grid, coeffs }
    }

    pub fn num_modes(&self) -> usize {
        self.coeffs.len()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::Shape {
                expected: self.coeffs.len(),
                got: other.coeffs.len(),
            });
        }
        if self.grid != other.grid {
            return Err(Error::Shape {
                expected: self.grid.len,
                got: other.grid.len,
            });
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().flatten().for_each(|v| *v *= a);
        out
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (row, orow) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x = a * *x + b * y;
            }
        }
        Ok(out)
    }

    /// `L²(M × ℝ)` inner product with the rectangle rule in `t`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let mut acc = 0.0;
        for (row, orow) in self.coeffs.iter().zip(&other.coeffs) {
            acc += row.iter().zip(orow).map(|(x, y)| x * y).sum::<f64>();
        }
        Ok(acc * self.grid.dt)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).sqrt()
    }

    pub fn mode_energy(&self, j: usize) -> f64 {
        self.coeffs[j].iter().map(|v| v * v).sum::<f64>() * self.grid.dt
    }

    /// Largest end value relative to the largest value, over all modes.
    pub fn end_fraction(&self) -> f64 {
        let mut end: f64 = 0.0;
        let mut max: f64 = 0.0;
        for row in &self.coeffs {
            for v in row {
                max = max.max(v.abs());
            }
            end = end.max(row[0].abs()).max(row[row.len() - 1].abs());
        }
        if max == 0.0 {
            0.0
        } else {
            end / max
        }
    }

    /// Values at each axial sample and each point of `quad`, `values[i][q]`.
    pub fn sample_on(&self, quad: &AngularQuadrature) -> Vec<Vec<f64>> {
        let table = tabulate(&self.system, &quad.points);
        (0..self.grid.len)
            .map(|i| {
                let mut row = vec![0.0; quad.len()];
                for (j, modevals) in table.iter().enumerate() {
                    let c = self.coeffs[j][i];
                    if c != 0.0 {
                        for (r, y) in row.iter_mut().zip(modevals) {
                            *r += c * y;
                        }
                    }
                }
                row
            })
            .collect()
    }
}

fn tabulate(system: &EigenSystem, points: &[Point]) -> Vec<Vec<f64>> {
    (0..system.len())
        .map(|j| points.iter().map(|p| system.eval_mode(j, p)).collect())
        .collect()
}

/// Discrete `−δ² + c_Δ + λ` with exact-decay ghost values at both ends.
pub fn mode_operator(lambda: f64, grid: &AxialGrid) -> Tridiagonal {
    let n = grid.len;
    let dt = grid.dt;
    let mu = fitted_mass(dt) + lambda;
    let ghost = (-discrete_decay_rate(mu, dt) * dt).exp();
    let inv = 1.0 / (dt * dt);
    let mut op = Tridiagonal::zeros(n);
    for i in 0..n {
        op.diag[i] = 2.0 * inv + mu;
        op.lower[i] = -inv;
        op.upper[i] = -inv;
    }
    op.diag[0] -= ghost * inv;
    op.diag[n - 1] -= ghost * inv;
    op
}

/// Solution of one mode ODE.
#[derive(Clone, Debug)]
pub struct ModeSolve {
    pub values: Vec<f64>,
    /// The source did not decay at the grid ends, so the truncation is not
    /// exact for it.
    pub truncated: bool,
}

/// Relative end magnitude above which a source counts as non-decaying.
pub const DECAY_TOLERANCE: f64 = 1e-8;

pub fn solve_mode_ode(lambda: f64, rho: &[f64], grid: &AxialGrid) -> Result<ModeSolve> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidSpectrum(lambda));
    }
    if rho.len() != grid.len {
        return Err(Error::Shape {
            expected: grid.len,
            got: rho.len(),
        });
    }
    let max = rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let end = rho[0].abs().max(rho[rho.len() - 1].abs());
    let truncated = max > 0.0 && end > DECAY_TOLERANCE * max;
    let values = mode_operator(lambda, grid).solve(rho)?;
    Ok(ModeSolve { values, truncated })
}

/// Result of a full cylinder solve.
#[derive(Clone, Debug)]
pub struct CylinderSolve {
    pub field: CylinderField,
    /// Modes whose source did not decay at the ends.
    pub truncated_modes: Vec<usize>,
}

pub fn solve_cylinder(rho: &CylinderField) -> Result<CylinderSolve> {
    let mut field = CylinderField::zeros(rho.system.clone(), rho.grid);
    let mut truncated_modes = Vec::new();
    for (j, mode) in rho.system.modes.iter().enumerate() {
        let sol = solve_mode_ode(mode.eigenvalue, &rho.coeffs[j], &rho.grid)?;
        if sol.truncated {
            truncated_modes.push(j);
        }
        field.coeffs[j] = sol.values;
    }
    Ok(CylinderSolve { field, truncated_modes })
}

/// The discrete `Δ + 1` used by [`solve_cylinder`].
pub fn apply_operator(f: &CylinderField) -> CylinderField {
    let mut out = CylinderField::zeros(f.system.clone(), f.grid);
    for (j, mode) in f.system.modes.iter().enumerate() {
        out.coeffs[j] = mode_operator(mode.eigenvalue, &f.grid).apply(&f.coeffs[j]);
    }
    out
}

/// `‖f‖_{L²_k}² = Σ_λ ∫ (ξ² + 1 + λ)^k |f̂_λ(ξ)|² dξ`, evaluated with the FFT in `t`.
pub fn sobolev_norm(f: &CylinderField, idx: SobolevIndex) -> f64 {
    let n = f.grid.len;
    let dt = f.grid.dt;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let k = idx.k() as i32;
    let mut total = 0.0;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (j, mode) in f.system.modes.iter().enumerate() {
        for (b, v) in buf.iter_mut().zip(&f.coeffs[j]) {
            *b = Complex::new(*v, 0.0);
        }
        fft.process(&mut buf);
        let mut acc = 0.0;
        for (m, b) in buf.iter().enumerate() {
            let freq = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let xi = 2.0 * std::f64::consts::PI * freq / (n as f64 * dt);
            acc += (xi * xi + 1.0 + mode.eigenvalue).powi(k) * b.norm_sqr();
        }
        total += acc * dt / n as f64;
    }
    total.sqrt()
}

/// Target norm for [`embedding_ratio_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingTarget {
    /// `‖f‖_{L⁴} / ‖f‖_{L²₁}`.
    L4,
    /// `‖f‖_{C⁰} / ‖f‖_{L²₃}`.
    C0,
}

fn fine_quadrature(system: &EigenSystem) -> AngularQuadrature {
    AngularQuadrature::build(&system.spec, 4 * system.spec.max_degree + 4)
}

pub fn l4_norm(f: &CylinderField) -> f64 {
    let quad = fine_quadrature(&f.system);
    let samples = f.sample_on(&quad);
    let mut acc = 0.0;
    for row in &samples {
        acc += row.iter().zip(&quad.weights).map(|(v, w)| v.powi(4) * w).sum::<f64>();
    }
    (acc * f.grid.dt).powf(0.25)
}

/// Maximum over the axial samples and a fine angular grid.
pub fn sup_norm(f: &CylinderField) -> f64 {
    let quad = fine_quadrature(&f.system);
    f.sample_on(&quad)
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Supremum over the samples of the embedding ratio.
pub fn embedding_ratio_probe(samples: &[CylinderField], target: EmbeddingTarget) -> f64 {
    samples
        .iter()
        .filter_map(|f| {
            let (num, k) = match target {
                EmbeddingTarget::L4 => (l4_norm(f), 1),
                EmbeddingTarget::C0 => (sup_norm(f), 3),
            };
            let den = sobolev_norm(f, SobolevIndex(k));
            (den > 0.0).then(|| num / den)
        })
        .fold(0.0, f64::max)
}

/// Product of two fields re-projected onto the mode basis.
#[derive(Clone, Debug)]
pub struct Product {
    pub field: CylinderField,
    /// Fraction of the product's `L²` energy outside the mode basis.
    pub tail_fraction: f64,
    /// `‖fg‖_{L²₃} / (‖f‖_{L²₃}‖g‖_{L²₃})`.
    pub multiplication_ratio: f64,
}

/// Tail-energy fraction above which [`multiply`] reports aliasing.
pub const ALIASING_LIMIT: f64 = 0.01;

pub fn multiply(f: &CylinderField, g: &CylinderField) -> Result<Product> {
    f.check_compatible(g)?;
    let quad = fine_quadrature(&f.system);
    let table = tabulate(&f.system, &quad.points);
    let fs = f.sample_on(&quad);
    let gs = g.sample_on(&quad);
    let mut out = CylinderField::zeros(f.system.clone(), f.grid);
    let mut full = 0.0;
    let mut kept = 0.0;
    for i in 0..f.grid.len {
        let prod: Vec<f64> = fs[i].iter().zip(&gs[i]).map(|(a, b)| a * b).collect();
        full += prod.iter().zip(&quad.weights).map(|(p, w)| p * p * w).sum::<f64>();
        for (j, row) in table.iter().enumerate() {
            let c: f64 = row.iter().zip(&prod).zip(&quad.weights).map(|((y, p), w)| y * p * w).sum();
            out.coeffs[j][i] = c;
            kept += c * c;
        }
    }
    let tail_fraction = if full > 0.0 { ((full - kept) / full).max(0.0) } else { 0.0 };
    if tail_fraction > ALIASING_LIMIT {
        return Err(Error::Aliasing {
            fraction: tail_fraction,
            limit: ALIASING_LIMIT,
        });
    }
    let three = SobolevIndex(3);
    let den = sobolev_norm(f, three) * sobolev_norm(g, three);
    let multiplication_ratio = if den > 0.0 { sobolev_norm(&out, three) / den } else { 0.0 };
    Ok(Product {
        field: out,
        tail_fraction,
        multiplication_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::{spectrum, CrossSectionKind, CrossSectionSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(deg: usize) -> Arc<EigenSystem> {
        Arc::new(spectrum(&CrossSectionSpec::new(CrossSectionKind::Sphere3ModInvolution, 1.0, deg).unwrap()).unwrap())
    }

    fn random_field(system: Arc<EigenSystem>, grid: AxialGrid, seed: u64) -> CylinderField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<(f64, f64, f64)> = (0..system.len())
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.5..1.5)))
            .collect();
        CylinderField::from_fn(system, grid, |j, t| {
            let (a, c, w) = params[j];
            a * (-((t - c) / w).powi(2)).exp()
        })
    }

    #[test]
    fn fitted_mass_makes_exponentials_exact() {
        let dt = 0.1;
        let c = fitted_mass(dt);
        let f = |t: f64| t.exp();
        let t = 0.3;
        let lhs = -(f(t + dt) - 2.0 * f(t) + f(t - dt)) / (dt * dt) + c * f(t);
        assert!(lhs.abs() < 1e-12);
        let k = discrete_decay_rate(c + 8.0, dt);
        let g = |t: f64| (-k * t).exp();
        let r = -(g(t + dt) - 2.0 * g(t) + g(t - dt)) / (dt * dt) + (c + 8.0) * g(t);
        assert!(r.abs() < 1e-10);
    }

    #[test]
    fn zero_source_gives_zero() {
        let grid = AxialGrid::symmetric(8.0, 0.05).unwrap();
        let sol = solve_mode_ode(0.0, &vec![0.0; grid.len], &grid).unwrap();
        assert!(sol.values.iter().all(|v| *v == 0.0));
        assert!(!sol.truncated);
        assert!(matches!(solve_mode_ode(-1.0, &vec![0.0; grid.len], &grid), Err(Error::InvalidSpectrum(_))));
    }

    #[test]
    fn recovers_gaussian_ansatz() {
        // −f″ + (1+λ)f for f = e^{−t²} is (2 + 1 + λ − 4t²)e^{−t²}.
        let grid = AxialGrid::symmetric(8.0, 0.01).unwrap();
        for lambda in [0.0, 8.0] {
            let rho: Vec<f64> = grid
                .points()
                .iter()
                .map(|t| (3.0 + lambda - 4.0 * t * t) * (-t * t).exp())
                .collect();
            let sol = solve_mode_ode(lambda, &rho, &grid).unwrap();
            let err = grid
                .points()
                .iter()
                .zip(&sol.values)
                .fold(0.0f64, |m, (t, v)| m.max((v - (-t * t).exp()).abs()));
            assert!(err < 1e-4, "λ={lambda}: {err}");
        }
    }

    #[test]
    fn non_decaying_source_is_flagged() {
        let grid = AxialGrid::symmetric(4.0, 0.05).unwrap();
        let sol = solve_mode_ode(0.0, &vec![1.0; grid.len], &grid).unwrap();
        assert!(sol.truncated);
    }

    #[test]
    fn decaying_tail_is_exact() {
        // A source supported near 0 has the exact decaying tail e^{−κ_d t}.
        let grid = AxialGrid::symmetric(6.0, 0.05).unwrap();
        let mut rho = vec![0.0; grid.len];
        rho[grid.len / 2] = 1.0;
        let lambda = 3.0;
        let sol = solve_mode_ode(lambda, &rho, &grid).unwrap();
        let mut long = AxialGrid::symmetric(20.0, 0.05).unwrap();
        long.start = -20.0;
        let mut rho2 = vec![0.0; long.len];
        rho2[long.len / 2] = 1.0;
        let sol2 = solve_mode_ode(lambda, &rho2, &long).unwrap();
        let off = (long.len - grid.len) / 2;
        for i in 0..grid.len {
            assert!((sol.values[i] - sol2.values[i + off]).abs() < 1e-13);
        }
    }

    #[test]
    fn round_trip_and_energy_bound() {
        let grid = AxialGrid::symmetric(10.0, 0.05).unwrap();
        let sys = sphere(4);
        for seed in 0..5 {
            let rho = random_field(sys.clone(), grid, seed);
            let sol = solve_cylinder(&rho).unwrap();
            assert!(sol.truncated_modes.is_empty());
            let back = apply_operator(&sol.field);
            let err = back.combine(1.0, &rho, -1.0).unwrap().l2_norm() / rho.l2_norm();
            assert!(err < 1e-12);
            for j in 0..sys.len() {
                assert!(sol.field.mode_energy(j) <= rho.mode_energy(j));
            }
        }
    }

    #[test]
    fn self_adjoint() {
        let grid = AxialGrid::symmetric(10.0, 0.05).unwrap();
        let sys = sphere(2);
        let f = random_field(sys.clone(), grid, 11);
        let g = random_field(sys, grid, 12);
        let a = apply_operator(&f).inner(&g).unwrap();
        let b = f.inner(&apply_operator(&g)).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn energy_identity() {
        let grid = AxialGrid::symmetric(10.0, 0.02).unwrap();
        let sys = sphere(2);
        let rho = random_field(sys.clone(), grid, 5);
        let f = solve_cylinder(&rho).unwrap().field;
        for (j, mode) in sys.modes.iter().enumerate() {
            let fj = &f.coeffs[j];
            let dt = grid.dt;
            let grad: f64 = fj.windows(2).map(|w| ((w[1] - w[0]) / dt).powi(2)).sum::<f64>() * dt;
            let lhs = grad + (1.0 + mode.eigenvalue) * f.mode_energy(j);
            let rhs: f64 = fj.iter().zip(&rho.coeffs[j]).map(|(a, b)| a * b).sum::<f64>() * dt;
            assert!((lhs - rhs).abs() <= 1e-3 * rhs.abs(), "mode {j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn sobolev_norm_matches_finite_differences() {
        let grid = AxialGrid::symmetric(10.0, 0.05).unwrap();
        let sys = sphere(2);
        let j = 3;
        let lambda = sys.modes[j].eigenvalue;
        let f = CylinderField::from_fn(sys, grid, |m, t| if m == j { (-t * t).exp() } else { 0.0 });
        assert!((sobolev_norm(&f, SobolevIndex::new(0).unwrap()) - f.l2_norm()).abs() < 1e-12);
        // Independent oracle: ∫ f′² + (1+λ)f² by fine central differences.
        let h = 1e-4;
        let n = (20.0 / h) as usize;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = -10.0 + i as f64 * h;
            let d = ((-(t + h) * (t + h)).exp() - (-(t - h) * (t - h)).exp()) / (2.0 * h);
            acc += (d * d + (1.0 + lambda) * (-2.0 * t * t).exp()) * h;
        }
        let got = sobolev_norm(&f, SobolevIndex::new(1).unwrap());
        assert!((got - acc.sqrt()).abs() / acc.sqrt() < 1e-6, "{got} vs {}", acc.sqrt());
        assert!(SobolevIndex::new(6).is_err());
    }

    #[test]
    fn embedding_ratio_invariances() {
        let grid = AxialGrid::symmetric(8.0, 0.05).unwrap();
        let sys = sphere(2);
        let f = CylinderField::from_fn(sys.clone(), grid, |j, t| (-(t - 0.1 * j as f64).powi(2)).exp() / (1.0 + j as f64));
        for target in [EmbeddingTarget::L4, EmbeddingTarget::C0] {
            let r = embedding_ratio_probe(std::slice::from_ref(&f), target);
            let r2 = embedding_ratio_probe(&[f.scale(-3.5)], target);
            assert!((r - r2).abs() < 1e-12 * r);
            let shifted = CylinderField::from_fn(sys.clone(), grid, |j, t| {
                (-(t - 1.0 - 0.1 * j as f64).powi(2)).exp() / (1.0 + j as f64)
            });
            let r3 = embedding_ratio_probe(&[shifted], target);
            assert!((r - r3).abs() < 1e-6 * r, "{target:?}: {r} vs {r3}");
            assert!(r.is_finite() && r > 0.0);
        }
    }

    #[test]
    fn multiply_matches_pointwise_product() {
        let grid = AxialGrid::symmetric(6.0, 0.1).unwrap();
        let sys = sphere(4);
        // Degree ≤ 2 factors keep the product inside the degree-4 basis.
        let low: Vec<bool> = sys.modes.iter().map(|m| m.degree <= 2).collect();
        let mut f = random_field(sys.clone(), grid, 1);
        let mut g = random_field(sys.clone(), grid, 2);
        for (j, keep) in low.iter().enumerate() {
            if !keep {
                f.coeffs[j].iter_mut().for_each(|v| *v = 0.0);
                g.coeffs[j].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let p = multiply(&f, &g).unwrap();
        assert!(p.tail_fraction < 1e-12);
        let quad = AngularQuadrature::build(&sys.spec, 9);
        let (fs, gs, ps) = (f.sample_on(&quad), g.sample_on(&quad), p.field.sample_on(&quad));
        for i in 0..grid.len {
            for q in 0..quad.len() {
                assert!((fs[i][q] * gs[i][q] - ps[i][q]).abs() < 1e-8);
            }
        }
        assert!(p.multiplication_ratio.is_finite());
        let zero = CylinderField::zeros(sys.clone(), grid);
        assert_eq!(multiply(&f, &zero).unwrap().field.l2_norm(), 0.0);
        // Indicator of a window, constant on the cross-section.
        let vol = (2.0 * std::f64::consts::PI.powi(2)).sqrt();
        let window = CylinderField::from_fn(sys, grid, |j, t| if j == 0 && t.abs() <= 2.0 { vol } else { 0.0 });
        let fw = random_field(window.system.clone(), grid, 4);
        let pw = multiply(&fw, &window).unwrap();
        for j in 0..fw.num_modes() {
            for i in 0..grid.len {
                let want = if grid.t(i).abs() <= 2.0 { fw.coeffs[j][i] } else { 0.0 };
                assert!((pw.field.coeffs[j][i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn high_degree_product_reports_aliasing() {
        let grid = AxialGrid::symmetric(3.0, 0.1).unwrap();
        let sys = sphere(2);
        let last = sys.len() - 1;
        let f = CylinderField::from_fn(sys, grid, |j, t| if j == last { (-t * t).exp() } else { 0.0 });
        assert!(matches!(multiply(&f, &f), Err(Error::Aliasing { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn solve_is_linear(seed in 0u64..500, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let grid = AxialGrid::symmetric(6.0, 0.05).unwrap();
            let sys = sphere(2);
            let r1 = random_field(sys.clone(), grid, seed);
            let r2 = random_field(sys, grid, seed + 1000);
            let lhs = solve_cylinder(&r1.combine(a, &r2, b).unwrap()).unwrap().field;
            let rhs = solve_cylinder(&r1).unwrap().field.combine(a, &solve_cylinder(&r2).unwrap().field, b).unwrap();
            let diff = lhs.combine(1.0, &rhs, -1.0).unwrap().l2_norm();
            prop_assert!(diff <= 1e-12 * (1.0 + rhs.l2_norm()));
        }

        #[test]
        fn solution_norm_bounded_by_source(seed in 0u64..500) {
            let grid = AxialGrid::symmetric(8.0, 0.05).unwrap();
            let rho = random_field(sphere(4), grid, seed);
            let f = solve_cylinder(&rho).unwrap().field;
            prop_assert!(f.l2_norm() <= rho.l2_norm());
        }
    }
}
