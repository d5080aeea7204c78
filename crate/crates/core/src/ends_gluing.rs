//! `□` on manifolds with cylindrical ends: kernels, piece inverses, the
//! connected-sum parametrix and the kernel-corrected inverse on the compact
//! glued space.
//!
//! Pieces with a single end (the resolved side) are `U(2)`-invariant, so they
//! are handled block by block as radial ODEs. The glued `Y ♯_T Y` used for
//! the neck-length sweep is built on one uniform grid in the neck coordinate
//! `t ∈ (−T, T)`, with piece 1 occupying `t < T` and piece 2 the mirror image.

use crate::charts::composite::{kernel_count, Composite, CompositeField, InterfaceCensus, KERNEL_GAP};
use crate::charts::polar::{Block, InnerEdge, OuterEdge, PolarChart, RadialCoefficients};
use crate::charts::smoothed_radius;
use crate::cross_section::{CrossSectionKind, CrossSectionSpec, EigenSystem, Symmetry};
use crate::cylinder_linear::{discrete_decay_rate, fitted_mass};
use crate::eguchi_hanson::{quintic_step, CutoffMetric};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::linalg::Tridiagonal;
use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Summary of a numerical kernel computation.
#[derive(Clone, Debug, Serialize)]
pub struct KernelSummary {
    pub dimension: usize,
    /// The smallest singular values, ascending.
    pub smallest: Vec<f64>,
    pub largest: f64,
    pub threshold: f64,
    pub gap: f64,
    /// `|cos|` between the kernel element and the conformal factor, for
    /// one-dimensional kernels on composite models.
    pub alignment: Option<f64>,
}

fn summarize(sv: &[f64], threshold: f64, dimension: usize, gap: f64) -> Result<KernelSummary> {
    if gap < KERNEL_GAP {
        return Err(Error::IllConditionedKernel { gap });
    }
    Ok(KernelSummary {
        dimension,
        smallest: sv.iter().take(4).copied().collect(),
        largest: sv.last().copied().unwrap_or(0.0),
        threshold,
        gap,
        alignment: None,
    })
}

/// A piece with one exactly cylindrical end, discretised block by block.
#[derive(Clone, Debug)]
pub struct EndedManifold {
    pub chart: PolarChart,
    /// First node of the exactly cylindrical end; the end coordinate is
    /// `(i − end_start)Δs`.
    pub end_start: usize,
    pub system: EigenSystem,
    /// Distinct blocks and how many modes share each.
    pub blocks: Vec<(Block, usize)>,
}

/// Result of inverting `□` on a piece for one block.
#[derive(Clone, Debug)]
pub struct PieceSolve {
    pub values: Vec<f64>,
    /// Fitted slope of `log|f|` along the end, beyond the source.
    pub decay_slope: f64,
    /// `−κ` with `κ` the exact discrete decay rate of the block.
    pub expected_slope: f64,
}

impl EndedManifold {
    /// Resolved side in its conformal frame: the cut-off Eguchi-Hanson metric
    /// `ω_{R,Y}` with `h = r̃`. The end starts at `r = √R` (where the metric
    /// is flat and `h = r`) and extends `end_length` beyond it.
    pub fn eguchi_hanson(r_cut: f64, ds: f64, r_min: f64, end_length: f64, max_degree: usize) -> Result<Self> {
        let metric = CutoffMetric::new(r_cut)?;
        let s_cyl = 0.5 * r_cut.ln();
        let below = ((s_cyl - r_min.ln()) / ds).floor() as usize;
        let above = (end_length / ds).ceil() as usize;
        let chart = PolarChart::new(s_cyl - below as f64 * ds, ds, below + above + 1, InnerEdge::Bolt, OuterEdge::Cylinder, |r| {
            let rho = r * r;
            let d = metric.derivs(rho);
            RadialCoefficients {
                a: d.radial_coefficient(rho),
                b: d.d1,
                h: smoothed_radius(rho),
            }
        })?;
        let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3ModInvolution, 1.0, max_degree)?;
        let system = EigenSystem::new(&spec, Symmetry::None)?;
        let mut counts: BTreeMap<Block, usize> = BTreeMap::new();
        for m in &system.modes {
            *counts
                .entry(Block {
                    degree: m.degree,
                    charge: m.charge,
                })
                .or_default() += 1;
        }
        Ok(Self {
            chart,
            end_start: below,
            system,
            blocks: counts.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.chart.n
    }

    pub fn is_empty(&self) -> bool {
        self.chart.n == 0
    }

    pub fn end_coordinate(&self, i: usize) -> f64 {
        (i as f64 - self.end_start as f64) * self.chart.ds
    }

    pub fn box_apply(&self, block: Block, f: &[f64]) -> Vec<f64> {
        self.chart.apply(block, f, 0.0)
    }

    /// Eigen-decomposition of a block, self-adjoint for the chart weights.
    /// Vectors are nodal values of `f`, orthonormal in the weighted product.
    pub fn block_eigen(&self, block: Block) -> (Vec<f64>, Vec<Vec<f64>>) {
        let op = self.chart.block_operator(block);
        let w = self.chart.weights();
        let n = self.chart.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = op.diag[i];
            if i + 1 < n {
                let off = op.upper[i] * (w[i] / w[i + 1]).sqrt();
                m[(i, i + 1)] = off;
                m[(i + 1, i)] = off;
            }
        }
        let eig = SymmetricEigen::new(m);
        let vectors = (0..n)
            .map(|k| (0..n).map(|i| eig.eigenvectors[(i, k)] / w[i].sqrt()).collect())
            .collect();
        (eig.eigenvalues.iter().copied().collect(), vectors)
    }

    /// Numerical `L²` kernel: eigenvalues of every block counted with
    /// multiplicity, thresholded relative to the largest.
    pub fn kernel_basis(&self) -> Result<(KernelSummary, Vec<(Block, Vec<f64>)>)> {
        let mut all: Vec<(f64, Block, usize)> = Vec::new();
        let mut vectors = BTreeMap::new();
        for (block, mult) in &self.blocks {
            let (vals, vecs) = self.block_eigen(*block);
            for (k, v) in vals.iter().enumerate() {
                for _ in 0..*mult {
                    all.push((v.abs(), *block, k));
                }
            }
            vectors.insert(*block, vecs);
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sv: Vec<f64> = all.iter().map(|a| a.0).collect();
        let (dimension, threshold, gap) = kernel_count(&sv);
        let summary = summarize(&sv, threshold, dimension, gap)?;
        let basis = all[..dimension].iter().map(|(_, b, k)| (*b, vectors[b][*k].clone())).collect();
        Ok((summary, basis))
    }

    /// `P_i ρ` for one block; the kernel must be empty.
    pub fn invert(&self, block: Block, rho: &[f64]) -> Result<PieceSolve> {
        let values = self.chart.solve(block, rho, 0.0)?;
        let k = block.degree as f64;
        let mu = fitted_mass(self.chart.ds) + k * (k + 2.0);
        let expected_slope = -discrete_decay_rate(mu, self.chart.ds);
        let peak = rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let last_source = rho.iter().rposition(|v| v.abs() > 1e-14 * peak).unwrap_or(0);
        let first = (last_source + 4).max(self.end_start);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for i in first..self.chart.n.saturating_sub(1) {
            if values[i].abs() > 1e-250 {
                xs.push(self.chart.s(i));
                ys.push(values[i].abs().ln());
            }
        }
        let decay_slope = if xs.len() >= 3 { linear_fit(&xs, &ys)?.slope } else { f64::NAN };
        Ok(PieceSolve {
            values,
            decay_slope,
            expected_slope,
        })
    }
}

/// Width-1 partition step: `γ₁ = 1` for `t ≤ −½`, `0` for `t ≥ ½`.
pub fn partition_step(t: f64) -> f64 {
    1.0 - quintic_step(t + 0.5).0
}

/// Cutoff `β₁`: `1` for `t ≤ ½`, `0` for `t ≥ T`, with constant slope
/// `−1/(T − ½ − ε)` in between apart from quintic onsets of width
/// `ε = min(½, (T − ½)/4)` at both ends. The slope stays below `2/T` for
/// every `T ≥ 2`. A constant slope matters: a ramp with `β′ = 0` at `t = ½`
/// hides the `1/T` term, since the piece solutions live mostly near the
/// middle of the neck.
pub fn neck_cutoff(t: f64, half_length: f64) -> f64 {
    let (a, b) = (0.5, half_length);
    let eps = (0.25 * (b - a)).min(0.5);
    let slope = 1.0 / (b - a - eps);
    // ∫₀^x of the quintic step.
    let ramp = |x: f64| x.powi(4) * (x * x - 3.0 * x + 2.5);
    let drop = if t <= a {
        return 1.0;
    } else if t >= b {
        return 0.0;
    } else if t < a + eps {
        eps * ramp((t - a) / eps)
    } else if t <= b - eps {
        0.5 * eps + (t - a - eps)
    } else {
        (b - a - eps) - eps * ramp((b - t) / eps)
    };
    1.0 - slope * drop
}

/// `Y ♯_T Y` for the neck-length sweep.
pub struct GluedPair<'a> {
    pub piece: &'a EndedManifold,
    pub half_length: f64,
    pub len: usize,
    /// `γ₁`, `β₁` at the glued nodes; piece 2 uses their mirror images.
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub weights: Vec<f64>,
    shift: i64,
}

/// Operators of one block on a glued pair, with the measured defect norm.
pub struct GluedBlock<'g, 'a> {
    pub glued: &'g GluedPair<'a>,
    pub block: Block,
    op: Tridiagonal,
    piece_op: Tridiagonal,
    piece_op_t: Tridiagonal,
    /// `‖□P₀ − 1‖` in `L²(dμ)`, by power iteration.
    pub defect_norm: f64,
}

/// Outcome of the Neumann construction of a right inverse.
#[derive(Clone, Debug)]
pub struct NeumannSolve {
    pub values: Vec<f64>,
    pub terms: usize,
    pub relative_residual: f64,
}

pub const NEUMANN_MAX_TERMS: usize = 200;

impl<'a> GluedPair<'a> {
    pub fn new(piece: &'a EndedManifold, half_length: f64) -> Result<Self> {
        let ds = piece.chart.ds;
        let k = (half_length / ds).round() as i64;
        if (k as f64 * ds - half_length).abs() > 1e-9 || half_length < 2.0 {
            return Err(Error::Config(format!("neck half-length {half_length} must be ≥ 2 and a multiple of Δs = {ds}")));
        }
        let k_min = -(piece.end_start as i64);
        let len = (2 * (k - k_min) + 1) as usize;
        if (piece.chart.n as i64) < 2 * k - k_min + 3 {
            return Err(Error::Config(format!("piece end is too short for T = {half_length}")));
        }
        let shift = k_min - k;
        let t = |g: usize| (g as i64 + shift) as f64 * ds;
        let gamma = (0..len).map(|g| partition_step(t(g))).collect();
        let beta = (0..len).map(|g| neck_cutoff(t(g), half_length)).collect();
        let mid = (k - k_min) as usize;
        let weights = (0..len)
            .map(|g| if g <= mid { piece.chart.weight(g) } else { piece.chart.weight(len - 1 - g) })
            .collect();
        Ok(Self {
            piece,
            half_length,
            len,
            gamma,
            beta,
            weights,
            shift,
        })
    }

    pub fn t(&self, g: usize) -> f64 {
        (g as i64 + self.shift) as f64 * self.piece.chart.ds
    }

    fn mid(&self) -> usize {
        (self.len - 1) / 2
    }

    /// `γ_side`, `β_side` at node `g`.
    fn gamma_of(&self, side: usize, g: usize) -> f64 {
        if side == 0 {
            self.gamma[g]
        } else {
            self.gamma[self.len - 1 - g]
        }
    }

    fn beta_of(&self, side: usize, g: usize) -> f64 {
        if side == 0 {
            self.beta[g]
        } else {
            self.beta[self.len - 1 - g]
        }
    }

    /// Glued node of piece node `i` on `side`, if inside the glued range.
    fn glued_node(&self, side: usize, i: usize) -> Option<usize> {
        if i >= self.len {
            None
        } else if side == 0 {
            Some(i)
        } else {
            Some(self.len - 1 - i)
        }
    }

    /// Restriction of glued data to a piece (zero beyond the glued range).
    fn to_piece(&self, side: usize, x: &[f64]) -> Vec<f64> {
        (0..self.piece.chart.n)
            .map(|i| self.glued_node(side, i).map_or(0.0, |g| x[g]))
            .collect()
    }

    /// Extension of piece data to the glued grid (transpose of `to_piece`).
    fn from_piece(&self, side: usize, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (i, v) in p.iter().enumerate() {
            if let Some(g) = self.glued_node(side, i) {
                out[g] = *v;
            }
        }
        out
    }

    pub fn operator(&self, block: Block) -> Tridiagonal {
        let p = self.piece.chart.block_operator(block);
        let mut op = Tridiagonal::zeros(self.len);
        let mid = self.mid();
        for g in 0..self.len {
            if g <= mid {
                op.diag[g] = p.diag[g];
                op.lower[g] = p.lower[g];
                op.upper[g] = p.upper[g];
            } else {
                let i = self.len - 1 - g;
                op.diag[g] = p.diag[i];
                op.lower[g] = p.upper[i];
                op.upper[g] = p.lower[i];
            }
        }
        op
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.weights).map(|((a, b), w)| w * a * b).sum()
    }

    pub fn block(&self, block: Block, seed: u64) -> Result<GluedBlock<'_, 'a>> {
        let piece_op = self.piece.chart.block_operator(block);
        let mut gb = GluedBlock {
            glued: self,
            block,
            op: self.operator(block),
            piece_op_t: piece_op.transpose(),
            piece_op,
            defect_norm: f64::NAN,
        };
        gb.defect_norm = gb.measure_defect_norm(seed)?;
        Ok(gb)
    }
}

/// Largest singular value of a map that is self-adjoint-composable in the
/// weighted product, by power iteration on `A*A`.
fn power_norm<F>(len: usize, weights: &[f64], seed: u64, mut normal: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<(Vec<f64>, f64)>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let wnorm = |v: &[f64]| v.iter().zip(weights).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
    let n0 = wnorm(&x);
    x.iter_mut().for_each(|v| *v /= n0);
    let mut est = 0.0;
    for _ in 0..500 {
        let (y, ax_norm) = normal(&x)?;
        let ny = wnorm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let next = ax_norm;
        x = y.iter().map(|v| v / ny).collect();
        if (next - est).abs() <= 1e-9 * next {
            return Ok(next);
        }
        est = next;
    }
    Ok(est)
}

impl GluedBlock<'_, '_> {
    fn piece_solutions(&self, rho: &[f64]) -> Result<[Vec<f64>; 2]> {
        let g = self.glued;
        let mut out = [Vec::new(), Vec::new()];
        for (side, slot) in out.iter_mut().enumerate() {
            let src: Vec<f64> = (0..g.len).map(|k| g.gamma_of(side, k) * rho[k]).collect();
            let sol = self.piece_op.solve(&g.to_piece(side, &src))?;
            *slot = g.from_piece(side, &sol);
        }
        Ok(out)
    }

    /// `P₀ρ = β₁P₁(γ₁ρ) + β₂P₂(γ₂ρ)`.
    pub fn parametrix(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let w = self.piece_solutions(rho)?;
        let g = self.glued;
        Ok((0..g.len).map(|k| g.beta_of(0, k) * w[0][k] + g.beta_of(1, k) * w[1][k]).collect())
    }

    fn parametrix_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.glued;
        let mut out = vec![0.0; g.len];
        for side in 0..2 {
            let y: Vec<f64> = (0..g.len).map(|k| g.beta_of(side, k) * x[k]).collect();
            let sol = self.piece_op_t.solve(&g.to_piece(side, &y))?;
            let back = g.from_piece(side, &sol);
            for k in 0..g.len {
                out[k] += g.gamma_of(side, k) * back[k];
            }
        }
        Ok(out)
    }

    pub fn box_apply(&self, f: &[f64]) -> Vec<f64> {
        self.op.apply(f)
    }

    /// `□P₀ρ − ρ` by direct subtraction.
    pub fn defect(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let p0 = self.parametrix(rho)?;
        Ok(self.op.apply(&p0).iter().zip(rho).map(|(a, b)| a - b).collect())
    }

    /// `□P₀ρ − ρ` from the cutoff derivatives: `Σ −2∇β_i·∇w_i + (Δβ_i) w̄_i`
    /// with `w_i = P_i(γ_iρ)`, `w̄` the neighbour average and `Δ = −δ²`.
    /// Valid because each `β_i` varies only where the neck is exactly
    /// cylindrical.
    pub fn defect_from_cutoffs(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let g = self.glued;
        let w = self.piece_solutions(rho)?;
        let dt = g.piece.chart.ds;
        let mut out = vec![0.0; g.len];
        for side in 0..2 {
            for k in 1..g.len - 1 {
                let (bm, b0, bp) = (g.beta_of(side, k - 1), g.beta_of(side, k), g.beta_of(side, k + 1));
                if bm == b0 && b0 == bp {
                    continue;
                }
                let db = (bp - bm) / (2.0 * dt);
                let lap_b = -(bp - 2.0 * b0 + bm) / (dt * dt);
                let dw = (w[side][k + 1] - w[side][k - 1]) / (2.0 * dt);
                let avg = 0.5 * (w[side][k + 1] + w[side][k - 1]);
                out[k] += -2.0 * db * dw + lap_b * avg;
            }
        }
        Ok(out)
    }

    fn measure_defect_norm(&self, seed: u64) -> Result<f64> {
        let g = self.glued;
        let opt = self.op.transpose();
        power_norm(g.len, &g.weights, seed, |x| {
            let ex = self.defect(x)?;
            let ex_norm = g.norm(&ex) / g.norm(x);
            // E* = W⁻¹ Eᵀ W with Eᵀ = P₀ᵀ □ᵀ − 1.
            let wex: Vec<f64> = ex.iter().zip(&g.weights).map(|(a, w)| a * w).collect();
            let t = self.parametrix_transpose(&opt.apply(&wex))?;
            let back: Vec<f64> = t.iter().zip(&wex).zip(&g.weights).map(|((a, b), w)| (a - b) / w).collect();
            Ok((back, ex_norm))
        })
    }

    /// Right inverse `P = P₀(□P₀)⁻¹` by the Neumann series.
    pub fn glued_inverse(&self, rho: &[f64], tol: f64) -> Result<NeumannSolve> {
        if !(self.defect_norm < 1.0) {
            return Err(Error::NeumannDivergence {
                norm: self.defect_norm,
                t: self.glued.half_length,
            });
        }
        let g = self.glued;
        let rn = g.norm(rho);
        if rn == 0.0 {
            return Ok(NeumannSolve {
                values: vec![0.0; g.len],
                terms: 0,
                relative_residual: 0.0,
            });
        }
        let mut sigma = rho.to_vec();
        let mut terms = 0;
        let mut prev_inc = f64::INFINITY;
        loop {
            let e = self.defect(&sigma)?;
            let next: Vec<f64> = rho.iter().zip(&e).map(|(a, b)| a - b).collect();
            let inc = g.norm(&next.iter().zip(&sigma).map(|(a, b)| a - b).collect::<Vec<_>>());
            sigma = next;
            terms += 1;
            // Stop at the tolerance, or once round-off stalls the increments.
            if inc < 0.1 * tol * rn || (inc >= prev_inc && inc < 1e-10 * rn) {
                break;
            }
            prev_inc = inc;
            if terms >= NEUMANN_MAX_TERMS {
                return Err(Error::NonConvergence {
                    iterations: terms,
                    increment: inc / rn,
                });
            }
        }
        let values = self.parametrix(&sigma)?;
        let res: Vec<f64> = self.op.apply(&values).iter().zip(rho).map(|(a, b)| a - b).collect();
        Ok(NeumannSolve {
            relative_residual: g.norm(&res) / rn,
            values,
            terms,
        })
    }

    /// `‖P‖` by power iteration through the Neumann inverse. `P` inverts the
    /// weighted-self-adjoint glued operator, so it is self-adjoint itself.
    pub fn inverse_norm(&self, tol: f64, seed: u64) -> Result<f64> {
        let g = self.glued;
        power_norm(g.len, &g.weights, seed, |x| {
            let px = self.glued_inverse(x, tol)?.values;
            let ratio = g.norm(&px) / g.norm(x);
            let ppx = self.glued_inverse(&px, tol)?.values;
            Ok((ppx, ratio))
        })
    }
}

/// One row of the neck-length sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub half_length: f64,
    /// Largest defect norm over blocks.
    pub defect_norm: f64,
    pub defect_block: Block,
    /// Largest `‖P‖` over blocks, if the Neumann series converges.
    pub inverse_norm: Option<f64>,
}

/// Defect and inverse norms of `Y ♯_T Y` over `T`, maximised over blocks.
pub fn neck_sweep(piece: &EndedManifold, half_lengths: &[f64], tol: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &t in half_lengths {
        let glued = GluedPair::new(piece, t)?;
        let mut row = SweepRow {
            half_length: t,
            defect_norm: 0.0,
            defect_block: piece.blocks[0].0,
            inverse_norm: Some(0.0),
        };
        for (block, _) in &piece.blocks {
            let gb = glued.block(*block, seed)?;
            if gb.defect_norm > row.defect_norm {
                row.defect_norm = gb.defect_norm;
                row.defect_block = *block;
            }
            row.inverse_norm = match (row.inverse_norm, gb.inverse_norm(tol, seed)) {
                (Some(a), Ok(b)) => Some(a.max(b)),
                (_, Err(Error::NeumannDivergence { .. })) | (None, _) => None,
                (_, Err(e)) => return Err(e),
            };
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Kernel of `□` on a composite model from the interface map.
pub fn kernel_basis(model: &Composite) -> Result<(KernelSummary, Vec<CompositeField>)> {
    let (s, _) = model.interface_map(false)?;
    let census = model.census(&s)?;
    let mut summary = summarize(&census.singular_values, census.threshold, census.dimension, census.gap)?;
    let zero = model.zeros();
    let mut fields = Vec::new();
    for b in &census.kernel {
        let (f, _) = model.sweep(&zero, b)?;
        let n = model.norm(&f);
        fields.push(f.scaled(1.0 / n));
    }
    if fields.len() == 1 {
        let h = model.conformal_factor();
        summary.alignment = Some((model.inner(&fields[0], &h) / model.norm(&h)).abs());
    }
    Ok((summary, fields))
}

/// `ρ = □P(ρ) + π(ρ)h` with `P(ρ) ⟂ h`, for a composite model whose kernel
/// is spanned by its conformal factor.
pub struct ModifiedInverse<'a> {
    pub model: &'a Composite,
    pub census: InterfaceCensus,
    columns: Vec<CompositeField>,
    h: CompositeField,
    h_response: CompositeField,
    bordered: LU<f64, Dyn, Dyn>,
}

impl<'a> ModifiedInverse<'a> {
    pub fn new(model: &'a Composite) -> Result<Self> {
        let (s, columns) = model.interface_map(true)?;
        let census = model.census(&s)?;
        if census.gap < KERNEL_GAP {
            return Err(Error::IllConditionedKernel { gap: census.gap });
        }
        if census.dimension != 1 {
            return Err(Error::UnsupportedKernel(census.dimension));
        }
        let h = model.conformal_factor();
        let m = model.num_modes();
        let (h_response, c_h) = model.sweep(&h, &vec![0.0; m])?;
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = if i == j { 1.0 } else { 0.0 } - s[(i, j)];
            }
            a[(i, m)] = c_h[i];
        }
        a[(m, model.zero_mode())] = 1.0;
        Ok(Self {
            model,
            census,
            columns,
            h,
            h_response,
            bordered: a.lu(),
        })
    }

    pub fn kernel(&self) -> &CompositeField {
        &self.h
    }

    pub fn apply(&self, rho: &CompositeField) -> Result<(CompositeField, f64)> {
        let m = self.model.num_modes();
        let (mut g, c_rho) = self.model.sweep(rho, &vec![0.0; m])?;
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for i in 0..m {
            rhs[i] = c_rho[i];
        }
        let x = self
            .bordered
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolver("bordered interface system is singular".into()))?;
        for (j, col) in self.columns.iter().enumerate() {
            g.axpy(x[j], col);
        }
        let tau = x[m];
        g.axpy(-tau, &self.h_response);
        let c = self.model.inner(&g, &self.h) / self.model.inner(&self.h, &self.h);
        g.axpy(-c, &self.h);
        Ok((g, tau))
    }

    /// `‖□g + τh − ρ‖/‖ρ‖` over the equation rows, plus the transfer
    /// mismatch of `g`.
    pub fn residual(&self, g: &CompositeField, tau: f64, rho: &CompositeField) -> (f64, f64) {
        let mut r = self.model.apply_box(g);
        r.axpy(tau, &self.h);
        r.axpy(-1.0, rho);
        (self.model.equation_norm(&r) / self.model.equation_norm(rho), self.model.transfer_mismatch(g))
    }
}
