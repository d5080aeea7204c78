//! The Calabi-Yau equation on the glued surface in the cylindrical frame.
//!
//! With `φ = −4R⁻³g/h` (torus units) the equation `ω_φ² = λχ∧χ̄` becomes
//!
//! `□g + 16R⁻³h³(1+η)·det ∂∂̄(g/h) = (Rh)³(λ(1+η) − 1)`,
//!
//! and in Eguchi-Hanson units, where the polar chart works, the quadratic
//! term reads `16h_Y³(1+η)·det ∂∂̄(g/h_Y)`. The residual of this form equals
//! `(Rh)³(1+η)(det ω_φ − λ)`, which is how the two frames are compared.

use crate::charts::composite::{Composite, CompositeField};
use crate::charts::polar::fd_derivatives;
use crate::cross_section::{AngularQuadrature, CrossSectionKind, CrossSectionSpec, Point};
use crate::ends_gluing::ModifiedInverse;
use crate::error::{Error, Result};
use crate::hermitian::Herm2;
use crate::kummer_assembly::{assemble, volume, GluedGeometry, Lattice, Resolutions};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Iteration controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Stop once the increment falls below `tolerance · ‖g‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Required `|τ|/‖rhs‖` at convergence.
    pub tau_tolerance: f64,
    /// Target for the final Monge-Ampère residual relative to `g = 0`.
    pub residual_factor: f64,
    /// Sobolev indices of the solution and source spaces; only `(5, 3)`.
    pub solution_index: usize,
    pub source_index: usize,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("tau_tolerance", self.tau_tolerance),
            ("residual_factor", self.residual_factor),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if (self.solution_index, self.source_index) != (5, 3) {
            return Err(Error::UnsupportedIndex(if self.solution_index != 5 {
                self.solution_index
            } else {
                self.source_index
            }));
        }
        Ok(())
    }
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 40,
            tau_tolerance: 1e-8,
            residual_factor: 1e-2,
            solution_index: 5,
            source_index: 3,
        }
    }
}

/// `Σ w / Σ w(1 + η)` for sampled densities `w = h⁴dμ`.
pub fn lambda_from_densities(weights: &[f64], eta: &[f64]) -> f64 {
    let num: f64 = weights.iter().sum();
    let den: f64 = weights.iter().zip(eta).map(|(w, e)| w * (1.0 + e)).sum();
    num / den
}

/// `λ = ∫h⁴dμ / ∫(1+η)h⁴dμ`, i.e. `Vol(ω₀)/Vol(flat)`, by radial quadrature.
pub fn lambda_from_eta(geometry: &GluedGeometry) -> Result<f64> {
    Ok(volume(geometry)?.lambda())
}

/// Unit-sphere tables for the complex Hessian of `a(ρ)p(z)` with `p` a mode
/// polynomial of degree `k`. In `s = log r` and `u(s)` the mode coefficient,
/// `∂∂̄(u·p(z/r)) = r⁻²(c₁·ω̄ωᵀp + c₂·(p I + ω∂p + ω̄∂̄p) + u·∂∂̄p)` with
/// `c₁ = (u″ − 2(k+1)u′ + k(k+2)u)/4` and `c₂ = (u′ − ku)/2`.
struct ModeJet {
    value: f64,
    radial: Herm2,
    mixed: Herm2,
    hessian: Herm2,
}

/// Evaluation of second derivatives and projections on a fine sphere grid.
pub struct AngularJets {
    pub points: Vec<[Complex64; 2]>,
    pub weights: Vec<f64>,
    degrees: Vec<usize>,
    table: Vec<Vec<ModeJet>>,
}

impl AngularJets {
    /// Quadrature exact to degree `3K + 4`, enough to project products of
    /// two Hessians onto the modes.
    pub fn new(model: &Composite) -> Result<Self> {
        let k_max = model.layout.max_degree;
        let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3ModInvolution, 1.0, k_max)?;
        let quad = AngularQuadrature::build(&spec, 3 * k_max + 4);
        let points: Vec<[Complex64; 2]> = quad
            .points
            .iter()
            .map(|p| match p {
                Point::Sphere(z) => *z,
                Point::Angle(_) => unreachable!("sphere cross-section"),
            })
            .collect();
        let mut table = Vec::new();
        let mut degrees = Vec::new();
        for j in 0..model.num_modes() {
            let poly = model
                .system
                .mode_poly(j)
                .ok_or_else(|| Error::Config("polar modes must be sphere harmonics".into()))?;
            let jet = poly.jet_table();
            degrees.push(model.system.modes[j].degree);
            let row = points
                .iter()
                .map(|w| {
                    let e = jet.eval(*w);
                    let dbar = [e.dz[0].conj(), e.dz[1].conj()];
                    ModeJet {
                        value: e.value,
                        radial: Herm2::radial(0.0, e.value, *w),
                        mixed: Herm2 {
                            a: e.value + 2.0 * (w[0] * e.dz[0]).re,
                            b: e.value + 2.0 * (w[1] * e.dz[1]).re,
                            c: w[1] * e.dz[0] + w[0].conj() * dbar[1],
                        },
                        hessian: Herm2 {
                            a: e.hess[0][0].re,
                            b: e.hess[1][1].re,
                            c: e.hess[0][1],
                        },
                    }
                })
                .collect();
            table.push(row);
        }
        Ok(Self {
            points,
            weights: quad.weights,
            degrees,
            table,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ_j coefficients_j Y_j` at every point.
    pub fn synthesize(&self, coefficients: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|q| coefficients.iter().zip(&self.table).map(|(c, row)| c * row[q].value).sum())
            .collect()
    }

    pub fn project(&self, samples: &[f64]) -> Vec<f64> {
        self.table
            .iter()
            .map(|row| row.iter().zip(samples).zip(&self.weights).map(|((m, s), w)| m.value * s * w).sum())
            .collect()
    }

    /// `∂∂̄u` at radius `r` for mode coefficients `u` and their first two
    /// `s`-derivatives, at every point.
    pub fn hessians(&self, r: f64, u: &[f64], du: &[f64], ddu: &[f64]) -> Vec<Herm2> {
        let inv = 1.0 / (r * r);
        let coeffs: Vec<(f64, f64, f64)> = (0..u.len())
            .map(|j| {
                let k = self.degrees[j] as f64;
                (
                    0.25 * (ddu[j] - 2.0 * (k + 1.0) * du[j] + k * (k + 2.0) * u[j]),
                    0.5 * (du[j] - k * u[j]),
                    u[j],
                )
            })
            .collect();
        (0..self.len())
            .map(|q| {
                let mut h = Herm2::ZERO;
                for (j, (c1, c2, c3)) in coeffs.iter().enumerate() {
                    if *c1 == 0.0 && *c2 == 0.0 && *c3 == 0.0 {
                        continue;
                    }
                    let m = &self.table[j][q];
                    h = h.add(&m.radial.scale(*c1)).add(&m.mixed.scale(*c2)).add(&m.hessian.scale(*c3));
                }
                h.scale(inv)
            })
            .collect()
    }
}

/// The discretised problem at one gluing parameter.
pub struct CySolver<'g> {
    pub geometry: &'g GluedGeometry,
    pub model: &'g Composite,
    pub inverse: ModifiedInverse<'g>,
    pub jets: AngularJets,
    pub h: CompositeField,
    /// `λ` from the volume quadrature.
    pub lambda_volume: f64,
    /// `λ` making the right-hand side orthogonal to the cokernel of the
    /// discrete operator.
    pub lambda: f64,
    pub rhs: CompositeField,
    /// `1 + η` and `Rh` at polar nodes and Cartesian nodes.
    one_plus_eta: (Vec<f64>, Vec<f64>),
    rh: (Vec<f64>, Vec<f64>),
    /// Mode-zero coefficient of the constant function 1.
    c0: f64,
}

/// Pointwise data of the corrected metric.
#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    /// `min μ` with `ω_φ − μω₀` degenerate, over all samples.
    pub positivity_margin: f64,
    /// Torus-unit position (relative to the fixed point) of that minimum.
    pub worst_point: [f64; 4],
    /// `‖det ω_φ − λ‖ / ‖1‖` in the flat `L²` norm.
    pub ma_residual: f64,
    /// The same for `g = 0`.
    pub baseline_residual: f64,
    /// `∫ω_φ² / ∫ω₀² − 1` on the sample quadrature.
    pub volume_change: f64,
    pub sup_g: f64,
}

/// One Picard step.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖□g + quad(g) − rhs − τh‖/‖rhs‖` for the iterate entering the step.
    pub residual: f64,
    /// `‖g_{n+1} − g_n‖/‖g_{n+1}‖`.
    pub increment: f64,
    pub tau: f64,
    pub positivity_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    /// The increment met the tolerance but `τ` did not; further steps
    /// cannot move it.
    TauNotVanishing,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub r: f64,
    pub lambda: f64,
    pub lambda_volume: f64,
    pub rhs_norm: f64,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub converged: bool,
    /// `|τ|/‖rhs‖` at the final iterate.
    pub tau_relative: f64,
    /// Increment ratios `δ_{n+1}/δ_n`.
    pub contraction: Vec<f64>,
    /// `∫h·(□g + quad(g)) dμ / (‖h‖‖rhs‖)`, blended over the charts.
    pub volume_identity: f64,
    /// Largest `|⟨g_n, h⟩| / (‖g_n‖‖h‖)` over the iterates.
    pub kernel_overlap: f64,
    pub metric: MetricReport,
    pub frames: FrameComparison,
}

/// Cylindrical against Kähler frame residuals.
#[derive(Clone, Debug, Serialize)]
pub struct FrameComparison {
    /// `‖E_cyl − E_K‖/‖□g‖` at the final iterate.
    pub mismatch: f64,
    /// The same quantity for the first iterate `P(rhs)`: the discretisation
    /// tolerance of `□` on fields of this kind.
    pub tolerance: f64,
    pub cylindrical_residual: f64,
    pub kahler_residual: f64,
}

impl<'g> CySolver<'g> {
    pub fn new(geometry: &'g GluedGeometry) -> Result<Self> {
        let model = geometry.composite()?;
        let inverse = ModifiedInverse::new(model)?;
        let jets = AngularJets::new(model)?;
        let h = model.conformal_factor();
        let r = geometry.r;
        let zm = model.zero_mode();
        let c0 = model.from_radial(|_| 1.0).polar[zm][0];
        let n = model.polar.n;
        let polar_eta: Vec<f64> = (0..n).map(|i| 1.0 + geometry.eta_y(model.polar.r(i))).collect();
        let polar_rh: Vec<f64> = (0..n).map(|i| model.polar.coef[i].h).collect();
        let grid = &model.layout.grid;
        let cart_eta: Vec<f64> = (0..grid.len()).map(|idx| 1.0 + geometry.eta_y(r * grid.radius(idx))).collect();
        let cart_rh: Vec<f64> = model.cart.h.iter().map(|v| r * v).collect();
        let mut solver = Self {
            geometry,
            model,
            inverse,
            jets,
            h,
            lambda_volume: lambda_from_eta(geometry)?,
            lambda: f64::NAN,
            rhs: model.zeros(),
            one_plus_eta: (polar_eta, cart_eta),
            rh: (polar_rh, cart_rh),
            c0,
        };
        solver.lambda = solver.compatible_lambda()?;
        solver.rhs = solver.rhs_assemble(solver.lambda);
        Ok(solver)
    }

    fn radial_field<F: Fn(f64, f64) -> f64>(&self, f: F) -> CompositeField {
        let mut out = self.model.zeros();
        let zm = self.model.zero_mode();
        for i in 0..self.model.polar.n {
            out.polar[zm][i] = self.c0 * f(self.rh.0[i], self.one_plus_eta.0[i]);
        }
        for (idx, v) in out.cart.iter_mut().enumerate() {
            *v = f(self.rh.1[idx], self.one_plus_eta.1[idx]);
        }
        out
    }

    /// `λ = τ((Rh)³)/τ((Rh)³(1+η))`: the volume ratio measured with the
    /// discrete measure that pairs with the cokernel.
    pub fn compatible_lambda(&self) -> Result<f64> {
        let a = self.radial_field(|rh, e| rh.powi(3) * e);
        let b = self.radial_field(|rh, _| rh.powi(3));
        let (_, ta) = self.inverse.apply(&a)?;
        let (_, tb) = self.inverse.apply(&b)?;
        Ok(tb / ta)
    }

    /// `(Rh)³(λ(1+η) − 1)`.
    pub fn rhs_assemble(&self, lambda: f64) -> CompositeField {
        self.radial_field(|rh, e| rh.powi(3) * (lambda * e - 1.0))
    }

    /// Mode coefficients of `u = g/h_Y` at every polar node and their
    /// `s`-derivatives, node-major.
    fn polar_jets(&self, g: &CompositeField) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>> {
        let p = &self.model.polar;
        let n = p.n;
        let m = self.model.num_modes();
        let scale = self.geometry.r;
        let mut per_mode = Vec::with_capacity(m);
        for j in 0..m {
            // Polar field values are in torus units; u = g/h_Y with h_Y = R h.
            let u: Vec<f64> = (0..=n)
                .map(|i| {
                    let h = if i < n { p.coef[i].h } else { p.edge_h() };
                    g.polar[j][i] / h * if i < n { 1.0 } else { 1.0 }
                })
                .collect();
            let (d1, d2) = fd_derivatives(&u, p.ds)?;
            per_mode.push((u, d1, d2));
        }
        let _ = scale;
        Ok((0..n)
            .map(|i| {
                (
                    per_mode.iter().map(|x| x.0[i]).collect(),
                    per_mode.iter().map(|x| x.1[i]).collect(),
                    per_mode.iter().map(|x| x.2[i]).collect(),
                )
            })
            .collect())
    }

    fn cart_u(&self, g: &CompositeField) -> Vec<f64> {
        g.cart
            .iter()
            .zip(&self.model.cart.h)
            .map(|(v, h)| if *h > 0.0 { v / h } else { 0.0 })
            .collect()
    }

    /// `(Rh)⁻³Q(g)²` in both charts.
    pub fn quadratic_term(&self, g: &CompositeField) -> Result<CompositeField> {
        let mut out = self.model.zeros();
        let p = &self.model.polar;
        for (i, (u, du, ddu)) in self.polar_jets(g)?.into_iter().enumerate() {
            let hs = self.jets.hessians(p.r(i), &u, &du, &ddu);
            let factor = 16.0 * self.rh.0[i].powi(3) * self.one_plus_eta.0[i];
            let samples: Vec<f64> = hs.iter().map(|m| factor * m.det()).collect();
            for (j, c) in self.jets.project(&samples).into_iter().enumerate() {
                out.polar[j][i] = c;
            }
        }
        let u = self.cart_u(g);
        let r3 = self.geometry.r.powi(-3);
        for &idx in &self.model.cart.unknowns {
            let m = self.model.cart.complex_hessian_fourth(&u, idx);
            let h = self.model.cart.h[idx];
            out.cart[idx] = 16.0 * r3 * h.powi(3) * self.one_plus_eta.1[idx] * m.det();
        }
        Ok(out)
    }

    /// `□g + quad(g) − rhs − τh`.
    pub fn equation_residual(&self, g: &CompositeField, tau: f64) -> Result<CompositeField> {
        let mut res = self.model.apply_box(g);
        res.axpy(1.0, &self.quadratic_term(g)?);
        res.axpy(-1.0, &self.rhs);
        res.axpy(-tau, &self.h);
        Ok(res)
    }

    /// `(Rh)³(1+η)(det ω_φ − λ)` projected onto the equation rows.
    pub fn kahler_residual(&self, g: &CompositeField) -> Result<CompositeField> {
        let mut out = self.model.zeros();
        let p = &self.model.polar;
        for (i, (u, du, ddu)) in self.polar_jets(g)?.into_iter().enumerate() {
            let r = p.r(i);
            let d = self.geometry.metric.derivs(r * r);
            let hs = self.jets.hessians(r, &u, &du, &ddu);
            let factor = self.rh.0[i].powi(3) * self.one_plus_eta.0[i];
            let samples: Vec<f64> = hs
                .iter()
                .zip(&self.jets.points)
                .map(|(m, w)| {
                    let z = [w[0] * r, w[1] * r];
                    let phi = d.matrix(z).sub(&m.scale(4.0));
                    factor * (phi.det() - self.lambda)
                })
                .collect();
            for (j, c) in self.jets.project(&samples).into_iter().enumerate() {
                out.polar[j][i] = c;
            }
        }
        let u = self.cart_u(g);
        let r3 = self.geometry.r.powi(-3);
        for &idx in &self.model.cart.unknowns {
            let m = self.model.cart.complex_hessian_fourth(&u, idx);
            let omega = self.geometry.omega0_at(self.model.layout.grid.position(idx))?;
            let phi = omega.sub(&m.scale(4.0 * r3));
            out.cart[idx] = self.rh.1[idx].powi(3) * self.one_plus_eta.1[idx] * (phi.det() - self.lambda);
        }
        Ok(out)
    }

    /// Positivity, Monge-Ampère residual and volume of `ω_φ` on the samples.
    pub fn reconstruct_metric(&self, g: &CompositeField) -> Result<MetricReport> {
        let model = self.model;
        let p = &model.polar;
        let r = self.geometry.r;
        let mut margin = f64::INFINITY;
        let mut worst = [0.0; 4];
        let (mut res2, mut base2, mut vol, mut vol_phi, mut vol0, mut sup_g) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
        let mut visit = |w: f64, omega: &Herm2, phi: &Herm2, x: [f64; 4], gv: f64| {
            let mu = phi.relative_min_eigenvalue(omega);
            if mu < margin {
                margin = mu;
                worst = x;
            }
            let (d0, d1) = (omega.det(), phi.det());
            res2 += w * (d1 - self.lambda).powi(2);
            base2 += w * (d0 - self.lambda).powi(2);
            vol += w;
            vol0 += w * d0;
            vol_phi += w * d1;
            sup_g = sup_g.max(gv.abs());
        };
        for (i, (u, du, ddu)) in self.polar_jets(g)?.into_iter().enumerate() {
            let ry = p.r(i);
            let share = model.polar_share(ry / r);
            if share == 0.0 {
                continue;
            }
            let d = self.geometry.metric.derivs(ry * ry);
            let hs = self.jets.hessians(ry, &u, &du, &ddu);
            let gvals = self.jets.synthesize(&g.polar.iter().map(|m| m[i]).collect::<Vec<_>>());
            // Flat volume element r_X⁴ ds dΩ.
            let cell = share * (ry / r).powi(4) * p.ds;
            for (q, w) in self.jets.points.iter().enumerate() {
                let z = [w[0] * ry, w[1] * ry];
                let omega = d.matrix(z);
                let phi = omega.sub(&hs[q].scale(4.0));
                let x = [z[0].re / r, z[0].im / r, z[1].re / r, z[1].im / r];
                visit(cell * self.jets.weights[q], &omega, &phi, x, gvals[q]);
            }
        }
        let u = self.cart_u(g);
        let r3 = r.powi(-3);
        let d4 = model.layout.grid.spacing().powi(4);
        for &idx in &model.cart.unknowns {
            let x = model.layout.grid.position(idx);
            let share = 1.0 - model.polar_share(model.layout.grid.radius(idx));
            if share == 0.0 {
                continue;
            }
            let omega = self.geometry.omega0_at(x)?;
            let phi = omega.sub(&model.cart.complex_hessian_fourth(&u, idx).scale(4.0 * r3));
            visit(share * d4, &omega, &phi, x, g.cart[idx]);
        }
        // φ = −4R⁻³ g/h in torus units; report sup |g|.
        Ok(MetricReport {
            positivity_margin: margin,
            worst_point: worst,
            ma_residual: (res2 / vol).sqrt(),
            baseline_residual: (base2 / vol).sqrt(),
            volume_change: vol_phi / vol0 - 1.0,
            sup_g,
        })
    }

    /// Picard iteration `g ← P(rhs − quad(g))`.
    pub fn picard_solve(&self, config: &SolveConfig) -> Result<(CompositeField, SolveReport)> {
        config.validate()?;
        let model = self.model;
        let h_norm = model.norm(&self.h);
        let mut kernel_overlap = 0.0f64;
        let rhs_norm = model.equation_norm(&self.rhs);
        let mut g = model.zeros();
        let mut history = Vec::new();
        let mut contraction = Vec::new();
        let mut prev_inc = f64::NAN;
        let mut growing = 0;
        let mut first_iterate = None;
        let mut termination = None;
        let mut tau = 0.0;
        for iter in 0..config.max_iterations {
            let quad = self.quadratic_term(&g)?;
            let mut src = self.rhs.clone();
            src.axpy(-1.0, &quad);
            let (next, t) = self.inverse.apply(&src)?;
            let mut res = model.apply_box(&g);
            res.axpy(1.0, &quad);
            res.axpy(-1.0, &self.rhs);
            res.axpy(-t, &self.h);
            let mut diff = next.clone();
            diff.axpy(-1.0, &g);
            let next_norm = model.norm(&next);
            let inc = if next_norm > 0.0 { model.norm(&diff) / next_norm } else { 0.0 };
            let margin = self.reconstruct_metric(&next)?.positivity_margin;
            history.push(IterationRecord {
                iter,
                residual: model.equation_norm(&res) / rhs_norm,
                increment: inc,
                tau: t,
                positivity_margin: margin,
            });
            if first_iterate.is_none() {
                first_iterate = Some(next.clone());
            }
            if prev_inc.is_finite() && prev_inc > 0.0 {
                let ratio = inc / prev_inc;
                contraction.push(ratio);
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
                if growing >= 3 {
                    return Err(Error::Divergence {
                        r: self.geometry.r,
                        ratio,
                    });
                }
            }
            prev_inc = inc;
            if next_norm > 0.0 {
                kernel_overlap = kernel_overlap.max(model.inner(&next, &self.h).abs() / (next_norm * h_norm));
            }
            g = next;
            tau = t;
            if inc < config.tolerance {
                termination = Some(if tau.abs() <= config.tau_tolerance * rhs_norm {
                    Termination::Converged
                } else {
                    Termination::TauNotVanishing
                });
                break;
            }
        }
        let Some(termination) = termination else {
            return Err(Error::NonConvergence {
                iterations: config.max_iterations,
                increment: prev_inc,
            });
        };
        let first = first_iterate.unwrap_or_else(|| model.zeros());
        let frames = self.compare_frames(&g, &first)?;
        let metric = self.reconstruct_metric(&g)?;
        let mut lhs = model.apply_box(&g);
        lhs.axpy(1.0, &self.quadratic_term(&g)?);
        let volume_identity = model.inner(&self.h, &lhs) / (h_norm * model.norm(&self.rhs));
        let report = SolveReport {
            r: self.geometry.r,
            lambda: self.lambda,
            lambda_volume: self.lambda_volume,
            rhs_norm,
            converged: termination == Termination::Converged,
            termination,
            tau_relative: tau.abs() / rhs_norm,
            history,
            contraction,
            volume_identity,
            kernel_overlap,
            metric,
            frames,
        };
        Ok((g, report))
    }

    fn frame_gap(&self, g: &CompositeField) -> Result<(f64, f64, f64)> {
        let mut cyl = self.model.apply_box(g);
        cyl.axpy(1.0, &self.quadratic_term(g)?);
        cyl.axpy(-1.0, &self.rhs);
        let kahler = self.kahler_residual(g)?;
        let mut diff = cyl.clone();
        diff.axpy(-1.0, &kahler);
        let scale = self.model.equation_norm(&self.model.apply_box(g));
        let gap = self.model.equation_norm(&diff);
        Ok((
            if scale > 0.0 { gap / scale } else { gap },
            self.model.equation_norm(&cyl),
            self.model.equation_norm(&kahler),
        ))
    }

    pub fn compare_frames(&self, g: &CompositeField, reference: &CompositeField) -> Result<FrameComparison> {
        let (mismatch, cylindrical_residual, kahler_residual) = self.frame_gap(g)?;
        let (tolerance, _, _) = self.frame_gap(reference)?;
        Ok(FrameComparison {
            mismatch,
            tolerance,
            cylindrical_residual,
            kahler_residual,
        })
    }
}

/// Observed ratios `‖quad(g₁) − quad(g₂)‖ / (‖g₁ − g₂‖(‖g₁‖ + ‖g₂‖))`
/// with fields measured by the second-order norm `‖g‖ = ‖□g‖`.
#[derive(Clone, Debug, Serialize)]
pub struct LipschitzSample {
    pub ratios: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

impl<'g> CySolver<'g> {
    /// A random smooth field in the range of the inverse: neck-localized
    /// bumps with random mode amplitudes, mapped through `P`.
    pub fn random_field<R: Rng>(&self, rng: &mut R, amplitude: f64) -> Result<CompositeField> {
        let p = &self.model.polar;
        let mut src = self.model.zeros();
        let s_lo = p.s(0);
        let s_hi = p.s(p.n - 1);
        let centre = rng.gen_range(s_lo + 0.25 * (s_hi - s_lo)..s_lo + 0.75 * (s_hi - s_lo));
        let width = rng.gen_range(0.3..1.0);
        for mode in src.polar.iter_mut() {
            let a: f64 = rng.gen_range(-1.0..1.0);
            for (i, v) in mode.iter_mut().enumerate().take(p.n) {
                *v = a * (-((p.s(i) - centre) / width).powi(2)).exp();
            }
        }
        let (g, _) = self.inverse.apply(&src)?;
        let norm = self.model.norm(&g);
        Ok(if norm > 0.0 { g.scaled(amplitude / norm) } else { g })
    }

    /// Lipschitz ratios of the quadratic term over random pairs of size
    /// comparable to `scale`.
    pub fn lipschitz_ratios<R: Rng>(&self, rng: &mut R, pairs: usize, scale: f64) -> Result<LipschitzSample> {
        let mut ratios = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let (a1, a2) = (scale * rng.gen_range(0.1..1.0), scale * rng.gen_range(0.1..1.0));
            let g1 = self.random_field(rng, a1)?;
            let g2 = self.random_field(rng, a2)?;
            let mut dq = self.quadratic_term(&g1)?;
            dq.axpy(-1.0, &self.quadratic_term(&g2)?);
            let mut dg = g1.clone();
            dg.axpy(-1.0, &g2);
            let m = self.model;
            let strong = |f: &CompositeField| m.equation_norm(&m.apply_box(f));
            ratios.push(m.equation_norm(&dq) / (strong(&dg) * (strong(&g1) + strong(&g2))));
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(LipschitzSample { ratios, max, min })
    }
}

/// One gluing parameter of the contraction scan.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionRow {
    pub r: f64,
    /// Largest increment ratio after the first step, if the solve ran.
    pub worst_ratio: Option<f64>,
    pub outcome: String,
}

/// Largest increment ratio allowed for a parameter to count as contracting.
pub const CONTRACTION_LIMIT: f64 = 0.5;

/// Solves over the given parameters and returns the rows with the smallest
/// `R₀` such that every listed `R ≥ R₀` contracts.
pub fn contraction_scan(
    lattice: &Lattice,
    rs: &[f64],
    res: &Resolutions,
    config: &SolveConfig,
) -> Result<(Vec<ContractionRow>, Option<f64>)> {
    let mut rows = Vec::new();
    for &r in rs {
        let row = match assemble(lattice, r, res).and_then(|g| {
            let solver = CySolver::new(&g)?;
            solver.picard_solve(config).map(|(_, rep)| rep)
        }) {
            Ok(rep) => ContractionRow {
                r,
                worst_ratio: Some(rep.contraction.iter().cloned().fold(0.0, f64::max)),
                outcome: format!("{:?}", rep.termination),
            },
            Err(e) => ContractionRow {
                r,
                worst_ratio: None,
                outcome: e.to_string(),
            },
        };
        rows.push(row);
    }
    let mut sorted: Vec<&ContractionRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
    let mut threshold = None;
    for row in sorted.iter().rev() {
        match row.worst_ratio {
            Some(q) if q <= CONTRACTION_LIMIT => threshold = Some(row.r),
            _ => break,
        }
    }
    Ok((rows, threshold))
}

pub fn write_history_csv<W: Write>(report: &SolveReport, mut out: W) -> Result<()> {
    writeln!(out, "iter,residual,increment,tau,positivity_margin")?;
    for r in &report.history {
        writeln!(out, "{},{:.6e},{:.6e},{:.6e},{:.6}", r.iter, r.residual, r.increment, r.tau, r.positivity_margin)?;
    }
    Ok(())
}
