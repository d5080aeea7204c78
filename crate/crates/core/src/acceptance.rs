//! The acceptance suite: ten end-to-end checks, each reported as one line.

use crate::charts::composite::Composite;
use crate::conformal_frame::{discrete_flat_potential, potential_v, FieldJet};
use crate::cross_section::{spectrum, CrossSectionKind, CrossSectionSpec};
use crate::cy_solver::{CySolver, SolveConfig, SolveReport};
use crate::cylinder_linear::{apply_operator, solve_cylinder, AxialGrid, CylinderField};
use crate::eguchi_hanson::RadialProfile;
use crate::ends_gluing::{kernel_basis, neck_sweep, EndedManifold, SweepRow};
use crate::error::{Error, Result};
use crate::fit::log_log_slope;
use crate::hermitian::Herm2;
use crate::kummer_assembly::{assemble, assemble_with_profile, sweep, AssemblyRow, Lattice, Resolutions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

/// Gluing parameters of the scaling sweeps.
pub const SWEEP_RS: [f64; 4] = [16.0, 32.0, 64.0, 128.0];
/// Neck half-lengths; the first one only probes where the Neumann series
/// starts to converge.
pub const SWEEP_TS: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];
pub const SOLVE_R: f64 = 64.0;
/// Log-radial spacing of the Eguchi-Hanson model with a cylindrical end;
/// its kernel and neck checks use dense block eigenproblems.
pub const Y_MODEL_DS: f64 = 0.05;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AcceptanceOptions {
    pub resolutions: Resolutions,
    pub solve: SolveConfig,
    pub seed: u64,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            resolutions: Resolutions::default(),
            solve: SolveConfig::default(),
            seed: 20240601,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s, limit {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds,
            self.limit_seconds
        )
    }
}

/// A check returns whether its tolerances hold and a one-line summary.
type Check = (bool, String);

fn timed<F: FnOnce() -> Result<Check>>(id: usize, title: &'static str, limit_seconds: f64, f: F) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let seconds = start.elapsed().as_secs_f64();
    Outcome {
        id,
        title,
        passed: passed && seconds <= limit_seconds,
        detail: if seconds > limit_seconds { format!("{detail}; over time limit") } else { detail },
        seconds,
        limit_seconds,
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

/// Largest `|(F′)² + ρF′F″ − 1|` over 1000 log-spaced `ρ ∈ [0.01, 100]`,
/// with `F′` optionally scaled by `1 + perturbation`.
pub fn identity_residuals(profile: &RadialProfile, perturbation: f64) -> Vec<(f64, f64)> {
    (0..1000)
        .map(|i| {
            let rho = 0.01 * 1e4f64.powf(i as f64 / 999.0);
            let scale = 1.0 + perturbation;
            let (f1, f2) = (scale * profile.fprime(rho), scale * profile.fsecond(rho));
            let residual = if perturbation == 0.0 {
                profile.ma_identity_residual(rho)
            } else {
                f1 * f1 + rho * f1 * f2 - 1.0
            };
            (rho, residual)
        })
        .collect()
}

pub fn eh_identity() -> Result<Check> {
    let worst = identity_residuals(&RadialProfile::eguchi_hanson(), 0.0)
        .iter()
        .fold(0.0f64, |m, (_, r)| m.max(r.abs()));
    Ok((worst <= 1e-12, format!("max residual {worst:.2e} (≤ 1e-12)")))
}

pub fn tail_coefficients() -> Result<Check> {
    let p = RadialProfile::eguchi_hanson();
    let (a1, a2) = (p.tail[0], p.tail[1]);
    Ok((
        (a1 + 0.5).abs() <= 1e-8 && a2.abs() <= 1e-8,
        format!("a1 = {a1:.12}, a2 = {a2:.2e}"),
    ))
}

pub fn flat_conformal_identity(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = [
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        ];
        let rho = z[0].norm_sqr() + z[1].norm_sqr();
        if rho < 1e-4 {
            continue;
        }
        let h = FieldJet::radial(z, rho.sqrt(), 0.5 / rho.sqrt(), -0.25 * rho.powf(-1.5));
        worst = worst.max((potential_v(&Herm2::IDENTITY, &h)? - 1.0).abs());
    }
    let x = [0.3, -0.2, 0.25, 0.1];
    let radius = |p: [f64; 4]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dxs = [0.02, 0.01, 0.005, 0.0025];
    let errs: Vec<f64> = dxs.iter().map(|&d| (discrete_flat_potential(radius, x, d) - 1.0).abs()).collect();
    let order = log_log_slope(&dxs, &errs)?.slope;
    Ok((
        worst <= 1e-8 && within(order, 1.8, 2.2),
        format!("max |V − 1| = {worst:.2e}, discrete order {order:.3}"),
    ))
}

pub fn cylinder_round_trip(seed: u64) -> Result<Check> {
    let spec = CrossSectionSpec::new(CrossSectionKind::Sphere3ModInvolution, 1.0, 4)?;
    let system = Arc::new(spectrum(&spec)?);
    let grid = AxialGrid::symmetric(10.0, 0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut energy_ok = true;
    for _ in 0..50 {
        let params: Vec<(f64, f64, f64)> = (0..system.len())
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.5..1.5)))
            .collect();
        let rho = CylinderField::from_fn(system.clone(), grid, |j, t| {
            let (a, c, w) = params[j];
            a * (-((t - c) / w).powi(2)).exp()
        });
        let sol = solve_cylinder(&rho)?;
        let back = apply_operator(&sol.field);
        worst = worst.max(back.combine(1.0, &rho, -1.0)?.l2_norm() / rho.l2_norm());
        energy_ok &= (0..system.len()).all(|j| sol.field.mode_energy(j) <= rho.mode_energy(j));
    }
    Ok((
        worst <= 1e-8 && energy_ok,
        format!("max relative round-trip error {worst:.2e}, energy bound {}", if energy_ok { "holds" } else { "violated" }),
    ))
}

fn alignment(model: &Composite) -> Result<(usize, f64)> {
    let (summary, _) = kernel_basis(model)?;
    Ok((summary.dimension, summary.alignment.unwrap_or(0.0)))
}

pub fn kernel_census(res: &Resolutions, z: &Composite) -> Result<Check> {
    let y = EndedManifold::eguchi_hanson(16.0, Y_MODEL_DS, res.r_min, 20.0, res.max_degree)?;
    let (ys, _) = y.kernel_basis()?;
    let flat = assemble_with_profile(&Lattice::unit(), SOLVE_R, res, RadialProfile::euclidean())?;
    let (xd, xa) = alignment(flat.composite()?)?;
    let (zd, za) = alignment(z)?;
    let ok = (ys.dimension, xd, zd) == (0, 1, 1) && xa >= 1.0 - 1e-6 && za >= 1.0 - 1e-6;
    Ok((
        ok,
        format!(
            "dimensions (Y, X, Z) = ({}, {xd}, {zd}), alignment defect X {:.1e}, Z {:.1e}",
            ys.dimension,
            (1.0 - xa).abs(),
            (1.0 - za).abs()
        ),
    ))
}

/// Neck sweep used by the parametrix criterion; rows for every `T` in
/// [`SWEEP_TS`].
pub fn parametrix_sweep(res: &Resolutions, seed: u64) -> Result<Vec<SweepRow>> {
    let piece = EndedManifold::eguchi_hanson(16.0, Y_MODEL_DS, res.r_min, 70.0, res.max_degree)?;
    neck_sweep(&piece, &SWEEP_TS, 1e-10, seed)
}

pub fn parametrix_defect(res: &Resolutions, seed: u64) -> Result<Check> {
    let rows = parametrix_sweep(res, seed)?;
    let fitted: Vec<&SweepRow> = rows.iter().filter(|r| r.half_length >= 4.0).collect();
    let ts: Vec<f64> = fitted.iter().map(|r| r.half_length).collect();
    let ds: Vec<f64> = fitted.iter().map(|r| r.defect_norm).collect();
    let slope = log_log_slope(&ts, &ds)?.slope;
    // T₀: the smallest T from which every larger T converges.
    let mut t0 = None;
    for row in rows.iter().rev() {
        if row.inverse_norm.is_none() {
            break;
        }
        t0 = Some(row.half_length);
    }
    let norms: Vec<f64> = rows.iter().filter(|r| Some(r.half_length) >= t0).filter_map(|r| r.inverse_norm).collect();
    let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let variation = if norms.is_empty() { f64::INFINITY } else { hi / lo - 1.0 };
    Ok((
        within(slope, -1.2, -0.8) && t0.is_some_and(|t| t <= 4.0) && variation <= 0.2,
        format!(
            "defect slope {slope:.3}, T0 = {}, ‖P‖ in [{lo:.3}, {hi:.3}] (variation {:.1}%)",
            t0.map_or("none".into(), |t| format!("{t}")),
            100.0 * variation
        ),
    ))
}

pub fn eta_scaling(rows: &[AssemblyRow]) -> Result<Check> {
    let rs: Vec<f64> = rows.iter().map(|r| r.r).collect();
    let sup = log_log_slope(&rs, &rows.iter().map(|r| r.sup_eta).collect::<Vec<_>>())?.slope;
    let l2 = log_log_slope(&rs, &rows.iter().map(|r| r.l2k_eta).collect::<Vec<_>>())?.slope;
    Ok((
        within(sup, -2.3, -1.7) && within(l2, -2.3, -1.7),
        format!("sup slope {sup:.3}, L²₃ slope {l2:.3}"),
    ))
}

pub fn lambda_scaling(rows: &[AssemblyRow]) -> Result<Check> {
    let rs: Vec<f64> = rows.iter().map(|r| r.r).collect();
    let dev: Vec<f64> = rows.iter().map(|r| (r.lambda - 1.0).abs()).collect();
    let slope = log_log_slope(&rs, &dev)?.slope;
    Ok((within(slope, -4.4, -3.6), format!("|λ − 1| slope {slope:.3}")))
}

pub fn solve_criterion(report: &SolveReport) -> Check {
    let late: Vec<f64> = report.contraction.iter().skip(1).cloned().collect();
    let contracts = late.iter().all(|q| *q <= 0.5);
    let worst = late.iter().cloned().fold(0.0, f64::max);
    let m = &report.metric;
    let ratio = m.ma_residual / m.baseline_residual;
    let tau_ok = report.tau_relative <= 1e-8;
    let ok = contracts && tau_ok && m.positivity_margin > 0.0 && ratio <= 1e-2;
    (
        ok,
        format!(
            "{} steps, worst later increment ratio {worst:.2e}, |τ|/‖rhs‖ = {:.2e} (≤ 1e-8: {}), margin {:.4}, MA residual {ratio:.2e} × baseline",
            report.history.len(),
            report.tau_relative,
            if tau_ok { "yes" } else { "no" },
            m.positivity_margin
        ),
    )
}

pub fn frame_criterion(report: &SolveReport) -> Check {
    let f = &report.frames;
    (
        f.mismatch <= 2.0 * f.tolerance,
        format!("frame gap {:.3e} against discretisation tolerance {:.3e}", f.mismatch, f.tolerance),
    )
}

/// Runs all ten criteria in order.
pub fn run(options: &AcceptanceOptions) -> Vec<Outcome> {
    let res = &options.resolutions;
    let seed = options.seed;
    let mut out = vec![
        timed(1, "Eguchi-Hanson identity", 1.0, eh_identity),
        timed(2, "tail coefficients", 1.0, tail_coefficients),
        timed(3, "flat conformal identity", 10.0, || flat_conformal_identity(seed)),
        timed(4, "cylinder round trip", 30.0, || cylinder_round_trip(seed)),
    ];

    let start = Instant::now();
    let z = assemble(&Lattice::unit(), SOLVE_R, res);
    let assembly_seconds = start.elapsed().as_secs_f64();
    let mut census = timed(5, "kernel census", 120.0, || kernel_census(res, z.as_ref().map_err(clone_error)?.composite()?));
    census.seconds += assembly_seconds;
    out.push(census);
    out.push(timed(6, "parametrix defect", 300.0, || parametrix_defect(res, seed)));

    let start = Instant::now();
    let rows = sweep(&SWEEP_RS, res, 3);
    let sweep_seconds = start.elapsed().as_secs_f64();
    let mut eta = timed(7, "η scaling", 300.0, || eta_scaling(rows.as_ref().map_err(clone_error)?));
    eta.seconds += sweep_seconds;
    out.push(eta);
    out.push(timed(8, "λ scaling", 60.0, || lambda_scaling(rows.as_ref().map_err(clone_error)?)));

    let start = Instant::now();
    let solved = z.as_ref().map_err(clone_error).and_then(|g| {
        let solver = CySolver::new(g)?;
        solver.picard_solve(&options.solve).map(|(_, rep)| rep)
    });
    let solve_seconds = start.elapsed().as_secs_f64();
    let mut nine = timed(9, "end-to-end solve at R = 64", 1800.0, || Ok(solve_criterion(solved.as_ref().map_err(clone_error)?)));
    nine.seconds += solve_seconds;
    out.push(nine);
    let mut ten = timed(10, "frame consistency", 1800.0, || Ok(frame_criterion(solved.as_ref().map_err(clone_error)?)));
    ten.seconds += solve_seconds;
    out.push(ten);
    out
}

fn clone_error(e: &Error) -> Error {
    Error::Config(e.to_string())
}
