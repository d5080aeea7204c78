//! Command-line driver: configuration, experiment runs and artifacts.

use crate::acceptance::{self, identity_residuals, AcceptanceOptions, SWEEP_RS, SWEEP_TS, Y_MODEL_DS};
use crate::cross_section::{spectrum, CrossSectionKind, CrossSectionSpec};
use crate::cy_solver::{write_history_csv, CySolver, SolveConfig};
use crate::eguchi_hanson::RadialProfile;
use crate::ends_gluing::{neck_sweep, EndedManifold};
use crate::error::{Error, Result};
use crate::fit::{log_log_slope, SlopeFit};
use crate::kummer_assembly::{assemble, sweep, AssemblyRow, Lattice, Resolutions};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Overrides the output directory of every subcommand.
pub const OUT_ENV: &str = "KUMMER_OUT";

#[derive(Parser, Debug)]
#[command(name = "kummer", version, about = "Glued Ricci-flat metrics on the Kummer surface")]
pub struct Cli {
    /// TOML experiment configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration and $KUMMER_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the Eguchi-Hanson profile identity and tail coefficients.
    EhCheck {
        /// Scale F′ by 1 + this factor (fault injection).
        #[arg(long, default_value_t = 0.0)]
        perturb_fprime: f64,
    },
    /// Tabulate cross-section eigenvalues with multiplicities.
    Spectrum {
        #[arg(long, default_value = "sphere3-mod-involution")]
        kind: CrossSectionKind,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        max_degree: Option<usize>,
    },
    /// η, λ and parametrix scaling over gluing parameters and neck lengths.
    Sweep {
        #[arg(long = "r", value_delimiter = ',')]
        r_list: Vec<f64>,
        #[arg(long = "t", value_delimiter = ',')]
        t_list: Vec<f64>,
    },
    /// Solve the Calabi-Yau equation at one gluing parameter.
    Solve {
        #[arg(long)]
        r: Option<f64>,
    },
    /// Run the acceptance suite.
    Accept,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub r_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub solve_r: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub resolutions: Resolutions,
    pub solve: SolveParameters,
}

/// The serialisable part of [`SolveConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParameters {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub tau_tolerance: f64,
    pub residual_factor: f64,
}

impl Default for SolveParameters {
    fn default() -> Self {
        let c = SolveConfig::default();
        Self {
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
            tau_tolerance: c.tau_tolerance,
            residual_factor: c.residual_factor,
        }
    }
}

impl SolveParameters {
    pub fn config(&self) -> SolveConfig {
        SolveConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            tau_tolerance: self.tau_tolerance,
            residual_factor: self.residual_factor,
            ..SolveConfig::default()
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            r_list: SWEEP_RS.to_vec(),
            t_list: SWEEP_TS.to_vec(),
            solve_r: acceptance::SOLVE_R,
            output_dir: PathBuf::from("out"),
            seed: AcceptanceOptions::default().seed,
            resolutions: Resolutions::default(),
            solve: SolveParameters::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("r_list", &self.r_list), ("t_list", &self.t_list)] {
            if list.is_empty() {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
            if let Some(v) = list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} entries must be positive, got {v}")));
            }
        }
        if !(self.solve_r > 0.0) {
            return Err(Error::Config(format!("solve_r must be positive, got {}", self.solve_r)));
        }
        self.solve.config().validate()
    }
}

/// Merges the configuration file, the environment and the flags.
pub fn resolve_config(cli: &Cli, env_out: Option<String>) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = env_out.filter(|d| !d.is_empty()) {
        config.output_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.out {
        config.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Sweep { r_list, t_list } => {
            if !r_list.is_empty() {
                config.r_list = r_list.clone();
            }
            if !t_list.is_empty() {
                config.t_list = t_list.clone();
            }
        }
        Command::Solve { r: Some(r) } => config.solve_r = *r,
        Command::Spectrum { max_degree: Some(k), .. } => config.resolutions.max_degree = *k,
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Runs one subcommand; `Ok(false)` means a tolerance or convergence check
/// failed and the process should exit nonzero.
pub fn run(cli: &Cli) -> Result<bool> {
    let config = resolve_config(cli, std::env::var(OUT_ENV).ok())?;
    match &cli.command {
        Command::EhCheck { perturb_fprime } => eh_check(&config, *perturb_fprime),
        Command::Spectrum { kind, radius, .. } => run_spectrum(&config, *kind, *radius),
        Command::Sweep { .. } => run_sweep(&config),
        Command::Solve { .. } => run_solve(&config),
        Command::Accept => run_accept(&config),
    }
}

pub fn eh_check(config: &ExperimentConfig, perturbation: f64) -> Result<bool> {
    let dir = &config.output_dir;
    let profile = RadialProfile::eguchi_hanson();
    let rows = identity_residuals(&profile, perturbation);
    let mut f = create(dir, "eh_identity.csv")?;
    writeln!(f, "# rho: squared radius in Eguchi-Hanson units; residual: (F')^2 + rho F' F'' - 1, dimensionless")?;
    writeln!(f, "rho,residual")?;
    for (rho, r) in &rows {
        writeln!(f, "{rho:e},{r:e}")?;
    }
    let series = [-0.5, 0.0, 1.0 / 24.0];
    let mut f = create(dir, "eh_tail.csv")?;
    writeln!(f, "# coefficient of rho^-n in the large-rho expansion of the Kahler potential correction G")?;
    writeln!(f, "n,fitted,series")?;
    for (n, (a, s)) in profile.tail.iter().zip(series).enumerate() {
        writeln!(f, "{},{a:e},{s:e}", n + 1)?;
    }
    let failing: Vec<&(f64, f64)> = rows.iter().filter(|(_, r)| r.abs() > 1e-12).collect();
    let tail_ok = (profile.tail[0] + 0.5).abs() <= 1e-8 && profile.tail[1].abs() <= 1e-8;
    if !failing.is_empty() {
        eprintln!("{} of {} identity rows exceed 1e-12:", failing.len(), rows.len());
        for (rho, r) in failing.iter().take(10) {
            eprintln!("  rho = {rho:e}: residual {r:e}");
        }
    }
    if !tail_ok {
        eprintln!("tail coefficients {:?} differ from the series", profile.tail);
    }
    Ok(failing.is_empty() && tail_ok)
}

pub fn run_spectrum(config: &ExperimentConfig, kind: CrossSectionKind, radius: f64) -> Result<bool> {
    let spec = CrossSectionSpec::new(kind, radius, config.resolutions.max_degree)?;
    let system = spectrum(&spec)?;
    let mut f = create(&config.output_dir, "spectrum.csv")?;
    writeln!(f, "# eigenvalue of the cross-section Laplacian (radius {radius}) and its multiplicity")?;
    writeln!(f, "eigenvalue,multiplicity")?;
    for (v, m) in system.multiplicities() {
        writeln!(f, "{v},{m}")?;
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub r_rows: Vec<SweepRRow>,
    pub t_rows: Vec<SweepTRow>,
    pub fits: Vec<NamedFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRRow {
    pub r: f64,
    pub row: Option<AssemblyRow>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTRow {
    pub t: f64,
    pub defect_norm: f64,
    pub inverse_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedFit {
    pub quantity: &'static str,
    pub slope: f64,
    pub ci95: f64,
}

fn fit(name: &'static str, x: &[f64], y: &[f64]) -> Option<NamedFit> {
    let SlopeFit { slope, half_width, .. } = log_log_slope(x, y).ok()?;
    Some(NamedFit {
        quantity: name,
        slope,
        ci95: half_width,
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<bool> {
    let res = &config.resolutions;
    let r_rows: Vec<SweepRRow> = config
        .r_list
        .iter()
        .map(|&r| match sweep(&[r], res, 3) {
            Ok(mut rows) => SweepRRow {
                r,
                row: rows.pop(),
                error: None,
            },
            Err(e) => SweepRRow {
                r,
                row: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let piece = EndedManifold::eguchi_hanson(16.0, Y_MODEL_DS, res.r_min, 2.0 * config.t_list.iter().cloned().fold(0.0, f64::max) + 6.0, res.max_degree)?;
    let t_rows: Vec<SweepTRow> = neck_sweep(&piece, &config.t_list, 1e-10, config.seed)?
        .into_iter()
        .map(|row| SweepTRow {
            t: row.half_length,
            defect_norm: row.defect_norm,
            inverse_norm: row.inverse_norm,
        })
        .collect();

    let ok: Vec<&AssemblyRow> = r_rows.iter().filter_map(|r| r.row.as_ref()).collect();
    let rs: Vec<f64> = ok.iter().map(|r| r.r).collect();
    let column = |f: &dyn Fn(&AssemblyRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let ts: Vec<f64> = t_rows.iter().map(|r| r.t).collect();
    let defects: Vec<f64> = t_rows.iter().map(|r| r.defect_norm).collect();
    let fits: Vec<NamedFit> = [
        fit("sup_eta", &rs, &column(&|r| r.sup_eta)),
        fit("eta_l2k", &rs, &column(&|r| r.l2k_eta)),
        fit("lambda_minus_1", &rs, &column(&|r| (r.lambda - 1.0).abs())),
        fit("defect_norm", &ts, &defects),
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut f = create(&config.output_dir, "sweep.csv")?;
    writeln!(
        f,
        "# R: gluing parameter; sup_eta, eta_l2k: sup and L2_3 norms of the volume-form error eta (dimensionless); \
         lambda_minus_1: volume ratio minus one; T: neck half-length; defect_norm: weighted L2 norm of box P0 - 1; P_norm: weighted L2 norm of the glued inverse"
    )?;
    writeln!(f, "R,sup_eta,eta_l2k,lambda_minus_1,T,defect_norm,P_norm,error")?;
    for row in &r_rows {
        match &row.row {
            Some(a) => writeln!(f, "{},{:e},{:e},{:e},{},,,", a.r, a.sup_eta, a.l2k_eta, a.lambda - 1.0, a.t)?,
            None => writeln!(f, "{},,,,,,,\"{}\"", row.r, row.error.as_deref().unwrap_or(""))?,
        }
    }
    for row in &t_rows {
        let p = row.inverse_norm.map_or(String::new(), |p| format!("{p:e}"));
        writeln!(f, ",,,,{},{:e},{p},", row.t, row.defect_norm)?;
    }
    for nf in &fits {
        writeln!(f, "# fit,{},{:.6},{:.6}", nf.quantity, nf.slope, nf.ci95)?;
    }
    let summary = SweepSummary { r_rows, t_rows, fits };
    write_json(&config.output_dir, "sweep_summary.json", &summary)?;
    Ok(summary.r_rows.iter().all(|r| r.error.is_none()))
}

#[derive(Serialize)]
struct SolveFailure {
    r: f64,
    error: String,
}

pub fn run_solve(config: &ExperimentConfig) -> Result<bool> {
    let dir = &config.output_dir;
    let r = config.solve_r;
    let outcome = assemble(&Lattice::unit(), r, &config.resolutions).and_then(|g| {
        let solver = CySolver::new(&g)?;
        solver.picard_solve(&config.solve.config()).map(|(_, rep)| rep)
    });
    match outcome {
        Ok(report) => {
            write_json(dir, "solve_report.json", &report)?;
            write_history_csv(&report, create(dir, "solve_history.csv")?)?;
            let ok = report.converged && report.metric.positivity_margin > 0.0;
            if !ok {
                eprintln!(
                    "solve at R = {r} did not meet its criteria: termination {:?}, |tau|/|rhs| = {:.2e}, margin {:.4}",
                    report.termination, report.tau_relative, report.metric.positivity_margin
                );
            }
            Ok(ok)
        }
        Err(e) => {
            write_json(dir, "solve_report.json", &SolveFailure { r, error: e.to_string() })?;
            eprintln!("solve at R = {r} failed: {e}");
            Ok(false)
        }
    }
}

pub fn run_accept(config: &ExperimentConfig) -> Result<bool> {
    let options = AcceptanceOptions {
        resolutions: config.resolutions.clone(),
        solve: config.solve.config(),
        seed: config.seed,
    };
    let outcomes = acceptance::run(&options);
    for o in &outcomes {
        println!("{o}");
    }
    write_json(&config.output_dir, "acceptance.json", &outcomes)?;
    Ok(outcomes.iter().all(|o| o.passed))
}
