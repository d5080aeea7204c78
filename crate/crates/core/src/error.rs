use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid spectrum: eigenvalue {0} is negative")]
    InvalidSpectrum(f64),

    #[error("unsupported Sobolev index k = {0} (0 ≤ k ≤ 5)")]
    UnsupportedIndex(usize),

    #[error("aliasing: tail energy fraction {fraction:.3e} exceeds {limit:.1e}")]
    Aliasing { fraction: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular chart: {0}")]
    SingularChart(String),

    #[error("positivity failure: {0}")]
    Positivity(String),

    #[error("ill-conditioned kernel: singular-value gap {gap:.2} below required factor 10")]
    IllConditionedKernel { gap: f64 },

    #[error("nonempty kernel (dimension {0}); use the kernel-corrected inverse")]
    NonemptyKernel(usize),

    #[error("unsupported kernel dimension {0}, expected 1")]
    UnsupportedKernel(usize),

    #[error("Neumann series diverges: defect norm {norm:.4} ≥ 1 at T = {t}")]
    NeumannDivergence { norm: f64, t: f64 },

    #[error("gluing parameter R = {r} too small: {reason}")]
    RTooSmall { r: f64, reason: String },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("out of band: {0}")]
    OutOfBand(String),

    #[error("Picard iteration diverges at R = {r}: increment ratio {ratio:.3}")]
    Divergence { r: f64, ratio: f64 },

    #[error("no convergence after {iterations} iterations (last increment {increment:.3e})")]
    NonConvergence { iterations: usize, increment: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
