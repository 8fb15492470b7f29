use thiserror::Error;

/// Everything that can go wrong while evaluating an engine.
///
/// Variants are grouped by the CLI exit code they map to (see
/// [`EngineError::exit_code`]).
#[derive(Debug, Error)]
pub enum EngineError {
    // -- configuration (exit 2)
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error at `{path}`: {reason}")]
    Schema { path: String, reason: String },

    // -- physics domain (exit 3)
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value out of supported range: {0}")]
    Range(String),

    #[error("coupling theta = {theta} exceeds the {order} bound theta_bar = {theta_bar}")]
    CouplingBound {
        theta: f64,
        theta_bar: f64,
        order: &'static str,
    },

    #[error("fourth-order closed forms exist only for (n, m) = (2, 1) or (1, 2); got ({n}, {m})")]
    UnsupportedVariant { n: u32, m: u32 },

    #[error("degenerate work quantum: n*omega_a == m*omega_b")]
    DegenerateQuantum,

    #[error("singular frequency ratio: x = omega_b/omega_a == 1")]
    SingularFrequency,

    #[error("degenerate occupations: A*B == 0 (both baths in the vacuum)")]
    DegenerateOccupation,

    #[error("mean work is zero, relative fluctuations are undefined")]
    UndefinedRf,

    #[error("no feasible (n, m) pair with x < n/m < x*y inside n <= {n_max}, m <= {m_max}")]
    NoFeasiblePair { n_max: u32, m_max: u32 },

    // -- numerics and truncation (exit 4)
    #[error("truncation for {parameter} needs dim {needed} > cap {cap}; raise the cap or the tolerance")]
    Resource {
        parameter: String,
        needed: usize,
        cap: usize,
    },

    #[error("off-line mass {off_line_mass:.3e} exceeds leakage tolerance {tolerance:.3e} at dims {dim_a}x{dim_b}; increase dims")]
    Truncation {
        off_line_mass: f64,
        tolerance: f64,
        dim_a: usize,
        dim_b: usize,
    },

    #[error("numerical precision failure: {0}")]
    Numerical(String),

    // -- I/O (exit 5)
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl EngineError {
    pub fn exit_code(&self) -> i32 {
        use EngineError::*;
        match self {
            Config(_) | Schema { .. } => 2,
            Domain(_)
            | Range(_)
            | CouplingBound { .. }
            | UnsupportedVariant { .. }
            | DegenerateQuantum
            | SingularFrequency
            | DegenerateOccupation
            | UndefinedRf
            | NoFeasiblePair { .. } => 3,
            Resource { .. } | Truncation { .. } | Numerical(_) => 4,
            Io(_) | Csv(_) => 5,
        }
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
