use thiserror::Error;

/// Which side of the game an error or report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    /// The maximizer (chooses `u`).
    One,
    /// The minimizer (chooses `v`).
    Two,
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Player::One => write!(f, "player 1"),
            Player::Two => write!(f, "player 2"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector has no dual-norm certificate")]
    ZeroVector,

    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix dimension {0} is odd, expected a 2n x 2n real embedding")]
    OddDimension(usize),

    #[error("confidence level {p} outside valid range {range}")]
    POutOfRange { p: f64, range: &'static str },

    #[error("invalid distribution family: {0}")]
    InvalidFamily(String),

    #[error("empty strategy set for {player}: {reason}")]
    EmptyStrategySet { player: Player, reason: String },

    #[error("Slater condition violated for {player} (best strict margin {margin:e})")]
    SlaterViolated { player: Player, margin: f64 },

    #[error("malformed conic program: {0}")]
    MalformedProgram(String),

    #[error("conic solve ended with status {0}")]
    Solver(String),

    #[error("duality gap {gap:e} exceeds allowed {allowed:e}")]
    GapTooLarge { gap: f64, allowed: f64 },

    #[error("feasible-point sampler for {player} exhausted {attempts} attempts")]
    SamplerStarvation { player: Player, attempts: usize },

    #[error("chance row {row} of {player} uses a moment-only ambiguity set; a nominal sampling family is required")]
    UnsampleableModel { player: Player, row: usize },

    #[error("waveform {index} sample {sample}: modulus {modulus} differs from {expected}")]
    ModulusViolation {
        index: usize,
        sample: usize,
        modulus: f64,
        expected: f64,
    },

    #[error("waveform length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroVector => "zero_vector",
            Error::InconsistentMoments(_) => "inconsistent_moments",
            Error::NotPsd { .. } => "not_psd",
            Error::OddDimension(_) => "odd_dimension",
            Error::POutOfRange { .. } => "p_out_of_range",
            Error::InvalidFamily(_) => "invalid_family",
            Error::EmptyStrategySet { .. } => "empty_strategy_set",
            Error::SlaterViolated { .. } => "slater_violated",
            Error::MalformedProgram(_) => "malformed_program",
            Error::Solver(_) => "solver_status",
            Error::GapTooLarge { .. } => "gap_too_large",
            Error::SamplerStarvation { .. } => "sampler_starvation",
            Error::UnsampleableModel { .. } => "unsampleable_model",
            Error::ModulusViolation { .. } => "modulus_violation",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Invalid(_) => "invalid_input",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
