use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("degenerate potential: L^q norm is zero")]
    DegeneratePotential,

    #[error("support escapes grid: shifting by {shift} nodes drops {dropped:.3e} of the norm")]
    SupportEscapesGrid { shift: i64, dropped: f64 },

    #[error("inverse iteration did not converge for eigenvalue index {index} in channel {ell}")]
    NonConvergence { ell: usize, index: usize },

    #[error("channel cap exhausted: more than {max_channels} channels carry bound states")]
    ChannelCapExhausted { max_channels: usize },

    #[error("boundary contamination in channel {ell}, index {index}: edge mass fraction {fraction:.3e}")]
    BoundaryContamination { ell: usize, index: usize, fraction: f64 },

    #[error("no bound states")]
    NoBoundStates,

    #[error("singular occupation weight: occupied level {lambda:.3e} is numerically zero and s < 1")]
    SingularOccupationWeight { lambda: f64 },

    #[error("shooting bracket not found for a in [{lo:e}, {hi:e}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("ambiguous shooting functional: {0}")]
    AmbiguousShooting(String),

    #[error("ODE integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("decay fit: {0}")]
    DecayWindow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
