//! Error taxonomy shared by every module.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input failed a precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// A time or window fell outside the sampled grid. No silent extrapolation.
    #[error("range: {0}")]
    Range(String),

    /// The requested operation needs data the input does not carry
    /// (e.g. diffusion Jacobians) or is outside a documented limitation.
    #[error("capability: {0}")]
    Capability(String),

    /// Non-finite or otherwise corrupt sampled data.
    #[error("data: {0}")]
    Data(String),

    /// A linear solve or assembly failed.
    #[error("solver: {0}")]
    Solver(String),

    /// A simulated trajectory exceeded the blow-up threshold.
    #[error("trajectory blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    /// Name not present in a registry.
    #[error("lookup: {0}")]
    Lookup(String),
}

pub type Result<T> = std::result::Result<T, Error>;
