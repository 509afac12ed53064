use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("unknown channel group `{0}`")]
    UnknownChannel(String),
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
    #[error("system is not stable (max Re(eig) = {0:e})")]
    Unstable(f64),
    #[error("ill-posed feedback interconnection")]
    IllPosed,
    #[error("not synthesizable: {0}")]
    NotSynthesizable(String),
    #[error("pair (A, C) is not detectable")]
    NotDetectable,
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("not at equilibrium: scaled derivative norm {0:e}")]
    NotAtEquilibrium(f64),
    #[error("model evaluation failed: {0}")]
    Model(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SsError>;
