use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A hybrid-system contract was broken: flowing outside `C_q`, jumping
    /// outside `D_q`, or `f2` vanishing where the feedback divides by it.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("no guard crossing on the given segment")]
    NoCrossing,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
