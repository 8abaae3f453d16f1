use thiserror::Error;

/// Errors surfaced by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error in field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("schema error in `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("problem infeasible: {0}")]
    Infeasible(String),

    #[error("coupling infeasible: targets {targets:?} cannot be served under equality coupling")]
    CouplingInfeasible { targets: Vec<usize> },

    #[error("distributed iteration failed at t={t}, agent {agent}: {message}")]
    Iteration {
        t: usize,
        agent: usize,
        message: String,
    },

    #[error("oracle refused: {nvars} variables exceed the enumeration cap {cap}")]
    OracleCap { nvars: usize, cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
