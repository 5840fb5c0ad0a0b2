//! Error taxonomy shared by every module.
//!
//! Three failure families exist: configuration problems (bad input data,
//! violated physical constraints), numerical problems (iteration budgets
//! exhausted, solver breakdown), and I/O problems. Each carries enough
//! context to name the offending constraint, file location, or iteration
//! trace in the message.

use thiserror::Error;

/// Configuration and input-validation failures.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// A physical-parameter constraint was violated; names the constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Config file syntax error with the 1-based line number.
    #[error("config syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    /// A key the parser does not know (strict parsing).
    #[error("unknown config key at line {line}: `{key}`")]
    UnknownKey { line: usize, key: String },

    /// Initial data violate an admissibility constraint.
    #[error("inadmissible initial data: {0}")]
    InadmissibleInitialData(String),

    /// Mesh construction or import failure.
    #[error("mesh error: {0}")]
    Mesh(String),
}

/// Numerical failures from the iterative solvers.
#[derive(Debug, Error)]
pub enum NumericalError {
    /// Conjugate gradients exhausted its budget; carries the last residual.
    #[error("CG did not converge in {maxit} iterations (relative residual {residual:.3e})")]
    CgMaxIter { maxit: usize, residual: f64 },

    /// Alternating minimization in the mechanical step exhausted its budget.
    #[error(
        "mechanical step did not converge in {maxit} outer iterations \
         (last objective {last:.6e}, relative decrease {decrease:.3e}); trace length {trace_len}"
    )]
    MechMaxIter { maxit: usize, last: f64, decrease: f64, trace_len: usize },

    /// Projected gradient in the damage step exhausted its budget.
    #[error(
        "damage step did not converge in {maxit} iterations \
         (projected-gradient norm {pg_norm:.3e}); trace length {trace_len}"
    )]
    DamageMaxIter { maxit: usize, pg_norm: f64, trace_len: usize },

    /// A matrix that must be SPD failed a definiteness check.
    #[error("matrix not positive definite: {0}")]
    NotSpd(String),
}

/// Umbrella error for the crate's public API.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Numerical(#[from] NumericalError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A numerical failure annotated with the time-step index it occurred in.
    #[error("step {k} failed: {source}")]
    AtStep {
        k: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Annotate an error with a time-step index.
    pub fn at_step(k: usize, source: impl Into<Error>) -> Self {
        Error::AtStep { k, source: Box::new(source.into()) }
    }
}
