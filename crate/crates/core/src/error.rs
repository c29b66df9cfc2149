use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative water depth {0}")]
    NegativeDepth(f64),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("time step {tau:e} violates the CFL bound {tau_max:e}")]
    Cfl { tau: f64, tau_max: f64 },

    #[error("unknown time-stepping scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("solver aborted at cycle {cycle}, t = {time}: {reason} (worst node {node})")]
    Solver { cycle: usize, time: f64, node: usize, reason: String },

    #[error("low-order state at node {node} violates its own velocity bound (psi = {psi:e})")]
    LimiterBound { node: usize, psi: f64 },

    #[error("Riemann oracle did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
