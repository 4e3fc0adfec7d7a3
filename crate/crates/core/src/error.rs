use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("level {level} exceeds maximum depth {max}")]
    Depth { level: u32, max: u32 },

    #[error("box at level {level} is finer than quadrature depth {depth}")]
    Resolution { level: u32, depth: u32 },

    #[error("quadrature would need {cells} cells, above the cap of {cap}")]
    CellCap { cells: usize, cap: usize },

    #[error("weight is not strictly positive; {0}")]
    Domain(String),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("weight has infinite mass: {0}")]
    InfiniteMass(String),

    #[error("bad weight spec `{spec}`: {reason}")]
    WeightSpec { spec: String, reason: String },

    #[error("grid file: {0}")]
    GridFile(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
