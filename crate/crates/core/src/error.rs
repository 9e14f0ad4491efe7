use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("mesh error near segment ({a:?} -> {b:?}): {reason}")]
    Mesh {
        a: [f64; 2],
        b: [f64; 2],
        reason: String,
    },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("field singularity: {0}")]
    Singularity(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("solver error for harmonic m = {m}: {detail}")]
    Solver { m: usize, detail: String },
    #[error("point ({rho}, {z}) is outside the FEM physical region")]
    Location { rho: f64, z: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
