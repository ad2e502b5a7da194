use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("vertex {vertex} is isolated (zero degree)")]
    IsolatedVertex { vertex: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("requested {requested} eigenvectors but only {available} lie above the null space")]
    DimensionTooLarge { requested: usize, available: usize },

    #[error("partition side has zero volume")]
    ZeroVolume,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("curve fit did not converge after {iterations} iterations; residual trace {trace:?}")]
    FitDiverged { iterations: usize, trace: Vec<f64> },

    #[error("non-finite coordinate at epoch {epoch}, step {step}, vertex {vertex}")]
    NonFinite {
        epoch: usize,
        step: usize,
        vertex: usize,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}
