use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("exponential kernel overflow: inner product {value} exceeds cap {cap}")]
    KernelOverflow { value: f64, cap: f64 },

    #[error("expansions use different kernels")]
    KernelMismatch,

    #[error("invalid uncertainty description: {0}")]
    InvalidLaw(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("linear system is singular even with ridge {ridge}")]
    Singular { ridge: f64 },

    #[error("invalid system model: {0}")]
    InvalidSystem(String),

    #[error("state blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("time grids differ")]
    TimeGridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_realization(self, index: usize) -> Self {
        Error::Realization {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
