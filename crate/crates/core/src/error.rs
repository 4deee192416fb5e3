use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel evaluation outside its domain: {0}")]
    Domain(String),

    #[error("singular step matrix at step {step}")]
    SingularStep { step: usize },

    #[error("resolvent table overflow at step {step} (norm {norm:e})")]
    Overflow { step: usize, norm: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operator is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error(
        "kernel has no derivative information; build it with W^{{1,1}} smoothness \
         (ScalarKernel with a derivative or NonscalarKernel::with_derivative)"
    )]
    MissingDerivative,

    #[error("scalar-type kernel required: {0}")]
    NotScalarType(&'static str),

    #[error("yosida resolvent (I - lambda A) is singular for lambda = {0}")]
    SingularYosida(f64),
}
