use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation orders differ: {0} vs {1}")]
    MismatchedOrder(usize, usize),

    #[error("index ({0}, {1}) outside truncation box of order {2}")]
    IndexOutOfRange(usize, usize, usize),

    #[error("exp requires a zero constant term, found {0}")]
    NonzeroConstant(Complex64),

    #[error("log requires constant term 1, found {0}")]
    ConstantNotOne(Complex64),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("conformal map is not injective on the closed unit disk: {0}")]
    NonInjective(String),

    #[error("evaluation point at distance {dist:e} from the support (minimum {min:e})")]
    TooCloseToSupport { dist: f64, min: f64 },

    #[error("evaluation at a pole of the rational form")]
    Pole,

    #[error("cannot normalize eigenvector: last entry has modulus {modulus:e}")]
    CannotNormalize {
        modulus: f64,
        eigenvector: Vec<Complex64>,
    },

    #[error("node polynomial has repeated roots (multiplicities {0:?})")]
    RepeatedRoots(Vec<usize>),

    #[error("inconsistent quadrature data: {0}")]
    InconsistentWeights(String),

    #[error("root finder did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Vec<Complex64>,
    },

    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("delta {delta:e} is not below the admissibility threshold {threshold:e}")]
    DeltaAboveThreshold { delta: f64, threshold: f64 },

    #[error("requested mass {eps} exceeds total volume {total}")]
    MassExceedsVolume { eps: f64, total: f64 },

    #[error("roots are not real: {0}")]
    NonRealRoots(String),

    #[error("roots do not interlace: {0}")]
    NotInterlacing(String),

    #[error("node polynomials differ by {0:e}")]
    NodeMismatch(f64),

    #[error("ill-conditioned null space: {0}")]
    IllConditioned(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
