use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero vector has no projective class")]
    ZeroVector,

    #[error("syntax error at column {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error(
        "inhomogeneous polynomial: term at column {pos} has degree {found}, expected {expected}"
    )]
    Inhomogeneous {
        pos: usize,
        expected: u32,
        found: u32,
    },

    #[error("polynomial has no nonzero terms")]
    EmptyPolynomial,

    #[error("map degree {0} is below 2")]
    DegreeTooLow(u32),

    #[error("map components have unequal degrees {0:?}")]
    UnequalDegrees([u32; 3]),

    #[error("point is within the indeterminacy threshold (|F(z)| = {residual:e})")]
    NearIndeterminacy { residual: f64 },

    #[error("zero set of the components is not finite ({clusters} clusters exceed the Bezout bound {bound})")]
    SuspectedCommonFactor { clusters: usize, bound: usize },

    #[error("empty point sample")]
    EmptySample,

    #[error("point {index} is not on the curve (|P| = {residual:e})")]
    PointOffCurve { index: usize, residual: f64 },

    #[error("degenerate lattice: Im(omega2/omega1) = {0:e}")]
    DegenerateLattice(f64),

    #[error("singular cubic: discriminant {0:e} is numerically zero")]
    SingularCurve(f64),

    #[error("argument is within 1e-8 of a lattice point")]
    NearPole,

    #[error("could not invert the parametrization: {0}")]
    InversionFailure(String),

    #[error("curve is not invariant (max residual {max_residual:e})")]
    NotInvariant { max_residual: f64 },

    #[error("torus multiplier has |a|^2 = {abs_a_sq}, map degree is {degree}")]
    DegreeMismatch { abs_a_sq: f64, degree: u32 },

    #[error("pair offset {0:e} is too small")]
    DegeneratePair(f64),

    #[error("{hits} of {total} samples hit the critical set")]
    TooManyCriticalHits { hits: usize, total: usize },

    #[error("orbit is inconsistent at step {index} (distance {distance:e})")]
    InconsistentOrbit { index: usize, distance: f64 },

    #[error("orbit point {0} is critical")]
    CriticalPointOnOrbit(usize),

    #[error("torus fit residual {0:e} is too large for drift-free orbits")]
    FitResidualTooLarge(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at {pointer}: {msg}")]
    Schema { pointer: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
