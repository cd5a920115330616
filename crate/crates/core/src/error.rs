//! Error type shared across the crate.

use crate::lattice::TriangleId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain too small: no lattice triangle of spacing {epsilon} fits inside the polygon")]
    EmptyDomain { epsilon: f64 },

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("annulus radii must satisfy 0 <= r < R, got r={r}, big_r={big_r}")]
    BadAnnulus { r: f64, big_r: f64 },

    #[error("annulus does not intersect the domain")]
    EmptyIntersection,

    #[error("triangle {triangle:?} carries nonzero circulation ({circ_norm:.3e}); no single matrix reproduces its bonds")]
    NotCompatible {
        triangle: TriangleId,
        circ_norm: f64,
    },

    #[error("dislocation separation violated: |x{n1} - x{n2}| = {dist:.6e} < {required:.6e}")]
    SeparationViolation {
        n1: usize,
        n2: usize,
        dist: f64,
        required: f64,
    },

    #[error("dislocation {n} too close to the boundary: dist = {dist:.6e} < {required:.6e}")]
    BoundaryMarginViolation { n: usize, dist: f64, required: f64 },

    #[error("construction precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("field is singular at the evaluation point")]
    Singularity,

    #[error("decomposition search bound {bound} too small: cheapest decomposition found ({found:.6e}) is not certified optimal (uncertified below {certified_below:.6e})")]
    BoundTooSmall {
        bound: u32,
        found: f64,
        certified_below: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("minimization did not converge within {max_iter} iterations (grad norm {grad_norm:.3e} > {tol:.3e})")]
    NonConvergence {
        max_iter: usize,
        grad_norm: f64,
        tol: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
