//! Error type shared across problem construction, geometry, schedules,
//! solvers, and certificates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Block structure does not partition the component indices.
    #[error("invalid partition: {0}")]
    Partition(String),

    /// Problem data breaks convex-concavity of the coupled objective,
    /// e.g. a nonlinear component paired with a dual domain that allows
    /// negative weights, or a regularizer mismatched with its geometry.
    #[error("convexity violation: {0}")]
    Convexity(String),

    /// A point lies outside the domain it is evaluated on.
    #[error("point outside domain: {0}")]
    Domain(String),

    /// A smoothness constant is needed but no dual bound is available to
    /// convert it into a block constant.
    #[error("component {index} has curvature {smoothness} but no dual bound; block constants would be infinite")]
    MissingDualBound { index: usize, smoothness: f64 },

    /// The requested (regularizer, geometry) pair has no closed-form
    /// prox step.
    #[error("prox unsupported: {0}")]
    ProxUnsupported(String),

    /// Every block constant is zero, so no sampling distribution or step
    /// size can be derived.
    #[error("degenerate constants: all block bounds are zero")]
    DegenerateConstants,

    /// A sampled point violated one of the declared block bounds.
    #[error("block bound check failed: {0}")]
    BoundCheck(String),

    /// A schedule failed its certificate where a passing one was required.
    #[error("schedule certificate failed: {0}")]
    ScheduleCertificate(String),

    /// The block-coordinate dual solver needs a blockwise-separable dual
    /// regularizer and a product dual domain.
    #[error("dual side is not separable: {0}")]
    Separability(String),

    /// The best-response subproblem has no finite optimum.
    #[error("best-response gap is unbounded: {0}")]
    UnboundedGap(String),

    /// The reference-solution solve did not reach its target accuracy.
    #[error("reference solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    /// Malformed input while parsing a problem file or dataset.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Configuration value outside its documented range.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
