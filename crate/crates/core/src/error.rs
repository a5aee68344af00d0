//! Crate-wide error type.

use crate::solver::RunRecord;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid too small: need nx, ny >= 8, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("grid side lengths must be positive finite reals, got {lx} x {ly}")]
    BadGridExtent { lx: f64, ly: f64 },

    #[error("spectral operations need power-of-two grid sizes, got {nx}x{ny}")]
    NonPowerOfTwoGrid { nx: usize, ny: usize },

    #[error("spectral operations are defined on torus grids only")]
    NotATorus,

    #[error("free-space kernel quadrature is defined on window grids only")]
    NotAWindow,

    #[error("field length {got} does not match grid {nx}x{ny}")]
    LengthMismatch { got: usize, nx: usize, ny: usize },

    #[error("non-finite sample {value} at node ({i}, {j})")]
    NonFiniteSample { i: usize, j: usize, value: f64 },

    #[error("Lp exponent must satisfy p >= 1 (or be infinite), got {p}")]
    InvalidExponent { p: f64 },

    #[error("mollifier too narrow for this grid: need 1/n >= 2*max(hx,hy); max admissible n is {max_n}, got {n}")]
    MollifierTooNarrow { n: u32, max_n: u32 },

    #[error("ball radius must be positive, got {radius}")]
    BadBallRadius { radius: f64 },

    #[error("ball scale 2^-{j_max} too deep for this grid; max admissible j_max is {max_j}")]
    ScaleTooDeep { j_max: u32, max_j: u32 },

    #[error("ball at ({x}, {y}) radius {radius} contains only {nodes} grid nodes (need >= {needed})")]
    BallTooSparse { x: f64, y: f64, radius: f64, nodes: usize, needed: usize },

    #[error("ball family was built for a different grid")]
    FamilyGridMismatch,

    #[error("family has no admissible pairs")]
    NoAdmissiblePairs,

    #[error("field is constant at this resolution")]
    ConstantField,

    #[error("pair budget must be at least {min}, got {got}")]
    PairBudgetTooSmall { got: usize, min: usize },

    #[error("argument must be positive, got {value}")]
    NonpositiveArgument { value: f64 },

    #[error("modulus must satisfy star >= 1, got {star}")]
    StarBelowOne { star: f64 },

    #[error("need at least 2 seed points for a modulus estimate, got {got}")]
    TooFewSeeds { got: usize },

    #[error("CFL violation{}: dt = {dt} exceeds max admissible dt = {max_dt}",
            step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    CflViolation { dt: f64, max_dt: f64, step: Option<usize> },

    #[error("forward/backward flow round trip off by {worst} (tolerance {tol})")]
    InverseMismatch { worst: f64, tol: f64 },

    #[error("flow-map Jacobian determinant off unity by {worst} (tolerance {tol})")]
    JacobianDrift { worst: f64, tol: f64 },

    #[error("vorticity must have zero discrete mean for the torus inversion, got mean {mean}")]
    NonzeroMean { mean: f64 },

    #[error("vorticity support touches the window edge; the free-space quadrature needs compact interior support")]
    SupportTouchesEdge,

    #[error("direct kernel quadrature is limited to grids of at most {max} nodes, got {got}")]
    GridTooLargeForDirect { got: usize, max: usize },

    #[error("velocity frame series needs at least 2 frames, got {got}")]
    TooFewFrames { got: usize },

    #[error("time {t} outside stored frame range [{t0}, {t1}]")]
    TimeOutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("numerical blow-up: non-finite state at step {step}")]
    NumericalBlowup { step: usize, partial: Box<RunRecord> },

    #[error("run length T = {t_final} is not an integer multiple of dt = {dt}")]
    NonIntegerStepCount { t_final: f64, dt: f64 },

    #[error("malformed F2D header: {reason}")]
    BadHeader { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
