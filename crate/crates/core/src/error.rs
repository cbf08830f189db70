use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distribution has zero mass")]
    ZeroMass,
    #[error("zero mass at generation {step}")]
    ZeroMassAtStep { step: usize },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("distributions live on different grids")]
    GridMismatch,
    #[error("support violation at grid index {index}: p > 0 where q = 0")]
    SupportViolation { index: usize },
    #[error("exponential moment overflows at x = {x}")]
    Overflow { x: f64 },
    #[error("alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("eta = {eta} outside ({lo}, 1)")]
    EtaOutOfRange { eta: f64, lo: f64 },
    #[error("lower variance seed {seed} outside (0, {hi})")]
    InvalidLowerSeed { seed: f64, hi: f64 },
    #[error("the root has no child")]
    RootHasNoChild,
    #[error("a leaf has no parents")]
    LeafHasNoParents,
    #[error("tree height mismatch: expected {expected}, got {got}")]
    HeightMismatch { expected: usize, got: usize },
    #[error("address {0} is not a leaf")]
    NotALeaf(String),
    #[error("degenerate pair covariance a = {a}, b = {b}")]
    DegenerateCovariance { a: f64, b: f64 },
    #[error("every sample has zero density at some leaf")]
    ZeroDensityAtLeaf,
    #[error("tree too large: {scalars} scalars exceeds budget {budget}")]
    TreeTooLarge { scalars: f64, budget: f64 },
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("error sequence has a non-positive entry at n = {n}")]
    NonPositiveError { n: usize },
    #[error("need 0 < eps < h, got eps = {eps}, h = {h}")]
    InvalidGeometry { eps: f64, h: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
