use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies within the singular guard of S")]
    SingularPoint { x: f64 },
    #[error("point {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("{y} has no preimage in the domain")]
    NoPreimage { y: f64 },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("singular set is empty, nothing to fit")]
    EmptySingularSet,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("orbit kept hitting the singular set after {retries} restarts")]
    PersistentSingularHit { retries: usize },
    #[error("log|f'| is not finite at {x}")]
    NonFiniteLog { x: f64 },
    #[error("window depth {depth} exceeds the available history {available}")]
    DepthExceedsHistory { depth: usize, available: usize },
    #[error("zero derivative at x_{{-{k}}} = {x}")]
    ZeroDerivative { k: usize, x: f64 },
    #[error("C_eps = {c_eps} is not below e^eps = {bound}")]
    TemperingTooWeak { c_eps: f64, bound: f64 },
    #[error("no dyadic safety factor passed the backward contraction check")]
    NoSafetyFactor,
    #[error("tempering kernel input must be positive, got {value} at index {index}")]
    NonPositiveInput { index: usize, value: f64 },
    #[error("pulled-back point {y} left the branch {branch}")]
    BranchEscape { y: f64, branch: i64 },
    #[error("pool of {pool} points is too small for the requested grid")]
    PoolTooSmall { pool: usize },
    #[error("good-set acceptance {rate:.4} is below 1 - 2 delta = {threshold:.4}")]
    GoodSetTooThin { rate: f64, threshold: f64 },
    #[error("no separated point returned to its cell in the return window")]
    NoReturns,
    #[error("every candidate branch was rejected")]
    AllBranchesRejected,
    #[error("periodic point iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("{words} words exceed the cap {cap} and subsampling is disabled")]
    CapExceeded { words: u128, cap: usize },
    #[error("epsilon {eps} must lie in (0, chi/3) with chi = {chi}")]
    InvalidEpsilon { eps: f64, chi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
