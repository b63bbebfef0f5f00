use thiserror::Error;

pub type Result<T> = std::result::Result<T, LeapError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeapError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("probabilities sum to {sum}, expected 1 within {tol:e}")]
    NotAProbability { sum: f64, tol: f64 },
    #[error("negative entry {value} at {side}[{index}]")]
    NegativeEntry { side: char, index: usize, value: f64 },
    #[error("monotone drift: sum(p) and sum(q) must both be positive")]
    MonotoneDrift,
    #[error("hold probability {0} must lie in [0, 1)")]
    HoldTooLarge(f64),
    #[error("barrier too narrow: N = {n} but k_p + k_q = {min}")]
    BarrierTooNarrow { n: usize, min: usize },
    #[error("state {state} outside 0..={n}")]
    StateOutOfRange { state: usize, n: usize },
    #[error("root residual {residual:e} exceeds {tol:e}")]
    RootResidualTooLarge { residual: f64, tol: f64 },
    #[error("root location counts {found:?} contradict expected {expected:?} (inside, on, outside)")]
    LocationCountMismatch { found: (usize, usize, usize), expected: (usize, usize, usize) },
    #[error("power sum diverges: |z| = {0} >= 1 over an infinite range")]
    DivergentSum(f64),
    #[error("chain is not irreducible: gcd of step support is {0}")]
    NotIrreducible(u64),
    #[error("drift {0} is not negative")]
    PositiveDrift(f64),
    #[error("no stationary distribution (drift {mu}){}", if *.near_critical { " [near-critical]" } else { "" })]
    NoStationaryDistribution { mu: f64, near_critical: bool },
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error("power iteration did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("dense oracle refused: N = {n} exceeds cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("tolerance check failed: {0}")]
    ToleranceFailure(String),
}

impl LeapError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> u8 {
        use LeapError::*;
        match self {
            InvalidInput(_)
            | NotAProbability { .. }
            | NegativeEntry { .. }
            | MonotoneDrift
            | HoldTooLarge(_)
            | BarrierTooNarrow { .. }
            | StateOutOfRange { .. }
            | NotIrreducible(_)
            | PositiveDrift(_)
            | NoStationaryDistribution { .. }
            | DivergentSum(_)
            | DenseCapExceeded { .. } => 2,
            ToleranceFailure(_) | NoConvergence { .. } => 3,
            RootResidualTooLarge { .. } | LocationCountMismatch { .. } | IllConditioned(_) | SingularSystem => 4,
        }
    }
}
