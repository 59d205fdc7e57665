use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent {0}: must be positive or infinite")]
    InvalidExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("budget exceeded: {requested} points requested, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: u64 },

    #[error("derivative of the weight vanishes at t = {0}")]
    DerivativeZero(f64),

    #[error("index {index} lies beyond the covered range (last covered index {covered})")]
    BeyondRange { index: u64, covered: u64 },

    #[error("no threshold index found within {scanned} runs")]
    NoThreshold { scanned: u64 },

    #[error("tail sum does not converge (block ratio {ratio:.6} >= 1)")]
    TailDiverges { ratio: f64 },

    #[error("tail sum not certified within budget (partial {partial:e}, remainder bound {bound:e})")]
    TailBudget { partial: f64, bound: f64 },

    #[error("numeric overflow in {0}")]
    Overflow(&'static str),

    #[error("n = {n} too small: support radius would be zero")]
    NTooSmall { n: u64 },

    #[error("cannot parse weight spec {spec:?}: {reason}")]
    WeightSpec { spec: String, reason: String },
}
