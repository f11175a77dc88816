use thiserror::Error;

/// Errors raised by the flow solvers.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type used
/// by the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error in {what}: argument {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("sonic degeneracy at t = {t}: M^2 = {mach2}")]
    SonicDegeneracy { t: f64, mach2: f64 },

    #[error("entrance state is not supersonic: M0^2 = {mach2}")]
    InvalidEntrance { mach2: f64 },

    #[error("upstream state is not supersonic at t_s = {t_s}: M^2 = {mach2}")]
    NotSupersonic { t_s: f64, mach2: f64 },

    #[error("guard '{guard}' fired at t = {t}")]
    GuardFired { guard: String, t: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("downstream solution stops at t = {t_fail} before the exit ({guard})")]
    DownstreamChoked { guard: String, t_fail: f64 },

    #[error("upstream supersonic solution only reaches t = {reach}, shock requested at t_s = {t_s}")]
    UpstreamSonic { reach: f64, t_s: f64 },

    #[error("t = {t} is outside the span [{from}, {to}]")]
    OutOfSpan { t: f64, from: f64, to: f64 },

    #[error("exit pressure {p_ex} outside attainable range [{p_min}, {p_max}]")]
    OutOfRange { p_ex: f64, p_min: f64, p_max: f64 },

    #[error("exit pressure map is not monotone; bisection refused")]
    NonMonotoneMap,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
