use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum End {
    Tip,
    Far,
}

impl std::fmt::Display for End {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            End::Tip => write!(f, "s = 0"),
            End::Far => write!(f, "s = L"),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("s = {s} lies outside [0, {len}]")]
    OutOfDomain { s: f64, len: f64 },
    #[error("closure residual {residual:.3e} at {end} exceeds {tol:.1e}")]
    NotSmoothClosure { end: End, residual: f64, tol: f64 },
    #[error("Kähler residual {residual:.3e} exceeds {tol:.1e}")]
    NotKahler { residual: f64, tol: f64 },
    #[error("lambda = {lambda:.6e} is negative at s = {s}")]
    NegativeLambda { s: f64, lambda: f64 },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("{what} did not converge within {iters} iterations")]
    NonConvergence { what: &'static str, iters: usize },
    #[error("no sign change for {what} on [{lo}, {hi}]")]
    BracketNotFound { what: &'static str, lo: f64, hi: f64 },
    #[error("soliton residual {residual:.3e} exceeds {tol:.1e}")]
    SolitonResidualTooLarge { residual: f64, tol: f64 },
    #[error("time step {dt:.3e} exceeds the stability bound {bound:.3e}")]
    StabilityViolation { dt: f64, bound: f64 },
    #[error("step rejected at t = {t} with h = {h:.3e}")]
    StepRejected { t: f64, h: f64 },
    #[error("closure lost at flow step {step}: residual {residual:.3e}")]
    ClosureLost { step: usize, residual: f64 },
    #[error("min lambda dropped from {from:.6e} to {to:.6e} at flow step {step}")]
    LambdaDecreased { step: usize, from: f64, to: f64 },
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
