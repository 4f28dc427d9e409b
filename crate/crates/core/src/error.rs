use thiserror::Error;

/// Errors surfaced by the library. Numerical gates that a caller can
/// reasonably hit (resonances, missing transitions, step-size limits)
/// get their own variants; everything carries enough context to act on.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "gap-equation branch fault: closed form {closed} vs bisection {bisect} (|diff| = {diff:e})"
    )]
    BranchFault { closed: f64, bisect: f64, diff: f64 },

    #[error("truncation dim {dim} too small for operator degree {degree}")]
    TruncationTooSmall { dim: usize, degree: usize },

    #[error("residual time dependence {0:e} in the reduced constant-coefficient system (phase bookkeeping)")]
    PhaseReduction(f64),

    #[error("singular coefficient system (resonance): condition number {cond:e}")]
    ResonantSingular { cond: f64 },

    #[error("no real-to-complex transition in [{lo}, {hi}] for mode {mode}")]
    NoTransition {
        lo: f64,
        hi: f64,
        mode: &'static str,
        sweep: Box<crate::coeff_flow::StabilityReport>,
    },

    #[error("secular indicator is not monotone across the bisection bracket near alpha = {0}")]
    NonMonotoneIndicator(f64),

    #[error("eigen solve failed: {0}")]
    EigenFailure(String),

    #[error("step size {dt:e} exceeds the fast-phase resolution bound {max:e}")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("coupling beyond the critical value: alpha {alpha} >= alpha_c {alpha_crit}")]
    BeyondCritical { alpha: f64, alpha_crit: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("density matrix not trace-normalized: |tr - 1| = {0:e}")]
    NotNormalized(f64),

    #[error("classical energy drift {drift:e} above bound {bound:e}")]
    EnergyDrift { drift: f64, bound: f64 },

    #[error("{what} = {value:e} violates bound {bound:e}")]
    CheckFailed {
        what: String,
        value: f64,
        bound: f64,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
