use thiserror::Error;

/// Errors surfaced by the matrix kernels, the LQ design layer and the
/// identification pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{op}: dimension mismatch ({details})")]
    Dimension { op: &'static str, details: String },

    #[error("{op}: non-finite value encountered at term {index}; if this came from the regression pipeline, retune the normalization gain k1 so the mixed regressor stays within range")]
    NonFinite { op: &'static str, index: usize },

    #[error("{op}: parameter out of range ({details})")]
    Parameter { op: &'static str, details: String },

    #[error("weight matrices must be symmetric positive definite ({details})")]
    Weight { details: String },

    #[error("augmented system is not controllable: det of the plant/output block matrix is zero")]
    NotControllable,

    #[error("matrix-exponential block is numerically singular (condition estimate {cond:.3e}); the eigenvalue spread of the Hamiltonian makes the closed-form solution unusable at this horizon — reduce tau_inf or raise the integral-error weight")]
    AnalyticSingular { cond: f64 },

    #[error("{op}: matrix is singular")]
    Singular { op: &'static str },

    #[error("Riccati integration diverged (norm {norm:.3e})")]
    Instability { norm: f64 },

    #[error("trace error: {details}")]
    Trace { details: String },

    #[error("excitation window is empty or inverted")]
    Window,

    #[error("integration step must be positive, got {dt}")]
    Step { dt: f64 },

    #[error("eigenvalue iteration failed to converge within {iters} sweeps")]
    EigenConvergence { iters: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
