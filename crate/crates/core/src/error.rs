use thiserror::Error;

pub type Result<T, E = KpoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KpoError {
    #[error("truncation must keep at least 2 Fock states, got {0}")]
    InvalidTruncation(usize),

    #[error("Fock index {index} out of range for truncation {n_trunc}")]
    IndexOutOfRange { index: usize, n_trunc: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operator is not Hermitian: max |H - H†| = {defect:e} (allowed {allowed:e})")]
    NotHermitian { defect: f64, allowed: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("degeneracy partner must be an even Fock index >= 2, got {0}")]
    InvalidPartner(usize),

    #[error("no closed-form Rabi frequency for partner |{0}>; supported: 2, 4, 6")]
    UnsupportedPartner(usize),

    #[error("the same eigenvector (index {index}) best matches both |0>+|{n}> and |0>-|{n}>")]
    AmbiguousMatch { n: usize, index: usize },

    #[error("scaling fit needs at least {required} points, got {found}")]
    InsufficientPoints { required: usize, found: usize },

    #[error("integrator step size underflow at t = {time} us")]
    StepSizeFailure { time: f64 },

    #[error("integrator exceeded {max_steps} steps at t = {time} us")]
    TooManySteps { max_steps: usize, time: f64 },

    #[error("steady state requires kappa_e + kappa_i > 0")]
    ZeroDissipation,

    #[error("Liouvillian null space has dimension {found}, expected 1")]
    NullSpaceDimension { found: usize },

    #[error("steady-state residual {residual:e} exceeds {allowed:e}")]
    SteadyStateResidual { residual: f64, allowed: f64 },

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("omega_r is required for output power conversion")]
    MissingOmegaR,

    #[error("sweep point (delta/2pi = {delta_mhz} MHz, p/2pi = {p_mhz} MHz) failed: {source}")]
    SweepPoint {
        delta_mhz: f64,
        p_mhz: f64,
        #[source]
        source: Box<KpoError>,
    },

    #[error("malformed data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KpoError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KpoError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
