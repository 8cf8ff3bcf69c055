use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no bracket found after {iterations} doublings from lo={lo}")]
    NoBracket { lo: f64, iterations: usize },
    #[error("iteration budget of {iterations} exhausted (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("adaptive quadrature hit {limit} subdivisions (estimate {value:e}, error {error:e})")]
    MaxSubdivisions { limit: usize, value: f64, error: f64 },
    #[error("integrand returned a non-finite value at {at}")]
    NonFiniteEvaluation { at: f64 },
    #[error("Laplace inversion unstable: {coarse:e} vs {fine:e}")]
    UnstableInversion { coarse: f64, fine: f64 },
    #[error("argument outside supported domain: {0}")]
    DomainError(String),
    #[error("resolvent (lambda I - T) is singular at lambda={lambda}")]
    SingularResolvent { lambda: f64 },
    #[error("series did not converge: {0}")]
    SeriesNotConverged(String),
    #[error("root enumeration failed: {0}")]
    RootEnumerationFailed(String),
    #[error("invalid model parameters: {0}")]
    InvalidParameter(String),
    #[error("net profit condition violated: drift {drift} must exceed {required}")]
    NetProfitViolation { drift: f64, required: f64 },
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("hypoexponential rates must be distinct and positive: {0}")]
    DuplicateRates(String),
    #[error("this law is only defined for a start at x = 0, got {x}")]
    InvalidStart { x: f64 },
    #[error("invalid refraction: {0}")]
    InvalidRefraction(String),
    #[error("r = {r} coincides with varphi = {varphi}")]
    PoleAtVarphi { r: f64, varphi: f64 },
    #[error("denominator q - delta*Phi vanishes at q = {q}")]
    DenominatorPole { q: f64 },
    #[error("model not supported by the simulator: {0}")]
    UnsupportedModel(String),
    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),
    #[error("mixture is ill-conditioned: weight mass {weight_mass:e} amplifies rounding beyond tolerance")]
    IllConditionedMixture { weight_mass: f64 },
}

impl Error {
    /// Stable variant name, used in machine-readable error records.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoBracket { .. } => "NoBracket",
            Error::NotConverged { .. } => "NotConverged",
            Error::MaxSubdivisions { .. } => "MaxSubdivisions",
            Error::NonFiniteEvaluation { .. } => "NonFiniteEvaluation",
            Error::UnstableInversion { .. } => "UnstableInversion",
            Error::DomainError(_) => "DomainError",
            Error::SingularResolvent { .. } => "SingularResolvent",
            Error::SeriesNotConverged(_) => "SeriesNotConverged",
            Error::RootEnumerationFailed(_) => "RootEnumerationFailed",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NetProfitViolation { .. } => "NetProfitViolation",
            Error::NumericalInconsistency(_) => "NumericalInconsistency",
            Error::DuplicateRates(_) => "DuplicateRates",
            Error::InvalidStart { .. } => "InvalidStart",
            Error::InvalidRefraction(_) => "InvalidRefraction",
            Error::PoleAtVarphi { .. } => "PoleAtVarphi",
            Error::DenominatorPole { .. } => "DenominatorPole",
            Error::UnsupportedModel(_) => "UnsupportedModel",
            Error::HorizonMismatch(_) => "HorizonMismatch",
            Error::IllConditionedMixture { .. } => "IllConditionedMixture",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
