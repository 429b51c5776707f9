use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate energy: {0}")]
    DegenerateEnergy(String),
    #[error("degenerate field |B| = {magnitude:e} at X = {point:?}")]
    DegenerateField { magnitude: f64, point: Vec<f64> },
    #[error("singular kernel: {0}")]
    SingularKernel(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("bias response is nonlinear: quadratic/linear = {ratio:e}")]
    BiasNonlinearity { ratio: f64 },
    #[error("quadrature did not converge: {0}")]
    QuadratureError(String),
    #[error("metric degenerates at s = {s} along direction {direction:?}")]
    ZeroMetricSegment { s: f64, direction: Vec<f64> },
    #[error("protocol is not closed (gap {gap:e})")]
    OpenProtocol { gap: f64 },
    #[error("gap closes at X = {point:?}")]
    GapClosure { point: Vec<f64> },
    #[error("horizon too short: running average drift {drift:e}")]
    HorizonTooShort { drift: f64 },
    #[error("invalid bias: T_h = {t_hot}, T_c = {t_cold}")]
    InvalidBias { t_hot: f64, t_cold: f64 },
    #[error("zero entropy swing")]
    ZeroEntropySwing,
    #[error("dissipationless limit: {0}")]
    QuasistaticSingular(String),
    #[error("wrong orientation: A = {area:e} (analyse as a refrigerator)")]
    WrongOrientation { area: f64 },
    #[error("budget exhausted after {evaluations} evaluations (best objective {best_objective:e})")]
    BudgetExhausted {
        evaluations: usize,
        best_objective: f64,
        best_params: Vec<f64>,
    },
    #[error("no feasible member in family: {0}")]
    InfeasibleFamily(String),
    #[error("current vanishes under bias reversal")]
    ZeroCurrent,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable identifier written into run manifests.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DegenerateEnergy(_) => "DegenerateEnergy",
            Error::DegenerateField { .. } => "DegenerateField",
            Error::SingularKernel(_) => "SingularKernel",
            Error::NoConvergence(_) => "NoConvergence",
            Error::BiasNonlinearity { .. } => "BiasNonlinearity",
            Error::QuadratureError(_) => "QuadratureError",
            Error::ZeroMetricSegment { .. } => "ZeroMetricSegment",
            Error::OpenProtocol { .. } => "OpenProtocol",
            Error::GapClosure { .. } => "GapClosure",
            Error::HorizonTooShort { .. } => "HorizonTooShort",
            Error::InvalidBias { .. } => "InvalidBias",
            Error::ZeroEntropySwing => "ZeroEntropySwing",
            Error::QuasistaticSingular(_) => "QuasistaticSingular",
            Error::WrongOrientation { .. } => "WrongOrientation",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::InfeasibleFamily(_) => "InfeasibleFamily",
            Error::ZeroCurrent => "ZeroCurrent",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
