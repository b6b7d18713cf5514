use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("trace is not 1 (got {trace})")]
    NotUnitTrace { trace: f64 },

    #[error("density matrix is rank deficient (min eigenvalue {min_eigenvalue:.3e} < {eps_rank:.1e})")]
    RankDeficient { min_eigenvalue: f64, eps_rank: f64 },

    #[error("density matrix is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("seed operator vanishes (norm {norm:.3e})")]
    ZeroSeed { norm: f64 },

    #[error("Kraus operators are not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("state derivative is not traceless (|Tr| = {trace:.3e})")]
    NonTracelessDerivative { trace: f64 },

    #[error("Kraus lists differ in length ({kraus} vs {derivatives})")]
    KrausLengthMismatch { kraus: usize, derivatives: usize },

    #[error("Krylov basis lost orthogonality (defect {defect:.3e})")]
    NonConvergedOrthogonality { defect: f64 },

    #[error("tridiagonal matrix is singular at order {order}")]
    SingularTridiagonal { order: usize },

    #[error("Krylov recursion stopped before breakdown; coefficients are not exact")]
    IncompleteKrylov,

    #[error("coefficient vector has zero norm")]
    ZeroVector,

    #[error("tail identity violated at n = {n} (deviation {deviation:.3e})")]
    IdentityViolation { n: usize, deviation: f64 },

    #[error("exact QFI must be positive (got {value})")]
    NonPositiveQfi { value: f64 },

    #[error("spectral weights sum to {total}, expected 1")]
    NormalizationFailure { total: f64 },

    #[error("Hankel matrix is ill-conditioned at order {order} (condition estimate {cond_estimate:.3e})")]
    HankelIllConditioned { order: usize, cond_estimate: f64 },

    #[error("Hankel route limited to order {max}, requested {requested}")]
    HankelOrderTooLarge { requested: usize, max: usize },

    #[error("not enough moments: need {needed}, got {got}")]
    InsufficientMoments { needed: usize, got: usize },

    #[error("quadrature node {node:.3e} too close to zero")]
    NodeAtZero { node: f64 },

    #[error("measure has {atoms} atoms, need at least {needed}")]
    InsufficientAtoms { atoms: usize, needed: usize },

    #[error("hard-edge exponent must exceed -1 (got {alpha})")]
    BadAlpha { alpha: f64 },

    #[error("invalid interval [{lower}, {upper}]")]
    BadInterval { lower: f64, upper: f64 },

    #[error("orthogonal polynomial recursion broke down at level {level}")]
    Breakdown { level: usize },

    #[error("series is not positive at n = {n}")]
    NonPositiveSeries { n: usize },

    #[error("fit window [{lo}, {hi}] is too short or out of range")]
    WindowTooShort { lo: usize, hi: usize },

    #[error("Hilbert dimension {dim} exceeds cap {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Variant name, used by front ends when reporting numeric failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotUnitTrace { .. } => "NotUnitTrace",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NotPositive { .. } => "NotPositive",
            Error::ZeroSeed { .. } => "ZeroSeed",
            Error::NotTracePreserving { .. } => "NotTracePreserving",
            Error::NonTracelessDerivative { .. } => "NonTracelessDerivative",
            Error::KrausLengthMismatch { .. } => "KrausLengthMismatch",
            Error::NonConvergedOrthogonality { .. } => "NonConvergedOrthogonality",
            Error::SingularTridiagonal { .. } => "SingularTridiagonal",
            Error::IncompleteKrylov => "IncompleteKrylov",
            Error::ZeroVector => "ZeroVector",
            Error::IdentityViolation { .. } => "IdentityViolation",
            Error::NonPositiveQfi { .. } => "NonPositiveQfi",
            Error::NormalizationFailure { .. } => "NormalizationFailure",
            Error::HankelIllConditioned { .. } => "HankelIllConditioned",
            Error::HankelOrderTooLarge { .. } => "HankelOrderTooLarge",
            Error::InsufficientMoments { .. } => "InsufficientMoments",
            Error::NodeAtZero { .. } => "NodeAtZero",
            Error::InsufficientAtoms { .. } => "InsufficientAtoms",
            Error::BadAlpha { .. } => "BadAlpha",
            Error::BadInterval { .. } => "BadInterval",
            Error::Breakdown { .. } => "Breakdown",
            Error::NonPositiveSeries { .. } => "NonPositiveSeries",
            Error::WindowTooShort { .. } => "WindowTooShort",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
