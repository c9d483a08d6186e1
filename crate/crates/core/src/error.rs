use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {dim} exceeds the supported maximum {max} (chain length cap is {max_sites} sites)")]
    TooLarge { dim: usize, max: usize, max_sites: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site {site} out of range 1..={len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("axis is not a unit vector (norm {norm})")]
    AxisNotNormalized { norm: f64 },

    #[error("axis vector has zero length")]
    ZeroAxis,

    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("invalid field geometry: {0}")]
    InvalidGeometry(String),

    #[error("exchange tensor has leakage entries (max |entry| {max:e}) outside the xx, yy, zz, xy, yx set")]
    LeakageTerms { max: f64 },

    #[error("AFM block coupling vanishes; phase is undefined")]
    VanishingBlockCoupling,

    #[error("vanishing energy denominator {denominator:e} in perturbation sum")]
    VanishingDenominator { denominator: f64 },

    #[error("perturbation theory not applicable: {0}")]
    NotPerturbative(String),

    #[error("no isolated transport doublet: {0}")]
    NoIsolatedDoublet(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable kebab-case identifier for machine-readable error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TooLarge { .. } => "too-large",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::SiteOutOfRange { .. } => "site-out-of-range",
            Error::NotHermitian { .. } => "not-hermitian",
            Error::NoConvergence => "no-convergence",
            Error::NotNormalized { .. } => "not-normalized",
            Error::InvalidDensityMatrix(_) => "invalid-density-matrix",
            Error::AxisNotNormalized { .. } => "axis-not-normalized",
            Error::ZeroAxis => "zero-axis",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::LeakageTerms { .. } => "leakage-terms",
            Error::VanishingBlockCoupling => "vanishing-block-coupling",
            Error::VanishingDenominator { .. } => "vanishing-denominator",
            Error::NotPerturbative(_) => "not-perturbative",
            Error::NoIsolatedDoublet(_) => "no-isolated-doublet",
            Error::InvalidNoise(_) => "invalid-noise",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
