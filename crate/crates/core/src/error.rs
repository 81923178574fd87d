use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("axis {axis} out of range for {n_dim} spatial dimensions")]
    AxisOutOfRange { axis: usize, n_dim: usize },

    #[error("dimension {n} is below the minimum {min}")]
    DimensionTooSmall { n: usize, min: usize },

    #[error("metric is singular at the sample point")]
    SingularMetric,

    #[error("finite-difference step {0:e} underflows the coordinate scale")]
    StepUnderflow(f64),

    #[error("pole: {0}")]
    Pole(&'static str),

    #[error("scale function blows up (Big-Rip) at z0 = {at}")]
    BigRip { at: Complex64 },

    #[error("power base crosses the principal branch cut at z0 = {at}")]
    BranchCut { at: Complex64 },

    #[error("scale function vanishes")]
    ScaleVanishes,

    #[error("weight function vanishes")]
    WeightVanishes,

    #[error("cos branch leaves its positivity window at t = {t}")]
    OutsidePositivityWindow { t: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("inconsistent overrides: {0}")]
    InconsistentOverrides(String),

    #[error("ill-posed request: {0}")]
    IllPosed(String),

    #[error("non-finite value in the field at t = {t}")]
    NonFinite { t: f64 },

    #[error("instability at t = {t}: grid maximum grew by a factor {growth:e}")]
    Instability { t: f64, growth: f64 },

    #[error("arg a(t) drifted by {drift:e} at t = {t}; the phase must stay constant")]
    ThetaDrift { t: f64, drift: f64 },

    #[error("lemma hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("superluminal breakdown (J <= 0) at x0 = {t}")]
    Superluminal { t: f64 },

    #[error("square-root sheet jump at x0 = {t}")]
    SheetJump { t: f64 },

    #[error("trajectory left the coordinate ray (imaginary velocity {residual:e})")]
    OffRay { residual: f64 },

    #[error("normalization drift {drift:e} exceeds the guard")]
    NormalizationViolation { drift: f64 },

    #[error("dt = {dt:e} does not resolve the carrier period (need dt <= {bound:e})")]
    CarrierUnderresolved { dt: f64, bound: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
