use thiserror::Error;

/// Everything that can go wrong while building or integrating a scenario.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate regime: b_k*g_k = 0 at k = {k}, no soliton solution")]
    DegenerateRegime { k: f64 },

    #[error("regime mismatch: requested {requested} soliton but b_k*g_k selects {actual}")]
    RegimeMismatch {
        requested: &'static str,
        actual: &'static str,
    },

    #[error("kind mismatch: expected a {expected} soliton")]
    KindMismatch { expected: &'static str },

    #[error("small-deviation regime violated: amplitude^2 = {amplitude_sq:.4} >= 0.1")]
    LargeAmplitude { amplitude_sq: f64 },

    #[error("domain error: |{what}| = {value} > 1 at index {index}")]
    Domain {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("step size must be positive, got {dt}")]
    StepSize { dt: f64 },

    #[error("blow-up at t = {t}: |alpha| reached {value} at site {site}")]
    BlowUp { t: f64, site: usize, value: f64 },

    #[error("normalization drift {drift:e} exceeds 1e-6 at t = {t}")]
    NormalizationDrift { t: f64, drift: f64 },

    #[error("time {t} outside the drive window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("singular Stueckelberg variable: coupling vanishes at s = {s}")]
    Singular { s: f64 },

    #[error("transit time undefined for a static soliton (v_g = 0)")]
    StaticSoliton,

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for failures raised by the integrators themselves rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. } | Error::NormalizationDrift { .. } | Error::Singular { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
