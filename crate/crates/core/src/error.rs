use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A physical formula was evaluated outside its domain (negative radicand,
    /// arcsin argument above one, and so on).
    #[error("outside physical domain: {0}")]
    Domain(String),

    #[error("wavelength {wavelength_nm} nm outside the index model validity window [{min_nm}, {max_nm}] nm")]
    OutsideValidity {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("grid too coarse: spacing {spacing:.3e} um^-1 exceeds {limit:.3e} um^-1 (a quarter of the narrowest width)")]
    GridTooCoarse { spacing: f64, limit: f64 },

    #[error("grid does not cover the required range [{need_min:.4e}, {need_max:.4e}] um^-1")]
    GridCoverage { need_min: f64, need_max: f64 },

    #[error("kernel is not normalized (sum |F|^2 dk dk = {0:.12})")]
    NotNormalized(f64),

    #[error("kernel has no energy (all amplitudes zero)")]
    ZeroEnergy,

    #[error("pump spectrum is complex valued (max |Im|/|Re| = {0:.3e}); only real kernels are supported")]
    ComplexKernel(f64),

    #[error("spectrum has more than one peak above half maximum; use a windowed analysis")]
    MultiPeak,

    #[error("spectrum has no interior half-maximum crossing")]
    NoCrossing,

    #[error("first diffraction order aliased: grating period {period_px} px < 3")]
    Aliased { period_px: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
