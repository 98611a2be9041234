//! Biphoton transverse-wavevector spectra under structured pump beams.
//!
//! Kernels `F(ks, ki)` are built from analytic models or a sampled pump
//! spectrum ([`kernel`]), Schmidt-decomposed ([`schmidt`]), observed through
//! slits ([`detection`]), and the pump itself is synthesized as a phase-only
//! SLM hologram ([`hologram`]).

pub mod detection;
pub mod error;
pub mod field;
pub mod hologram;
pub mod io;
pub mod kernel;
pub mod optics;
pub mod schmidt;
pub mod warning;

pub use detection::{CrosstalkMatrix, DetectionGeometry, ScanKind, ScanSpectrum};
pub use error::{Error, Result};
pub use field::FieldProfile1D;
pub use hologram::{HologramImage, HologramLayout, PumpProfileParams};
pub use kernel::{Branch, JointIntensity, MultiPeakParams, PumpSpectrum, Side, TpaKernel};
pub use optics::{IndexModel, PhaseMatchConfig, PhaseMatching, PumpWidths, Regime, Sellmeier, WavevectorGrid};
pub use schmidt::{schmidt_decompose, ModeMetrics, SchmidtDecomposition, Truncation};
pub use warning::Warning;
