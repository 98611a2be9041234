//! Units, grids and the phase-matching constants shared by every other module.
//!
//! Internal units are micrometres for lengths and um^-1 for transverse
//! wavevectors. Gaussian widths always follow the `exp(-k^2 / (2 σ^2))`
//! convention.

mod grid;
mod sellmeier;

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{WavevectorGrid, MIN_POINTS};
pub use sellmeier::{refractive_indices, IndexModel, Sellmeier, SellmeierAxis};

/// Gaussian fit constant for `sinc(x^2) ≈ exp(-γ1 x^2)` (collinear regime).
pub const GAMMA1: f64 = 0.249;
/// Gaussian fit constant for `sinc(x) ≈ exp(-γ2 x^2)` (noncollinear regime).
pub const GAMMA2: f64 = 0.195;

/// `2 sqrt(2 ln 2)`, the FWHM of a unit-σ Gaussian.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * LN_2).sqrt()
}

pub fn mm_to_um(mm: f64) -> f64 {
    mm * 1e3
}

pub fn nm_to_um(nm: f64) -> f64 {
    nm * 1e-3
}

/// Angular-spectrum width σ_k (um^-1) of a Gaussian pump whose field FWHM is
/// `fwhm_field` (um). A field `exp(-x^2/(2σ_x^2))` has spectrum
/// `exp(-k^2/(2σ_k^2))` with `σ_k = 1/σ_x`.
pub fn fwhm_to_sigma_k(fwhm_field: f64) -> Result<f64> {
    if !(fwhm_field.is_finite() && fwhm_field > 0.0) {
        return Err(Error::invalid("fwhm", format!("must be positive, got {fwhm_field}")));
    }
    Ok(fwhm_per_sigma() / fwhm_field)
}

/// Inverse of [`fwhm_to_sigma_k`].
pub fn sigma_k_to_fwhm(sigma_k: f64) -> Result<f64> {
    if !(sigma_k.is_finite() && sigma_k > 0.0) {
        return Err(Error::invalid("sigma_k", format!("must be positive, got {sigma_k}")));
    }
    Ok(fwhm_per_sigma() / sigma_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Collinear,
    Noncollinear,
}

/// Crystal and pump constants. Lengths in um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchConfig {
    pub crystal_length: f64,
    pub pump_wavelength: f64,
    pub signal_index: f64,
    pub pump_index: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub regime: Regime,
}

impl PhaseMatchConfig {
    pub fn new(
        crystal_length: f64,
        pump_wavelength: f64,
        signal_index: f64,
        pump_index: f64,
        regime: Regime,
    ) -> Result<Self> {
        let cfg = Self {
            crystal_length,
            pump_wavelength,
            signal_index,
            pump_index,
            gamma1: GAMMA1,
            gamma2: GAMMA2,
            regime,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`PhaseMatchConfig::new`] with the crystal length in mm and the
    /// pump wavelength in nm.
    pub fn from_lab_units(
        crystal_length_mm: f64,
        pump_wavelength_nm: f64,
        signal_index: f64,
        pump_index: f64,
        regime: Regime,
    ) -> Result<Self> {
        Self::new(
            mm_to_um(crystal_length_mm),
            nm_to_um(pump_wavelength_nm),
            signal_index,
            pump_index,
            regime,
        )
    }

    /// Indices taken from an [`IndexModel`] at the degenerate wavelengths.
    pub fn from_index_model(
        crystal_length: f64,
        pump_wavelength: f64,
        model: &IndexModel,
        regime: Regime,
    ) -> Result<Self> {
        let n_s = model.down_converted(2.0 * pump_wavelength)?;
        let n_p = model.pump(pump_wavelength)?;
        Self::new(crystal_length, pump_wavelength, n_s, n_p, regime)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("crystal_length", self.crystal_length)?;
        positive("pump_wavelength", self.pump_wavelength)?;
        positive("signal_index", self.signal_index)?;
        positive("pump_index", self.pump_index)?;
        if self.regime == Regime::Noncollinear && self.signal_index <= self.pump_index {
            return Err(Error::invalid(
                "signal_index",
                format!(
                    "noncollinear regime needs n_s > n_p so that the radicand 2 n_s (n_s - n_p) is positive, got n_s = {}, n_p = {}",
                    self.signal_index, self.pump_index
                ),
            ));
        }
        Ok(())
    }

    /// Pump wavenumber in the crystal, `2π n_p / λ_p`.
    pub fn pump_k(&self) -> f64 {
        2.0 * PI * self.pump_index / self.pump_wavelength
    }

    /// Degenerate signal wavenumber in the crystal, `2π n_s / (2 λ_p)`.
    pub fn signal_k(&self) -> f64 {
        PI * self.signal_index / self.pump_wavelength
    }
}

/// Pump angular width σ_k and phase-matching width σ'_k, both um^-1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpWidths {
    pub sigma_k: f64,
    pub sigma_k_prime: f64,
}

impl PumpWidths {
    pub fn new(sigma_k: f64, sigma_k_prime: f64) -> Result<Self> {
        let w = Self {
            sigma_k,
            sigma_k_prime,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_k", self.sigma_k), ("sigma_k_prime", self.sigma_k_prime)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.sigma_k.max(self.sigma_k_prime)
    }

    pub fn min(&self) -> f64 {
        self.sigma_k.min(self.sigma_k_prime)
    }
}

/// `sqrt(4 k_p / (γ1 L))`.
pub fn collinear_sigma_prime(pump_k: f64, crystal_length: f64, gamma1: f64) -> f64 {
    (4.0 * pump_k / (gamma1 * crystal_length)).sqrt()
}

/// `sqrt(n_s) / (L sqrt((n_s - n_p) γ2))`.
pub fn noncollinear_sigma_prime(
    signal_index: f64,
    pump_index: f64,
    crystal_length: f64,
    gamma2: f64,
) -> Result<f64> {
    let dn = signal_index - pump_index;
    if dn <= 0.0 {
        return Err(Error::Domain(format!(
            "noncollinear sigma' needs n_s > n_p, got n_s - n_p = {dn}"
        )));
    }
    Ok(signal_index.sqrt() / (crystal_length * (dn * gamma2).sqrt()))
}

/// Phase-matching width σ'_k (um^-1) for the configured regime.
pub fn sigma_prime(config: &PhaseMatchConfig) -> Result<f64> {
    config.validate()?;
    match config.regime {
        Regime::Collinear => Ok(collinear_sigma_prime(
            config.pump_k(),
            config.crystal_length,
            config.gamma1,
        )),
        Regime::Noncollinear => noncollinear_sigma_prime(
            config.signal_index,
            config.pump_index,
            config.crystal_length,
            config.gamma2,
        ),
    }
}

/// Noncollinear offset and the internal signal emission angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseK {
    /// Phase-matched value of the difference coordinate `ks - ki` (um^-1).
    pub k: f64,
    /// Internal angle between pump and degenerate signal (rad). The signal
    /// sits at `ks = K/2`, so `sin θ = K / (2 k_s)`.
    pub theta_internal: f64,
}

/// `K = 2π sqrt(2 n_s (n_s - n_p)) / λ_p`.
pub fn transverse_k(config: &PhaseMatchConfig) -> Result<TransverseK> {
    let (n_s, n_p) = (config.signal_index, config.pump_index);
    let radicand = 2.0 * n_s * (n_s - n_p);
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "K radicand 2 n_s (n_s - n_p) = {radicand} is negative"
        )));
    }
    let k = 2.0 * PI * radicand.sqrt() / config.pump_wavelength;
    let sin_theta = k / (2.0 * config.signal_k());
    if sin_theta > 1.0 {
        return Err(Error::Domain(format!(
            "K / (2 k_s) = {sin_theta} exceeds one; no real emission angle"
        )));
    }
    Ok(TransverseK {
        k,
        theta_internal: sin_theta.asin(),
    })
}

/// Angle in air after refraction out of a medium of index `n` (Snell).
pub fn external_angle(theta_internal: f64, n: f64) -> Result<f64> {
    let s = n * theta_internal.sin();
    if s.abs() > 1.0 {
        return Err(Error::Domain(format!("total internal reflection (n sin θ = {s})")));
    }
    Ok(s.asin())
}

/// Phase-matched `ks - ki` for a non-degenerate pair, from the paraxial
/// longitudinal mismatch `k_p - sqrt(k_s^2 - q^2/4) - sqrt(k_i^2 - q^2/4)`:
/// `q^2 = 8 (k_s + k_i - k_p) k_s k_i / (k_s + k_i)`.
///
/// Reduces to [`transverse_k`] at degeneracy.
pub fn transverse_k_nondegenerate(signal_k: f64, idler_k: f64, pump_k: f64) -> Result<f64> {
    let mismatch = signal_k + idler_k - pump_k;
    if mismatch < 0.0 {
        return Err(Error::Domain(format!(
            "k_s + k_i - k_p = {mismatch} is negative; no noncollinear solution"
        )));
    }
    Ok((8.0 * mismatch * signal_k * idler_k / (signal_k + idler_k)).sqrt())
}

/// Idler wavelength from energy conservation, `(1/λp - 1/λs)^-1`.
pub fn idler_wavelength(pump_wavelength: f64, signal_wavelength: f64) -> Result<f64> {
    let inv = 1.0 / pump_wavelength - 1.0 / signal_wavelength;
    if inv <= 0.0 {
        return Err(Error::Domain(format!(
            "signal wavelength {signal_wavelength} um does not exceed the pump wavelength {pump_wavelength} um"
        )));
    }
    Ok(1.0 / inv)
}

/// [`transverse_k_nondegenerate`] with wavenumbers from an index model.
pub fn transverse_k_at(model: &IndexModel, pump_wavelength: f64, signal_wavelength: f64) -> Result<f64> {
    let idler = idler_wavelength(pump_wavelength, signal_wavelength)?;
    let ks = 2.0 * PI * model.down_converted(signal_wavelength)? / signal_wavelength;
    let ki = 2.0 * PI * model.down_converted(idler)? / idler;
    let kp = 2.0 * PI * model.pump(pump_wavelength)? / pump_wavelength;
    transverse_k_nondegenerate(ks, ki, kp)
}

/// Transverse offset and phase-matching width resolved for kernel builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatching {
    pub regime: Regime,
    /// `K` for the noncollinear regime, zero for collinear.
    pub transverse_k: f64,
    pub sigma_prime: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl PhaseMatching {
    pub fn from_config(config: &PhaseMatchConfig) -> Result<Self> {
        let sigma_prime = sigma_prime(config)?;
        let transverse_k = match config.regime {
            Regime::Collinear => 0.0,
            Regime::Noncollinear => transverse_k(config)?.k,
        };
        Ok(Self {
            regime: config.regime,
            transverse_k,
            sigma_prime,
            gamma1: config.gamma1,
            gamma2: config.gamma2,
        })
    }

    pub fn with_sigma_prime(mut self, sigma_prime: f64) -> Self {
        self.sigma_prime = sigma_prime;
        self
    }
}
