//! Dispersion models for uniaxial crystals.
//!
//! Coefficients are external reference data supplied through configuration.
//! Each principal index follows
//!
//! ```text
//! n^2(λ) = a + Σ_j b_j / (λ^2 - c_j) - d·λ^2        (λ in um)
//! ```
//!
//! and the extraordinary index at angle θ to the optic axis combines the
//! principal values as `1/n_e(θ)^2 = cos^2θ/n_o^2 + sin^2θ/n_e^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierAxis {
    pub a: f64,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub d: f64,
}

impl SellmeierAxis {
    pub fn index(&self, wavelength_um: f64) -> Result<f64> {
        if self.b.len() != self.c.len() {
            return Err(Error::invalid(
                "sellmeier",
                format!("{} b terms but {} c terms", self.b.len(), self.c.len()),
            ));
        }
        let l2 = wavelength_um * wavelength_um;
        let n2 = self.a
            + self
                .b
                .iter()
                .zip(&self.c)
                .map(|(b, c)| b / (l2 - c))
                .sum::<f64>()
            - self.d * l2;
        if !(n2.is_finite() && n2 > 1.0) {
            return Err(Error::Domain(format!(
                "Sellmeier n^2 = {n2} at {wavelength_um} um"
            )));
        }
        Ok(n2.sqrt())
    }
}

/// Principal-axis coefficients plus the wavelength window they are valid in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sellmeier {
    pub ordinary: SellmeierAxis,
    pub extraordinary: SellmeierAxis,
    pub valid_min_nm: f64,
    pub valid_max_nm: f64,
}

impl Sellmeier {
    /// Coefficients for beta-barium borate widely quoted in the nonlinear-optics
    /// literature (valid roughly 220-1060 nm). Reference data, not a measurement
    /// of any particular crystal.
    pub fn bbo() -> Self {
        Self {
            ordinary: SellmeierAxis {
                a: 2.7359,
                b: vec![0.01878],
                c: vec![0.01822],
                d: 0.01354,
            },
            extraordinary: SellmeierAxis {
                a: 2.3753,
                b: vec![0.01224],
                c: vec![0.01667],
                d: 0.01516,
            },
            valid_min_nm: 220.0,
            valid_max_nm: 1060.0,
        }
    }

    pub fn check_window(&self, wavelength_nm: f64) -> Result<()> {
        if wavelength_nm < self.valid_min_nm || wavelength_nm > self.valid_max_nm {
            return Err(Error::OutsideValidity {
                wavelength_nm,
                min_nm: self.valid_min_nm,
                max_nm: self.valid_max_nm,
            });
        }
        Ok(())
    }
}

/// Ordinary index and angle-tuned extraordinary index at `wavelength_nm`,
/// `angle` (radians) measured from the optic axis.
pub fn refractive_indices(coeffs: &Sellmeier, wavelength_nm: f64, angle: f64) -> Result<(f64, f64)> {
    coeffs.check_window(wavelength_nm)?;
    let l = wavelength_nm * 1e-3;
    let n_o = coeffs.ordinary.index(l)?;
    let n_e = coeffs.extraordinary.index(l)?;
    let (s, c) = angle.sin_cos();
    let inv2 = c * c / (n_o * n_o) + s * s / (n_e * n_e);
    Ok((n_o, 1.0 / inv2.sqrt()))
}

/// Where the signal, idler and pump refractive indices come from.
///
/// The Sellmeier variant assumes type-I (ooe) phase matching in a negative
/// uniaxial crystal: signal and idler ordinary, pump extraordinary at the cut
/// angle.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexModel {
    Constant { signal: f64, pump: f64 },
    Sellmeier { coeffs: Sellmeier, cut_angle: f64 },
}

impl IndexModel {
    /// Index seen by a down-converted photon at `wavelength_um`.
    pub fn down_converted(&self, wavelength_um: f64) -> Result<f64> {
        match self {
            IndexModel::Constant { signal, .. } => Ok(*signal),
            IndexModel::Sellmeier { coeffs, .. } => {
                Ok(refractive_indices(coeffs, wavelength_um * 1e3, 0.0)?.0)
            }
        }
    }

    pub fn pump(&self, wavelength_um: f64) -> Result<f64> {
        match self {
            IndexModel::Constant { pump, .. } => Ok(*pump),
            IndexModel::Sellmeier { coeffs, cut_angle } => {
                Ok(refractive_indices(coeffs, wavelength_um * 1e3, *cut_angle)?.1)
            }
        }
    }

    /// Window the model may be evaluated in, if it has one.
    pub fn validity_nm(&self) -> Option<(f64, f64)> {
        match self {
            IndexModel::Constant { .. } => None,
            IndexModel::Sellmeier { coeffs, .. } => Some((coeffs.valid_min_nm, coeffs.valid_max_nm)),
        }
    }
}
