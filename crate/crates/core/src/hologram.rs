//! Structured pump profiles and their phase-only SLM holograms.
//!
//! The target field is written into the first diffraction order of a blazed
//! grating whose local modulation depth `M` encodes the amplitude. In the
//! continuum, the sawtooth `M mod(θ - πM, 2π)` has first Fourier coefficient
//! `sinc(π(M-1)) e^{-iπ}`, which gives the usual `M = 1 + sinc^-1(A)/π`. On a
//! grating only `p` pixels long the sampled sawtooth deviates from this by a
//! few percent in modulus and up to ~0.3 rad in phase, so `M` is solved
//! against the sampled coefficient instead and the residual phase is
//! subtracted. The target phase is added outside the sawtooth, where it
//! shifts the first-order coefficient exactly.
//!
//! The SLM is imaged onto the crystal by a relay with demagnification `D`;
//! pixel `j` sits at crystal coordinate `(j - (W-1)/2) pitch / D`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldProfile1D;
use crate::io::write_atomic;
use crate::optics::fwhm_per_sigma;

/// Spectrum-side description of the pump: `M` peaks `k0` apart in the
/// down-converted far field, envelope width `σ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpProfileParams {
    pub modes: usize,
    pub k0: f64,
    pub sigma_k: f64,
    pub alpha: Option<f64>,
}

impl PumpProfileParams {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::invalid("modes", "need at least one pump peak"));
        }
        if !(self.sigma_k.is_finite() && self.sigma_k > 0.0) {
            return Err(Error::invalid("sigma_k", format!("must be positive, got {}", self.sigma_k)));
        }
        if self.modes > 1 && !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(Error::invalid("k0", format!("must be positive when M > 1, got {}", self.k0)));
        }
        if let Some(alpha) = self.alpha {
            if self.modes != 3 {
                return Err(Error::invalid("alpha", format!("only defined for M = 3, got M = {}", self.modes)));
            }
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
            }
        }
        Ok(())
    }

    /// Crystal-plane modulation period, `π / k0`.
    pub fn modulation_period(&self) -> f64 {
        PI / self.k0
    }

    /// `E(x)` before peak normalization.
    pub fn eval(&self, x: f64) -> f64 {
        let envelope = (-0.5 * (x * self.sigma_k).powi(2)).exp();
        let carrier = match self.alpha {
            Some(alpha) => 0.5 + alpha * (2.0 * self.k0 * x).cos(),
            None => {
                let m_max = (self.modes - 1) as f64;
                (0..self.modes)
                    .map(|m| ((m_max - 2.0 * m as f64) * self.k0 * x).cos())
                    .sum()
            }
        };
        envelope * carrier
    }
}

/// Crystal-plane pump field sampled at `xs` (um), peak amplitude one.
///
/// Equal weights give `env(x) Σ_m cos(2 k(m) x)`; with `α` the field is
/// `env(x) (1/2 + α cos(2 k0 x))`.
pub fn pump_field(params: &PumpProfileParams, xs: &[f64]) -> Result<FieldProfile1D> {
    params.validate()?;
    let need = 4.0 / params.sigma_k;
    let (lo, hi) = (xs.first().copied().unwrap_or(0.0), xs.last().copied().unwrap_or(0.0));
    if lo > -need || hi < need {
        return Err(Error::invalid(
            "x_grid",
            format!("must span ±{need:.1} um (4/σ_k), got [{lo:.1}, {hi:.1}]"),
        ));
    }
    FieldProfile1D::from_real(xs.to_vec(), xs.iter().map(|&x| params.eval(x)))?.peak_normalized()
}

/// Uniform coordinates `[-half, half]` with `n` samples.
pub fn symmetric_axis(half: f64, n: usize) -> Vec<f64> {
    let step = 2.0 * half / (n - 1) as f64;
    (0..n).map(|j| -half + j as f64 * step).collect()
}

/// Amplitude envelope of a uniformly sampled field: spatial frequencies at or
/// above `cutoff` (rad/um) are removed, which strips the carrier cosines.
pub fn lowpass_envelope(field: &FieldProfile1D, cutoff: f64) -> Vec<f64> {
    let n = field.len();
    let dx = (field.coordinates[n - 1] - field.coordinates[0]) / (n - 1) as f64;
    let mut buf = field.samples.clone();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, z) in buf.iter_mut().enumerate() {
        let signed = if b <= n / 2 { b as f64 } else { b as f64 - n as f64 };
        if (2.0 * PI * signed / (n as f64 * dx)).abs() >= cutoff {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm() / n as f64).collect()
}

/// FWHM of a sampled single-peaked profile by linear interpolation.
pub fn profile_fwhm(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let peak = (0..ys.len())
        .reduce(|best, j| if ys[j] > ys[best] { j } else { best })
        .ok_or(Error::NoCrossing)?;
    let half = 0.5 * ys[peak];
    let mut left = peak;
    while left > 0 && ys[left] >= half {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < ys.len() && ys[right] >= half {
        right += 1;
    }
    if ys[left] >= half || ys[right] >= half {
        return Err(Error::NoCrossing);
    }
    let cross = |j0: usize, j1: usize| xs[j0] + (half - ys[j0]) / (ys[j1] - ys[j0]) * (xs[j1] - xs[j0]);
    Ok(cross(right - 1, right) - cross(left, left + 1))
}

/// Envelope FWHM expected for an envelope width `σ_k`.
pub fn envelope_fwhm_for(sigma_k: f64) -> f64 {
    fwhm_per_sigma() / sigma_k
}

/// SLM raster and the relay that images it onto the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HologramLayout {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_pitch_um: f64,
    pub grating_period_px: usize,
    pub demagnification: f64,
}

impl Default for HologramLayout {
    fn default() -> Self {
        Self {
            width_px: 1920,
            height_px: 1080,
            pixel_pitch_um: 8.0,
            grating_period_px: 6,
            demagnification: 16.0,
        }
    }
}

impl HologramLayout {
    pub fn validate(&self) -> Result<()> {
        if self.width_px < 16 || self.height_px == 0 {
            return Err(Error::invalid("hologram", "raster must be at least 16 px wide and 1 px high"));
        }
        if self.grating_period_px < 2 {
            return Err(Error::invalid("hologram.grating_period_px", "must be at least 2"));
        }
        if !(self.pixel_pitch_um > 0.0 && self.demagnification > 0.0) {
            return Err(Error::invalid("hologram", "pixel pitch and demagnification must be positive"));
        }
        Ok(())
    }

    /// Crystal-plane coordinate (um) of each pixel column.
    pub fn crystal_coordinates(&self) -> Vec<f64> {
        let c = (self.width_px - 1) as f64 / 2.0;
        (0..self.width_px)
            .map(|j| (j as f64 - c) * self.pixel_pitch_um / self.demagnification)
            .collect()
    }

    /// SLM-plane coordinate (um) of each pixel column.
    pub fn slm_coordinates(&self) -> Vec<f64> {
        let c = (self.width_px - 1) as f64 / 2.0;
        (0..self.width_px).map(|j| (j as f64 - c) * self.pixel_pitch_um).collect()
    }

    /// Collimated Gaussian beam on the SLM with intensity FWHM `fwhm_um`,
    /// or a flat beam when `None`.
    pub fn input_beam(&self, fwhm_um: Option<f64>) -> Result<FieldProfile1D> {
        let xs = self.slm_coordinates();
        let amp: Vec<f64> = match fwhm_um {
            None => vec![1.0; xs.len()],
            Some(w) => {
                if !(w > 0.0) {
                    return Err(Error::invalid("hologram.input_beam_fwhm_um", "must be positive"));
                }
                // intensity FWHM w: amplitude exp(-2 ln2 x^2 / w^2)
                xs.iter().map(|x| (-2.0 * std::f64::consts::LN_2 * x * x / (w * w)).exp()).collect()
            }
        };
        FieldProfile1D::from_real(xs, amp)
    }
}

/// Quantized phase raster, row-major, level `q` meaning phase `2π q/256`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HologramImage {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<u8>,
}

impl HologramImage {
    pub fn row(&self, r: usize) -> &[u8] {
        &self.levels[r * self.width..(r + 1) * self.width]
    }

    pub fn phase(&self, r: usize) -> Vec<f64> {
        self.row(r).iter().map(|&q| level_to_phase(q)).collect()
    }
}

pub fn phase_to_level(phase: f64) -> u8 {
    ((phase * 256.0 / (2.0 * PI)).round() as i64).rem_euclid(256) as u8
}

pub fn level_to_phase(level: u8) -> f64 {
    level as f64 * 2.0 * PI / 256.0
}

/// `x` in `[-π, 0]` with `sin(x)/x = a`, for `0 <= a <= 1`.
pub fn inverse_sinc(a: f64) -> f64 {
    if a >= 1.0 {
        return 0.0;
    }
    if a <= 0.0 {
        return -PI;
    }
    let (mut lo, mut hi) = (-PI, 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let s = if mid == 0.0 { 1.0 } else { mid.sin() / mid };
        // sinc increases on [-π, 0]
        if s < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First Fourier coefficient of the `p`-pixel sawtooth
/// `M (mod(2πj/p + s, 2π) - π)`.
///
/// Its modulus depends on `M` only: moving `s` inside one pixel cell rotates
/// the coefficient, and moving it by a whole cell relabels the pixels.
pub fn sampled_first_order(depth: f64, shift: f64, period_px: usize) -> Complex64 {
    let p = period_px as f64;
    (0..period_px)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / p;
            Complex64::from_polar(1.0, depth * ((theta + shift).rem_euclid(2.0 * PI) - PI) - theta)
        })
        .sum::<Complex64>()
        / p
}

/// Depth `M` with `|c1(M)| = a` on a `p`-pixel grating; `|c1|` rises
/// monotonically from 0 to 1 over `M ∈ [0, 1]`.
pub fn calibrated_depth(a: f64, period_px: usize) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    if a >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sampled_first_order(mid, 0.0, period_px).norm() < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Depth, grating shift and leftover piston phase for one pixel with target
/// `a e^{iφ}`. The target phase moves the sawtooth (`s = φ + π`), so the zero
/// order never sees it; the piston only absorbs the pixel-sampling error,
/// which is identical for `φ` and `φ + π` on even periods.
pub fn pixel_encoding(a: f64, phi: f64, period_px: usize) -> (f64, f64, f64) {
    let depth = calibrated_depth(a, period_px);
    if depth == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let shift = (phi + PI).rem_euclid(2.0 * PI);
    let c = sampled_first_order(depth, shift, period_px);
    let piston = (Complex64::from_polar(1.0, phi) / c).arg();
    (depth, shift, piston)
}

/// Unquantized hologram phase for one row.
pub fn encode_phase(target: &FieldProfile1D, layout: &HologramLayout) -> Result<Vec<f64>> {
    layout.validate()?;
    let period = layout.grating_period_px;
    let p = period as f64;
    layout
        .crystal_coordinates()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let t = target.interpolate(x);
            let a = t.norm();
            if a > 1.0 + 1e-12 {
                return Err(Error::invalid("target", format!("amplitude {a} exceeds one after normalization")));
            }
            let (depth, shift, piston) = pixel_encoding(a, t.arg(), period);
            let carrier = 2.0 * PI * (j % period) as f64 / p;
            Ok((depth * ((carrier + shift).rem_euclid(2.0 * PI) - PI) + piston).rem_euclid(2.0 * PI))
        })
        .collect()
}

/// 8-bit hologram of `target`, extruded along the rows.
pub fn encode_hologram(target: &FieldProfile1D, layout: &HologramLayout) -> Result<HologramImage> {
    let row: Vec<u8> = encode_phase(target, layout)?.into_iter().map(phase_to_level).collect();
    let levels = row.iter().copied().cycle().take(row.len() * layout.height_px).collect();
    Ok(HologramImage {
        width: layout.width_px,
        height: layout.height_px,
        levels,
    })
}

/// Field carried by diffraction order `order` of a phase row lit by `input`:
/// far-field window of half-width `W/(2p)` bins around bin `order·W/p`,
/// shifted back to baseband. Returned on the crystal coordinates.
pub fn simulate_order(
    phase: &[f64],
    input: &FieldProfile1D,
    layout: &HologramLayout,
    order: i64,
) -> Result<FieldProfile1D> {
    layout.validate()?;
    if layout.grating_period_px < 3 {
        return Err(Error::Aliased {
            period_px: layout.grating_period_px,
        });
    }
    let n = layout.width_px;
    if phase.len() != n || input.len() != n {
        return Err(Error::invalid("input_beam", format!("need {n} samples, one per pixel column")));
    }
    let mut buf: Vec<Complex64> = input
        .samples
        .iter()
        .zip(phase)
        .map(|(e, &ph)| e * Complex64::from_polar(1.0, ph))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let period = layout.grating_period_px as f64;
    let centre = (order as f64 * n as f64 / period).round() as i64;
    let half = n as f64 / (2.0 * period);
    let mut shifted = vec![Complex64::new(0.0, 0.0); n];
    for (b, z) in buf.iter().enumerate() {
        let signed = if b <= n / 2 { b as i64 } else { b as i64 - n as i64 };
        if ((signed - centre) as f64).abs() < half {
            shifted[(signed - centre).rem_euclid(n as i64) as usize] = *z;
        }
    }
    planner.plan_fft_inverse(n).process(&mut shifted);
    let scale = 1.0 / n as f64;
    FieldProfile1D::new(layout.crystal_coordinates(), shifted.into_iter().map(|z| z * scale).collect())
}

/// First-order field at the crystal for row 0 of `holo`.
pub fn simulate_first_order(holo: &HologramImage, input: &FieldProfile1D, layout: &HologramLayout) -> Result<FieldProfile1D> {
    if holo.width != layout.width_px {
        return Err(Error::invalid("hologram", "image width does not match layout"));
    }
    simulate_order(&holo.phase(0), input, layout, 1)
}

/// Binary graymap, `P5`, maxval 255.
pub fn pgm_bytes(holo: &HologramImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", holo.width, holo.height).into_bytes();
    out.extend_from_slice(&holo.levels);
    out
}

pub fn export_pgm(holo: &HologramImage, path: &Path) -> Result<()> {
    write_atomic(path, &pgm_bytes(holo))
}

pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<HologramImage> {
    let bad = |m: &str| Error::Format {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap (P5)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let payload = &bytes[pos + 1..];
    if payload.len() != width * height {
        return Err(bad("payload size does not match header"));
    }
    Ok(HologramImage {
        width,
        height,
        levels: payload.to_vec(),
    })
}

pub fn import_pgm(path: &Path) -> Result<HologramImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_pgm(&bytes, path)
}
