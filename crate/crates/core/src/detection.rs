//! Slit-scanned singles and coincidence spectra, spectral widths, the Fedorov
//! ratio, filter-bandwidth averaging and the mode crosstalk matrix.
//!
//! A slit of width `w` behind a lens of focal length `f` accepts a band of
//! transverse wavevectors of width `Δk = (2π/λ) w/f`. The slit is modelled as
//! a unit-height window in wavevector; a zero width samples the density
//! at a point.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{JointIntensity, Side, TpaKernel};
use crate::optics::{idler_wavelength, nm_to_um, transverse_k_at, fwhm_per_sigma, IndexModel, WavevectorGrid};
use crate::schmidt::SchmidtDecomposition;
use crate::warning::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGeometry {
    pub focal_length_mm: f64,
    pub slit_width_signal_mm: f64,
    pub slit_width_idler_mm: f64,
    pub central_wavelength_nm: f64,
    pub filter_fwhm_nm: f64,
}

impl Default for DetectionGeometry {
    fn default() -> Self {
        Self {
            focal_length_mm: 100.0,
            slit_width_signal_mm: 0.2,
            slit_width_idler_mm: 0.4,
            central_wavelength_nm: 810.0,
            filter_fwhm_nm: 10.0,
        }
    }
}

impl DetectionGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("detection.focal_length_mm", self.focal_length_mm),
            ("detection.central_wavelength_nm", self.central_wavelength_nm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("detection.slit_width_signal_mm", self.slit_width_signal_mm),
            ("detection.slit_width_idler_mm", self.slit_width_idler_mm),
            ("detection.filter_fwhm_nm", self.filter_fwhm_nm),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Same geometry with both slits closed to points.
    pub fn narrow(&self) -> Self {
        Self {
            slit_width_signal_mm: 0.0,
            slit_width_idler_mm: 0.0,
            ..*self
        }
    }

    /// Wavevector acceptance (um^-1) of a slit `width_mm` wide.
    pub fn acceptance(&self, width_mm: f64) -> f64 {
        2.0 * PI / nm_to_um(self.central_wavelength_nm) * width_mm / self.focal_length_mm
    }

    pub fn signal_acceptance(&self) -> f64 {
        self.acceptance(self.slit_width_signal_mm)
    }

    pub fn idler_acceptance(&self) -> f64 {
        self.acceptance(self.slit_width_idler_mm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanKind {
    Singles,
    Coincidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpectrum {
    pub positions: Vec<f64>,
    pub rates: Vec<f64>,
    pub kind: ScanKind,
    pub warnings: Vec<Warning>,
}

impl ScanSpectrum {
    pub fn new(positions: Vec<f64>, rates: Vec<f64>, kind: ScanKind) -> Result<Self> {
        if positions.len() != rates.len() {
            return Err(Error::invalid("spectrum", "positions and rates differ in length"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("spectrum", "rates must be finite and non-negative"));
        }
        Ok(Self {
            positions,
            rates,
            kind,
            warnings: Vec::new(),
        })
    }

    pub fn argmax(&self) -> Option<usize> {
        (0..self.rates.len()).reduce(|best, j| if self.rates[j] > self.rates[best] { j } else { best })
    }

    /// Restriction to `lo <= k <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let (positions, rates) = self
            .positions
            .iter()
            .zip(&self.rates)
            .filter(|(k, _)| (lo..=hi).contains(*k))
            .map(|(k, r)| (*k, *r))
            .unzip();
        Self {
            positions,
            rates,
            kind: self.kind,
            warnings: self.warnings.clone(),
        }
    }

    /// Indices of strict local maxima above `min_fraction` of the global maximum.
    pub fn peaks(&self, min_fraction: f64) -> Vec<usize> {
        let r = &self.rates;
        let top = r.iter().cloned().fold(0.0, f64::max);
        (1..r.len().saturating_sub(1))
            .filter(|&j| r[j] > r[j - 1] && r[j] >= r[j + 1] && r[j] >= min_fraction * top)
            .collect()
    }
}

/// Integral of the piecewise-linear interpolant of `values` over `[lo, hi]`,
/// zero outside the grid. A degenerate interval returns the point value.
fn window_integral(grid: &WavevectorGrid, values: &[f64], lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return grid.interpolate(values, lo).unwrap_or(0.0);
    }
    let a = lo.max(grid.k_min);
    let b = hi.min(grid.k_max);
    if b <= a {
        return 0.0;
    }
    let last = grid.n_points - 1;
    let ia = (grid.fractional_index(a).floor().max(0.0) as usize).min(last - 1);
    let ib = (grid.fractional_index(b).ceil() as usize).clamp(1, last);
    let value = |k: f64| grid.interpolate(values, k).unwrap_or(0.0);
    let mut total = 0.0;
    for j in ia..ib {
        let x0 = grid.point(j).max(a);
        let x1 = grid.point(j + 1).min(b);
        if x1 > x0 {
            total += 0.5 * (value(x0) + value(x1)) * (x1 - x0);
        }
    }
    total
}

fn scan_positions(grid: &WavevectorGrid, positions: &[f64]) -> (Vec<f64>, Vec<Warning>) {
    let kept: Vec<f64> = positions.iter().cloned().filter(|k| grid.contains(*k)).collect();
    let dropped = positions.len() - kept.len();
    let warnings = if dropped > 0 { vec![Warning::ScanTruncated { dropped }] } else { Vec::new() };
    (kept, warnings)
}

/// `rate(k0) = ∫ box(k; k0, Δk) I(k) dk` over the marginal of `intensity`.
pub fn singles_scan_intensity(
    intensity: &JointIntensity,
    side: Side,
    acceptance: f64,
    positions: &[f64],
) -> Result<ScanSpectrum> {
    let grid = *intensity.grid(side);
    let marginal = intensity.marginal(side);
    let (kept, warnings) = scan_positions(&grid, positions);
    let half = 0.5 * acceptance;
    let rates = kept
        .par_iter()
        .map(|&k| window_integral(&grid, &marginal, k - half, k + half))
        .collect();
    let mut s = ScanSpectrum::new(kept, rates, ScanKind::Singles)?;
    s.warnings = warnings;
    Ok(s)
}

/// Singles rate in the signal arm at each of `positions`.
pub fn singles_scan(kernel: &TpaKernel, geom: &DetectionGeometry, positions: &[f64]) -> Result<ScanSpectrum> {
    kernel.check_normalized()?;
    geom.validate()?;
    singles_scan_intensity(&kernel.intensity(), Side::Signal, geom.signal_acceptance(), positions)
}

/// `rate(ks0) = ∫∫ box_s(ks; ks0) box_i(ki; idler_center) |F|^2`.
///
/// The idler window is integrated first, row by row; the result is linear in
/// `ks` between grid rows, so the signal window integral is exact for the
/// bilinear interpolant.
pub fn coincidence_scan_intensity(
    intensity: &JointIntensity,
    acceptance_s: f64,
    acceptance_i: f64,
    idler_center: f64,
    positions: &[f64],
) -> Result<ScanSpectrum> {
    let gi = intensity.grid_i;
    let gs = intensity.grid_s;
    if !gi.contains(idler_center) {
        return Err(Error::invalid(
            "idler_center",
            format!("{idler_center} um^-1 lies outside the idler grid [{}, {}]", gi.k_min, gi.k_max),
        ));
    }
    let half_i = 0.5 * acceptance_i;
    let rows: Vec<f64> = (0..gs.n_points)
        .into_par_iter()
        .map(|r| {
            let row: Vec<f64> = intensity.values.row(r).iter().cloned().collect();
            window_integral(&gi, &row, idler_center - half_i, idler_center + half_i)
        })
        .collect();
    let (kept, warnings) = scan_positions(&gs, positions);
    let half_s = 0.5 * acceptance_s;
    let rates = kept
        .par_iter()
        .map(|&k| window_integral(&gs, &rows, k - half_s, k + half_s))
        .collect();
    let mut s = ScanSpectrum::new(kept, rates, ScanKind::Coincidence)?;
    s.warnings = warnings;
    Ok(s)
}

pub fn coincidence_scan(
    kernel: &TpaKernel,
    geom: &DetectionGeometry,
    idler_center: f64,
    positions: &[f64],
) -> Result<ScanSpectrum> {
    kernel.check_normalized()?;
    geom.validate()?;
    coincidence_scan_intensity(
        &kernel.intensity(),
        geom.signal_acceptance(),
        geom.idler_acceptance(),
        idler_center,
        positions,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthMethod {
    #[default]
    HalfMaximum,
    GaussianFit,
}

/// Full width at half maximum of a single-peaked spectrum.
pub fn fwhm_of(spectrum: &ScanSpectrum, method: WidthMethod) -> Result<f64> {
    match method {
        WidthMethod::HalfMaximum => half_maximum_width(&spectrum.positions, &spectrum.rates),
        WidthMethod::GaussianFit => Ok(fit_gaussian(&spectrum.positions, &spectrum.rates)?.fwhm()),
    }
}

fn half_maximum_width(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let peak = (0..ys.len())
        .reduce(|best, j| if ys[j] > ys[best] { j } else { best })
        .ok_or(Error::NoCrossing)?;
    let half = 0.5 * ys[peak];
    if !(half > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let above: Vec<usize> = (0..ys.len()).filter(|&j| ys[j] >= half).collect();
    let (first, last) = (above[0], *above.last().expect("peak is above half"));
    if last - first + 1 != above.len() {
        return Err(Error::MultiPeak);
    }
    if first == 0 || last + 1 == ys.len() {
        return Err(Error::NoCrossing);
    }
    let cross = |j0: usize, j1: usize| xs[j0] + (half - ys[j0]) / (ys[j1] - ys[j0]) * (xs[j1] - xs[j0]);
    Ok(cross(last, last + 1) - cross(first - 1, first))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn fwhm(&self) -> f64 {
        fwhm_per_sigma() * self.sigma
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-(x - self.center).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Least-squares fit of `A exp(-(x-c)^2 / 2σ^2)` by Levenberg-Marquardt,
/// started from the sample moments.
pub fn fit_gaussian(xs: &[f64], ys: &[f64]) -> Result<GaussianFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::invalid("spectrum", "need at least three samples to fit"));
    }
    let total: f64 = ys.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let mean = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / total;
    let var = xs.iter().zip(ys).map(|(x, y)| (x - mean).powi(2) * y).sum::<f64>() / total;
    let top = ys.iter().cloned().fold(0.0, f64::max);
    let mut p = Vector3::new(top, mean, var.sqrt().max(1e-12));

    let residual = |p: &Vector3<f64>| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp() - y).powi(2))
            .sum()
    };
    let mut cost = residual(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (x, y) in xs.iter().zip(ys) {
            let d = x - p[1];
            let e = (-d * d / (2.0 * p[2] * p[2])).exp();
            let r = p[0] * e - y;
            let j = Vector3::new(e, p[0] * e * d / (p[2] * p[2]), p[0] * e * d * d / p[2].powi(3));
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] *= 1.0 + lambda;
        }
        let Some(step) = damped.lu().solve(&-jtr) else { break };
        let trial = p + step;
        let trial_cost = if trial[2] > 0.0 { residual(&trial) } else { f64::INFINITY };
        if trial_cost < cost {
            let done = (cost - trial_cost) <= 1e-15 * cost;
            p = trial;
            cost = trial_cost;
            lambda *= 0.3;
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    Ok(GaussianFit {
        amplitude: p[0],
        center: p[1],
        sigma: p[2].abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FedorovRatio {
    pub ratio: f64,
    pub singles_fwhm: f64,
    pub conditional_fwhm: f64,
    pub idler_center: f64,
}

/// Ratio of the unconditional singles width to the coincidence width with
/// the idler slit at the maximum of the idler singles (ties toward smaller
/// `|k|`).
pub fn fedorov_ratio_intensity(intensity: &JointIntensity, geom: &DetectionGeometry) -> Result<FedorovRatio> {
    geom.validate()?;
    let ps = intensity.grid_s.points();
    let pi = intensity.grid_i.points();
    let singles = singles_scan_intensity(intensity, Side::Signal, geom.signal_acceptance(), &ps)?;
    let idler = singles_scan_intensity(intensity, Side::Idler, geom.idler_acceptance(), &pi)?;
    let top = idler.rates.iter().cloned().fold(0.0, f64::max);
    let idler_center = idler
        .positions
        .iter()
        .zip(&idler.rates)
        .filter(|(_, r)| **r == top)
        .map(|(k, _)| *k)
        .reduce(|a, b| if b.abs() < a.abs() { b } else { a })
        .ok_or(Error::ZeroEnergy)?;
    let conditional = coincidence_scan_intensity(
        intensity,
        geom.signal_acceptance(),
        geom.idler_acceptance(),
        idler_center,
        &ps,
    )?;
    let singles_fwhm = fwhm_of(&singles, WidthMethod::HalfMaximum)?;
    let conditional_fwhm = fwhm_of(&conditional, WidthMethod::HalfMaximum)?;
    Ok(FedorovRatio {
        ratio: singles_fwhm / conditional_fwhm,
        singles_fwhm,
        conditional_fwhm,
        idler_center,
    })
}

pub fn fedorov_ratio(kernel: &TpaKernel, geom: &DetectionGeometry) -> Result<FedorovRatio> {
    kernel.check_normalized()?;
    fedorov_ratio_intensity(&kernel.intensity(), geom)
}

/// Signal wavelengths and normalized Gaussian weights across the filter.
///
/// Samples span `±1.5 FWHM` around the centre. A zero-width filter, or a
/// single sample, gives the centre wavelength alone.
pub fn passband_samples(geom: &DetectionGeometry, n_samples: usize) -> Result<Vec<(f64, f64)>> {
    geom.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("detection.wavelength_samples", "need at least one sample"));
    }
    let c = geom.central_wavelength_nm;
    let fwhm = geom.filter_fwhm_nm;
    if fwhm == 0.0 || n_samples == 1 {
        return Ok(vec![(c, 1.0)]);
    }
    let sigma = fwhm / fwhm_per_sigma();
    let half_span = 1.5 * fwhm;
    let step = 2.0 * half_span / (n_samples - 1) as f64;
    let raw: Vec<(f64, f64)> = (0..n_samples)
        .map(|j| {
            let d = -half_span + j as f64 * step;
            (c + d, (-d * d / (2.0 * sigma * sigma)).exp())
        })
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    Ok(raw.into_iter().map(|(l, w)| (l, w / total)).collect())
}

/// Filter-averaged joint intensity and the samples it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthAverage {
    pub intensity: JointIntensity,
    /// `(signal wavelength nm, weight)`.
    pub samples: Vec<(f64, f64)>,
}

/// Incoherent, weight-averaged `|F|^2` over the filter passband.
///
/// For each signal wavelength the idler wavelength follows from energy
/// conservation and the phase-matched offset `K` from the index model.
/// Detector coordinates are angles expressed as wavevectors at the central
/// wavelength, so a photon at `λ` with true transverse wavevector `k` lands at
/// `k λ/λc`; each kernel is built on correspondingly rescaled grids and its
/// density is transformed back.
///
/// `build(K, grid_s, grid_i)` must return a normalized kernel on the given grids.
pub fn wavelength_average<B>(
    model: &IndexModel,
    pump_wavelength_nm: f64,
    geom: &DetectionGeometry,
    n_samples: usize,
    grid_s: &WavevectorGrid,
    grid_i: &WavevectorGrid,
    build: B,
) -> Result<WavelengthAverage>
where
    B: Fn(f64, &WavevectorGrid, &WavevectorGrid) -> Result<TpaKernel> + Sync,
{
    let samples = passband_samples(geom, n_samples)?;
    let lp = nm_to_um(pump_wavelength_nm);
    let lc = nm_to_um(geom.central_wavelength_nm);
    if let Some((lo, hi)) = model.validity_nm() {
        for &(ls_nm, _) in &samples {
            let li_nm = idler_wavelength(lp, nm_to_um(ls_nm))? * 1e3;
            for nm in [ls_nm, li_nm] {
                if nm < lo || nm > hi {
                    return Err(Error::OutsideValidity {
                        wavelength_nm: nm,
                        min_nm: lo,
                        max_nm: hi,
                    });
                }
            }
        }
    }

    let parts: Vec<DMatrix<f64>> = samples
        .par_iter()
        .map(|&(ls_nm, weight)| {
            let ls = nm_to_um(ls_nm);
            let li = idler_wavelength(lp, ls)?;
            let k = transverse_k_at(model, lp, ls)?;
            let (rs, ri) = (lc / ls, lc / li);
            let kernel = build(k, &grid_s.scaled(rs), &grid_i.scaled(ri))?;
            kernel.check_normalized()?;
            Ok(kernel.amplitude().map(|a| a * a * weight * rs * ri))
        })
        .collect::<Result<_>>()?;

    let mut values = DMatrix::zeros(grid_s.n_points, grid_i.n_points);
    for p in &parts {
        values += p;
    }
    Ok(WavelengthAverage {
        intensity: JointIntensity {
            grid_s: *grid_s,
            grid_i: *grid_i,
            values,
        },
        samples,
    })
}

/// Normalized squared overlaps between mode intensity profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    /// `min(exp(log_values), 1)`; may underflow to zero.
    pub linear: DMatrix<f64>,
    /// Natural log of each entry, exact where `linear` underflows.
    pub log_values: DMatrix<f64>,
}

impl CrosstalkMatrix {
    pub fn size(&self) -> usize {
        self.linear.nrows()
    }

    pub fn log10(&self, m: usize, n: usize) -> f64 {
        self.log_values[(m, n)] / std::f64::consts::LN_10
    }

    fn from_log(log_values: DMatrix<f64>) -> Self {
        let linear = log_values.map(|l| l.exp().min(1.0));
        Self { linear, log_values }
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

fn check_profiles<T>(profiles: &[Vec<T>], grid: &WavevectorGrid) -> Result<()> {
    if profiles.len() < 2 {
        return Err(Error::invalid("modes", "crosstalk needs at least two modes"));
    }
    if profiles.iter().any(|p| p.len() != grid.n_points) {
        return Err(Error::invalid("modes", "profile length does not match grid"));
    }
    Ok(())
}

/// Crosstalk from log-intensity profiles, `X = [∫I_m I_n]^2 / (∫I_m^2 ∫I_n^2)`,
/// evaluated entirely with log-sum-exp.
pub fn crosstalk_from_log(log_profiles: &[Vec<f64>], grid: &WavevectorGrid) -> Result<CrosstalkMatrix> {
    check_profiles(log_profiles, grid)?;
    let ln_h = grid.step().ln();
    let self_terms: Vec<f64> = log_profiles
        .iter()
        .map(|p| log_sum_exp(p.iter().map(|l| 2.0 * l + ln_h)))
        .collect();
    if self_terms.contains(&f64::NEG_INFINITY) {
        return Err(Error::ZeroEnergy);
    }
    let n = log_profiles.len();
    let mut log_values = DMatrix::zeros(n, n);
    for m in 0..n {
        for k in (m + 1)..n {
            let cross = log_sum_exp(log_profiles[m].iter().zip(&log_profiles[k]).map(|(a, b)| a + b + ln_h));
            let v = (2.0 * cross - self_terms[m] - self_terms[k]).min(0.0);
            log_values[(m, k)] = v;
            log_values[(k, m)] = v;
        }
    }
    Ok(CrosstalkMatrix::from_log(log_values))
}

/// Crosstalk of non-negative intensity profiles via the log domain.
pub fn crosstalk_matrix(profiles: &[Vec<f64>], grid: &WavevectorGrid) -> Result<CrosstalkMatrix> {
    check_profiles(profiles, grid)?;
    if profiles.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("modes", "intensities must be finite and non-negative"));
    }
    let logs: Vec<Vec<f64>> = profiles.iter().map(|p| p.iter().map(|v| v.ln()).collect()).collect();
    crosstalk_from_log(&logs, grid)
}

/// Straightforward linear-domain evaluation; underflows for distant modes.
pub fn crosstalk_direct(profiles: &[Vec<f64>], grid: &WavevectorGrid) -> Result<DMatrix<f64>> {
    check_profiles(profiles, grid)?;
    let h = grid.step();
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * h;
    let selfs: Vec<f64> = profiles.iter().map(|p| inner(p, p)).collect();
    if selfs.contains(&0.0) {
        return Err(Error::ZeroEnergy);
    }
    let n = profiles.len();
    Ok(DMatrix::from_fn(n, n, |m, k| {
        if m == k {
            1.0
        } else {
            (inner(&profiles[m], &profiles[k]).powi(2) / (selfs[m] * selfs[k])).min(1.0)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapKind {
    /// Squared overlaps of `|f_m|^2` profiles.
    #[default]
    Intensity,
    /// Squared amplitude overlaps `⟨f_m, f_n⟩^2`; zero for orthogonal modes.
    Amplitude,
}

/// Crosstalk between the signal modes of a decomposition.
pub fn crosstalk_from_decomposition(dec: &SchmidtDecomposition, kind: OverlapKind) -> Result<CrosstalkMatrix> {
    let grid = dec.grid_s;
    match kind {
        OverlapKind::Intensity => {
            let profiles: Vec<Vec<f64>> = dec.signal_modes.iter().map(|f| f.iter().map(|x| x * x).collect()).collect();
            crosstalk_matrix(&profiles, &grid)
        }
        OverlapKind::Amplitude => {
            check_profiles(&dec.signal_modes, &grid)?;
            let g = dec.gram(false);
            let n = g.nrows();
            let log_values = DMatrix::from_fn(n, n, |m, k| {
                if m == k {
                    0.0
                } else {
                    ((g[(m, k)] * g[(m, k)]) / (g[(m, m)] * g[(k, k)])).ln().min(0.0)
                }
            });
            Ok(CrosstalkMatrix::from_log(log_values))
        }
    }
}
