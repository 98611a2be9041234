//! Discretized two-photon amplitudes `F(ks, ki)` on rectangular wavevector grids.
//!
//! Three builders are provided: the double-Gaussian kernel, the multipeak
//! kernel produced by a pump made of `M` interfering Gaussian beams, and a
//! kernel built from an arbitrary sampled pump angular spectrum
//! `F = v(ks + ki) P(ks - ki)`.
//!
//! Peak-spacing convention: `k0` is the distance between neighbouring peaks of
//! the signal (or idler) far-field distribution. Signal peaks sit at
//! `±K/2 + k(m)` with `k(m) = (M-1-2m) k0 / 2`; the pump angular spectrum is
//! therefore peaked at `2 k(m)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldProfile1D;
use crate::optics::{PhaseMatching, PumpWidths, Regime, WavevectorGrid};
use crate::warning::Warning;

/// Normalization tolerance accepted by consumers of a kernel.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Which side of the SPDC ring a kernel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `ks - ki ≈ +K`: signal at `+K/2`, idler at `-K/2`.
    #[default]
    Positive,
    Negative,
    Both,
}

impl Branch {
    fn signs(self) -> &'static [f64] {
        match self {
            Branch::Positive => &[1.0],
            Branch::Negative => &[-1.0],
            Branch::Both => &[1.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Signal,
    Idler,
}

/// Real two-photon amplitude; rows index the signal grid, columns the idler grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TpaKernel {
    grid_s: WavevectorGrid,
    grid_i: WavevectorGrid,
    amplitude: DMatrix<f64>,
    normalized: bool,
    warnings: Vec<Warning>,
}

impl TpaKernel {
    /// Samples `f` on the grids and normalizes.
    pub fn from_fn(
        grid_s: WavevectorGrid,
        grid_i: WavevectorGrid,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let ks = grid_s.points();
        let ki = grid_i.points();
        let m = DMatrix::from_fn(ks.len(), ki.len(), |r, c| f(ks[r], ki[c]));
        Self::from_matrix(grid_s, grid_i, m)
    }

    /// Wraps `amplitude` and normalizes it so that `ΣΣ |F|^2 Δks Δki = 1`.
    pub fn from_matrix(grid_s: WavevectorGrid, grid_i: WavevectorGrid, amplitude: DMatrix<f64>) -> Result<Self> {
        let mut k = Self::unnormalized(grid_s, grid_i, amplitude)?;
        let norm = k.norm_sq();
        if norm == 0.0 {
            return Err(Error::ZeroEnergy);
        }
        k.amplitude /= norm.sqrt();
        k.normalized = true;
        Ok(k)
    }

    /// Wraps `amplitude` as is.
    pub fn unnormalized(grid_s: WavevectorGrid, grid_i: WavevectorGrid, amplitude: DMatrix<f64>) -> Result<Self> {
        grid_s.validate()?;
        grid_i.validate()?;
        if amplitude.shape() != (grid_s.n_points, grid_i.n_points) {
            return Err(Error::invalid(
                "amplitude",
                format!(
                    "shape {:?} does not match grids ({}, {})",
                    amplitude.shape(),
                    grid_s.n_points,
                    grid_i.n_points
                ),
            ));
        }
        if amplitude.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("amplitude", "non-finite entry"));
        }
        Ok(Self {
            grid_s,
            grid_i,
            amplitude,
            normalized: false,
            warnings: Vec::new(),
        })
    }

    pub fn grid_s(&self) -> &WavevectorGrid {
        &self.grid_s
    }

    pub fn grid_i(&self) -> &WavevectorGrid {
        &self.grid_i
    }

    pub fn amplitude(&self) -> &DMatrix<f64> {
        &self.amplitude
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Whether the builder normalized this kernel.
    pub fn norm_flag(&self) -> bool {
        self.normalized
    }

    /// `ΣΣ |F|^2 Δks Δki`.
    pub fn norm_sq(&self) -> f64 {
        self.amplitude.norm_squared() * self.grid_s.step() * self.grid_i.step()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sq();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }

    pub fn intensity(&self) -> JointIntensity {
        JointIntensity {
            grid_s: self.grid_s,
            grid_i: self.grid_i,
            values: self.amplitude.map(|a| a * a),
        }
    }

    pub fn marginal_intensity(&self, which: Side) -> Vec<f64> {
        self.intensity().marginal(which)
    }

    fn with_warnings(mut self, warnings: Vec<Warning>) -> Self {
        self.warnings.extend(warnings);
        self
    }
}

/// Joint detection density `|F(ks, ki)|^2`, possibly an incoherent mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIntensity {
    pub grid_s: WavevectorGrid,
    pub grid_i: WavevectorGrid,
    pub values: DMatrix<f64>,
}

impl JointIntensity {
    pub fn total(&self) -> f64 {
        self.values.sum() * self.grid_s.step() * self.grid_i.step()
    }

    pub fn grid(&self, side: Side) -> &WavevectorGrid {
        match side {
            Side::Signal => &self.grid_s,
            Side::Idler => &self.grid_i,
        }
    }

    /// `I(ks) = Σ_i |F(ks, ki)|^2 Δki` (or the idler analogue).
    pub fn marginal(&self, which: Side) -> Vec<f64> {
        match which {
            Side::Signal => {
                let h = self.grid_i.step();
                self.values.row_iter().map(|r| r.sum() * h).collect()
            }
            Side::Idler => {
                let h = self.grid_s.step();
                self.values.column_iter().map(|c| c.sum() * h).collect()
            }
        }
    }
}

fn check_resolution(widths: &PumpWidths, grids: [&WavevectorGrid; 2]) -> Result<()> {
    let limit = widths.min() / 4.0;
    for g in grids {
        if g.step() > limit {
            return Err(Error::GridTooCoarse {
                spacing: g.step(),
                limit,
            });
        }
    }
    Ok(())
}

fn check_coverage(grid: &WavevectorGrid, need_min: f64, need_max: f64) -> Result<()> {
    if grid.k_min > need_min || grid.k_max < need_max {
        return Err(Error::GridCoverage { need_min, need_max });
    }
    Ok(())
}

#[inline]
fn gaussian_pair(sum: f64, diff: f64, widths: &PumpWidths) -> f64 {
    let (a, b) = (widths.sigma_k, widths.sigma_k_prime);
    (-(sum * sum) / (2.0 * a * a) - (diff * diff) / (2.0 * b * b)).exp()
}

/// `F = exp(-(ks+ki)^2 / 2σ_k^2) exp(-(ks-ki)^2 / 2σ'_k^2)`, normalized.
pub fn build_double_gaussian(
    widths: &PumpWidths,
    grid_s: &WavevectorGrid,
    grid_i: &WavevectorGrid,
) -> Result<TpaKernel> {
    widths.validate()?;
    check_resolution(widths, [grid_s, grid_i])?;
    let reach = 4.0 * widths.max();
    check_coverage(grid_s, -reach, reach)?;
    check_coverage(grid_i, -reach, reach)?;
    TpaKernel::from_fn(*grid_s, *grid_i, |s, i| gaussian_pair(s + i, s - i, widths))
}

/// Symmetric grid pair around zero, `±span_sigmas · max(σ, σ')`.
pub fn double_gaussian_grids(
    widths: &PumpWidths,
    n_points: usize,
    span_sigmas: f64,
) -> Result<(WavevectorGrid, WavevectorGrid)> {
    let g = WavevectorGrid::centered(0.0, span_sigmas * widths.max(), n_points)?;
    Ok((g, g))
}

/// Parameters of a pump made of `M` Gaussian beams at different angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiPeakParams {
    pub modes: usize,
    /// Spacing of neighbouring far-field signal peaks (um^-1).
    pub k0: f64,
    /// Noncollinear offset `K` of the difference coordinate (um^-1).
    pub transverse_k: f64,
    pub widths: PumpWidths,
    /// Side-peak amplitude imbalance; weights become `α/2, 1/2, α/2` (M = 3).
    pub alpha: Option<f64>,
}

impl MultiPeakParams {
    pub fn validate(&self) -> Result<()> {
        self.widths.validate()?;
        if self.modes == 0 {
            return Err(Error::invalid("modes", "need at least one pump peak"));
        }
        if self.modes > 1 && !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(Error::invalid("k0", format!("must be positive when M > 1, got {}", self.k0)));
        }
        if !(self.transverse_k.is_finite() && self.transverse_k >= 0.0) {
            return Err(Error::invalid("transverse_k", format!("must be >= 0, got {}", self.transverse_k)));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
            }
            if self.modes != 3 {
                return Err(Error::invalid("alpha", format!("only defined for M = 3, got M = {}", self.modes)));
            }
        }
        Ok(())
    }

    /// Far-field signal peak offsets `k(m) = (M-1-2m) k0 / 2` from the branch centre.
    pub fn peak_offsets(&self) -> Vec<f64> {
        if self.modes == 1 {
            return vec![0.0];
        }
        let m_max = (self.modes - 1) as f64;
        (0..self.modes)
            .map(|m| (m_max - 2.0 * m as f64) * self.k0 / 2.0)
            .collect()
    }

    /// Centres of the pump angular-spectrum peaks, `2 k(m)`.
    pub fn pump_centers(&self) -> Vec<f64> {
        self.peak_offsets().iter().map(|k| 2.0 * k).collect()
    }

    /// Amplitude weight of each pump peak.
    pub fn weights(&self) -> Vec<f64> {
        match self.alpha {
            Some(alpha) => vec![alpha / 2.0, 0.5, alpha / 2.0],
            None => vec![1.0; self.modes],
        }
    }

    /// Signal (or idler) peak positions for one branch sign.
    pub fn peak_positions(&self, side: Side, sign: f64) -> Vec<f64> {
        let centre = match side {
            Side::Signal => sign * self.transverse_k / 2.0,
            Side::Idler => -sign * self.transverse_k / 2.0,
        };
        self.peak_offsets().iter().map(|k| centre + k).collect()
    }

    /// Whether neighbouring peaks are closer than four widths.
    pub fn overlap_warning(&self) -> Option<Warning> {
        let limit = 4.0 * self.widths.max();
        (self.modes > 1 && self.k0 <= limit).then_some(Warning::ModesOverlap { k0: self.k0, limit })
    }
}

/// Default grids: `span_sigmas · max(σ, σ')` beyond the outermost peaks.
pub fn multipeak_grids(
    params: &MultiPeakParams,
    branch: Branch,
    n_points: usize,
    span_sigmas: f64,
) -> Result<(WavevectorGrid, WavevectorGrid)> {
    params.validate()?;
    let reach = (params.modes - 1) as f64 * params.k0 / 2.0 + span_sigmas * params.widths.max();
    let half_k = params.transverse_k / 2.0;
    let (cs, ci, half) = match branch {
        Branch::Positive => (half_k, -half_k, reach),
        Branch::Negative => (-half_k, half_k, reach),
        Branch::Both => (0.0, 0.0, half_k + reach),
    };
    Ok((
        WavevectorGrid::centered(cs, half, n_points)?,
        WavevectorGrid::centered(ci, half, n_points)?,
    ))
}

/// Multipeak kernel
/// `Σ_m w_m exp(-(ks+ki-2k(m))^2 / 2σ^2) Σ_± exp(-(ks-ki∓K)^2 / 2σ'^2)`, normalized.
pub fn build_multipeak(
    params: &MultiPeakParams,
    branch: Branch,
    grid_s: &WavevectorGrid,
    grid_i: &WavevectorGrid,
) -> Result<TpaKernel> {
    params.validate()?;
    check_resolution(&params.widths, [grid_s, grid_i])?;
    let reach = 4.0 * params.widths.max();
    for &sign in branch.signs() {
        for (side, grid) in [(Side::Signal, grid_s), (Side::Idler, grid_i)] {
            let peaks = params.peak_positions(side, sign);
            let lo = peaks.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            check_coverage(grid, lo - reach, hi + reach)?;
        }
    }

    let centers = params.pump_centers();
    let weights = params.weights();
    let signs = branch.signs();
    let k = params.transverse_k;
    let w = params.widths;
    let kernel = TpaKernel::from_fn(*grid_s, *grid_i, |s, i| {
        let mut acc = 0.0;
        for (c, wt) in centers.iter().zip(&weights) {
            for &b in signs {
                acc += wt * gaussian_pair(s + i - c, s - i - b * k, &w);
            }
        }
        acc
    })?;
    Ok(kernel.with_warnings(params.overlap_warning().into_iter().collect()))
}

/// Analytic log of the unit-area marginal intensity of each pump peak's term,
/// on one branch. Each term's marginal is Gaussian with variance
/// `(σ^2 + σ'^2) / 8`; evaluating it in closed form avoids underflow far from
/// the peak.
pub fn peak_log_marginals(params: &MultiPeakParams, sign: f64, side: Side, grid: &WavevectorGrid) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let w = params.widths;
    let var = (w.sigma_k.powi(2) + w.sigma_k_prime.powi(2)) / 8.0;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let ks = grid.points();
    Ok(params
        .peak_positions(side, sign)
        .into_iter()
        .map(|c| ks.iter().map(|k| log_norm - (k - c).powi(2) / (2.0 * var)).collect())
        .collect())
}

/// Pump angular spectrum `v(k_p)` sampled on a grid, normalized to `∫|v|^2 dk = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSpectrum {
    pub grid: WavevectorGrid,
    pub amplitude: Vec<Complex64>,
}

impl PumpSpectrum {
    pub fn from_samples(grid: WavevectorGrid, amplitude: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if amplitude.len() != grid.n_points {
            return Err(Error::invalid("pump", "sample count does not match grid"));
        }
        let norm: f64 = amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.step();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let scale = norm.sqrt();
        Ok(Self {
            grid,
            amplitude: amplitude.into_iter().map(|z| z / scale).collect(),
        })
    }

    pub fn from_fn(grid: WavevectorGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = grid.points().into_iter().map(f).collect();
        Self::from_samples(grid, samples)
    }

    /// Single Gaussian `exp(-k^2 / 2σ^2)`.
    pub fn gaussian(sigma_k: f64, grid: WavevectorGrid) -> Result<Self> {
        Self::from_fn(grid, |k| Complex64::new((-k * k / (2.0 * sigma_k * sigma_k)).exp(), 0.0))
    }

    /// Angular spectrum of a crystal-plane field, `v(k) = ∫ E(x) e^{-ikx} dx`
    /// by trapezoidal quadrature over the field samples.
    pub fn from_field(field: &FieldProfile1D, grid: WavevectorGrid) -> Result<Self> {
        let xs = &field.coordinates;
        let mut dx = vec![0.0; xs.len()];
        for j in 0..xs.len() {
            let left = if j > 0 { xs[j] - xs[j - 1] } else { 0.0 };
            let right = if j + 1 < xs.len() { xs[j + 1] - xs[j] } else { 0.0 };
            dx[j] = 0.5 * (left + right);
        }
        Self::from_fn(grid, |k| {
            xs.iter()
                .zip(&field.samples)
                .zip(&dx)
                .map(|((x, e), w)| e * Complex64::from_polar(*w, -k * x))
                .sum()
        })
    }

    fn lookup(&self, k: f64) -> Option<Complex64> {
        if !self.grid.contains(k) {
            return None;
        }
        let n = self.grid.n_points;
        let t = self.grid.fractional_index(k).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        Some(self.amplitude[i] * (1.0 - f) + self.amplitude[i + 1] * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMatchModel {
    Sinc,
    Gaussian,
}

/// Phase-matching factor `P(q)` of the difference coordinate `q = ks - ki`.
///
/// The sinc model uses the paraxial quadratic mismatch around the phase-matched
/// direction, scaled so that its Gaussian approximation has width σ'_k:
/// noncollinear `x = (q^2 - K^2) / (2 K σ' sqrt(2 γ2))`, collinear
/// `x = (q / (σ' sqrt(2 γ1)))^2`.
pub fn phase_matching_factor(q: f64, pm: &PhaseMatching, model: PhaseMatchModel, branch: Branch) -> f64 {
    let k = pm.transverse_k;
    let sp = pm.sigma_prime;
    let collinear = pm.regime == Regime::Collinear || k == 0.0;
    if !collinear && branch != Branch::Both {
        let sign = if branch == Branch::Positive { 1.0 } else { -1.0 };
        if q * sign <= 0.0 {
            return 0.0;
        }
    }
    match model {
        PhaseMatchModel::Gaussian => {
            if collinear {
                (-q * q / (2.0 * sp * sp)).exp()
            } else {
                branch
                    .signs()
                    .iter()
                    .map(|b| (-(q - b * k).powi(2) / (2.0 * sp * sp)).exp())
                    .sum()
            }
        }
        PhaseMatchModel::Sinc => {
            let x = if collinear {
                (q / (sp * (2.0 * pm.gamma1).sqrt())).powi(2)
            } else {
                (q * q - k * k) / (2.0 * k * sp * (2.0 * pm.gamma2).sqrt())
            };
            sinc(x)
        }
    }
}

/// `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `F(ks, ki) = v(ks + ki) P(ks - ki)`, normalized. Pump lookups outside its
/// grid count as zero and raise [`Warning::PumpCoverage`].
pub fn build_from_pump(
    pump: &PumpSpectrum,
    pm: &PhaseMatching,
    grid_s: &WavevectorGrid,
    grid_i: &WavevectorGrid,
    model: PhaseMatchModel,
    branch: Branch,
) -> Result<TpaKernel> {
    let ks = grid_s.points();
    let ki = grid_i.points();
    let mut missed = 0usize;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    let mut m = DMatrix::zeros(ks.len(), ki.len());
    for (c, &i) in ki.iter().enumerate() {
        for (r, &s) in ks.iter().enumerate() {
            let v = match pump.lookup(s + i) {
                Some(v) => v,
                None => {
                    missed += 1;
                    continue;
                }
            };
            let p = phase_matching_factor(s - i, pm, model, branch);
            max_re = max_re.max((v.re * p).abs());
            max_im = max_im.max((v.im * p).abs());
            m[(r, c)] = v.re * p;
        }
    }
    if max_im > 1e-8 * max_re {
        return Err(Error::ComplexKernel(max_im / max_re));
    }
    let kernel = TpaKernel::from_matrix(*grid_s, *grid_i, m)?;
    let warnings = if missed > 0 { vec![Warning::PumpCoverage { missed }] } else { Vec::new() };
    Ok(kernel.with_warnings(warnings))
}
