//! Schmidt decomposition of real kernels by SVD, with the closed-form
//! double-Gaussian spectrum as an independent oracle.
//!
//! The amplitude matrix is scaled by `sqrt(Δks Δki)` so that its singular
//! values are the continuum Schmidt coefficients; singular vectors are
//! rescaled by `1/sqrt(Δk)` into modes with `Σ f^2 Δk = 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::TpaKernel;
use crate::optics::{PumpWidths, WavevectorGrid};
use crate::warning::Warning;

/// Singular values below this fraction of the largest one are dropped.
pub const SINGULAR_CUTOFF: f64 = 1e-12;
/// Retained-weight deficit above which a warning is attached.
pub const DEFICIT_WARNING: f64 = 1e-3;
/// Default energy target and mode cap.
pub const DEFAULT_ENERGY: f64 = 1.0 - 1e-6;
pub const DEFAULT_MAX_MODES: usize = 64;
/// Relative coefficient gap under which modes are treated as degenerate.
const CLUSTER_GAP: f64 = 1e-9;
// relative magnitude within which two samples count as equally large
const SIGN_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Keep modes until `Σ c^2 >= threshold`, at most `max_modes`.
    Energy { threshold: f64, max_modes: usize },
    Count(usize),
    /// Every mode above the singular-value cutoff.
    Full,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Energy {
            threshold: DEFAULT_ENERGY,
            max_modes: DEFAULT_MAX_MODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// Non-negative, descending.
    pub coefficients: Vec<f64>,
    pub signal_modes: Vec<Vec<f64>>,
    pub idler_modes: Vec<Vec<f64>>,
    pub grid_s: WavevectorGrid,
    pub grid_i: WavevectorGrid,
    /// `1 - Σ c^2` over the retained modes.
    pub deficit: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMetrics {
    pub schmidt_number: f64,
    pub purity: f64,
}

impl ModeMetrics {
    /// `K = 1 / Σ c^4`, purity `1/K`.
    pub fn from_coefficients(coefficients: &[f64]) -> Result<Self> {
        let s: f64 = coefficients.iter().map(|c| c.powi(4)).sum();
        if !(s > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let schmidt_number = 1.0 / s;
        Ok(Self {
            schmidt_number,
            purity: 1.0 / schmidt_number,
        })
    }
}

impl SchmidtDecomposition {
    /// Number of retained mode pairs.
    pub fn truncation_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn metrics(&self) -> Result<ModeMetrics> {
        ModeMetrics::from_coefficients(&self.coefficients)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    /// `Σ c_m f_m(ks) g_m(ki)`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.grid_s.n_points, self.grid_i.n_points);
        for ((c, f), g) in self.coefficients.iter().zip(&self.signal_modes).zip(&self.idler_modes) {
            let f = DVector::from_column_slice(f) * *c;
            let g = DVector::from_column_slice(g);
            out.ger(1.0, &f, &g, 1.0);
        }
        out
    }

    /// `‖F - reconstruction‖ / ‖F‖` (Frobenius).
    pub fn reconstruction_error(&self, kernel: &TpaKernel) -> f64 {
        (kernel.amplitude() - self.reconstruct()).norm() / kernel.amplitude().norm()
    }

    /// Gram matrix `⟨f_m, f_n⟩` of the signal or idler modes.
    pub fn gram(&self, idler: bool) -> DMatrix<f64> {
        let (modes, h) = if idler {
            (&self.idler_modes, self.grid_i.step())
        } else {
            (&self.signal_modes, self.grid_s.step())
        };
        let n = modes.len();
        DMatrix::from_fn(n, n, |a, b| dot(&modes[a], &modes[b]) * h)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SVD-based decomposition of a normalized kernel.
pub fn schmidt_decompose(kernel: &TpaKernel, truncation: Truncation) -> Result<SchmidtDecomposition> {
    kernel.check_normalized()?;
    let gs = *kernel.grid_s();
    let gi = *kernel.grid_i();
    let (hs, hi) = (gs.step(), gi.step());
    let scaled = kernel.amplitude() * (hs * hi).sqrt();
    let svd = scaled.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    if top == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let rank = order
        .iter()
        .take_while(|&&j| svd.singular_values[j] >= SINGULAR_CUTOFF * top)
        .count();

    let mut coefficients: Vec<f64> = order[..rank].iter().map(|&j| svd.singular_values[j]).collect();
    let mut signal: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&j| u.column(j).iter().map(|x| x / hs.sqrt()).collect())
        .collect();
    let mut idler: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&j| v_t.row(j).iter().map(|x| x / hi.sqrt()).collect())
        .collect();

    localize_degenerate(&coefficients, &mut signal, &mut idler, &gs);

    let keep = match truncation {
        Truncation::Full => rank,
        Truncation::Count(n) => n.min(rank),
        Truncation::Energy { threshold, max_modes } => {
            let mut acc = 0.0;
            let mut n = 0;
            for c in &coefficients {
                if acc >= threshold || n >= max_modes {
                    break;
                }
                acc += c * c;
                n += 1;
            }
            n
        }
    };
    coefficients.truncate(keep);
    signal.truncate(keep);
    idler.truncate(keep);

    for (f, g) in signal.iter_mut().zip(idler.iter_mut()) {
        // odd modes on symmetric grids have two extremes equal up to rounding;
        // the first one within SIGN_TIE of the largest decides
        let top = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = f.iter().find(|x| x.abs() >= top * (1.0 - SIGN_TIE)).copied().unwrap_or(0.0);
        if lead < 0.0 {
            f.iter_mut().for_each(|x| *x = -*x);
            g.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let deficit = (1.0 - coefficients.iter().map(|c| c * c).sum::<f64>()).max(0.0);
    let mut warnings = kernel.warnings().to_vec();
    if deficit > DEFICIT_WARNING {
        warnings.push(Warning::TruncationDeficit { deficit });
    }
    Ok(SchmidtDecomposition {
        coefficients,
        signal_modes: signal,
        idler_modes: idler,
        grid_s: gs,
        grid_i: gi,
        deficit,
        warnings,
    })
}

/// Inside each cluster of (numerically) equal coefficients the SVD basis is
/// arbitrary. Rotate it to the eigenbasis of the signal position operator,
/// ordered by decreasing mean position, so modes are localized and the output
/// is reproducible.
fn localize_degenerate(coefficients: &[f64], signal: &mut [Vec<f64>], idler: &mut [Vec<f64>], grid: &WavevectorGrid) {
    let ks = grid.points();
    let h = grid.step();
    let mut start = 0;
    while start < coefficients.len() {
        let mut end = start + 1;
        while end < coefficients.len() && coefficients[end - 1] - coefficients[end] < CLUSTER_GAP * coefficients[start] {
            end += 1;
        }
        let size = end - start;
        if size > 1 {
            let pos = DMatrix::from_fn(size, size, |a, b| {
                let (fa, fb) = (&signal[start + a], &signal[start + b]);
                fa.iter().zip(fb).zip(&ks).map(|((x, y), k)| x * y * k).sum::<f64>() * h
            });
            let eig = SymmetricEigen::new(pos);
            let mut idx: Vec<usize> = (0..size).collect();
            idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let rotate = |modes: &[Vec<f64>]| -> Vec<Vec<f64>> {
                idx.iter()
                    .map(|&col| {
                        let mut out = vec![0.0; modes[0].len()];
                        for (r, mode) in modes.iter().enumerate().take(size) {
                            let w = eig.eigenvectors[(r, col)];
                            for (o, x) in out.iter_mut().zip(mode) {
                                *o += w * x;
                            }
                        }
                        out
                    })
                    .collect()
            };
            let new_s = rotate(&signal[start..end]);
            let new_i = rotate(&idler[start..end]);
            signal[start..end].clone_from_slice(&new_s);
            idler[start..end].clone_from_slice(&new_i);
        }
        start = end;
    }
}

/// Closed-form Schmidt data of the double-Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSchmidt {
    pub widths: PumpWidths,
    /// Geometric ratio `((σ' - σ)/(σ' + σ))^2`.
    pub ratio: f64,
    pub schmidt_number: f64,
    /// `λ_m = c_m^2 = (1 - μ) μ^m`, `m < m_max`.
    pub eigenvalues: Vec<f64>,
    /// Hermite-Gauss scale `w`, modes `∝ H_n(k/w) exp(-k^2 / 2w^2)`.
    pub mode_scale: f64,
}

pub fn analytic_double_gaussian(widths: &PumpWidths, m_max: usize) -> Result<AnalyticSchmidt> {
    widths.validate()?;
    let (a, b) = (widths.sigma_k, widths.sigma_k_prime);
    let ratio = ((b - a) / (b + a)).powi(2);
    Ok(AnalyticSchmidt {
        widths: *widths,
        ratio,
        schmidt_number: (a * a + b * b) / (2.0 * a * b),
        eigenvalues: (0..m_max).map(|m| (1.0 - ratio) * ratio.powi(m as i32)).collect(),
        mode_scale: (a * b / 2.0).sqrt(),
    })
}

impl AnalyticSchmidt {
    /// Signal and idler Hermite-Gauss modes of order `n`. When the pump width
    /// is the narrower one, photons are anticorrelated and odd idler modes
    /// change sign.
    pub fn modes(&self, n: usize, grid_s: &WavevectorGrid, grid_i: &WavevectorGrid) -> (HermiteGauss, HermiteGauss) {
        let f = hermite_gauss(n, self.mode_scale, grid_s);
        let mut g = hermite_gauss(n, self.mode_scale, grid_i);
        if self.widths.sigma_k_prime > self.widths.sigma_k && n % 2 == 1 {
            g.values.iter_mut().for_each(|x| *x = -*x);
        }
        (f, g)
    }
}

/// Grid-normalized Hermite-Gauss sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteGauss {
    pub values: Vec<f64>,
    /// Fraction of the continuum energy that the grid sum captures.
    pub captured: f64,
}

impl HermiteGauss {
    pub fn warning(&self) -> Option<Warning> {
        (self.captured < 1.0 - 1e-6).then_some(Warning::GridEnergy { captured: self.captured })
    }
}

/// `H_n(k/w) exp(-k^2 / 2w^2)` with physicists' `H_n`, scaled to unit norm on
/// the grid. Uses the recurrence for the orthonormal functions, which stays
/// finite for large `n`.
pub fn hermite_gauss(n: usize, scale: f64, grid: &WavevectorGrid) -> HermiteGauss {
    let h = grid.step();
    let norm0 = std::f64::consts::PI.powf(-0.25) / scale.sqrt();
    let mut values: Vec<f64> = grid
        .points()
        .iter()
        .map(|&k| {
            let x = k / scale;
            let mut prev = 0.0;
            let mut cur = norm0 * (-0.5 * x * x).exp();
            for j in 1..=n {
                let j = j as f64;
                let next = (2.0 / j).sqrt() * x * cur - ((j - 1.0) / j).sqrt() * prev;
                prev = cur;
                cur = next;
            }
            cur
        })
        .collect();
    let captured = values.iter().map(|v| v * v).sum::<f64>() * h;
    let scale_to_unit = if captured > 0.0 { 1.0 / captured.sqrt() } else { 0.0 };
    values.iter_mut().for_each(|v| *v *= scale_to_unit);
    HermiteGauss { values, captured }
}

/// `|⟨a, b⟩|` under the grid inner product.
pub fn mode_overlap(a: &[f64], b: &[f64], grid: &WavevectorGrid) -> f64 {
    (dot(a, b) * grid.step()).abs()
}
