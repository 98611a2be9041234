use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples per axis.
pub const MIN_POINTS: usize = 16;

/// Uniform 1D grid of transverse wavevectors (um^-1), endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavevectorGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub n_points: usize,
}

impl WavevectorGrid {
    pub fn new(k_min: f64, k_max: f64, n_points: usize) -> Result<Self> {
        let grid = Self {
            k_min,
            k_max,
            n_points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn centered(center: f64, half_span: f64, n_points: usize) -> Result<Self> {
        Self::new(center - half_span, center + half_span, n_points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_min.is_finite() && self.k_max.is_finite()) || self.k_min >= self.k_max {
            return Err(Error::invalid(
                "grid",
                format!("need k_min < k_max, got [{}, {}]", self.k_min, self.k_max),
            ));
        }
        if self.n_points < MIN_POINTS {
            return Err(Error::invalid(
                "grid.n_points",
                format!("need at least {MIN_POINTS} points, got {}", self.n_points),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.k_max
        } else {
            self.k_min + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.k_min + self.k_max)
    }

    pub fn contains(&self, k: f64) -> bool {
        let tol = 1e-9 * self.step();
        k >= self.k_min - tol && k <= self.k_max + tol
    }

    /// Fractional index of `k` on the grid (may lie outside `[0, n-1]`).
    #[inline]
    pub fn fractional_index(&self, k: f64) -> f64 {
        (k - self.k_min) / self.step()
    }

    /// Same number of points, endpoints multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k_min: self.k_min * factor,
            k_max: self.k_max * factor,
            n_points: self.n_points,
        }
    }

    /// Grid holding every pairwise sum `a_i + b_j` of two grids with equal steps.
    pub fn sum_grid(a: &Self, b: &Self) -> Result<Self> {
        let (ha, hb) = (a.step(), b.step());
        if ((ha - hb) / ha).abs() > 1e-12 {
            return Err(Error::invalid(
                "grid",
                format!("sum grid needs equal steps, got {ha:e} and {hb:e}"),
            ));
        }
        Self::new(a.k_min + b.k_min, a.k_max + b.k_max, a.n_points + b.n_points - 1)
    }

    /// Linear interpolation of `values` sampled on this grid; `None` outside.
    pub fn interpolate(&self, values: &[f64], k: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.n_points);
        if !self.contains(k) {
            return None;
        }
        let t = self.fractional_index(k).clamp(0.0, (self.n_points - 1) as f64);
        let i = (t.floor() as usize).min(self.n_points - 2);
        let frac = t - i as f64;
        Some(values[i] * (1.0 - frac) + values[i + 1] * frac)
    }
}
