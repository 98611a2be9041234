use num_complex::Complex64;
use crate::error::{Error, Result};

/// Complex field sampled on a 1D coordinate list (um).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile1D {
    pub coordinates: Vec<f64>,
    pub samples: Vec<Complex64>,
}

impl FieldProfile1D {
    pub fn new(coordinates: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        if coordinates.len() != samples.len() {
            return Err(Error::invalid(
                "field",
                format!("{} coordinates but {} samples", coordinates.len(), samples.len()),
            ));
        }
        if coordinates.len() < 2 {
            return Err(Error::invalid("field", "need at least two samples"));
        }
        if coordinates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("field", "coordinates must be strictly increasing"));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("field", "non-finite sample"));
        }
        Ok(Self {
            coordinates,
            samples,
        })
    }

    pub fn from_real(coordinates: Vec<f64>, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(coordinates, values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Copy scaled so that the largest amplitude is one.
    pub fn peak_normalized(&self) -> Result<Self> {
        let max = self.max_amplitude();
        if max == 0.0 {
            return Err(Error::ZeroEnergy);
        }
        Ok(Self {
            coordinates: self.coordinates.clone(),
            samples: self.samples.iter().map(|z| z / max).collect(),
        })
    }

    /// Linear interpolation of the complex samples; zero outside the support.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let xs = &self.coordinates;
        if x < xs[0] || x > xs[xs.len() - 1] {
            return Complex64::new(0.0, 0.0);
        }
        let j = xs.partition_point(|&c| c <= x).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[j - 1], xs[j]);
        let t = (x - x0) / (x1 - x0);
        self.samples[j - 1] * (1.0 - t) + self.samples[j] * t
    }
}

/// `|<a, b>| / (|a| |b|)` for two sample vectors on the same grid.
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    inner.norm() / (na * nb).sqrt()
}
