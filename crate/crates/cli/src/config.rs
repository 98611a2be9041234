//! Run configuration: TOML with nested sections, unknown keys rejected,
//! every block validated before anything is computed.

use std::fmt;
use std::path::{Path, PathBuf};

use biphoton::detection::{DetectionGeometry, OverlapKind};
use biphoton::hologram::HologramLayout;
use biphoton::kernel::{Branch, PhaseMatchModel};
use biphoton::optics::{fwhm_to_sigma_k, mm_to_um, nm_to_um, sigma_prime, SellmeierAxis};
use biphoton::schmidt::Truncation;
use biphoton::{
    IndexModel, MultiPeakParams, PhaseMatchConfig, PhaseMatching, PumpProfileParams, PumpWidths, Regime, Sellmeier,
};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, source: std::io::Error },
    /// Syntax, unknown or missing keys; the message carries line and column.
    Parse { path: PathBuf, message: String },
    Invalid { field: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read { path, source } => write!(f, "cannot read config {}: {source}", path.display()),
            ConfigError::Parse { path, message } => write!(f, "config {}: {}", path.display(), message.trim_end()),
            ConfigError::Invalid { field, message } => write!(f, "config field `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, err: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub crystal: CrystalConfig,
    pub pump: PumpConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub schmidt: SchmidtConfig,
    #[serde(default)]
    pub crosstalk: CrosstalkConfig,
    #[serde(default)]
    pub hologram: HologramConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub length_mm: f64,
    pub pump_wavelength_nm: f64,
    #[serde(default = "noncollinear")]
    pub regime: Regime,
    pub indices: IndexSource,
}

fn noncollinear() -> Regime {
    Regime::Noncollinear
}

/// Inline indices, or Sellmeier coefficients (type-I, pump extraordinary at
/// the cut angle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum IndexSource {
    Constant {
        signal: f64,
        pump: f64,
    },
    Sellmeier {
        cut_angle_deg: f64,
        valid_min_nm: f64,
        valid_max_nm: f64,
        ordinary: SellmeierAxis,
        extraordinary: SellmeierAxis,
    },
}

impl IndexSource {
    pub fn model(&self) -> IndexModel {
        match self {
            IndexSource::Constant { signal, pump } => IndexModel::Constant {
                signal: *signal,
                pump: *pump,
            },
            IndexSource::Sellmeier {
                cut_angle_deg,
                valid_min_nm,
                valid_max_nm,
                ordinary,
                extraordinary,
            } => IndexModel::Sellmeier {
                coeffs: Sellmeier {
                    ordinary: ordinary.clone(),
                    extraordinary: extraordinary.clone(),
                    valid_min_nm: *valid_min_nm,
                    valid_max_nm: *valid_max_nm,
                },
                cut_angle: cut_angle_deg.to_radians(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    /// Crystal-plane field FWHM; alternative to `sigma_k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_k: Option<f64>,
    #[serde(default = "one")]
    pub modes: usize,
    #[serde(default)]
    pub k0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sigma_prime: SigmaPrime,
}

fn one() -> usize {
    1
}

/// Phase-matching width: a value in um^-1, the crystal formula, or equal to
/// the pump width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaPrime {
    Value(f64),
    Rule(SigmaRule),
}

impl Default for SigmaPrime {
    fn default() -> Self {
        SigmaPrime::Rule(SigmaRule::Formula)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaRule {
    Formula,
    Pump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub model: PhaseMatchModel,
    pub branch: Branch,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            model: PhaseMatchModel::Gaussian,
            branch: Branch::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    /// Margin beyond the outermost peaks, in units of the larger width.
    pub span_sigmas: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 512,
            span_sigmas: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub focal_length_mm: f64,
    pub slit_width_signal_mm: f64,
    pub slit_width_idler_mm: f64,
    pub central_wavelength_nm: f64,
    pub filter_fwhm_nm: f64,
    pub wavelength_samples: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        let g = DetectionGeometry::default();
        Self {
            focal_length_mm: g.focal_length_mm,
            slit_width_signal_mm: g.slit_width_signal_mm,
            slit_width_idler_mm: g.slit_width_idler_mm,
            central_wavelength_nm: g.central_wavelength_nm,
            filter_fwhm_nm: g.filter_fwhm_nm,
            wavelength_samples: 21,
        }
    }
}

impl DetectionConfig {
    pub fn geometry(&self) -> DetectionGeometry {
        DetectionGeometry {
            focal_length_mm: self.focal_length_mm,
            slit_width_signal_mm: self.slit_width_signal_mm,
            slit_width_idler_mm: self.slit_width_idler_mm,
            central_wavelength_nm: self.central_wavelength_nm,
            filter_fwhm_nm: self.filter_fwhm_nm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchmidtConfig {
    /// Keep modes until this much of the weight is retained...
    pub energy: f64,
    /// ...but no more than this many.
    pub max_modes: usize,
    /// Fixed mode count; overrides `energy`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
}

impl Default for SchmidtConfig {
    fn default() -> Self {
        Self {
            energy: biphoton::schmidt::DEFAULT_ENERGY,
            max_modes: biphoton::schmidt::DEFAULT_MAX_MODES,
            modes: None,
        }
    }
}

impl SchmidtConfig {
    pub fn truncation(&self) -> Truncation {
        match self.modes {
            Some(n) => Truncation::Count(n),
            None => Truncation::Energy {
                threshold: self.energy,
                max_modes: self.max_modes,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrosstalkSource {
    /// Closed-form angular distribution of each pump peak's term.
    Analytic,
    /// Signal Schmidt modes of the computed kernel.
    Schmidt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosstalkConfig {
    pub source: CrosstalkSource,
    pub overlap: OverlapKind,
}

impl Default for CrosstalkConfig {
    fn default() -> Self {
        Self {
            source: CrosstalkSource::Analytic,
            overlap: OverlapKind::Intensity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HologramConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_pitch_um: f64,
    pub grating_period_px: usize,
    pub demagnification: f64,
    /// Intensity FWHM of the beam lighting the SLM; flat when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_beam_fwhm_um: Option<f64>,
}

impl Default for HologramConfig {
    fn default() -> Self {
        let l = HologramLayout::default();
        Self {
            width_px: l.width_px,
            height_px: l.height_px,
            pixel_pitch_um: l.pixel_pitch_um,
            grating_period_px: l.grating_period_px,
            demagnification: l.demagnification,
            input_beam_fwhm_um: None,
        }
    }
}

impl HologramConfig {
    pub fn layout(&self) -> HologramLayout {
        HologramLayout {
            width_px: self.width_px,
            height_px: self.height_px,
            pixel_pitch_um: self.pixel_pitch_um,
            grating_period_px: self.grating_period_px,
            demagnification: self.demagnification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Everything the commands need, derived from a validated config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub index_model: IndexModel,
    pub phase_match: PhaseMatchConfig,
    /// Offset `K` and width σ' as used by the kernels.
    pub matching: PhaseMatching,
    pub multipeak: MultiPeakParams,
    pub profile: PumpProfileParams,
    pub geometry: DetectionGeometry,
    pub layout: HologramLayout,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Canonical text: every field explicit, fixed order.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Setup, ConfigError> {
        let c = &self.crystal;
        let index_model = c.indices.model();
        let phase_match = match &c.indices {
            IndexSource::Constant { signal, pump } => {
                PhaseMatchConfig::from_lab_units(c.length_mm, c.pump_wavelength_nm, *signal, *pump, c.regime)
            }
            IndexSource::Sellmeier { .. } => PhaseMatchConfig::from_index_model(
                mm_to_um(c.length_mm),
                nm_to_um(c.pump_wavelength_nm),
                &index_model,
                c.regime,
            ),
        }
        .map_err(|e| invalid("crystal", e))?;
        let matching = PhaseMatching::from_config(&phase_match).map_err(|e| invalid("crystal", e))?;

        let p = &self.pump;
        let sigma_k = match (p.fwhm_um, p.sigma_k) {
            (Some(fwhm), None) => fwhm_to_sigma_k(fwhm).map_err(|e| invalid("pump.fwhm_um", e))?,
            (None, Some(s)) => s,
            _ => return Err(invalid("pump", "give exactly one of `fwhm_um` and `sigma_k`")),
        };
        let sp = match p.sigma_prime {
            SigmaPrime::Value(v) => v,
            SigmaPrime::Rule(SigmaRule::Pump) => sigma_k,
            SigmaPrime::Rule(SigmaRule::Formula) => sigma_prime(&phase_match).map_err(|e| invalid("crystal", e))?,
        };
        let widths = PumpWidths::new(sigma_k, sp).map_err(|e| invalid("pump", e))?;
        let matching = matching.with_sigma_prime(sp);
        let multipeak = MultiPeakParams {
            modes: p.modes,
            k0: p.k0,
            transverse_k: matching.transverse_k,
            widths,
            alpha: p.alpha,
        };
        multipeak.validate().map_err(|e| invalid("pump", e))?;
        let profile = PumpProfileParams {
            modes: p.modes,
            k0: p.k0,
            sigma_k,
            alpha: p.alpha,
        };
        profile.validate().map_err(|e| invalid("pump", e))?;

        if self.grid.points < 16 {
            return Err(invalid("grid.points", format!("need at least 16, got {}", self.grid.points)));
        }
        if !(self.grid.span_sigmas.is_finite() && self.grid.span_sigmas >= 4.0) {
            return Err(invalid(
                "grid.span_sigmas",
                format!("must be at least 4 (kernels need ±4σ coverage), got {}", self.grid.span_sigmas),
            ));
        }
        let geometry = self.detection.geometry();
        geometry.validate().map_err(|e| invalid("detection", e))?;
        if self.detection.wavelength_samples == 0 {
            return Err(invalid("detection.wavelength_samples", "need at least one sample"));
        }
        let s = &self.schmidt;
        if !(s.energy > 0.0 && s.energy <= 1.0) || s.max_modes == 0 || s.modes == Some(0) {
            return Err(invalid(
                "schmidt",
                "energy must lie in (0, 1] and mode counts must be positive",
            ));
        }
        let layout = self.hologram.layout();
        layout.validate().map_err(|e| invalid("hologram", e))?;
        if let Some(w) = self.hologram.input_beam_fwhm_um {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid("hologram.input_beam_fwhm_um", format!("must be positive, got {w}")));
            }
        }
        Ok(Setup {
            index_model,
            phase_match,
            matching,
            multipeak,
            profile,
            geometry,
            layout,
        })
    }

    /// `(key, value, origin)` for every leaf of the resolved config; origin
    /// is `flag`, `user` or `default`.
    pub fn provenance(&self, user: &toml::Table, flags: &[&str]) -> Vec<(String, String, &'static str)> {
        let resolved = toml::Table::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        walk(&resolved, "", &mut |key, value| {
            let origin = if flags.contains(&key) {
                "flag"
            } else if lookup(user, key).is_some() {
                "user"
            } else {
                "default"
            };
            out.push((key.to_string(), value.to_string(), origin));
        });
        out
    }
}

fn walk(table: &toml::Table, prefix: &str, visit: &mut dyn FnMut(&str, &toml::Value)) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => walk(t, &key, visit),
            _ => visit(&key, v),
        }
    }
}

fn lookup<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Parsed config plus the user's raw table, kept for provenance.
pub struct Loaded {
    pub config: RunConfig,
    pub user: toml::Table,
}

pub fn parse_config(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config = RunConfig::from_toml(&text, path)?;
    let user = text.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(Loaded { config, user })
}
