//! Command-line front end: one subcommand per analysis, all driven by a TOML
//! run configuration.

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use biphoton::detection::{
    coincidence_scan_intensity, crosstalk_from_decomposition, crosstalk_from_log, fedorov_ratio_intensity, fwhm_of,
    passband_samples, singles_scan_intensity, wavelength_average, WidthMethod,
};
use biphoton::field::overlap;
use biphoton::hologram::{
    encode_hologram, export_pgm, lowpass_envelope, profile_fwhm, pump_field, simulate_first_order, symmetric_axis,
};
use biphoton::io::{
    fmt_num, write_atomic, write_coefficients_csv, write_crosstalk_csv, write_csv, write_field_csv, write_json,
    write_kernel_csv, write_mode_csvs, write_profile_csv, write_scan_csv,
};
use biphoton::kernel::{build_from_pump, build_multipeak, multipeak_grids, peak_log_marginals, PhaseMatchModel};
use biphoton::optics::{idler_wavelength, nm_to_um, transverse_k_at};
use biphoton::schmidt::analytic_double_gaussian;
use biphoton::{
    schmidt_decompose, Branch, DetectionGeometry, Error, JointIntensity, MultiPeakParams, PumpSpectrum, ScanSpectrum,
    Side, TpaKernel, Warning, WavevectorGrid,
};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{parse_config, ConfigError, CrosstalkSource, RunConfig, Setup};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error
  3  configuration error (unreadable, malformed, unknown key, invalid value)
  4  parameter or domain error (grid too coarse or too small, outside the index model, aliased grating)
  5  numerical failure (kernel not normalized, zero energy, no single half-maximum crossing)
  6  I/O error";

#[derive(Debug, Parser)]
#[command(name = "biphoton", version, about = "Transverse biphoton spectra under structured pump beams", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the two-photon amplitude and its marginals.
    Tpa(Common),
    /// Schmidt-decompose the two-photon amplitude.
    Schmidt(Common),
    /// Slit-scanned singles, or coincidences with `--idler-center`.
    Scan(ScanArgs),
    /// Ratio of singles to conditional spectral width.
    Fedorov(FedorovArgs),
    /// Overlap matrix between the spatial modes of a multi-peak pump.
    Crosstalk(Common),
    /// Crystal-plane pump field and its angular spectrum.
    Pump(Common),
    /// Phase-only SLM hologram for the pump field, with a simulated round trip.
    Hologram(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `grid.points`.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Model both branches of the ring; overrides `kernel.branch`.
    #[arg(long)]
    pub both_branches: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fix the idler slit here (um^-1) and scan coincidences.
    #[arg(long, allow_hyphen_values = true)]
    pub idler_center: Option<f64>,
    #[command(flatten)]
    pub detection: DetectionFlags,
}

#[derive(Debug, Args)]
pub struct FedorovArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub detection: DetectionFlags,
}

#[derive(Debug, Args)]
pub struct DetectionFlags {
    /// Average over the interference-filter passband.
    #[arg(long)]
    pub wavelength_avg: bool,
    /// Zero-width slits.
    #[arg(long)]
    pub narrow_slits: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Compute(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Compute(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Compute(e) => match e {
                Error::InvalidParameter { .. }
                | Error::Domain(_)
                | Error::OutsideValidity { .. }
                | Error::GridTooCoarse { .. }
                | Error::GridCoverage { .. }
                | Error::Aliased { .. }
                | Error::ComplexKernel(_) => 4,
                Error::NotNormalized(_) | Error::ZeroEnergy | Error::MultiPeak | Error::NoCrossing => 5,
                Error::Io { .. } | Error::Format { .. } | Error::Csv(_) | Error::Json(_) => 6,
            },
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Compute(Error::GridTooCoarse { .. }) => {
                Some("raise `grid.points` (or pass --grid-points); both branches span the whole ring and need several thousand")
            }
            CliError::Compute(Error::GridCoverage { .. }) => Some("raise `grid.span_sigmas`"),
            _ => None,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tpa(c) => tpa(Run::open(&c, "tpa")?),
        Command::Schmidt(c) => schmidt(Run::open(&c, "schmidt")?),
        Command::Scan(a) => {
            let mut r = Run::open(&a.common, "scan")?;
            r.detection_flags(&a.detection);
            scan(r, a.idler_center, a.detection.wavelength_avg)
        }
        Command::Fedorov(a) => {
            let mut r = Run::open(&a.common, "fedorov")?;
            r.detection_flags(&a.detection);
            fedorov(r, a.detection.wavelength_avg)
        }
        Command::Crosstalk(c) => crosstalk(Run::open(&c, "crosstalk")?),
        Command::Pump(c) => pump(Run::open(&c, "pump")?),
        Command::Hologram(c) => hologram(Run::open(&c, "hologram")?),
    }
}

/// One invocation: resolved config, output directory and the run log.
struct Run {
    cfg: RunConfig,
    setup: Setup,
    geometry: DetectionGeometry,
    out: PathBuf,
    log: Vec<String>,
}

impl Run {
    fn open(common: &Common, command: &str) -> Result<Self> {
        let loaded = parse_config(&common.config)?;
        let mut cfg = loaded.config;
        let mut flags = Vec::new();
        if let Some(out) = &common.out {
            cfg.output.dir = out.clone();
            flags.push("output.dir");
        }
        if let Some(n) = common.grid_points {
            cfg.grid.points = n;
            flags.push("grid.points");
        }
        if common.both_branches {
            cfg.kernel.branch = Branch::Both;
            flags.push("kernel.branch");
        }
        let setup = cfg.resolve()?;
        let out = cfg.output.dir.clone();
        fs::create_dir_all(&out).map_err(|e| Error::Io {
            context: format!("creating output directory {}", out.display()),
            source: e,
        })?;

        let mut log = vec![
            format!("command = {command}"),
            format!("config = {}", common.config.display()),
        ];
        for (key, value, origin) in cfg.provenance(&loaded.user, &flags) {
            log.push(format!("{key} = {value}  # {origin}"));
        }
        let m = &setup.matching;
        log.push(format!("derived.transverse_k = {}", fmt_num(m.transverse_k)));
        log.push(format!("derived.sigma_k = {}", fmt_num(setup.multipeak.widths.sigma_k)));
        log.push(format!("derived.sigma_prime = {}", fmt_num(m.sigma_prime)));
        log.push(format!("derived.signal_index = {}", fmt_num(setup.phase_match.signal_index)));
        log.push(format!("derived.pump_index = {}", fmt_num(setup.phase_match.pump_index)));
        let geometry = setup.geometry;
        Ok(Self {
            cfg,
            setup,
            geometry,
            out,
            log,
        })
    }

    fn detection_flags(&mut self, flags: &DetectionFlags) {
        if flags.narrow_slits {
            self.geometry = self.geometry.narrow();
            self.log.push("flag.narrow_slits = true".into());
        }
        if flags.wavelength_avg {
            self.log.push("flag.wavelength_avg = true".into());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn note(&mut self, line: String) {
        self.log.push(line);
    }

    fn warn(&mut self, w: &Warning) {
        log::warn!("{w}");
        self.log.push(format!("warning: {w}"));
    }

    fn wrote(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.out).unwrap_or(path);
        self.log.push(format!("wrote {}", rel.display()));
    }

    fn finish(mut self) -> Result<()> {
        self.log.push(String::new());
        let text = self.log.join("\n");
        write_atomic(&self.path("run.log"), text.as_bytes())?;
        Ok(())
    }

    fn branch(&self) -> Branch {
        self.cfg.kernel.branch
    }

    fn grids(&self) -> Result<(WavevectorGrid, WavevectorGrid)> {
        Ok(multipeak_grids(
            &self.setup.multipeak,
            self.branch(),
            self.cfg.grid.points,
            self.cfg.grid.span_sigmas,
        )?)
    }

    fn kernel(&mut self) -> Result<TpaKernel> {
        let (gs, gi) = self.grids()?;
        let k = build(&self.cfg, &self.setup, self.setup.matching.transverse_k, &gs, &gi)?;
        for w in k.warnings().to_vec() {
            self.warn(&w);
        }
        Ok(k)
    }

    /// Joint intensity, averaged over the filter passband when asked. The
    /// averaged grids are sized so that every rescaled sample grid still
    /// covers its peaks.
    fn intensity(&mut self, average: bool) -> Result<JointIntensity> {
        if !average {
            let k = self.kernel()?;
            k.check_normalized()?;
            return Ok(k.intensity());
        }
        let geom = self.geometry;
        let n_samples = self.cfg.detection.wavelength_samples;
        let lp_nm = self.cfg.crystal.pump_wavelength_nm;
        let lp = nm_to_um(lp_nm);
        let lc = nm_to_um(geom.central_wavelength_nm);
        let p = &self.setup.multipeak;
        let reach = self.cfg.grid.span_sigmas * p.widths.max();
        let offsets = p.peak_offsets();
        let (olo, ohi) = (offsets[offsets.len() - 1], offsets[0]);
        let signs: &[f64] = match self.branch() {
            Branch::Positive => &[1.0],
            Branch::Negative => &[-1.0],
            Branch::Both => &[1.0, -1.0],
        };
        let (mut s_lo, mut s_hi, mut i_lo, mut i_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (ls_nm, _) in passband_samples(&geom, n_samples)? {
            let ls = nm_to_um(ls_nm);
            let li = idler_wavelength(lp, ls)?;
            let k = transverse_k_at(&self.setup.index_model, lp, ls)?;
            let (rs, ri) = (lc / ls, lc / li);
            for &sign in signs {
                let c = sign * k / 2.0;
                s_lo = s_lo.min((c + olo - reach) / rs);
                s_hi = s_hi.max((c + ohi + reach) / rs);
                i_lo = i_lo.min((-c + olo - reach) / ri);
                i_hi = i_hi.max((-c + ohi + reach) / ri);
            }
        }
        let n = self.cfg.grid.points;
        let gs = WavevectorGrid::new(s_lo, s_hi, n)?;
        let gi = WavevectorGrid::new(i_lo, i_hi, n)?;
        let (cfg, setup) = (&self.cfg, &self.setup);
        let avg = wavelength_average(
            &setup.index_model,
            lp_nm,
            &geom,
            n_samples,
            &gs,
            &gi,
            |k, gs, gi| build(cfg, setup, k, gs, gi),
        )?;
        self.note(format!("passband.samples = {}", avg.samples.len()));
        Ok(avg.intensity)
    }
}

/// Kernel on the given grids with noncollinear offset `transverse_k`.
fn build(cfg: &RunConfig, setup: &Setup, transverse_k: f64, gs: &WavevectorGrid, gi: &WavevectorGrid) -> biphoton::Result<TpaKernel> {
    let branch = cfg.kernel.branch;
    match cfg.kernel.model {
        PhaseMatchModel::Gaussian => {
            let params = MultiPeakParams {
                transverse_k,
                ..setup.multipeak
            };
            build_multipeak(&params, branch, gs, gi)
        }
        PhaseMatchModel::Sinc => {
            let p = &setup.multipeak;
            let centres = p.pump_centers();
            let weights = p.weights();
            let sigma = p.widths.sigma_k;
            let sum = WavevectorGrid::new(gs.k_min + gi.k_min, gs.k_max + gi.k_max, gs.n_points + gi.n_points - 1)?;
            let pump = PumpSpectrum::from_fn(sum, |q| {
                let a: f64 = centres
                    .iter()
                    .zip(&weights)
                    .map(|(c, w)| w * (-(q - c).powi(2) / (2.0 * sigma * sigma)).exp())
                    .sum();
                Complex64::new(a, 0.0)
            })?;
            let pm = biphoton::PhaseMatching {
                transverse_k,
                ..setup.matching
            };
            build_from_pump(&pump, &pm, gs, gi, PhaseMatchModel::Sinc, branch)
        }
    }
}

fn tpa(mut r: Run) -> Result<()> {
    let k = r.kernel()?;
    k.check_normalized()?;
    let path = r.path("kernel.csv");
    write_kernel_csv(&path, &k)?;
    r.wrote(&path);
    let meta = json!({
        "signal_grid": k.grid_s(),
        "idler_grid": k.grid_i(),
        "norm": k.norm_sq(),
        "model": r.cfg.kernel.model,
        "branch": r.cfg.kernel.branch,
        "transverse_k": r.setup.matching.transverse_k,
        "widths": r.setup.multipeak.widths,
        "warnings": k.warnings(),
    });
    let path = r.path("kernel.meta.json");
    write_json(&path, &meta)?;
    r.wrote(&path);
    for (side, name) in [(Side::Signal, "marginal_signal.csv"), (Side::Idler, "marginal_idler.csv")] {
        let grid = match side {
            Side::Signal => k.grid_s(),
            Side::Idler => k.grid_i(),
        };
        let path = r.path(name);
        write_profile_csv(&path, &grid.points(), &k.marginal_intensity(side))?;
        r.wrote(&path);
    }
    r.finish()
}

fn schmidt(mut r: Run) -> Result<()> {
    let k = r.kernel()?;
    let d = schmidt_decompose(&k, r.cfg.schmidt.truncation())?;
    for w in d.warnings.clone() {
        r.warn(&w);
    }
    let metrics = d.metrics()?;
    let path = r.path("coefficients.csv");
    write_coefficients_csv(&path, &d)?;
    r.wrote(&path);
    let dir = r.path("modes");
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        context: format!("creating {}", dir.display()),
        source: e,
    })?;
    for p in write_mode_csvs(&dir, &d)? {
        r.wrote(&p);
    }
    // closed form exists for a single Gaussian peak
    let analytic = if r.cfg.kernel.model == PhaseMatchModel::Gaussian
        && r.setup.multipeak.modes == 1
        && r.branch() != Branch::Both
    {
        Some(analytic_double_gaussian(&r.setup.multipeak.widths, 0)?.schmidt_number)
    } else {
        None
    };
    let meta = json!({
        "modes": d.coefficients.len(),
        "schmidt_number": metrics.schmidt_number,
        "purity": metrics.purity,
        "analytic_schmidt_number": analytic,
        "deficit": d.deficit,
        "reconstruction_error": d.reconstruction_error(&k),
        "warnings": d.warnings,
    });
    let path = r.path("schmidt.meta.json");
    write_json(&path, &meta)?;
    r.wrote(&path);
    r.note(format!("result.schmidt_number = {}", fmt_num(metrics.schmidt_number)));
    println!("schmidt number {:.6}, {} modes, first coefficient {:.6}", metrics.schmidt_number, d.coefficients.len(), d.coefficients[0]);
    r.finish()
}

fn scan(mut r: Run, idler_center: Option<f64>, average: bool) -> Result<()> {
    let jsi = r.intensity(average)?;
    let geom = r.geometry;
    let positions = jsi.grid_s.points();
    let spectrum = match idler_center {
        None => singles_scan_intensity(&jsi, Side::Signal, geom.signal_acceptance(), &positions)?,
        Some(c) => coincidence_scan_intensity(&jsi, geom.signal_acceptance(), geom.idler_acceptance(), c, &positions)?,
    };
    for w in spectrum.warnings.clone() {
        r.warn(&w);
    }
    let name = match idler_center {
        None => "singles.csv",
        Some(_) => "coincidence.csv",
    };
    let path = r.path(name);
    write_scan_csv(&path, &spectrum)?;
    r.wrote(&path);
    let meta = scan_meta(&spectrum, idler_center, &geom, average);
    let path = r.path(&name.replace(".csv", ".meta.json"));
    write_json(&path, &meta)?;
    r.wrote(&path);
    r.finish()
}

fn scan_meta(s: &ScanSpectrum, idler_center: Option<f64>, geom: &DetectionGeometry, average: bool) -> serde_json::Value {
    let peaks: Vec<f64> = s.peaks(1e-3).iter().map(|&j| s.positions[j]).collect();
    let fwhm = fwhm_of(s, WidthMethod::HalfMaximum).ok();
    json!({
        "kind": s.kind,
        "idler_center": idler_center,
        "signal_acceptance": geom.signal_acceptance(),
        "idler_acceptance": geom.idler_acceptance(),
        "wavelength_average": average,
        "peaks": peaks,
        "fwhm": fwhm,
        "warnings": s.warnings,
    })
}

fn fedorov(mut r: Run, average: bool) -> Result<()> {
    let jsi = r.intensity(average)?;
    let f = fedorov_ratio_intensity(&jsi, &r.geometry)?;
    r.note(format!("result.singles_fwhm = {}", fmt_num(f.singles_fwhm)));
    r.note(format!("result.conditional_fwhm = {}", fmt_num(f.conditional_fwhm)));
    r.note(format!("result.idler_center = {}", fmt_num(f.idler_center)));
    r.note(format!("result.fedorov_ratio = {}", fmt_num(f.ratio)));
    println!(
        "fedorov ratio {:.6} (singles FWHM {:.6e}, conditional FWHM {:.6e} um^-1)",
        f.ratio, f.singles_fwhm, f.conditional_fwhm
    );
    r.finish()
}

fn crosstalk(mut r: Run) -> Result<()> {
    let x = match r.cfg.crosstalk.source {
        CrosstalkSource::Analytic => {
            let (gs, _) = r.grids()?;
            let sign = if r.branch() == Branch::Negative { -1.0 } else { 1.0 };
            let logs = peak_log_marginals(&r.setup.multipeak, sign, Side::Signal, &gs)?;
            crosstalk_from_log(&logs, &gs)?
        }
        CrosstalkSource::Schmidt => {
            let k = r.kernel()?;
            let d = schmidt_decompose(&k, r.cfg.schmidt.truncation())?;
            crosstalk_from_decomposition(&d, r.cfg.crosstalk.overlap)?
        }
    };
    let path = r.path("crosstalk.csv");
    write_crosstalk_csv(&path, &x)?;
    r.wrote(&path);
    let mut worst = f64::NEG_INFINITY;
    for m in 0..x.size() {
        for n in 0..x.size() {
            if m != n {
                worst = worst.max(x.log10(m, n));
            }
        }
    }
    r.note(format!("result.max_offdiagonal_log10 = {}", fmt_num(worst)));
    println!("max off-diagonal crosstalk log10 {worst:.3}");
    r.finish()
}

fn pump(mut r: Run) -> Result<()> {
    let p = r.setup.profile;
    let half = 6.0 / p.sigma_k;
    // at least eight samples per carrier period
    let k_top = (p.modes as f64 - 1.0) * p.k0;
    let n = ((2.0 * half * k_top.max(p.sigma_k) * 8.0 / std::f64::consts::PI).ceil() as usize).max(r.cfg.grid.points) | 1;
    let field = pump_field(&p, &symmetric_axis(half, n))?;
    let path = r.path("pump_field.csv");
    write_field_csv(&path, &field)?;
    r.wrote(&path);
    let reach = k_top + r.cfg.grid.span_sigmas * p.sigma_k;
    let spectrum = PumpSpectrum::from_field(&field, WavevectorGrid::centered(0.0, reach, r.cfg.grid.points)?)?;
    let q = spectrum.grid.points();
    let rows = q
        .iter()
        .zip(&spectrum.amplitude)
        .map(|(q, a)| vec![fmt_num(*q), fmt_num(a.re), fmt_num(a.im)]);
    let path = r.path("pump_spectrum.csv");
    write_csv(&path, &["q_um_inv", "re", "im"], rows)?;
    r.wrote(&path);
    r.finish()
}

fn hologram(mut r: Run) -> Result<()> {
    let layout = r.setup.layout;
    let p = r.setup.profile;
    let xs = layout.crystal_coordinates();
    let target = pump_field(&p, &xs)?;
    let holo = encode_hologram(&target, &layout)?;
    let path = r.path("hologram.pgm");
    export_pgm(&holo, &path)?;
    r.wrote(&path);
    let input = layout.input_beam(r.cfg.hologram.input_beam_fwhm_um)?;
    let recovered = simulate_first_order(&holo, &input, &layout)?;
    let path = r.path("recovered_field.csv");
    write_field_csv(&path, &recovered)?;
    r.wrote(&path);
    let ov = overlap(&recovered.samples, &target.samples);
    let cutoff = if p.modes > 1 { p.k0 } else { 4.0 * p.sigma_k };
    let envelope_fwhm = profile_fwhm(&xs, &lowpass_envelope(&recovered, cutoff)).ok();
    let summary = json!({
        "overlap": ov,
        "envelope_fwhm_um": envelope_fwhm,
        "grating_period_px": layout.grating_period_px,
        "width_px": layout.width_px,
        "height_px": layout.height_px,
        "input_beam_fwhm_um": r.cfg.hologram.input_beam_fwhm_um,
    });
    let path = r.path("round_trip.json");
    write_json(&path, &summary)?;
    r.wrote(&path);
    r.note(format!("result.overlap = {}", fmt_num(ov)));
    println!("round-trip overlap {ov:.6}");
    r.finish()
}
