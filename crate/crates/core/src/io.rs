//! CSV exports with fixed 17-significant-digit formatting, JSON sidecars and
//! atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::detection::{CrosstalkMatrix, ScanSpectrum};
use crate::error::{Error, Result};
use crate::field::FieldProfile1D;
use crate::kernel::TpaKernel;
use crate::schmidt::SchmidtDecomposition;

/// `{:.16e}`: 17 significant digits, round-trips every `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let ctx = |what: &str| format!("{what} {}", path.display());
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(ctx("creating"), e))?;
    f.write_all(bytes).map_err(|e| Error::io(ctx("writing"), e))?;
    f.sync_all().map_err(|e| Error::io(ctx("syncing"), e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(ctx("renaming into"), e))
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::io("flushing csv", e.into_error()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Sidecar path: `kernel.csv` -> `kernel.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// `ks,ki,amplitude`, signal index outermost.
pub fn write_kernel_csv(path: &Path, kernel: &TpaKernel) -> Result<()> {
    let ks = kernel.grid_s().points();
    let ki = kernel.grid_i().points();
    let a = kernel.amplitude();
    let rows = (0..ks.len()).flat_map(|r| {
        let ki = &ki;
        let ks = &ks;
        (0..ki.len()).map(move |c| vec![fmt_num(ks[r]), fmt_num(ki[c]), fmt_num(a[(r, c)])])
    });
    write_csv(path, &["ks", "ki", "amplitude"], rows)
}

pub fn write_scan_csv(path: &Path, spectrum: &ScanSpectrum) -> Result<()> {
    write_profile_csv(path, &spectrum.positions, &spectrum.rates)
}

/// `position_um_inv,rate`.
pub fn write_profile_csv(path: &Path, positions: &[f64], values: &[f64]) -> Result<()> {
    let rows = positions.iter().zip(values).map(|(k, r)| vec![fmt_num(*k), fmt_num(*r)]);
    write_csv(path, &["position_um_inv", "rate"], rows)
}

/// `mode,coefficient,weight`.
pub fn write_coefficients_csv(path: &Path, dec: &SchmidtDecomposition) -> Result<()> {
    let rows = dec
        .coefficients
        .iter()
        .enumerate()
        .map(|(m, c)| vec![m.to_string(), fmt_num(*c), fmt_num(c * c)]);
    write_csv(path, &["mode", "coefficient", "weight"], rows)
}

/// One file per mode pair, `ks,signal,ki,idler`, named `mode_000.csv`, ...
pub fn write_mode_csvs(dir: &Path, dec: &SchmidtDecomposition) -> Result<Vec<PathBuf>> {
    let ks = dec.grid_s.points();
    let ki = dec.grid_i.points();
    let mut written = Vec::new();
    for (m, (f, g)) in dec.signal_modes.iter().zip(&dec.idler_modes).enumerate() {
        let path = dir.join(format!("mode_{m:03}.csv"));
        let rows = (0..ks.len()).map(|j| vec![fmt_num(ks[j]), fmt_num(f[j]), fmt_num(ki[j]), fmt_num(g[j])]);
        write_csv(&path, &["ks", "signal", "ki", "idler"], rows)?;
        written.push(path);
    }
    Ok(written)
}

/// `m,n,linear,log10` for every ordered pair.
pub fn write_crosstalk_csv(path: &Path, x: &CrosstalkMatrix) -> Result<()> {
    let n = x.size();
    let rows = (0..n).flat_map(|m| {
        (0..n).map(move |k| vec![m.to_string(), k.to_string(), fmt_num(x.linear[(m, k)]), fmt_num(x.log10(m, k))])
    });
    write_csv(path, &["m", "n", "linear", "log10"], rows)
}

/// `x_um,re,im`.
pub fn write_field_csv(path: &Path, field: &FieldProfile1D) -> Result<()> {
    let rows = field
        .coordinates
        .iter()
        .zip(&field.samples)
        .map(|(x, z)| vec![fmt_num(*x), fmt_num(z.re), fmt_num(z.im)]);
    write_csv(path, &["x_um", "re", "im"], rows)
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let bad = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(bad(format!("expected header {}, found {}", header.join(","), got.join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a `x_um,re,im` field profile.
pub fn read_field_csv(path: &Path) -> Result<FieldProfile1D> {
    let rows = read_table(path, &["x_um", "re", "im"])?;
    let xs = rows.iter().map(|r| r[0]).collect();
    let zs = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    FieldProfile1D::new(xs, zs)
}

/// Reads a `position_um_inv,rate` profile.
pub fn read_profile_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_table(path, &["position_um_inv", "rate"])?;
    Ok(rows.iter().map(|r| (r[0], r[1])).unzip())
}
