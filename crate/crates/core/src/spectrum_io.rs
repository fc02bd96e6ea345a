//! On-disk form of one analysis.
//!
//! ```text
//! {out}/analysis.json   parameters, geometry, singular values, provenance
//! {out}/spectrum.csv    one row per mode: delta, omega, |a|, a, mu
//! {out}/modes.bin       complex sidecar, J x M pixel-space modes
//! {out}/basis.bin       real sidecar, J x N spatial basis W
//! {out}/reduced.bin     real sidecar, N x K reduced snapshots (header nx = N, ny = 1)
//! ```
//!
//! Floats are written in shortest round-trip form, so reloading is exact.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hodmd::{HodmdParams, SvdTruncation};
use crate::scalar::Cplx;
use crate::sidecar;
use crate::snapshot::CropRect;
use crate::spectrum::DmdSpectrum;

pub const ANALYSIS_JSON: &str = "analysis.json";
pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const MODES_BIN: &str = "modes.bin";
pub const BASIS_BIN: &str = "basis.bin";
pub const REDUCED_BIN: &str = "reduced.bin";

const CSV_HEADER: &str = "index,delta,omega,amplitude_abs,amplitude_re,amplitude_im,mu_re,mu_im";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub source_id: String,
    pub class_label: Option<String>,
    pub geometry: [usize; 2],
    pub frames: usize,
    pub crop: Option<CropRect>,
    pub hodmd: HodmdParams<f64>,
    pub n_retained: usize,
    pub m_retained: usize,
    pub singular_values: Vec<f64>,
}

impl AnalysisRecord {
    pub fn new(
        source_id: &str,
        class_label: Option<&str>,
        crop: Option<CropRect>,
        params: HodmdParams<f64>,
        truncation: &SvdTruncation<f64>,
        spectrum: &DmdSpectrum<f64>,
    ) -> Self {
        let (nx, ny) = truncation.geometry;
        Self {
            source_id: source_id.to_string(),
            class_label: class_label.map(str::to_string),
            geometry: [nx, ny],
            frames: truncation.snapshots(),
            crop,
            hodmd: params,
            n_retained: truncation.n_retained,
            m_retained: spectrum.len(),
            singular_values: truncation.singular_values.clone(),
        }
    }
}

/// Renders the spectrum table.
pub fn spectrum_csv(spectrum: &DmdSpectrum<f64>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in 0..spectrum.len() {
        let a = spectrum.amplitudes()[m];
        let mu = spectrum.eigenvalues()[m];
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m + 1,
            spectrum.growth_rates()[m],
            spectrum.frequencies()[m],
            spectrum.amplitude_abs(m),
            a.re,
            a.im,
            mu.re,
            mu.im
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub delta: f64,
    pub omega: f64,
    pub amplitude_abs: f64,
    pub amplitude: Cplx<f64>,
    pub eigenvalue: Cplx<f64>,
}

pub fn parse_spectrum_csv(text: &str, path: &Path) -> Result<Vec<SpectrumRow>> {
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 1,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, format!("expected header {CSV_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad(i + 1, format!("expected 8 fields, found {}", fields.len())));
        }
        let num = |k: usize| {
            fields[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(i + 1, format!("field {}: {e}", k + 1)))
        };
        rows.push(SpectrumRow {
            delta: num(1)?,
            omega: num(2)?,
            amplitude_abs: num(3)?,
            amplitude: Cplx::new(num(4)?, num(5)?),
            eigenvalue: Cplx::new(num(6)?, num(7)?),
        });
    }
    Ok(rows)
}

/// Writes all analysis artifacts into `dir`.
pub fn write_analysis(
    dir: &Path,
    record: &AnalysisRecord,
    truncation: &SvdTruncation<f64>,
    spectrum: &DmdSpectrum<f64>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [nx, ny] = record.geometry;
    let dt = record.hodmd.dt;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write(
        ANALYSIS_JSON,
        serde_json::to_string_pretty(record).expect("serializable record"),
    )?;
    write(SPECTRUM_CSV, spectrum_csv(spectrum))?;
    sidecar::write_complex(&dir.join(MODES_BIN), spectrum.modes(), nx, ny, dt)?;
    sidecar::write_real(&dir.join(BASIS_BIN), &truncation.basis_w, nx, ny, dt)?;
    sidecar::write_real(
        &dir.join(REDUCED_BIN),
        &truncation.reduced,
        truncation.n_retained,
        1,
        dt,
    )?;
    Ok(())
}

pub fn read_record(dir: &Path) -> Result<AnalysisRecord> {
    let path = dir.join(ANALYSIS_JSON);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
}

/// Reloads the record and pixel-space spectrum written by [`write_analysis`].
pub fn read_analysis(dir: &Path) -> Result<(AnalysisRecord, DmdSpectrum<f64>)> {
    let record = read_record(dir)?;
    let csv_path = dir.join(SPECTRUM_CSV);
    let text = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let rows = parse_spectrum_csv(&text, &csv_path)?;
    let modes_path = dir.join(MODES_BIN);
    let (header, modes): (_, DMatrix<Cplx<f64>>) = sidecar::read_complex(&modes_path)?;
    let [nx, ny] = record.geometry;
    if (header.nx as usize, header.ny as usize) != (nx, ny) || modes.ncols() != rows.len() {
        return Err(Error::Format {
            path: modes_path,
            message: format!(
                "{}x{} with {} modes does not match analysis {}x{} with {} rows",
                header.nx,
                header.ny,
                modes.ncols(),
                nx,
                ny,
                rows.len()
            ),
        });
    }
    let spectrum = DmdSpectrum::from_stored(
        modes,
        rows.iter().map(|r| r.eigenvalue).collect(),
        rows.iter().map(|r| r.amplitude).collect(),
        record.hodmd.dt,
        (nx, ny),
    )?;
    Ok((record, spectrum))
}
