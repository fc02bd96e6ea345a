//! Rendering DMD modes as 8-bit images and choosing which ones to keep.
//!
//! Only `omega >= 0` representatives are rendered: the conjugate partner of an
//! oscillating mode gives the same real-valued picture. Representatives are
//! ranked by `|a|` starting at 1; that rank is the `mode_index` used in file
//! names, manifests and manual selections.

use std::fs;
use std::path::{Path, PathBuf};

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hodmd::HodmdParams;
use crate::scalar::{cabs, Real};
use crate::snapshot::flat_index;
use crate::spectrum::DmdSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rendering {
    #[default]
    RealPart,
    Modulus,
    Phase,
}

impl std::str::FromStr for Rendering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real_part" | "real" => Ok(Rendering::RealPart),
            "modulus" | "abs" => Ok(Rendering::Modulus),
            "phase" | "arg" => Ok(Rendering::Phase),
            other => Err(Error::InvalidParameter(format!(
                "unknown rendering {other:?} (expected real_part, modulus or phase)"
            ))),
        }
    }
}

/// One rendered mode with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeImage {
    pub pixels: GrayImage,
    /// 1-based rank among the `omega >= 0` representatives, by `|a|`.
    pub mode_index: usize,
    /// Position of the mode in the spectrum.
    pub spectrum_index: usize,
    pub rendering: Rendering,
    pub delta: f64,
    pub omega: f64,
    pub amplitude_abs: f64,
    pub source_id: String,
    pub noise_score: f64,
}

impl ModeImage {
    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn file_name(&self) -> String {
        mode_file_name(&self.source_id, self.mode_index)
    }
}

pub fn mode_file_name(source_id: &str, rank: usize) -> String {
    format!("{source_id}_mode{rank:03}.png")
}

/// Positions of the `omega >= 0` representatives, in spectrum (amplitude) order.
pub fn representatives<T: Real>(spectrum: &DmdSpectrum<T>) -> Vec<usize> {
    (0..spectrum.len())
        .filter(|&m| spectrum.frequencies()[m] >= T::zero())
        .collect()
}

fn check_geometry<T: Real>(spectrum: &DmdSpectrum<T>, geometry: (usize, usize)) -> Result<()> {
    let (nx, ny) = geometry;
    let rows = spectrum.modes().nrows();
    if !spectrum.is_full_space() || nx * ny != rows {
        return Err(Error::GeometryMismatch {
            nx,
            ny,
            expected: nx * ny,
            found: rows,
        });
    }
    Ok(())
}

/// The real field shown for mode `index`: a component of `a_m u_m`, row-major.
pub fn mode_field<T: Real>(
    spectrum: &DmdSpectrum<T>,
    index: usize,
    geometry: (usize, usize),
    rendering: Rendering,
) -> Result<Vec<f64>> {
    if index >= spectrum.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: spectrum.len(),
        });
    }
    check_geometry(spectrum, geometry)?;
    let a = spectrum.amplitudes()[index];
    Ok(spectrum
        .modes()
        .column(index)
        .iter()
        .map(|u| {
            let z = a * *u;
            match rendering {
                Rendering::RealPart => z.re,
                Rendering::Modulus => cabs(z),
                Rendering::Phase => z.im.atan2(z.re),
            }
            .as_f64()
        })
        .collect())
}

/// Min-max normalization to `[0, 255]` with round-half-up. A field whose range
/// is below round-off relative to its magnitude is treated as constant and
/// rendered mid-grey.
pub fn quantize(field: &[f64], nx: usize, ny: usize) -> GrayImage {
    let (lo, hi) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    let constant = !(range > 64.0 * f64::EPSILON * lo.abs().max(hi.abs()));
    GrayImage::from_fn(nx as u32, ny as u32, |x, y| {
        let v = field[flat_index(nx, x as usize, y as usize)];
        let q = if constant {
            128.0
        } else {
            ((v - lo) / range * 255.0 + 0.5).floor().clamp(0.0, 255.0)
        };
        image::Luma([q as u8])
    })
}

/// Total variation over horizontal and vertical neighbours, divided by the
/// field range and by the number of neighbour pairs. Smooth fields score near
/// 0; a +-1 checkerboard scores 1.
pub fn noise_score(field: &[f64], nx: usize, ny: usize) -> f64 {
    let (lo, hi) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    let pairs = nx.saturating_sub(1) * ny + nx * ny.saturating_sub(1);
    if !(range > 0.0) || pairs == 0 {
        return 0.0;
    }
    let at = |x: usize, y: usize| field[flat_index(nx, x, y)];
    let mut tv = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            if x + 1 < nx {
                tv += (at(x + 1, y) - at(x, y)).abs();
            }
            if y + 1 < ny {
                tv += (at(x, y + 1) - at(x, y)).abs();
            }
        }
    }
    tv / (range * pairs as f64)
}

/// Renders mode `index` (a position in `spectrum`). `source_id` is left empty;
/// attach it with [`ModeImage::with_source`].
pub fn render_mode<T: Real>(
    spectrum: &DmdSpectrum<T>,
    index: usize,
    geometry: (usize, usize),
    rendering: Rendering,
) -> Result<ModeImage> {
    let field = mode_field(spectrum, index, geometry, rendering)?;
    let (nx, ny) = geometry;
    let reps = representatives(spectrum);
    // A negative-frequency mode is labelled with its partner's rank.
    let rep = if spectrum.frequencies()[index] >= T::zero() {
        index
    } else {
        spectrum.conjugate_partner(index).unwrap_or(index)
    };
    let mode_index = reps.iter().position(|&r| r == rep).map_or(0, |p| p + 1);
    Ok(ModeImage {
        pixels: quantize(&field, nx, ny),
        mode_index,
        spectrum_index: index,
        rendering,
        delta: spectrum.growth_rates()[index].as_f64(),
        omega: spectrum.frequencies()[index].as_f64(),
        amplitude_abs: spectrum.amplitude_abs(index).as_f64(),
        source_id: String::new(),
        noise_score: noise_score(&field, nx, ny),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    TopAmplitude,
    /// 1-based representative ranks, used as given.
    ManualList {
        ranks: Vec<usize>,
    },
    /// Top amplitude, skipping modes whose noise score exceeds `cutoff`.
    AmplitudeWithNoiseFilter {
        cutoff: f64,
    },
}

pub const DEFAULT_MODE_COUNT: usize = 10;
pub const DEFAULT_NOISE_CUTOFF: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub count: usize,
    pub strategy: SelectionStrategy,
    /// Rendering used for the noise score and for exported images.
    pub rendering: Rendering,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            count: DEFAULT_MODE_COUNT,
            strategy: SelectionStrategy::TopAmplitude,
            rendering: Rendering::RealPart,
        }
    }
}

impl SelectionPolicy {
    pub fn top(count: usize) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("mode count must be at least 1".into()));
        }
        match &self.strategy {
            SelectionStrategy::ManualList { ranks } if ranks.is_empty() => {
                Err(Error::InvalidParameter("manual selection list is empty".into()))
            }
            SelectionStrategy::AmplitudeWithNoiseFilter { cutoff } if !(*cutoff >= 0.0) => Err(
                Error::InvalidParameter(format!("noise cutoff must be >= 0, got {cutoff}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSelection {
    /// Positions in the spectrum.
    pub indices: Vec<usize>,
    /// Matching 1-based representative ranks.
    pub ranks: Vec<usize>,
    /// Fewer modes than requested were available.
    pub shortage: bool,
}

pub fn select_modes<T: Real>(spectrum: &DmdSpectrum<T>, policy: &SelectionPolicy) -> Result<ModeSelection> {
    policy.validate()?;
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let reps = representatives(spectrum);
    let picked: Vec<(usize, usize)> = match &policy.strategy {
        SelectionStrategy::TopAmplitude => reps
            .iter()
            .enumerate()
            .take(policy.count)
            .map(|(r, &m)| (m, r + 1))
            .collect(),
        SelectionStrategy::ManualList { ranks } => {
            let mut seen = Vec::with_capacity(ranks.len());
            for &rank in ranks {
                if rank == 0 || rank > reps.len() {
                    return Err(Error::IndexOutOfRange {
                        index: rank,
                        len: reps.len(),
                    });
                }
                if seen.iter().any(|&(_, r)| r == rank) {
                    return Err(Error::InvalidParameter(format!("mode {rank} selected twice")));
                }
                seen.push((reps[rank - 1], rank));
            }
            seen
        }
        SelectionStrategy::AmplitudeWithNoiseFilter { cutoff } => {
            let geometry = spectrum.geometry();
            check_geometry(spectrum, geometry)?;
            let (nx, ny) = geometry;
            let mut out = Vec::new();
            for (r, &m) in reps.iter().enumerate() {
                if out.len() == policy.count {
                    break;
                }
                let field = mode_field(spectrum, m, geometry, policy.rendering)?;
                if noise_score(&field, nx, ny) <= *cutoff {
                    out.push((m, r + 1));
                }
            }
            out
        }
    };
    let shortage = match policy.strategy {
        SelectionStrategy::ManualList { .. } => false,
        _ => picked.len() < policy.count,
    };
    if shortage {
        log::warn!("only {} of {} requested modes available", picked.len(), policy.count);
    }
    Ok(ModeSelection {
        indices: picked.iter().map(|p| p.0).collect(),
        ranks: picked.iter().map(|p| p.1).collect(),
        shortage,
    })
}

/// One entry of `modes.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub file: String,
    pub mode_index: usize,
    pub delta: f64,
    pub omega: f64,
    pub amplitude_abs: f64,
    pub rendering: Rendering,
    pub noise_score: f64,
}

/// Per-sample manifest written next to the mode images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesManifest {
    pub source_id: String,
    pub class_label: Option<String>,
    pub geometry: [usize; 2],
    pub hodmd: HodmdParams<f64>,
    pub policy: SelectionPolicy,
    pub shortage: bool,
    pub modes: Vec<ModeRecord>,
}

pub const MODES_MANIFEST: &str = "modes.json";

impl ModesManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Where a sample's mode images and manifest go.
#[derive(Debug, Clone)]
pub struct ExportTarget<'a> {
    pub dir: &'a Path,
    pub source_id: &'a str,
    pub class_label: Option<&'a str>,
}

/// Selects, renders and writes `{source_id}_mode{rank:03}.png` files plus
/// `modes.json` into `target.dir`.
pub fn export_modes<T: Real>(
    spectrum: &DmdSpectrum<T>,
    params: &HodmdParams<f64>,
    policy: &SelectionPolicy,
    target: &ExportTarget<'_>,
) -> Result<ModesManifest> {
    let selection = select_modes(spectrum, policy)?;
    let geometry = spectrum.geometry();
    let images: Vec<ModeImage> = selection
        .indices
        .par_iter()
        .map(|&m| render_mode(spectrum, m, geometry, policy.rendering).map(|img| img.with_source(target.source_id)))
        .collect::<Result<_>>()?;

    fs::create_dir_all(target.dir).map_err(|e| Error::io(target.dir, e))?;
    let mut records = Vec::with_capacity(images.len());
    for img in &images {
        let path: PathBuf = target.dir.join(img.file_name());
        img.pixels.save(&path).map_err(|source| Error::Image { path, source })?;
        records.push(ModeRecord {
            file: img.file_name(),
            mode_index: img.mode_index,
            delta: img.delta,
            omega: img.omega,
            amplitude_abs: img.amplitude_abs,
            rendering: img.rendering,
            noise_score: img.noise_score,
        });
    }
    let manifest = ModesManifest {
        source_id: target.source_id.to_string(),
        class_label: target.class_label.map(str::to_string),
        geometry: [geometry.0, geometry.1],
        hodmd: *params,
        policy: policy.clone(),
        shortage: selection.shortage,
        modes: records,
    };
    let path = target.dir.join(MODES_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
