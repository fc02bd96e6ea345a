//! Disk-to-disk glue: load a frame directory, analyze it, export its modes.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{collect_mode_images, partition_samples, Corpus, DatasetLayout, ModeImageRef};
use crate::error::Result;
use crate::hodmd::{analyze, HodmdParams, SvdTruncation, DEFAULT_EPS_DMD, DEFAULT_EPS_SVD};
use crate::modes::{export_modes, ExportTarget, ModesManifest, SelectionPolicy};
use crate::snapshot::{crop, load_sequence, to_snapshot_matrix, CropRect, FrameSequence};
use crate::spectrum::DmdSpectrum;

/// User-facing analysis settings; `d = None` picks the default delay for the
/// sequence length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub dt: f64,
    pub d: Option<usize>,
    pub eps_svd: f64,
    pub eps_dmd: f64,
    pub crop: Option<CropRect>,
}

impl AnalysisOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            d: None,
            eps_svd: DEFAULT_EPS_SVD,
            eps_dmd: DEFAULT_EPS_DMD,
            crop: None,
        }
    }

    pub fn params(&self, k: usize) -> HodmdParams<f64> {
        HodmdParams::new(
            self.d.unwrap_or_else(|| HodmdParams::<f64>::default_delay(k)),
            self.eps_svd,
            self.eps_dmd,
            self.dt,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub params: HodmdParams<f64>,
    pub truncation: SvdTruncation<f64>,
    pub spectrum: DmdSpectrum<f64>,
}

pub fn analyze_sequence(seq: &FrameSequence, opts: &AnalysisOptions) -> Result<Analysis> {
    let seq = match opts.crop {
        Some(rect) => crop(seq, rect)?,
        None => seq.clone(),
    };
    let v = to_snapshot_matrix::<f64>(&seq)?;
    let params = opts.params(v.snapshots());
    let (truncation, spectrum) = analyze(&v, &params)?;
    Ok(Analysis {
        params,
        truncation,
        spectrum,
    })
}

/// Analyzes every training-pool sample of `corpus` and exports its modes to
/// `out/{class}/{source_id}/`. Held-out samples are never touched.
pub fn export_training_pool_modes(
    corpus: &Corpus,
    layout: &DatasetLayout,
    opts: &AnalysisOptions,
    policy: &SelectionPolicy,
    out: &Path,
) -> Result<Vec<ModeImageRef>> {
    let partition = partition_samples(corpus, layout)?;
    let jobs: Vec<(&str, &str)> = partition
        .iter()
        .flat_map(|(label, part)| part.training_pool.iter().map(move |id| (label.as_str(), id.as_str())))
        .collect();
    jobs.par_iter()
        .map(|&(label, id)| -> Result<ModesManifest> {
            let seq = load_sequence(&corpus.root.join(label).join(id), opts.dt)?;
            let analysis = analyze_sequence(&seq, opts)?;
            export_modes(
                &analysis.spectrum,
                &analysis.params,
                policy,
                &ExportTarget {
                    dir: &out.join(label).join(id),
                    source_id: id,
                    class_label: Some(label),
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    collect_mode_images(out)
}
