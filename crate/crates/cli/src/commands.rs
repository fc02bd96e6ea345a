use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use walkdir::WalkDir;

use hodmd_core::dataset::{build_dataset01, build_dataset02, collect_mode_images, Corpus, DatasetLayout, SplitMode};
use hodmd_core::modes::{export_modes as export_sample, ExportTarget, Rendering, SelectionPolicy, SelectionStrategy};
use hodmd_core::pipeline::{analyze_sequence, export_training_pool_modes, AnalysisOptions};
use hodmd_core::snapshot::{load_sequence, CropFile};
use hodmd_core::spectrum_io::{read_analysis, write_analysis, AnalysisRecord, ANALYSIS_JSON};
use hodmd_core::synth::{generate_class_corpus, CorpusSpec};
use hodmd_core::{Error, Result};

use crate::manifest;
use crate::{AnalyzeArgs, BuildArgs, ExportArgs, HodmdArgs, RenderingArg, SplitModeArg, Strategy, SynthArgs};

pub type CliError = Error;

const BUNDLED_SPEC: &str = include_str!("../specs/five_class.json");

fn rendering(arg: RenderingArg) -> Rendering {
    match arg {
        RenderingArg::RealPart => Rendering::RealPart,
        RenderingArg::Modulus => Rendering::Modulus,
        RenderingArg::Phase => Rendering::Phase,
    }
}

fn options(dt: f64, hodmd: &HodmdArgs, crop: Option<&CropFile>) -> Result<AnalysisOptions> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("--dt must be positive, got {dt}")));
    }
    if let Some(file_dt) = crop.and_then(|c| c.dt) {
        if file_dt != dt {
            log::warn!("crop file gives dt = {file_dt}, using --dt {dt}");
        }
    }
    Ok(AnalysisOptions {
        dt,
        d: hodmd.d,
        eps_svd: hodmd.eps_svd,
        eps_dmd: hodmd.eps_dmd,
        crop: crop.map(CropFile::rect),
    })
}

fn has_png(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .any(|e| e.path().extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        })
        .unwrap_or(false)
}

/// Directories below `root` (inclusive) that satisfy `is_leaf`, with their
/// path relative to `root`.
fn leaves(root: &Path, is_leaf: impl Fn(&Path) -> bool) -> Result<Vec<(PathBuf, PathBuf)>> {
    if !root.is_dir() {
        return Err(Error::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Format {
            path: root.to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.file_type().is_dir() && is_leaf(entry.path()) {
            let rel = entry.path().strip_prefix(root).unwrap_or(Path::new("")).to_path_buf();
            out.push((entry.into_path(), rel));
        }
    }
    Ok(out)
}

/// The class of a sample at `{class}/{source_id}` relative to the input root.
fn class_of(rel: &Path) -> Option<String> {
    let parts: Vec<_> = rel.components().collect();
    (parts.len() >= 2).then(|| parts[parts.len() - 2].as_os_str().to_string_lossy().into_owned())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let started = Instant::now();
    let crop = args.crop.as_deref().map(CropFile::read).transpose()?;
    let opts = options(args.dt, &args.hodmd, crop.as_ref())?;
    let samples = leaves(&args.input, has_png)?;
    if samples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no frame directories under {}",
            args.input.display()
        )));
    }
    samples
        .par_iter()
        .map(|(dir, rel)| {
            let seq = load_sequence(dir, args.dt)?;
            let a = analyze_sequence(&seq, &opts)?;
            log::info!(
                "{}: N = {}, M = {}",
                seq.source_id,
                a.truncation.n_retained,
                a.spectrum.len()
            );
            let class = class_of(rel);
            let record = AnalysisRecord::new(
                &seq.source_id,
                class.as_deref(),
                opts.crop,
                a.params,
                &a.truncation,
                &a.spectrum,
            );
            write_analysis(&args.out.join(rel), &record, &a.truncation, &a.spectrum)
        })
        .collect::<Result<Vec<()>>>()?;
    let mut inputs = vec![args.input.as_path()];
    inputs.extend(args.crop.as_deref());
    manifest::write("analyze", args, &inputs, &args.out, started)
}

fn policy(args: &ExportArgs) -> Result<SelectionPolicy> {
    if args.strategy != Strategy::Manual && !args.select.is_empty() {
        return Err(Error::InvalidParameter("--select requires --strategy manual".into()));
    }
    let strategy = match args.strategy {
        Strategy::Top => SelectionStrategy::TopAmplitude,
        Strategy::Manual => {
            if args.select.is_empty() {
                return Err(Error::InvalidParameter("--strategy manual needs --select".into()));
            }
            SelectionStrategy::ManualList {
                ranks: args.select.clone(),
            }
        }
        Strategy::NoiseFilter => SelectionStrategy::AmplitudeWithNoiseFilter {
            cutoff: args.noise_cutoff,
        },
    };
    let policy = SelectionPolicy {
        count: args.count,
        strategy,
        rendering: rendering(args.rendering),
    };
    policy.validate()?;
    Ok(policy)
}

pub fn export_modes(args: &ExportArgs) -> Result<()> {
    let started = Instant::now();
    let policy = policy(args)?;
    let samples = leaves(&args.spectrum, |d| d.join(ANALYSIS_JSON).is_file())?;
    if samples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no {ANALYSIS_JSON} under {}",
            args.spectrum.display()
        )));
    }
    samples
        .par_iter()
        .map(|(dir, rel)| {
            let (record, spectrum) = read_analysis(dir)?;
            let manifest = export_sample(
                &spectrum,
                &record.hodmd,
                &policy,
                &ExportTarget {
                    dir: &args.out.join(rel),
                    source_id: &record.source_id,
                    class_label: record.class_label.as_deref(),
                },
            )?;
            if manifest.shortage {
                log::warn!("{}: only {} modes available", record.source_id, manifest.modes.len());
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    manifest::write("export-modes", args, &[&args.spectrum], &args.out, started)
}

pub fn build_dataset(args: &BuildArgs) -> Result<()> {
    let started = Instant::now();
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "--scale must be positive, got {}",
            args.scale
        )));
    }
    let classes = (!args.classes.is_empty()).then_some(args.classes.as_slice());
    let corpus = Corpus::scan(&args.corpus, classes)?;
    let labels = corpus.classes.iter().map(|c| c.label.clone()).collect();
    let crop = args.crop.as_deref().map(CropFile::read).transpose()?;
    let mut layout = DatasetLayout::scaled(labels, args.scale, args.seed);
    layout.split_mode = match args.split_mode {
        SplitModeArg::Shuffle => SplitMode::FrameShuffle,
        SplitModeArg::Contiguous => SplitMode::Contiguous,
    };
    layout.random_start = args.random_start;
    layout.crop = crop.as_ref().map(CropFile::rect);
    layout.validate()?;

    let mut inputs = vec![args.corpus.as_path()];
    inputs.extend(args.crop.as_deref());
    let manifest = match args.augment.as_str() {
        "none" => build_dataset01(&corpus, &layout, &args.out)?,
        "modes" => {
            let dt = args
                .dt
                .ok_or_else(|| Error::InvalidParameter("--augment modes needs --dt".into()))?;
            let opts = options(dt, &args.hodmd, crop.as_ref())?;
            let policy = SelectionPolicy {
                rendering: rendering(args.rendering),
                ..SelectionPolicy::top(args.count.unwrap_or(layout.modes_per_sample))
            };
            let modes_out = args.modes_out.clone().unwrap_or_else(|| args.out.join("mode_images"));
            let refs = export_training_pool_modes(&corpus, &layout, &opts, &policy, &modes_out)?;
            build_dataset02(&corpus, &layout, &refs, &args.out)?
        }
        dir => {
            let dir = Path::new(dir);
            let refs = collect_mode_images(dir)?;
            if refs.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "no exported modes under {}",
                    dir.display()
                )));
            }
            inputs.push(dir);
            build_dataset02(&corpus, &layout, &refs, &args.out)?
        }
    };
    let t = manifest.totals;
    println!(
        "{}: train {} / validation {} / test {} / testing_I {}",
        manifest.dataset, t.train, t.validation, t.test, t.testing_i
    );
    manifest::write("build-dataset", args, &inputs, &args.out, started)
}

pub fn bundled_spec() -> Result<CorpusSpec> {
    CorpusSpec::from_json(BUNDLED_SPEC, Path::new("five_class.json"))
}

pub fn gen_synth(args: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let mut spec = match &args.spec {
        Some(path) => CorpusSpec::read(path)?,
        None => bundled_spec()?,
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let samples = generate_class_corpus(&spec, &args.out)?;
    let path = args.out.join("corpus_spec.json");
    let text = serde_json::to_string_pretty(&spec).expect("serializable spec");
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    println!("{} samples in {} classes", samples.len(), spec.classes.len());
    let inputs: Vec<&Path> = args.spec.iter().map(PathBuf::as_path).collect();
    manifest::write("gen-synth", args, &inputs, &args.out, started)
}
