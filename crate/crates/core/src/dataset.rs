//! Classification corpora built from a frame corpus and, optionally, exported
//! mode images.
//!
//! Per class, samples are partitioned (seeded) into a training pool and a
//! held-out set. The training pool contributes `F` successive frames per
//! sample, shuffled at frame level and split 14:5:1 into train, validation and
//! test. Held-out samples contribute `H` frames each to `testing_I`. The
//! augmented dataset adds `m` mode images per training-pool sample, split
//! 14:5:1 the same way. At scale 1, `F = 100`, `H = 90`, `m = 10`.
//!
//! Output: `{root}/{train|validation|test|testing_I}/{class}/{source_id}_{kind}_{idx}.png`
//! plus `{root}/dataset_manifest.json`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::hodmd::HodmdParams;
use crate::modes::{ModeRecord, ModesManifest, MODES_MANIFEST};
use crate::snapshot::{crop_frame, list_frames, load_frame, CropRect};

pub const DATASET_MANIFEST: &str = "dataset_manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "validation")]
    Validation,
    #[serde(rename = "test")]
    Test,
    #[serde(rename = "testing_I")]
    TestingI,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Validation, Split::Test, Split::TestingI];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
            Split::TestingI => "testing_I",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Frame,
    Mode,
}

impl ImageKind {
    fn as_str(self) -> &'static str {
        match self {
            ImageKind::Frame => "frame",
            ImageKind::Mode => "mode",
        }
    }
}

/// How training-pool frames are divided among train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Seeded shuffle of all pool frames of a class, then 14:5:1.
    #[default]
    FrameShuffle,
    /// Pool frames in sample order, cut into contiguous 14:5:1 blocks.
    Contiguous,
}

/// Per-class image counts for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub testing_i: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
            Split::TestingI => self.testing_i,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut usize {
        match split {
            Split::Train => &mut self.train,
            Split::Validation => &mut self.validation,
            Split::Test => &mut self.test,
            Split::TestingI => &mut self.testing_i,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test + self.testing_i
    }

    fn add(&self, other: &SplitCounts) -> SplitCounts {
        SplitCounts {
            train: self.train + other.train,
            validation: self.validation + other.validation,
            test: self.test + other.test,
            testing_i: self.testing_i + other.testing_i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetLayout {
    pub classes: Vec<String>,
    pub training_samples: usize,
    pub heldout_samples: usize,
    pub frames_per_training_sample: usize,
    pub frames_per_heldout_sample: usize,
    pub modes_per_sample: usize,
    pub augmented: bool,
    pub seed: u64,
    pub split_mode: SplitMode,
    /// Start training windows at a seeded random offset instead of frame 0.
    pub random_start: bool,
    pub crop: Option<CropRect>,
}

impl DatasetLayout {
    /// The full-size layout: 20 + 6 samples, 100 / 90 frames, 10 modes.
    pub fn full(classes: Vec<String>, seed: u64) -> Self {
        Self::scaled(classes, 1.0, seed)
    }

    /// Frame and mode counts scaled by `scale` (rounded, at least 1); sample
    /// counts unchanged. The 14:5:1 split holds at any scale; the 10:1
    /// frame-to-mode ratio holds whenever `10 * scale` is an integer.
    pub fn scaled(classes: Vec<String>, scale: f64, seed: u64) -> Self {
        let n = |base: f64| ((base * scale).round() as usize).max(1);
        Self {
            classes,
            training_samples: 20,
            heldout_samples: 6,
            frames_per_training_sample: n(100.0),
            frames_per_heldout_sample: n(90.0),
            modes_per_sample: n(10.0),
            augmented: false,
            seed,
            split_mode: SplitMode::default(),
            random_start: false,
            crop: None,
        }
    }

    pub fn augmented(mut self, yes: bool) -> Self {
        self.augmented = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        let unique: BTreeSet<&String> = self.classes.iter().collect();
        if unique.len() != self.classes.len() {
            return bad("class list contains duplicates".into());
        }
        if self.training_samples == 0 || !self.training_samples.is_multiple_of(20) {
            return bad(format!(
                "training pool size must be a positive multiple of 20 for a 14:5:1 split, got {}",
                self.training_samples
            ));
        }
        if self.heldout_samples == 0 || self.frames_per_training_sample == 0 || self.frames_per_heldout_sample == 0 {
            return bad("sample and frame counts must be positive".into());
        }
        if self.augmented && self.modes_per_sample == 0 {
            return bad("modes per sample must be positive".into());
        }
        Ok(())
    }

    fn split_sizes(pool: usize) -> [usize; 3] {
        [pool * 14 / 20, pool * 5 / 20, pool / 20]
    }

    /// Original-frame counts per class.
    pub fn frame_counts(&self) -> SplitCounts {
        let [train, validation, test] = Self::split_sizes(self.training_samples * self.frames_per_training_sample);
        SplitCounts {
            train,
            validation,
            test,
            testing_i: self.heldout_samples * self.frames_per_heldout_sample,
        }
    }

    /// Mode-image counts per class (zero unless augmented).
    pub fn mode_counts(&self) -> SplitCounts {
        if !self.augmented {
            return SplitCounts::default();
        }
        let [train, validation, test] = Self::split_sizes(self.training_samples * self.modes_per_sample);
        SplitCounts {
            train,
            validation,
            test,
            testing_i: 0,
        }
    }

    /// Total images per class and split.
    pub fn per_class(&self) -> SplitCounts {
        self.frame_counts().add(&self.mode_counts())
    }
}

/// One frame sequence of the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSample {
    pub source_id: String,
    pub frames: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusClass {
    pub label: String,
    pub samples: Vec<CorpusSample>,
}

/// A corpus tree `{root}/{class}/{source_id}/frame_*.png`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub classes: Vec<CorpusClass>,
}

impl Corpus {
    /// Scans the tree. With `classes`, only those are loaded, in that order;
    /// otherwise every subdirectory is a class, in name order.
    pub fn scan(root: &Path, classes: Option<&[String]>) -> Result<Self> {
        let labels: Vec<String> = match classes {
            Some(list) => list.to_vec(),
            None => sorted_subdirs(root)?
                .into_iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
        };
        let mut out = Vec::with_capacity(labels.len());
        for label in labels {
            let class_dir = root.join(&label);
            if !class_dir.is_dir() {
                return Err(Error::InsufficientData(format!(
                    "class directory {} is missing",
                    class_dir.display()
                )));
            }
            let mut samples = Vec::new();
            for dir in sorted_subdirs(&class_dir)? {
                let source_id = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                samples.push(CorpusSample {
                    source_id,
                    frames: list_frames(&dir)?,
                });
            }
            out.push(CorpusClass { label, samples });
        }
        let corpus = Self {
            root: root.to_path_buf(),
            classes: out,
        };
        corpus.check_unique_sources()?;
        Ok(corpus)
    }

    fn check_unique_sources(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            for s in &c.samples {
                if !seen.insert(s.source_id.as_str()) {
                    return Err(Error::InsufficientData(format!(
                        "source id {} appears more than once in the corpus",
                        s.source_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn class(&self, label: &str) -> Option<&CorpusClass> {
        self.classes.iter().find(|c| c.label == label)
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Which samples of a class feed the training pool and which are held out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPartition {
    pub training_pool: Vec<String>,
    pub held_out: Vec<String>,
    pub unused: Vec<String>,
}

pub type SamplePartition = BTreeMap<String, ClassPartition>;

/// Seeded generator for one purpose and one class; independent of which other
/// classes are present, so the 4- and 5-class builds agree on shared classes.
fn class_rng(seed: u64, purpose: &str, label: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{purpose}/{label}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from_le_bytes(bytes));
    rng
}

pub fn partition_samples(corpus: &Corpus, layout: &DatasetLayout) -> Result<SamplePartition> {
    layout.validate()?;
    let need = layout.training_samples + layout.heldout_samples;
    let mut out = SamplePartition::new();
    for label in &layout.classes {
        let class = corpus
            .class(label)
            .ok_or_else(|| Error::InsufficientData(format!("class {label} not found in corpus")))?;
        if class.samples.len() < need {
            return Err(Error::InsufficientData(format!(
                "class {label} has {} samples, layout needs {need}",
                class.samples.len()
            )));
        }
        let mut ids: Vec<String> = class.samples.iter().map(|s| s.source_id.clone()).collect();
        ids.shuffle(&mut class_rng(layout.seed, "partition", label));
        let unused = ids.split_off(need);
        let held_out = ids.split_off(layout.training_samples);
        let sort = |mut v: Vec<String>| {
            v.sort();
            v
        };
        out.insert(
            label.clone(),
            ClassPartition {
                training_pool: sort(ids),
                held_out: sort(held_out),
                unused: sort(unused),
            },
        );
    }
    Ok(out)
}

/// A mode image available for augmentation, as listed in a `modes.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeImageRef {
    pub class_label: String,
    pub source_id: String,
    pub path: PathBuf,
    pub record: ModeRecord,
    pub hodmd: HodmdParams<f64>,
}

/// Collects every mode image listed in `modes.json` files below `dir`.
pub fn collect_mode_images(dir: &Path) -> Result<Vec<ModeImageRef>> {
    let mut out = Vec::new();
    let mut manifests: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Format {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        if entry.file_type().is_file() && entry.file_name() == MODES_MANIFEST {
            manifests.push(entry.into_path());
        }
    }
    for path in manifests {
        let manifest = ModesManifest::read(&path)?;
        let class_label = manifest.class_label.clone().ok_or_else(|| Error::Format {
            path: path.clone(),
            message: "manifest has no class label".into(),
        })?;
        let parent = path.parent().unwrap_or(Path::new("."));
        for record in manifest.modes {
            out.push(ModeImageRef {
                class_label: class_label.clone(),
                source_id: manifest.source_id.clone(),
                path: parent.join(&record.file),
                record,
                hodmd: manifest.hodmd,
            });
        }
    }
    Ok(out)
}

/// Where one output image comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum ImageSource {
    Frame {
        path: PathBuf,
    },
    Mode {
        path: PathBuf,
        record: ModeRecord,
        hodmd: HodmdParams<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedImage {
    pub split: Split,
    pub class_label: String,
    pub source_id: String,
    pub kind: ImageKind,
    /// 1-based frame number within the sample, or mode rank.
    pub idx: usize,
    pub source: ImageSource,
}

impl PlannedImage {
    pub fn file_name(&self) -> String {
        let width = if self.kind == ImageKind::Frame { 4 } else { 3 };
        format!("{}_{}_{:0width$}.png", self.source_id, self.kind.as_str(), self.idx)
    }

    pub fn relative_path(&self) -> PathBuf {
        Path::new(self.split.dir_name())
            .join(&self.class_label)
            .join(self.file_name())
    }
}

fn sample<'a>(corpus: &'a Corpus, label: &str, source_id: &str) -> &'a CorpusSample {
    corpus
        .class(label)
        .and_then(|c| c.samples.iter().find(|s| s.source_id == source_id))
        .expect("partitioned sample exists in corpus")
}

fn split_of(position: usize, sizes: [usize; 3]) -> Split {
    if position < sizes[0] {
        Split::Train
    } else if position < sizes[0] + sizes[1] {
        Split::Validation
    } else {
        Split::Test
    }
}

/// Start frame of each training-pool window.
pub fn window_starts(corpus: &Corpus, layout: &DatasetLayout, partition: &SamplePartition) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (label, part) in partition {
        let mut rng = class_rng(layout.seed, "start", label);
        for id in &part.training_pool {
            let available = sample(corpus, label, id).frames.len();
            let slack = available.saturating_sub(layout.frames_per_training_sample);
            let start = if layout.random_start && slack > 0 {
                rng.gen_range(0..=slack)
            } else {
                0
            };
            out.insert(id.clone(), start);
        }
    }
    out
}

/// Train / validation / test frames of the original dataset.
pub fn plan_dataset01(
    corpus: &Corpus,
    layout: &DatasetLayout,
    partition: &SamplePartition,
) -> Result<Vec<PlannedImage>> {
    let starts = window_starts(corpus, layout, partition);
    let f = layout.frames_per_training_sample;
    let mut plan = Vec::new();
    for label in &layout.classes {
        let part = &partition[label];
        let mut pool = Vec::with_capacity(part.training_pool.len() * f);
        for id in &part.training_pool {
            let s = sample(corpus, label, id);
            let start = starts[id];
            if s.frames.len() < start + f {
                return Err(Error::InsufficientData(format!(
                    "sample {id} has {} frames, needs {f} from frame {}",
                    s.frames.len(),
                    start + 1
                )));
            }
            pool.extend((start..start + f).map(|k| (id.clone(), k, s.frames[k].clone())));
        }
        if layout.split_mode == SplitMode::FrameShuffle {
            pool.shuffle(&mut class_rng(layout.seed, "frames", label));
        }
        let sizes = DatasetLayout::split_sizes(pool.len());
        plan.extend(pool.into_iter().enumerate().map(|(pos, (id, k, path))| PlannedImage {
            split: split_of(pos, sizes),
            class_label: label.clone(),
            source_id: id,
            kind: ImageKind::Frame,
            idx: k + 1,
            source: ImageSource::Frame { path },
        }));
    }
    Ok(plan)
}

/// The held-out `testing_I` frames.
pub fn plan_testing_i(
    corpus: &Corpus,
    layout: &DatasetLayout,
    partition: &SamplePartition,
) -> Result<Vec<PlannedImage>> {
    let h = layout.frames_per_heldout_sample;
    let mut plan = Vec::new();
    for label in &layout.classes {
        for id in &partition[label].held_out {
            let s = sample(corpus, label, id);
            if s.frames.len() < h {
                return Err(Error::InsufficientData(format!(
                    "held-out sample {id} has {} frames, needs {h}",
                    s.frames.len()
                )));
            }
            plan.extend((0..h).map(|k| PlannedImage {
                split: Split::TestingI,
                class_label: label.clone(),
                source_id: id.clone(),
                kind: ImageKind::Frame,
                idx: k + 1,
                source: ImageSource::Frame {
                    path: s.frames[k].clone(),
                },
            }));
        }
    }
    Ok(plan)
}

/// Mode images added by the augmented dataset. Any mode image from a held-out
/// sample is a leak and rejected outright; images of unused samples or of
/// classes outside the layout are ignored.
pub fn plan_mode_images(
    modes: &[ModeImageRef],
    layout: &DatasetLayout,
    partition: &SamplePartition,
) -> Result<Vec<PlannedImage>> {
    let mut owner: HashMap<&str, (&str, bool)> = HashMap::new();
    for (label, part) in partition {
        for id in &part.training_pool {
            owner.insert(id, (label, true));
        }
        for id in part.held_out.iter().chain(&part.unused) {
            owner.insert(id, (label, false));
        }
    }
    for (label, part) in partition {
        if let Some(m) = modes.iter().find(|m| part.held_out.contains(&m.source_id)) {
            return Err(Error::Leak {
                source_id: m.source_id.clone(),
                artifact: format!("mode image {} (class {label})", m.path.display()),
            });
        }
    }

    let mut per_sample: BTreeMap<(&str, &str), Vec<&ModeImageRef>> = BTreeMap::new();
    for m in modes {
        match owner.get(m.source_id.as_str()) {
            Some(&(label, true)) => {
                if label != m.class_label {
                    return Err(Error::Format {
                        path: m.path.clone(),
                        message: format!(
                            "mode image labelled {} but sample {} is in class {label}",
                            m.class_label, m.source_id
                        ),
                    });
                }
                per_sample.entry((label, m.source_id.as_str())).or_default().push(m);
            }
            Some(&(_, false)) => {}
            None if !layout.classes.contains(&m.class_label) => {}
            None => {
                return Err(Error::UnknownSource {
                    source_id: m.source_id.clone(),
                    artifact: m.path.display().to_string(),
                })
            }
        }
    }
    for list in per_sample.values_mut() {
        list.sort_by_key(|m| m.record.mode_index);
        list.dedup_by_key(|m| m.record.mode_index);
    }

    let per_class_needed = layout.training_samples * layout.modes_per_sample;
    let mut plan = Vec::new();
    for label in &layout.classes {
        let pool = &partition[label].training_pool;
        // Rank-major: the top mode of every sample first, then the second, ...
        let mut chosen: Vec<&ModeImageRef> = Vec::with_capacity(per_class_needed);
        let lists: Vec<&Vec<&ModeImageRef>> = pool
            .iter()
            .filter_map(|id| per_sample.get(&(label.as_str(), id.as_str())))
            .collect();
        let depth = lists.iter().map(|l| l.len()).max().unwrap_or(0);
        // Each sample contributes its top `modes_per_sample` first; deeper
        // ranks only fill a shortfall.
        for pass in [
            0..layout.modes_per_sample.min(depth),
            layout.modes_per_sample.min(depth)..depth,
        ] {
            for rank in pass {
                for l in &lists {
                    if chosen.len() < per_class_needed {
                        if let Some(m) = l.get(rank) {
                            chosen.push(m);
                        }
                    }
                }
            }
        }
        if chosen.len() < per_class_needed {
            return Err(Error::InsufficientData(format!(
                "class {label} has {} usable mode images from its training pool, needs {per_class_needed}",
                chosen.len()
            )));
        }
        chosen.sort_by(|a, b| (&a.source_id, a.record.mode_index).cmp(&(&b.source_id, b.record.mode_index)));
        chosen.shuffle(&mut class_rng(layout.seed, "modes", label));
        let sizes = DatasetLayout::split_sizes(chosen.len());
        plan.extend(chosen.into_iter().enumerate().map(|(pos, m)| PlannedImage {
            split: split_of(pos, sizes),
            class_label: label.clone(),
            source_id: m.source_id.clone(),
            kind: ImageKind::Mode,
            idx: m.record.mode_index,
            source: ImageSource::Mode {
                path: m.path.clone(),
                record: m.record.clone(),
                hodmd: m.hodmd,
            },
        }));
    }
    Ok(plan)
}

/// One written file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub split: Split,
    pub class_label: String,
    pub source_id: String,
    pub kind: ImageKind,
    pub idx: usize,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<ModeProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProvenance {
    pub record: ModeRecord,
    pub hodmd: HodmdParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub layout: DatasetLayout,
    pub per_class: BTreeMap<String, SplitCounts>,
    pub totals: SplitCounts,
    pub partition: SamplePartition,
    pub window_starts: BTreeMap<String, usize>,
    pub files: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn count(&self, split: Split, kind: Option<ImageKind>) -> usize {
        self.files
            .iter()
            .filter(|f| f.split == split && kind.is_none_or(|k| f.kind == k))
            .count()
    }
}

fn encode_image(item: &PlannedImage, crop_rect: Option<CropRect>) -> Result<Vec<u8>> {
    match &item.source {
        ImageSource::Mode { path, .. } => fs::read(path).map_err(|e| Error::io(path, e)),
        ImageSource::Frame { path } => {
            let mut img = load_frame(path)?;
            if let Some(rect) = crop_rect {
                img = crop_frame(&img, rect)?;
            }
            let mut bytes = Vec::new();
            img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                .map_err(|source| Error::Image {
                    path: path.clone(),
                    source,
                })?;
            Ok(bytes)
        }
    }
}

fn materialize(plan: &[PlannedImage], layout: &DatasetLayout, root: &Path) -> Result<Vec<ManifestEntry>> {
    let mut by_class: BTreeMap<&str, Vec<&PlannedImage>> = BTreeMap::new();
    for item in plan {
        by_class.entry(&item.class_label).or_default().push(item);
    }
    let written: Vec<Vec<ManifestEntry>> = by_class
        .into_par_iter()
        .map(|(_, items)| {
            items
                .into_iter()
                .map(|item| {
                    let rel = item.relative_path();
                    let path = root.join(&rel);
                    if let Some(parent) = path.parent() {
                        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    let bytes = encode_image(item, layout.crop)?;
                    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
                    Ok(ManifestEntry {
                        path: rel.to_string_lossy().replace('\\', "/"),
                        split: item.split,
                        class_label: item.class_label.clone(),
                        source_id: item.source_id.clone(),
                        kind: item.kind,
                        idx: item.idx,
                        sha256: hex::encode(Sha256::digest(&bytes)),
                        mode: match &item.source {
                            ImageSource::Mode { record, hodmd, .. } => Some(ModeProvenance {
                                record: record.clone(),
                                hodmd: *hodmd,
                            }),
                            ImageSource::Frame { .. } => None,
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<ManifestEntry> = written.into_iter().flatten().collect();
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

fn finish(
    name: &str,
    layout: &DatasetLayout,
    partition: SamplePartition,
    window_starts: BTreeMap<String, usize>,
    files: Vec<ManifestEntry>,
    root: &Path,
) -> Result<DatasetManifest> {
    let mut per_class: BTreeMap<String, SplitCounts> = layout
        .classes
        .iter()
        .map(|c| (c.clone(), SplitCounts::default()))
        .collect();
    let mut totals = SplitCounts::default();
    for f in &files {
        *per_class.get_mut(&f.class_label).expect("known class").get_mut(f.split) += 1;
        *totals.get_mut(f.split) += 1;
    }
    let manifest = DatasetManifest {
        dataset: name.to_string(),
        layout: layout.clone(),
        per_class,
        totals,
        partition,
        window_starts,
        files,
    };
    audit_leaks(&manifest)?;
    let path = root.join(DATASET_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn build(
    name: &str,
    corpus: &Corpus,
    layout: &DatasetLayout,
    modes: Option<&[ModeImageRef]>,
    with_pool: bool,
    root: &Path,
) -> Result<DatasetManifest> {
    let partition = partition_samples(corpus, layout)?;
    let mut plan = Vec::new();
    if with_pool {
        plan.extend(plan_dataset01(corpus, layout, &partition)?);
    }
    plan.extend(plan_testing_i(corpus, layout, &partition)?);
    if let Some(modes) = modes {
        plan.extend(plan_mode_images(modes, layout, &partition)?);
    }
    let starts = if with_pool {
        window_starts(corpus, layout, &partition)
    } else {
        BTreeMap::new()
    };
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let files = materialize(&plan, layout, root)?;
    finish(name, layout, partition, starts, files, root)
}

/// Original frames only: train / validation / test plus `testing_I`.
pub fn build_dataset01(corpus: &Corpus, layout: &DatasetLayout, root: &Path) -> Result<DatasetManifest> {
    let layout = layout.clone().augmented(false);
    build("dataset01", corpus, &layout, None, true, root)
}

/// Only the held-out `testing_I` split.
pub fn build_testing_i(corpus: &Corpus, layout: &DatasetLayout, root: &Path) -> Result<DatasetManifest> {
    build("testing_I", corpus, layout, None, false, root)
}

/// The frames of dataset 01 (same seed, same partition) plus mode images.
pub fn build_dataset02(
    corpus: &Corpus,
    layout: &DatasetLayout,
    modes: &[ModeImageRef],
    root: &Path,
) -> Result<DatasetManifest> {
    let layout = layout.clone().augmented(true);
    build("dataset02", corpus, &layout, Some(modes), true, root)
}

/// Fails if any source contributes both to `testing_I` and to a training split,
/// or if `testing_I` holds anything but original frames.
pub fn audit_leaks(manifest: &DatasetManifest) -> Result<()> {
    let held: BTreeSet<&str> = manifest
        .files
        .iter()
        .filter(|f| f.split == Split::TestingI)
        .map(|f| f.source_id.as_str())
        .collect();
    for f in &manifest.files {
        if f.split == Split::TestingI && f.kind != ImageKind::Frame {
            return Err(Error::Leak {
                source_id: f.source_id.clone(),
                artifact: format!("{} is a mode image inside testing_I", f.path),
            });
        }
        if f.split != Split::TestingI && held.contains(f.source_id.as_str()) {
            return Err(Error::Leak {
                source_id: f.source_id.clone(),
                artifact: f.path.clone(),
            });
        }
    }
    Ok(())
}

/// Content hashes found in more than one split, with the splits involved.
pub fn audit_duplicates(manifest: &DatasetManifest) -> Vec<(String, BTreeSet<Split>)> {
    let mut seen: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for f in &manifest.files {
        seen.entry(&f.sha256).or_default().insert(f.split);
    }
    seen.into_iter()
        .filter(|(_, splits)| splits.len() > 1)
        .map(|(h, s)| (h.to_string(), s))
        .collect()
}
