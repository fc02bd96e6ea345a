//! Frame sequences and the snapshot matrix built from them.
//!
//! Frames are flattened row-major: pixel `(x, y)` (column `x`, row `y`) of an
//! `nx x ny` frame lands at row `y * nx + x` of the snapshot column. The same
//! order is used everywhere modes are reshaped back into images.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, GrayImage};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Class tag attached to a sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ClassLabel {
    Healthy,
    DiabeticCardiomyopathy,
    MyocardialInfarction,
    Obesity,
    TacHypertrophy,
    Synthetic(String),
}

impl ClassLabel {
    pub fn as_str(&self) -> &str {
        match self {
            ClassLabel::Healthy => "H",
            ClassLabel::DiabeticCardiomyopathy => "DC",
            ClassLabel::MyocardialInfarction => "MI",
            ClassLabel::Obesity => "Ob",
            ClassLabel::TacHypertrophy => "HT",
            ClassLabel::Synthetic(tag) => tag,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = match s {
            "H" => ClassLabel::Healthy,
            "DC" => ClassLabel::DiabeticCardiomyopathy,
            "MI" => ClassLabel::MyocardialInfarction,
            "Ob" => ClassLabel::Obesity,
            "HT" => ClassLabel::TacHypertrophy,
            "" => return Err(Error::InvalidParameter("empty class label".into())),
            other if other.contains(['/', '\\']) => {
                return Err(Error::InvalidParameter(format!(
                    "class label {other:?} contains a path separator"
                )))
            }
            other => ClassLabel::Synthetic(other.to_string()),
        };
        Ok(label)
    }
}

impl From<ClassLabel> for String {
    fn from(label: ClassLabel) -> String {
        label.as_str().to_string()
    }
}

impl TryFrom<String> for ClassLabel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// An ordered sequence of equally sized 8-bit grayscale frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<GrayImage>,
    dt: f64,
    pub source_id: String,
    pub class_label: Option<ClassLabel>,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayImage>, dt: f64, source_id: impl Into<String>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames { found: frames.len() });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "frame interval dt must be positive, got {dt}"
            )));
        }
        let expected = frames[0].dimensions();
        if expected.0 == 0 || expected.1 == 0 {
            return Err(Error::InvalidParameter("frames must be at least 1x1".into()));
        }
        for (k, f) in frames.iter().enumerate() {
            if f.dimensions() != expected {
                return Err(Error::MixedDimensions {
                    expected,
                    found: f.dimensions(),
                    what: format!("frame {k}"),
                });
            }
        }
        Ok(Self {
            frames,
            dt,
            source_id: source_id.into(),
            class_label: None,
        })
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.class_label = Some(label);
        self
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(nx, ny)`: horizontal and vertical pixel counts.
    pub fn geometry(&self) -> (usize, usize) {
        let (w, h) = self.frames[0].dimensions();
        (w as usize, h as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Keeps frames `start..start + count`.
    pub fn window(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.frames.len() {
            return Err(Error::InsufficientData(format!(
                "sample {} has {} frames, window {}..{} requested",
                self.source_id,
                self.frames.len(),
                start,
                start + count
            )));
        }
        let mut out = Self::new(
            self.frames[start..start + count].to_vec(),
            self.dt,
            self.source_id.clone(),
        )?;
        out.class_label = self.class_label.clone();
        Ok(out)
    }
}

/// Rectangle of retained pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl CropRect {
    pub fn new(x0: u32, y0: u32, width: u32, height: u32) -> Self {
        Self { x0, y0, width, height }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    fn fits(&self, width: u32, height: u32) -> bool {
        self.width >= 1
            && self.height >= 1
            && u64::from(self.x0) + u64::from(self.width) <= u64::from(width)
            && u64::from(self.y0) + u64::from(self.height) <= u64::from(height)
    }
}

impl fmt::Display for CropRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x0, self.y0, self.width, self.height)
    }
}

/// Per-dataset sidecar configuration: crop rectangle and frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropFile {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub dt: Option<f64>,
}

impl CropFile {
    pub fn rect(&self) -> CropRect {
        CropRect::new(self.x0, self.y0, self.width, self.height)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Crops a single frame.
pub fn crop_frame(frame: &GrayImage, rect: CropRect) -> Result<GrayImage> {
    let (w, h) = frame.dimensions();
    if !rect.fits(w, h) {
        return Err(Error::CropOutOfBounds {
            rect: rect.to_string(),
            width: w,
            height: h,
        });
    }
    Ok(image::imageops::crop_imm(frame, rect.x0, rect.y0, rect.width, rect.height).to_image())
}

/// Crops every frame of the sequence identically.
pub fn crop(seq: &FrameSequence, rect: CropRect) -> Result<FrameSequence> {
    let frames = seq.frames.iter().map(|f| crop_frame(f, rect)).collect::<Result<_>>()?;
    Ok(FrameSequence {
        frames,
        dt: seq.dt,
        source_id: seq.source_id.clone(),
        class_label: seq.class_label.clone(),
    })
}

/// Converts a decoded image to 8-bit gray using `0.299 R + 0.587 G + 0.114 B`,
/// rounded to nearest. Gray inputs pass through unchanged; alpha is ignored.
pub fn to_gray(img: DynamicImage) -> GrayImage {
    match img {
        DynamicImage::ImageLuma8(g) => g,
        DynamicImage::ImageLumaA8(ga) => {
            GrayImage::from_fn(ga.width(), ga.height(), |x, y| image::Luma([ga.get_pixel(x, y)[0]]))
        }
        other => {
            let rgb = other.to_rgb8();
            GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                let [r, g, b] = rgb.get_pixel(x, y).0;
                image::Luma([luma(r, g, b)])
            })
        }
    }
}

/// Fixed-weight luma, computed in integer arithmetic so results are exact:
/// `(299 R + 587 G + 114 B + 500) / 1000`.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let sum = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((sum + 500) / 1000) as u8
}

pub fn load_frame(path: &Path) -> Result<GrayImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(to_gray(img))
}

/// Image files directly inside `dir`, in lexicographic filename order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Loads every PNG in `dir` (filename order) as one grayscale sequence.
///
/// The directory name becomes the `source_id`.
pub fn load_sequence(dir: &Path, dt: f64) -> Result<FrameSequence> {
    let paths = list_frames(dir)?;
    if paths.len() < 2 {
        return Err(Error::TooFewFrames { found: paths.len() });
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let frame = load_frame(p)?;
        if let Some(first) = frames.first() {
            let first: &GrayImage = first;
            if first.dimensions() != frame.dimensions() {
                return Err(Error::MixedDimensions {
                    expected: first.dimensions(),
                    found: frame.dimensions(),
                    what: p.display().to_string(),
                });
            }
        }
        frames.push(frame);
    }
    let source_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into());
    FrameSequence::new(frames, dt, source_id)
}

/// `J x K` real matrix of flattened frames plus geometry and frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix<T: Real> {
    data: DMatrix<T>,
    nx: usize,
    ny: usize,
    dt: T,
}

impl<T: Real> SnapshotMatrix<T> {
    /// Wraps an existing `J x K` matrix whose columns are row-major flattened frames.
    pub fn new(data: DMatrix<T>, nx: usize, ny: usize, dt: T) -> Result<Self> {
        if nx == 0 || ny == 0 || data.nrows() != nx * ny {
            return Err(Error::InvalidParameter(format!(
                "snapshot matrix has {} rows but geometry is {nx}x{ny}",
                data.nrows()
            )));
        }
        if data.ncols() < 2 {
            return Err(Error::TooFewFrames { found: data.ncols() });
        }
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !data.iter().all(|v| v.is_finite_value()) {
            return Err(Error::InvalidParameter("snapshot matrix has non-finite entries".into()));
        }
        Ok(Self { data, nx, ny, dt })
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of pixels `J`.
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    /// Number of snapshots `K`.
    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Row index of pixel `(x, y)`.
    pub fn flat_index(&self, x: usize, y: usize) -> usize {
        flat_index(self.nx, x, y)
    }

    /// Tensor view: value at pixel `(x, y)` of snapshot `k`.
    pub fn at(&self, x: usize, y: usize, k: usize) -> T {
        self.data[(self.flat_index(x, y), k)]
    }

    /// Snapshots `start..start + count` as a new matrix.
    pub fn columns(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.snapshots() {
            return Err(Error::InvalidParameter(format!(
                "column range {start}..{} exceeds {} snapshots",
                start + count,
                self.snapshots()
            )));
        }
        Self::new(self.data.columns(start, count).into_owned(), self.nx, self.ny, self.dt)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            data: self.data.scale(c),
            nx: self.nx,
            ny: self.ny,
            dt: self.dt,
        }
    }

    /// Re-quantizes column `k` (values in `[0, 1]`) to an 8-bit frame.
    pub fn frame(&self, k: usize) -> GrayImage {
        let col = self.data.column(k);
        GrayImage::from_fn(self.nx as u32, self.ny as u32, |x, y| {
            let v = col[flat_index(self.nx, x as usize, y as usize)] * T::lit(255.0);
            let q = (v + T::lit(0.5)).floor().max(T::zero()).min(T::lit(255.0));
            image::Luma([q.as_f64() as u8])
        })
    }
}

#[inline]
pub fn flat_index(nx: usize, x: usize, y: usize) -> usize {
    y * nx + x
}

/// Builds the snapshot matrix; pixel values are divided by 255.
pub fn to_snapshot_matrix<T: Real>(seq: &FrameSequence) -> Result<SnapshotMatrix<T>> {
    let (nx, ny) = seq.geometry();
    let k = seq.len();
    let full = T::lit(255.0);
    let mut data = DMatrix::<T>::zeros(nx * ny, k);
    for (j, frame) in seq.frames.iter().enumerate() {
        // GrayImage's raw buffer is already row-major.
        for (i, &p) in frame.as_raw().iter().enumerate() {
            data[(i, j)] = T::count(p as usize) / full;
        }
    }
    SnapshotMatrix::new(data, nx, ny, T::lit(seq.dt))
}
