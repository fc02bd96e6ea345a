//! Synthetic image sequences with exactly known DMD spectra.
//!
//! A [`SynthSpec`] lists modes `(delta, omega, amplitude, pattern)`; frames are
//! `Re(sum_m a_m p_m exp((delta_m + i omega_m) t_k))` with `t_k = k dt`, plus
//! optional uniform noise, then mapped affinely onto `[0, 255]`. The ground
//! truth is returned in the same conventions as [`crate::hodmd::analyze`]
//! output: conjugate pairs materialized, unit-norm modes, phase convention
//! applied, sorted by amplitude.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use image::GrayImage;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cconj, Cplx, Real};
use crate::sidecar;
use crate::snapshot::{flat_index, ClassLabel, FrameSequence, SnapshotMatrix};
use crate::spectrum::{continuous_to_eigen, DmdSpectrum};

/// Spatial shape of a synthetic mode. Coordinates are fractions of the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialPattern {
    /// Real Gaussian bump centred at `(cx, cy)` with width `sigma`.
    GaussianBlob { cx: f64, cy: f64, sigma: f64 },
    /// Complex travelling wave `exp(2 pi i (kx x + ky y))`; `kx`, `ky` in cycles per frame.
    PlaneWave { kx: f64, ky: f64 },
    /// Real `+-1` checkerboard with square cells of `cell` pixels.
    Checkerboard { cell: usize },
}

impl SpatialPattern {
    fn validate(&self) -> Result<()> {
        match *self {
            SpatialPattern::GaussianBlob { sigma, cx, cy } if !(sigma > 0.0) || !cx.is_finite() || !cy.is_finite() => {
                Err(Error::DegenerateSpec(format!(
                    "gaussian blob needs sigma > 0, got {sigma}"
                )))
            }
            SpatialPattern::PlaneWave { kx, ky } if !kx.is_finite() || !ky.is_finite() => {
                Err(Error::DegenerateSpec("plane wave numbers must be finite".into()))
            }
            SpatialPattern::Checkerboard { cell: 0 } => {
                Err(Error::DegenerateSpec("checkerboard cell must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Unit-norm field over an `nx x ny` frame, row-major.
    pub fn field<T: Real>(&self, nx: usize, ny: usize) -> Vec<Cplx<T>> {
        let mut out = vec![Cplx::new(T::zero(), T::zero()); nx * ny];
        for y in 0..ny {
            for x in 0..nx {
                let fx = (x as f64 + 0.5) / nx as f64;
                let fy = (y as f64 + 0.5) / ny as f64;
                let (re, im) = match *self {
                    SpatialPattern::GaussianBlob { cx, cy, sigma } => {
                        let r2 = (fx - cx).powi(2) + (fy - cy).powi(2);
                        ((-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
                    }
                    SpatialPattern::PlaneWave { kx, ky } => {
                        let phase = 2.0 * PI * (kx * fx + ky * fy);
                        (phase.cos(), phase.sin())
                    }
                    SpatialPattern::Checkerboard { cell } => {
                        let parity = (x / cell + y / cell) % 2;
                        (if parity == 0 { 1.0 } else { -1.0 }, 0.0)
                    }
                };
                out[flat_index(nx, x, y)] = Cplx::new(T::lit(re), T::lit(im));
            }
        }
        let norm = out.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if norm > T::zero() {
            for z in out.iter_mut() {
                *z = z.unscale(norm);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Growth rate, 1/s.
    pub delta: f64,
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Complex amplitude as `[re, im]`.
    pub amplitude: [f64; 2],
    pub pattern: SpatialPattern,
}

impl ModeSpec {
    pub fn new(delta: f64, omega: f64, amplitude: [f64; 2], pattern: SpatialPattern) -> Self {
        Self {
            delta,
            omega,
            amplitude,
            pattern,
        }
    }
}

/// Full description of one synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub modes: Vec<ModeSpec>,
    /// `[nx, ny]`.
    pub geometry: [usize; 2],
    /// Number of frames `K`.
    pub frames: usize,
    pub dt: f64,
    /// Half-width of the uniform noise, relative to the peak absolute value of
    /// the clean field.
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::DegenerateSpec(format!(
                "need at least 2 frames, got {}",
                self.frames
            )));
        }
        if self.geometry[0] == 0 || self.geometry[1] == 0 {
            return Err(Error::DegenerateSpec("geometry must be at least 1x1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::DegenerateSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::DegenerateSpec(format!(
                "noise amplitude must be >= 0, got {}",
                self.noise_amplitude
            )));
        }
        if self.modes.iter().all(|m| m.amplitude == [0.0, 0.0]) {
            return Err(Error::DegenerateSpec("all mode amplitudes are zero".into()));
        }
        for m in &self.modes {
            m.pattern.validate()?;
            if !m.delta.is_finite() || !m.omega.is_finite() || !m.amplitude.iter().all(|a| a.is_finite()) {
                return Err(Error::DegenerateSpec("mode parameters must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.geometry[0] * self.geometry[1]
    }
}

/// Affine map from the raw field to 8-bit pixel values:
/// `pixel = (raw - offset) * scale`, rounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    /// Maps a `[0, 1]`-normalized snapshot matrix (pixel / 255) back to raw
    /// field units.
    pub fn invert<T: Real>(&self, v: &SnapshotMatrix<T>) -> Result<SnapshotMatrix<T>> {
        if self.scale == 0.0 {
            return Err(Error::InvalidParameter(
                "constant field has no invertible mapping".into(),
            ));
        }
        let factor = T::lit(255.0 / self.scale);
        let offset = T::lit(self.offset);
        let data = v.data().map(|x| x * factor + offset);
        SnapshotMatrix::new(data, v.nx(), v.ny(), v.dt())
    }
}

/// One generated sequence with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthSample<T: Real> {
    /// Quantized 8-bit frames.
    pub sequence: FrameSequence,
    /// Unquantized field (noise included) before the affine pixel mapping.
    pub field: SnapshotMatrix<T>,
    pub mapping: AffineMap,
    pub truth: DmdSpectrum<T>,
}

/// Ground truth spectrum of a spec, in analysis conventions.
pub fn ground_truth<T: Real>(spec: &SynthSpec) -> Result<DmdSpectrum<T>> {
    spec.validate()?;
    let [nx, ny] = spec.geometry;
    let dt = T::lit(spec.dt);
    let mut cols: Vec<Vec<Cplx<T>>> = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut amplitudes = Vec::new();
    for m in &spec.modes {
        let a = Cplx::new(T::lit(m.amplitude[0]), T::lit(m.amplitude[1]));
        if a == Cplx::new(T::zero(), T::zero()) {
            continue;
        }
        let p = m.pattern.field::<T>(nx, ny);
        let mu = continuous_to_eigen(T::lit(m.delta), T::lit(m.omega), dt);
        if m.omega == 0.0 {
            // Re(a p) e^{delta t}: a single real mode.
            cols.push(p.iter().map(|z| Cplx::new((a * z).re, T::zero())).collect());
            eigenvalues.push(Cplx::new(mu.re, T::zero()));
            amplitudes.push(Cplx::new(T::one(), T::zero()));
        } else {
            let half = a.unscale(T::lit(2.0));
            cols.push(p.clone());
            eigenvalues.push(mu);
            amplitudes.push(half);
            cols.push(p.iter().map(|z| cconj(*z)).collect());
            eigenvalues.push(cconj(mu));
            amplitudes.push(cconj(half));
        }
    }
    let modes = DMatrix::from_fn(nx * ny, cols.len(), |i, j| cols[j][i]);
    DmdSpectrum::from_parts(modes, eigenvalues, amplitudes, dt, (nx, ny))
}

/// Generates the frames of `spec` and its ground-truth spectrum.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<SynthSample<T>> {
    spec.validate()?;
    let [nx, ny] = spec.geometry;
    let j = nx * ny;
    let k = spec.frames;
    let dt = T::lit(spec.dt);

    let mut field = DMatrix::<T>::zeros(j, k);
    for m in &spec.modes {
        let a = Cplx::new(T::lit(m.amplitude[0]), T::lit(m.amplitude[1]));
        let p = m.pattern.field::<T>(nx, ny);
        for step in 0..k {
            let t = T::count(step) * dt;
            let growth = (T::lit(m.delta) * t).exp();
            let osc = Cplx::new((T::lit(m.omega) * t).cos(), (T::lit(m.omega) * t).sin()).scale(growth);
            let coeff = a * osc;
            for i in 0..j {
                field[(i, step)] += (coeff * p[i]).re;
            }
        }
    }

    if spec.noise_amplitude > 0.0 {
        let peak = field.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let half_width = peak * T::lit(spec.noise_amplitude);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in field.iter_mut() {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            *v += half_width * T::lit(u);
        }
    }

    let lo = field
        .iter()
        .fold(T::max_value().expect("bounded"), |acc, v| acc.min(*v));
    let hi = field
        .iter()
        .fold(T::min_value().expect("bounded"), |acc, v| acc.max(*v));
    let mapping = if hi > lo {
        AffineMap {
            offset: lo.as_f64(),
            scale: 255.0 / (hi - lo).as_f64(),
        }
    } else {
        AffineMap {
            offset: lo.as_f64(),
            scale: 0.0,
        }
    };

    let frames: Vec<GrayImage> = (0..k)
        .map(|step| {
            GrayImage::from_fn(nx as u32, ny as u32, |x, y| {
                let raw = field[(flat_index(nx, x as usize, y as usize), step)].as_f64();
                let q = if mapping.scale == 0.0 {
                    128.0
                } else {
                    ((raw - mapping.offset) * mapping.scale + 0.5).floor().clamp(0.0, 255.0)
                };
                image::Luma([q as u8])
            })
        })
        .collect();

    let sequence = FrameSequence::new(frames, spec.dt, "synthetic")?;
    let field = SnapshotMatrix::new(field, nx, ny, dt)?;
    let truth = ground_truth(spec)?;
    Ok(SynthSample {
        sequence,
        field,
        mapping,
        truth,
    })
}

/// Per-sample parameter jitter (relative half-widths) for corpus generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub growth: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Absolute shift of blob centres, in frame fractions.
    #[serde(default)]
    pub position: f64,
    /// Randomize the phase of every amplitude.
    #[serde(default)]
    pub random_phase: bool,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            frequency: 0.03,
            growth: 0.1,
            amplitude: 0.1,
            position: 0.03,
            random_phase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub label: String,
    pub modes: Vec<ModeSpec>,
}

/// A multi-class corpus description (the `gen-synth` spec file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub samples_per_class: usize,
    pub frames_per_sample: usize,
    pub geometry: [usize; 2],
    pub dt: f64,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub jitter: Jitter,
    /// Also write the unquantized field as `frames.bin`.
    #[serde(default)]
    pub write_float_frames: bool,
    pub classes: Vec<ClassTemplate>,
}

impl CorpusSpec {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::DegenerateSpec(format!(
                "need at least 2 classes, got {}",
                self.classes.len()
            )));
        }
        let mut labels: Vec<&str> = self.classes.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.classes.len() {
            return Err(Error::DegenerateSpec("class labels must be distinct".into()));
        }
        for (i, a) in self.classes.iter().enumerate() {
            a.label.parse::<ClassLabel>()?;
            for b in &self.classes[i + 1..] {
                if a.modes == b.modes {
                    return Err(Error::DegenerateSpec(format!(
                        "classes {} and {} share the same spectral template",
                        a.label, b.label
                    )));
                }
            }
        }
        if self.samples_per_class == 0 {
            return Err(Error::DegenerateSpec("samples_per_class must be >= 1".into()));
        }
        for class in &self.classes {
            self.template_spec(class, self.seed).validate()?;
        }
        Ok(())
    }

    fn template_spec(&self, class: &ClassTemplate, seed: u64) -> SynthSpec {
        SynthSpec {
            modes: class.modes.clone(),
            geometry: self.geometry,
            frames: self.frames_per_sample,
            dt: self.dt,
            noise_amplitude: self.noise_amplitude,
            seed,
        }
    }

    /// The jittered spec of sample `sample` of class `class_index`.
    pub fn sample_spec(&self, class_index: usize, sample: usize) -> SynthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((class_index as u64) << 32) | sample as u64);
        let class = &self.classes[class_index];
        let mut spec = self.template_spec(class, rng.gen());
        let j = self.jitter;
        let mut wobble = |rel: f64| if rel > 0.0 { rng.gen_range(-rel..=rel) } else { 0.0 };
        for m in spec.modes.iter_mut() {
            m.omega *= 1.0 + wobble(j.frequency);
            m.delta *= 1.0 + wobble(j.growth);
            let scale = 1.0 + wobble(j.amplitude);
            m.amplitude = [m.amplitude[0] * scale, m.amplitude[1] * scale];
            if let SpatialPattern::GaussianBlob { cx, cy, .. } = &mut m.pattern {
                *cx += wobble(j.position);
                *cy += wobble(j.position);
            }
        }
        if j.random_phase {
            for m in spec.modes.iter_mut() {
                let phase = rng.gen_range(0.0..2.0 * PI);
                let a = Cplx::new(m.amplitude[0], m.amplitude[1]) * Cplx::new(phase.cos(), phase.sin());
                // Steady modes keep a real amplitude so their sign pattern is preserved.
                if m.omega != 0.0 {
                    m.amplitude = [a.re, a.im];
                }
            }
        }
        spec
    }

    /// A five-class template mirroring the layout of the cardiac corpus:
    /// classes `H`, `DC`, `MI`, `Ob`, `HT` with distinct spectral content.
    pub fn five_class() -> Self {
        use SpatialPattern::*;
        let blob = |cx, cy, sigma| GaussianBlob { cx, cy, sigma };
        let tau = 2.0 * PI;
        let class = |label: &str, base: f64, step: f64, pattern: &dyn Fn(usize) -> SpatialPattern| ClassTemplate {
            label: label.into(),
            modes: std::iter::once(ModeSpec::new(0.0, 0.0, [1.0, 0.0], blob(0.5, 0.5, 0.3)))
                .chain((0..9).map(|i| {
                    let amp = 0.9 * 0.82f64.powi(i as i32);
                    ModeSpec::new(-0.05 * i as f64, tau * (base + step * i as f64), [amp, 0.0], pattern(i))
                }))
                .collect(),
        };
        Self {
            seed: 2024,
            samples_per_class: 26,
            frames_per_sample: 120,
            geometry: [32, 32],
            dt: 0.02,
            noise_amplitude: 0.01,
            jitter: Jitter::default(),
            write_float_frames: false,
            classes: vec![
                class("H", 1.0, 1.3, &|i| PlaneWave {
                    kx: 1.0 + (i % 3) as f64,
                    ky: (i / 3) as f64,
                }),
                class("DC", 1.5, 1.1, &|i| blob(0.2 + 0.07 * i as f64, 0.4, 0.12)),
                class("MI", 0.8, 1.7, &|i| Checkerboard { cell: 2 + i }),
                class("Ob", 2.0, 0.9, &|i| PlaneWave {
                    kx: -(i as f64) * 0.5,
                    ky: 1.0 + (i % 2) as f64,
                }),
                class("HT", 1.2, 1.5, &|i| blob(0.5, 0.15 + 0.08 * i as f64, 0.1)),
            ],
        }
    }
}

/// One generated corpus sample on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSample {
    pub class_label: String,
    pub source_id: String,
    pub dir: PathBuf,
    pub frames: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRecord {
    source_id: String,
    class_label: String,
    spec: SynthSpec,
    mapping: AffineMap,
    truth: Vec<TruthRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TruthRow {
    delta: f64,
    omega: f64,
    amplitude_abs: f64,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{:04}.png", index + 1)
}

/// Writes a corpus `out/{class}/{source_id}/frame_0001.png ...`, one
/// `sample.json` (spec, pixel mapping, ground truth) per sample, and optional
/// float frames. Samples are generated in parallel from per-sample seeds.
pub fn generate_class_corpus(spec: &CorpusSpec, out: &Path) -> Result<Vec<CorpusSample>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.classes.len())
        .flat_map(|c| (0..spec.samples_per_class).map(move |s| (c, s)))
        .collect();
    jobs.par_iter()
        .map(|&(c, s)| {
            let label = &spec.classes[c].label;
            let source_id = format!("{label}_{s:02}");
            let dir = out.join(label).join(&source_id);
            let sample_spec = spec.sample_spec(c, s);
            let sample = generate::<f64>(&sample_spec)?;
            write_sample(&dir, &source_id, label, &sample_spec, &sample, spec.write_float_frames)?;
            Ok(CorpusSample {
                class_label: label.clone(),
                source_id,
                dir,
                frames: sample_spec.frames,
            })
        })
        .collect()
}

fn write_sample(
    dir: &Path,
    source_id: &str,
    label: &str,
    spec: &SynthSpec,
    sample: &SynthSample<f64>,
    write_float: bool,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (k, frame) in sample.sequence.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(k));
        frame.save(&path).map_err(|source| Error::Image { path, source })?;
    }
    let truth = &sample.truth;
    let record = SampleRecord {
        source_id: source_id.into(),
        class_label: label.into(),
        spec: spec.clone(),
        mapping: sample.mapping,
        truth: (0..truth.len())
            .map(|m| TruthRow {
                delta: truth.growth_rates()[m],
                omega: truth.frequencies()[m],
                amplitude_abs: truth.amplitude_abs(m),
            })
            .collect(),
    };
    let path = dir.join("sample.json");
    let text = serde_json::to_string_pretty(&record).expect("serializable record");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    if write_float {
        let f = &sample.field;
        sidecar::write_real(&dir.join("frames.bin"), f.data(), f.nx(), f.ny(), spec.dt)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn steady() -> SynthSpec {
        SynthSpec {
            modes: vec![ModeSpec::new(
                0.0,
                0.0,
                [2.0, 0.0],
                SpatialPattern::GaussianBlob {
                    cx: 0.5,
                    cy: 0.5,
                    sigma: 0.2,
                },
            )],
            geometry: [8, 6],
            frames: 5,
            dt: 0.1,
            noise_amplitude: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn patterns_are_unit_norm() {
        for p in [
            SpatialPattern::GaussianBlob {
                cx: 0.3,
                cy: 0.6,
                sigma: 0.1,
            },
            SpatialPattern::PlaneWave { kx: 2.0, ky: -1.0 },
            SpatialPattern::Checkerboard { cell: 3 },
        ] {
            let f = p.field::<f64>(10, 7);
            let n: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn steady_mode_gives_identical_frames() {
        let s = generate::<f64>(&steady()).unwrap();
        let frames = s.sequence.frames();
        assert!(frames.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(s.truth.len(), 1);
        assert_abs_diff_eq!(s.truth.amplitude_abs(0), 2.0, epsilon = 1e-12);
        assert_eq!(s.truth.frequencies()[0], 0.0);
    }

    #[test]
    fn oscillating_mode_materializes_conjugate_pair() {
        let mut spec = steady();
        spec.modes[0].omega = 3.0;
        spec.modes[0].amplitude = [0.0, 2.0];
        let truth = ground_truth::<f64>(&spec).unwrap();
        assert_eq!(truth.len(), 2);
        assert_abs_diff_eq!(truth.frequencies()[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(truth.frequencies()[1], 3.0, epsilon = 1e-12);
        for m in 0..2 {
            assert_abs_diff_eq!(truth.amplitude_abs(m), 1.0, epsilon = 1e-14);
        }
        assert_eq!(truth.amplitudes()[0], cconj(truth.amplitudes()[1]));
    }

    #[test]
    fn zero_amplitudes_are_degenerate() {
        let mut spec = steady();
        spec.modes[0].amplitude = [0.0, 0.0];
        assert!(matches!(generate::<f64>(&spec), Err(Error::DegenerateSpec(_))));
        let mut spec = steady();
        spec.frames = 1;
        assert!(generate::<f64>(&spec).is_err());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let mut spec = steady();
        spec.modes[0].omega = 5.0;
        spec.noise_amplitude = 0.05;
        let a = generate::<f64>(&spec).unwrap();
        let b = generate::<f64>(&spec).unwrap();
        assert_eq!(a.sequence, b.sequence);
        assert_eq!(a.field, b.field);
        spec.seed = 2;
        let c = generate::<f64>(&spec).unwrap();
        assert_ne!(a.field, c.field);
    }

    #[test]
    fn mapping_inverts_quantized_frames_to_within_half_a_level() {
        let mut spec = steady();
        spec.modes[0].omega = 5.0;
        let s = generate::<f64>(&spec).unwrap();
        let v = crate::snapshot::to_snapshot_matrix::<f64>(&s.sequence).unwrap();
        let back = s.mapping.invert(&v).unwrap();
        let level = 1.0 / s.mapping.scale;
        let err = (back.data() - s.field.data()).amax();
        assert!(err <= 0.5 * level + 1e-12, "err {err} level {level}");
    }

    #[test]
    fn five_class_spec_is_valid_and_round_trips_through_json() {
        let spec = CorpusSpec::five_class();
        spec.validate().unwrap();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        assert_eq!(CorpusSpec::from_json(&text, Path::new("x")).unwrap(), spec);
    }

    #[test]
    fn malformed_corpus_spec_reports_line() {
        let text = "{\n  \"seed\": 1,\n  \"samples_per_class\": oops\n}";
        match CorpusSpec::from_json(text, Path::new("bad.json")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sample_specs_are_jittered_but_reproducible() {
        let spec = CorpusSpec::five_class();
        assert_eq!(spec.sample_spec(1, 3), spec.sample_spec(1, 3));
        assert_ne!(spec.sample_spec(1, 3), spec.sample_spec(1, 4));
        assert_ne!(spec.sample_spec(1, 3).seed, spec.sample_spec(2, 3).seed);
    }
}
