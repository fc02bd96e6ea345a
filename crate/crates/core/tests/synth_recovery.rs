mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use common::nearest;
use hodmd_core::pipeline::{analyze_sequence, AnalysisOptions};
use hodmd_core::snapshot::{load_sequence, to_snapshot_matrix};
use hodmd_core::synth::{
    generate, generate_class_corpus, ClassTemplate, CorpusSpec, Jitter, ModeSpec, SpatialPattern, SynthSpec,
};
use hodmd_core::{analyze, Params, Spectrum};
use walkdir::WalkDir;

fn three_mode_spec(noise: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        modes: vec![
            ModeSpec::new(
                0.0,
                0.0,
                [1.0, 0.0],
                SpatialPattern::GaussianBlob {
                    cx: 0.4,
                    cy: 0.5,
                    sigma: 0.2,
                },
            ),
            ModeSpec::new(
                -0.1,
                6.0 * PI,
                [0.6, 0.3],
                SpatialPattern::PlaneWave { kx: 1.0, ky: 0.5 },
            ),
            ModeSpec::new(
                -0.3,
                14.0 * PI,
                [0.2, -0.1],
                SpatialPattern::GaussianBlob {
                    cx: 0.7,
                    cy: 0.3,
                    sigma: 0.1,
                },
            ),
        ],
        geometry: [16, 12],
        frames: 80,
        dt: 0.01,
        noise_amplitude: noise,
        seed,
    }
}

/// Largest `|omega|` error of the recovered spectrum against the truth, over
/// the truth's eigenvalues.
fn frequency_error(truth: &Spectrum, got: &Spectrum) -> f64 {
    truth
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(m, &mu)| (got.frequencies()[nearest(got.eigenvalues(), mu)] - truth.frequencies()[m]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn clean_three_mode_field_is_recovered_exactly() {
    let spec = three_mode_spec(0.0, 0);
    let sample = generate::<f64>(&spec).unwrap();
    let params = Params::defaults(spec.frames, spec.dt);
    let (_, got) = analyze(&sample.field, &params).unwrap();
    let truth = &sample.truth;
    assert_eq!(got.len(), truth.len());
    for m in 0..truth.len() {
        let j = nearest(got.eigenvalues(), truth.eigenvalues()[m]);
        assert!((got.growth_rates()[j] - truth.growth_rates()[m]).abs() <= 1e-8);
        assert!((got.frequencies()[j] - truth.frequencies()[m]).abs() <= 1e-8);
        assert!((got.amplitude_abs(j) - truth.amplitude_abs(m)).abs() <= 1e-8);
        let da = (got.amplitudes()[j] - truth.amplitudes()[m]).norm();
        assert!(
            da <= 1e-8,
            "mode {m}: amplitude {} vs {}",
            got.amplitudes()[j],
            truth.amplitudes()[m]
        );
        let scaled = |s: &Spectrum, i: usize| s.modes().column(i) * s.amplitudes()[i];
        let du = (scaled(&got, j) - scaled(truth, m)).norm();
        assert!(du <= 1e-8, "mode {m}: |a u - a' u'| = {du:e}");
    }
}

#[test]
fn quantized_frames_recover_frequencies_to_quantization_accuracy() {
    let spec = three_mode_spec(0.0, 0);
    let sample = generate::<f64>(&spec).unwrap();
    let v = to_snapshot_matrix::<f64>(&sample.sequence).unwrap();
    let raw = sample.mapping.invert(&v).unwrap();
    let (_, got) = analyze(&raw, &Params::defaults(spec.frames, spec.dt)).unwrap();
    assert!(frequency_error(&sample.truth, &got) <= 0.05);
}

#[test]
fn frequency_error_grows_with_noise() {
    let levels = [1e-5, 1e-3, 1e-1];
    let errors: Vec<f64> = levels
        .iter()
        .map(|&noise| {
            (0..6)
                .map(|seed| {
                    let spec = three_mode_spec(noise, seed);
                    let sample = generate::<f64>(&spec).unwrap();
                    let (_, got) = analyze(&sample.field, &Params::defaults(spec.frames, spec.dt)).unwrap();
                    frequency_error(&sample.truth, &got)
                })
                .sum::<f64>()
                / 6.0
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[0] < w[1]), "mean errors {errors:?}");
}

fn two_class_spec(seed: u64) -> CorpusSpec {
    let pattern = SpatialPattern::GaussianBlob {
        cx: 0.5,
        cy: 0.5,
        sigma: 0.25,
    };
    let class = |label: &str, omega: f64| ClassTemplate {
        label: label.into(),
        modes: vec![
            ModeSpec::new(0.0, 0.0, [1.0, 0.0], pattern.clone()),
            ModeSpec::new(-0.2, omega, [0.8, 0.0], SpatialPattern::PlaneWave { kx: 1.0, ky: 0.0 }),
        ],
    };
    CorpusSpec {
        seed,
        samples_per_class: 4,
        frames_per_sample: 40,
        geometry: [10, 8],
        dt: 0.02,
        noise_amplitude: 0.01,
        jitter: Jitter::default(),
        write_float_frames: false,
        classes: vec![class("slow", 2.0 * PI * 3.0), class("fast", 2.0 * PI * 5.0)],
    }
}

fn files(root: &Path) -> Vec<(String, Vec<u8>)> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn corpus_generation_is_deterministic_per_seed() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    generate_class_corpus(&two_class_spec(5), a.path()).unwrap();
    generate_class_corpus(&two_class_spec(5), b.path()).unwrap();
    generate_class_corpus(&two_class_spec(6), c.path()).unwrap();
    let (fa, fb, fc) = (files(a.path()), files(b.path()), files(c.path()));
    assert_eq!(fa.len(), 2 * 4 * (40 + 1));
    assert_eq!(fa, fb);
    assert_eq!(
        fa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        fc.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    assert_ne!(fa, fc);
}

#[test]
fn nearest_dominant_frequency_separates_two_classes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = two_class_spec(9);
    let samples = generate_class_corpus(&spec, dir.path()).unwrap();
    let centres: Vec<f64> = spec.classes.iter().map(|c| c.modes[1].omega).collect();
    for s in &samples {
        let seq = load_sequence(&s.dir, spec.dt).unwrap();
        let a = analyze_sequence(&seq, &AnalysisOptions::new(spec.dt)).unwrap();
        let spectrum = &a.spectrum;
        let dominant = (0..spectrum.len())
            .filter(|&m| spectrum.frequencies()[m] > 0.0)
            .max_by(|&x, &y| spectrum.amplitude_abs(x).total_cmp(&spectrum.amplitude_abs(y)))
            .expect("an oscillating mode");
        let omega = spectrum.frequencies()[dominant];
        let predicted = (0..centres.len())
            .min_by(|&x, &y| (centres[x] - omega).abs().total_cmp(&(centres[y] - omega).abs()))
            .unwrap();
        assert_eq!(
            spec.classes[predicted].label, s.class_label,
            "{}: omega {omega}",
            s.source_id
        );
    }
}
