#![allow(dead_code)]

use hodmd_core::{Cplx, Snapshots};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One real component of a clean test signal: `delta`, `omega` (rad/s) and
/// the modulus of its amplitude. `omega != 0` materializes a conjugate pair.
#[derive(Debug, Clone, Copy)]
pub struct Component {
    pub delta: f64,
    pub omega: f64,
    pub amplitude: f64,
}

/// `sum_m Re(2 a_m u_m exp(lambda_m t))` (or `a_m u_m` for steady components)
/// with random unit-norm complex fields `u_m` and random amplitude phases.
pub fn clean_signal<R: Rng>(rng: &mut R, nx: usize, ny: usize, k: usize, dt: f64, parts: &[Component]) -> Snapshots {
    let j = nx * ny;
    let mut data = DMatrix::<f64>::zeros(j, k);
    for p in parts {
        let steady = p.omega == 0.0;
        let u: Vec<Cplx<f64>> = (0..j)
            .map(|_| {
                let im = if steady { 0.0 } else { rng.gen_range(-1.0..1.0) };
                Cplx::new(rng.gen_range(-1.0..1.0), im)
            })
            .collect();
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let phase = if steady {
            0.0
        } else {
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
        };
        let a = Cplx::from_polar(p.amplitude, phase);
        for col in 0..k {
            let t = col as f64 * dt;
            let e = a * Cplx::new(p.delta * t, p.omega * t).exp();
            let f = if steady { 1.0 } else { 2.0 };
            for row in 0..j {
                data[(row, col)] += f * (e * u[row] / norm).re;
            }
        }
    }
    Snapshots::new(data, nx, ny, dt).unwrap()
}

/// Index of the entry of `values` nearest to `target`.
pub fn nearest(values: &[Cplx<f64>], target: Cplx<f64>) -> usize {
    (0..values.len())
        .min_by(|&a, &b| (values[a] - target).norm().total_cmp(&(values[b] - target).norm()))
        .expect("non-empty")
}

/// Frame interval of [`random_case`] signals.
pub const DT: f64 = 0.05;

/// A clean signal with one steady component and `pairs` damped oscillations
/// whose frequencies and amplitudes are well separated.
pub fn random_case(seed: u64, pairs: usize) -> (Snapshots, Vec<Component>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = vec![Component {
        delta: 0.0,
        omega: 0.0,
        amplitude: rng.gen_range(1.0..3.0),
    }];
    for p in 0..pairs {
        parts.push(Component {
            delta: rng.gen_range(-0.8..0.0),
            omega: 3.0 + 5.0 * p as f64 + rng.gen_range(0.0..2.0),
            amplitude: 1.5f64.powi(-(p as i32 + 1)) * rng.gen_range(0.9..1.0) * 4.0,
        });
    }
    let k = rng.gen_range(30..=60);
    let v = clean_signal(&mut rng, 8, 6, k, DT, &parts);
    (v, parts)
}
