//! DMD spectra: modes, amplitudes, growth rates and frequencies, together with
//! the conventions that make them comparable (ordering, mode phase, conjugate
//! pairing) and the operations defined on them (retention, reconstruction).

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cabs, cconj, polar, Cplx, Real};

/// Retained DMD modes and their continuous-time parameters.
///
/// Modes are stored as columns of `modes`, each with unit 2-norm and rotated
/// so that its largest-magnitude entry is real and positive. Entries are sorted
/// by `|a|` descending, ties broken by `|omega|` then `omega` ascending.
///
/// A spectrum produced directly by [`crate::hodmd::dmd_d`] holds modes in the
/// reduced `N`-dimensional space; [`DmdSpectrum::lift`] maps them to pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdSpectrum<T: Real> {
    modes: DMatrix<Cplx<T>>,
    amplitudes: Vec<Cplx<T>>,
    eigenvalues: Vec<Cplx<T>>,
    growth_rates: Vec<T>,
    frequencies: Vec<T>,
    dt: T,
    geometry: (usize, usize),
    reduced: bool,
}

/// Converts a discrete-time eigenvalue to `(delta, omega)`:
/// `delta = ln|mu| / dt`, `omega = arg(mu) / dt` with `arg` in `(-pi, pi]`.
pub fn eigen_to_continuous<T: Real>(mu: Cplx<T>, dt: T) -> Result<(T, T)> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let modulus = cabs(mu);
    if modulus == T::zero() {
        return Err(Error::DefectiveEigenvalue);
    }
    let mut arg = mu.im.atan2(mu.re);
    if arg <= -T::pi() {
        arg = T::pi();
    }
    Ok((modulus.ln() / dt, arg / dt))
}

/// Inverse of [`eigen_to_continuous`]: `mu = exp((delta + i omega) dt)`.
pub fn continuous_to_eigen<T: Real>(delta: T, omega: T, dt: T) -> Cplx<T> {
    polar((delta * dt).exp(), omega * dt)
}

/// Rotates `col` so its largest-magnitude entry is real and positive.
/// Returns the unit factor `e^{i phi}` that was divided out.
///
/// Entries within a relative `1e-9` of the largest modulus count as tied and
/// the first of them is used, so fields of constant modulus (plane waves)
/// normalize the same way however rounding perturbs them.
pub(crate) fn normalize_phase<T: Real>(col: &mut [Cplx<T>]) -> Cplx<T> {
    let peak = col.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)));
    if peak == T::zero() {
        return Cplx::new(T::one(), T::zero());
    }
    let floor = peak * (T::one() - T::floor_tol(1e-9, 64.0));
    let best = col.iter().position(|z| cabs(*z) >= floor).expect("peak entry exists");
    let best_abs = cabs(col[best]);
    let phase = col[best].unscale(best_abs);
    let inv = cconj(phase);
    for z in col.iter_mut() {
        *z *= inv;
    }
    col[best] = Cplx::new(best_abs, T::zero());
    phase
}

fn sort_key_cmp<T: Real>(a: (T, T), b: (T, T)) -> Ordering {
    // a = (|amp|, omega)
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(Ordering::Equal))
        .then_with(|| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
}

impl<T: Real> DmdSpectrum<T> {
    /// Assembles a spectrum from modes, discrete eigenvalues and amplitudes.
    ///
    /// Each mode is normalized to unit norm (its norm moved into the
    /// amplitude), phase-normalized, and the entries are sorted.
    pub fn from_parts(
        modes: DMatrix<Cplx<T>>,
        eigenvalues: Vec<Cplx<T>>,
        amplitudes: Vec<Cplx<T>>,
        dt: T,
        geometry: (usize, usize),
    ) -> Result<Self> {
        let m = eigenvalues.len();
        if modes.ncols() != m || amplitudes.len() != m {
            return Err(Error::InvalidParameter(format!(
                "spectrum parts disagree: {} modes, {} eigenvalues, {} amplitudes",
                modes.ncols(),
                m,
                amplitudes.len()
            )));
        }
        let mut modes = modes;
        let mut amplitudes = amplitudes;
        let mut growth_rates = Vec::with_capacity(m);
        let mut frequencies = Vec::with_capacity(m);
        for j in 0..m {
            let (delta, omega) = eigen_to_continuous(eigenvalues[j], dt)?;
            growth_rates.push(delta);
            frequencies.push(omega);
            let mut col: Vec<Cplx<T>> = modes.column(j).iter().copied().collect();
            let norm = col.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
            if norm > T::zero() {
                for z in col.iter_mut() {
                    *z = z.unscale(norm);
                }
                amplitudes[j] = amplitudes[j].scale(norm);
            }
            let phase = normalize_phase(&mut col);
            amplitudes[j] *= phase;
            for (i, z) in col.into_iter().enumerate() {
                modes[(i, j)] = z;
            }
        }
        let mut spectrum = Self {
            modes,
            amplitudes,
            eigenvalues,
            growth_rates,
            frequencies,
            dt,
            geometry,
            reduced: false,
        };
        spectrum.reduced = !spectrum.is_pixel_sized();
        spectrum.sort();
        Ok(spectrum)
    }

    /// Rebuilds a spectrum from values that already follow the conventions
    /// (unit-norm, phase-normalized, sorted), e.g. when reloading saved
    /// results. Nothing is renormalized or reordered, so a save/load cycle is
    /// bit-exact.
    pub fn from_stored(
        modes: DMatrix<Cplx<T>>,
        eigenvalues: Vec<Cplx<T>>,
        amplitudes: Vec<Cplx<T>>,
        dt: T,
        geometry: (usize, usize),
    ) -> Result<Self> {
        let m = eigenvalues.len();
        if modes.ncols() != m || amplitudes.len() != m {
            return Err(Error::InvalidParameter(format!(
                "spectrum parts disagree: {} modes, {} eigenvalues, {} amplitudes",
                modes.ncols(),
                m,
                amplitudes.len()
            )));
        }
        let (growth_rates, frequencies) = eigenvalues
            .iter()
            .map(|&mu| eigen_to_continuous(mu, dt))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let mut spectrum = Self {
            modes,
            amplitudes,
            eigenvalues,
            growth_rates,
            frequencies,
            dt,
            geometry,
            reduced: false,
        };
        spectrum.reduced = !spectrum.is_pixel_sized();
        Ok(spectrum)
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            sort_key_cmp(
                (cabs(self.amplitudes[a]), self.frequencies[a]),
                (cabs(self.amplitudes[b]), self.frequencies[b]),
            )
        });
        *self = self.select(&order);
    }

    /// Sub-spectrum with the given entries, in the given order.
    pub(crate) fn select(&self, idx: &[usize]) -> Self {
        let rows = self.modes.nrows();
        let modes = DMatrix::from_fn(rows, idx.len(), |i, j| self.modes[(i, idx[j])]);
        Self {
            modes,
            amplitudes: idx.iter().map(|&i| self.amplitudes[i]).collect(),
            eigenvalues: idx.iter().map(|&i| self.eigenvalues[i]).collect(),
            growth_rates: idx.iter().map(|&i| self.growth_rates[i]).collect(),
            frequencies: idx.iter().map(|&i| self.frequencies[i]).collect(),
            dt: self.dt,
            geometry: self.geometry,
            reduced: self.reduced,
        }
    }

    fn is_pixel_sized(&self) -> bool {
        self.modes.nrows() == self.geometry.0 * self.geometry.1
    }

    /// Marks the modes as living in the reduced SVD space.
    pub(crate) fn into_reduced(mut self) -> Self {
        self.reduced = true;
        self
    }

    /// Number of modes `M`.
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn m_retained(&self) -> usize {
        self.len()
    }

    pub fn modes(&self) -> &DMatrix<Cplx<T>> {
        &self.modes
    }

    pub fn amplitudes(&self) -> &[Cplx<T>] {
        &self.amplitudes
    }

    pub fn amplitude_abs(&self, m: usize) -> T {
        cabs(self.amplitudes[m])
    }

    pub fn eigenvalues(&self) -> &[Cplx<T>] {
        &self.eigenvalues
    }

    pub fn growth_rates(&self) -> &[T] {
        &self.growth_rates
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Pixel geometry `(nx, ny)` of the analyzed frames.
    pub fn geometry(&self) -> (usize, usize) {
        self.geometry
    }

    /// True when modes live in pixel space (`J = nx * ny` rows) rather than
    /// in the reduced SVD space.
    pub fn is_full_space(&self) -> bool {
        !self.reduced
    }

    /// Index of the conjugate partner of mode `m`, or `Some(m)` for a real
    /// eigenvalue. Partners are matched on the discrete eigenvalue within a
    /// relative tolerance of `1e-6`.
    pub fn conjugate_partner(&self, m: usize) -> Option<usize> {
        let mu = self.eigenvalues[m];
        if mu.im == T::zero() {
            return Some(m);
        }
        let target = cconj(mu);
        let tol = T::lit(1e-6) * cabs(mu).max(T::one());
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.len() {
            if j == m {
                continue;
            }
            let dist = cabs(self.eigenvalues[j] - target);
            if dist <= tol && best.is_none_or(|(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Maps reduced modes through the spatial basis `W` (`J x N`), renormalizes
    /// to unit norm and re-applies the phase convention.
    pub fn lift(&self, basis_w: &DMatrix<T>) -> Result<Self> {
        if basis_w.ncols() != self.modes.nrows() {
            return Err(Error::InvalidParameter(format!(
                "basis has {} columns but modes have {} rows",
                basis_w.ncols(),
                self.modes.nrows()
            )));
        }
        let re = basis_w * self.modes.map(|z| z.re);
        let im = basis_w * self.modes.map(|z| z.im);
        let modes = DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Cplx::new(re[(i, j)], im[(i, j)]));
        Self::from_parts(
            modes,
            self.eigenvalues.clone(),
            self.amplitudes.clone(),
            self.dt,
            self.geometry,
        )
    }

    /// Multiplies every amplitude by `c`.
    pub fn scale_amplitudes(&mut self, c: T) {
        for a in self.amplitudes.iter_mut() {
            *a = a.scale(c);
        }
    }
}

/// Keeps the modes whose relative amplitude `|a_m| / |a_1|` exceeds `eps_dmd`,
/// plus the conjugate partner of every kept mode.
pub fn retain_modes<T: Real>(spectrum: &DmdSpectrum<T>, eps_dmd: T) -> Result<DmdSpectrum<T>> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if !(eps_dmd >= T::zero() && eps_dmd < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "eps_dmd must lie in [0, 1), got {eps_dmd}"
        )));
    }
    let lead = spectrum.amplitude_abs(0);
    let mut keep = vec![false; spectrum.len()];
    if lead == T::zero() {
        keep.fill(true);
    } else {
        for (m, k) in keep.iter_mut().enumerate() {
            *k = spectrum.amplitude_abs(m) / lead > eps_dmd;
        }
    }
    for m in 0..spectrum.len() {
        if keep[m] {
            if let Some(p) = spectrum.conjugate_partner(m) {
                keep[p] = true;
            }
        }
    }
    let idx: Vec<usize> = (0..spectrum.len()).filter(|&m| keep[m]).collect();
    Ok(spectrum.select(&idx))
}

/// Evaluates `Re(sum_m a_m u_m exp((delta_m + i omega_m) t))` at each time.
///
/// Times are measured from the first analyzed snapshot. Reduced spectra are
/// lifted through `basis_w` first; full-space spectra ignore it.
pub fn reconstruct<T: Real>(
    spectrum: &DmdSpectrum<T>,
    basis_w: Option<&DMatrix<T>>,
    times: &[T],
) -> Result<DMatrix<T>> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("reconstruction needs at least one time".into()));
    }
    let lifted;
    let spectrum = if spectrum.is_full_space() {
        spectrum
    } else {
        let w = basis_w
            .ok_or_else(|| Error::InvalidParameter("reduced spectrum needs the spatial basis to reconstruct".into()))?;
        lifted = spectrum.lift(w)?;
        &lifted
    };
    let m = spectrum.len();
    // coefficients[m, k] = a_m exp(lambda_m t_k)
    let coeffs = DMatrix::from_fn(m, times.len(), |j, k| {
        let t = times[k];
        let growth = (spectrum.growth_rates[j] * t).exp();
        spectrum.amplitudes[j] * polar(growth, spectrum.frequencies[j] * t)
    });
    let re_u = spectrum.modes.map(|z| z.re);
    let im_u = spectrum.modes.map(|z| z.im);
    let re_c = coeffs.map(|z| z.re);
    let im_c = coeffs.map(|z| z.im);
    Ok(re_u * re_c - im_u * im_c)
}

/// Greedy conjugate pairing of eigenpairs of a real matrix.
///
/// Each eigenvalue is matched with the unpaired eigenvalue closest to its
/// conjugate. When its own conjugate is closer than any candidate, it is
/// treated as real: imaginary part dropped and eigenvector made real. Matched
/// pairs are made exact conjugates of each other.
pub(crate) fn close_under_conjugation<T: Real>(values: &mut [Cplx<T>], vectors: &mut DMatrix<Cplx<T>>) {
    let n = values.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        done[i] = true;
        let mu = values[i];
        let target = cconj(mu);
        let self_dist = cabs(mu - target);
        let mut best: Option<(usize, T)> = None;
        for j in 0..n {
            if done[j] {
                continue;
            }
            let dist = cabs(values[j] - target);
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((j, dist));
            }
        }
        let tol = T::lit(1e-6) * cabs(mu).max(T::one());
        match best {
            Some((j, dist)) if dist < self_dist && dist <= tol => {
                done[j] = true;
                // Representative keeps the positive imaginary part.
                let (p, q) = if mu.im >= T::zero() { (i, j) } else { (j, i) };
                let rep = values[p];
                values[q] = cconj(rep);
                for r in 0..vectors.nrows() {
                    vectors[(r, q)] = cconj(vectors[(r, p)]);
                }
            }
            _ if self_dist <= tol => {
                values[i] = Cplx::new(mu.re, T::zero());
                let mut col: Vec<Cplx<T>> = vectors.column(i).iter().copied().collect();
                normalize_phase(&mut col);
                let norm = col.iter().fold(T::zero(), |acc, z| acc + z.re * z.re).sqrt();
                for (r, z) in col.into_iter().enumerate() {
                    vectors[(r, i)] = Cplx::new(z.re / norm, T::zero());
                }
            }
            _ => {}
        }
    }
}
