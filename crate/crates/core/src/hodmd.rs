//! Higher order dynamic mode decomposition (DMD-d).
//!
//! The pipeline is:
//!
//! 1. truncated SVD of the snapshot matrix, `V ~ W * Vhat` with `Vhat = S T^T`
//!    keeping the `N` singular values with `sigma_j / sigma_1 > eps_svd`;
//! 2. delay embedding of `Vhat`: `d` time-shifted copies stacked into a
//!    `(d N) x (K - d + 1)` matrix, followed by a second truncated SVD;
//! 3. a one-step propagator fitted on the doubly reduced snapshots by least
//!    squares, and its eigendecomposition;
//! 4. eigenvectors lifted through the second basis, first `N`-row block kept as
//!    the reduced mode, amplitudes fitted against all `K` reduced snapshots;
//! 5. amplitude-based retention and lifting to pixel space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig, lstsq, thin_svd};
use crate::scalar::{cabs, cconj, Cplx, Real};
use crate::snapshot::SnapshotMatrix;
use crate::spectrum::{close_under_conjugation, retain_modes, DmdSpectrum};

pub const DEFAULT_EPS_SVD: f64 = 1e-4;
pub const DEFAULT_EPS_DMD: f64 = 1e-3;

/// Eigenvalues below this modulus are treated as numerical null space.
pub fn zero_eigenvalue_cutoff<T: Real>() -> T {
    T::floor_tol(1e-12, 100.0)
}

/// Parameters of one analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HodmdParams<T> {
    /// Number of delayed copies stacked in the embedding (`d = 1` is plain DMD).
    pub d: usize,
    pub eps_svd: T,
    pub eps_dmd: T,
    /// Seconds per frame.
    pub dt: T,
}

impl<T: Real> HodmdParams<T> {
    pub fn new(d: usize, eps_svd: T, eps_dmd: T, dt: T) -> Self {
        Self {
            d,
            eps_svd,
            eps_dmd,
            dt,
        }
    }

    /// Default delay: 10% of the snapshot count, rounded up, clamped to `[1, K - 1]`.
    pub fn default_delay(k: usize) -> usize {
        k.div_ceil(10).clamp(1, k.saturating_sub(1).max(1))
    }

    /// Default parameters for `k` snapshots.
    pub fn defaults(k: usize, dt: T) -> Self {
        Self::new(
            Self::default_delay(k),
            T::lit(DEFAULT_EPS_SVD),
            T::lit(DEFAULT_EPS_DMD),
            dt,
        )
    }

    /// Checks the parameter ranges against a sequence of `k` snapshots.
    pub fn validate(&self, k: usize) -> Result<()> {
        let unit = |x: T| x > T::zero() && x < T::one();
        if !unit(self.eps_svd) {
            return Err(Error::InvalidParameter(format!(
                "eps_svd must lie in (0, 1), got {}",
                self.eps_svd
            )));
        }
        if !unit(self.eps_dmd) {
            return Err(Error::InvalidParameter(format!(
                "eps_dmd must lie in (0, 1), got {}",
                self.eps_dmd
            )));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite_value() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("delay d must be at least 1".into()));
        }
        if self.d >= k {
            return Err(Error::TooFewSnapshots { d: self.d, k });
        }
        Ok(())
    }
}

/// Result of the first (spatial) dimensionality reduction.
#[derive(Debug, Clone)]
pub struct SvdTruncation<T: Real> {
    /// `J x N` orthonormal spatial basis.
    pub basis_w: DMatrix<T>,
    /// The `N` retained singular values.
    pub sigma: Vec<T>,
    /// `N x K` reduced snapshot matrix `diag(sigma) * T^T`.
    pub reduced: DMatrix<T>,
    pub n_retained: usize,
    /// All `min(J, K)` singular values, retained or not.
    pub singular_values: Vec<T>,
    pub geometry: (usize, usize),
    pub dt: T,
}

impl<T: Real> SvdTruncation<T> {
    pub fn snapshots(&self) -> usize {
        self.reduced.ncols()
    }

    /// `W * Vhat`.
    pub fn approximation(&self) -> DMatrix<T> {
        &self.basis_w * &self.reduced
    }
}

/// Number of leading values with `s_j / s_0 > eps` (at least one).
pub fn retained_rank<T: Real>(s: &[T], eps: T) -> usize {
    let lead = s[0];
    s.iter().take_while(|&&x| x / lead > eps).count().max(1)
}

/// First reduction step: keep the SVD modes with `sigma_j / sigma_1 > eps_svd`.
pub fn truncated_svd<T: Real>(v: &SnapshotMatrix<T>, eps_svd: T) -> Result<SvdTruncation<T>> {
    if !(eps_svd > T::zero() && eps_svd < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "eps_svd must lie in (0, 1), got {eps_svd}"
        )));
    }
    if v.data().iter().all(|x| *x == T::zero()) {
        return Err(Error::ZeroSignal);
    }
    let svd = thin_svd(v.data())?;
    if !(svd.s[0] > T::zero()) {
        return Err(Error::ZeroSignal);
    }
    let n = retained_rank(&svd.s, eps_svd);
    let basis_w = svd.u.columns(0, n).into_owned();
    let mut reduced = svd.vt.rows(0, n).into_owned();
    for j in 0..n {
        reduced.row_mut(j).scale_mut(svd.s[j]);
    }
    Ok(SvdTruncation {
        basis_w,
        sigma: svd.s[..n].to_vec(),
        reduced,
        n_retained: n,
        singular_values: svd.s,
        geometry: (v.nx(), v.ny()),
        dt: v.dt(),
    })
}

/// Stacks `d` time-shifted copies of the reduced snapshots:
/// column `j` holds columns `j, j+1, ..., j+d-1` one above the other.
pub fn delay_embed<T: Real>(reduced: &DMatrix<T>, d: usize) -> DMatrix<T> {
    let (n, k) = reduced.shape();
    let cols = k + 1 - d;
    let mut out = DMatrix::zeros(d * n, cols);
    for j in 0..cols {
        for lag in 0..d {
            out.view_mut((lag * n, j), (n, 1)).copy_from(&reduced.column(j + lag));
        }
    }
    out
}

/// DMD-d on the reduced snapshots.
///
/// Returns reduced modes (`N` rows) with fitted amplitudes, sorted by `|a|`,
/// before amplitude-based retention.
pub fn dmd_d<T: Real>(red: &SvdTruncation<T>, params: &HodmdParams<T>) -> Result<DmdSpectrum<T>> {
    let k = red.snapshots();
    params.validate(k)?;
    let n = red.n_retained;
    let d = params.d;

    let enlarged = delay_embed(&red.reduced, d);
    let svd2 = thin_svd(&enlarged)?;
    if !(svd2.s[0] > T::zero()) {
        return Err(Error::ZeroSignal);
    }
    let n2 = retained_rank(&svd2.s, params.eps_svd);
    let basis2 = svd2.u.columns(0, n2).into_owned();
    let mut doubly = svd2.vt.rows(0, n2).into_owned();
    for j in 0..n2 {
        doubly.row_mut(j).scale_mut(svd2.s[j]);
    }

    // Propagator R with doubly[:, 1..] ~ R * doubly[:, ..cols-1], solved as
    // X1^T R^T = X2^T.
    let cols = doubly.ncols();
    let x1t = doubly.columns(0, cols - 1).transpose();
    let x2t = doubly.columns(1, cols - 1).transpose();
    let propagator = lstsq(&x1t, &x2t)?.transpose();

    let pairs = eig(&propagator.map(|x| Cplx::new(x, T::zero())))?;
    let mut values = pairs.values;
    let mut vectors = pairs.vectors;
    close_under_conjugation(&mut values, &mut vectors);

    // Lift through the second basis and keep the first N-row block.
    let vec_re = &basis2 * vectors.map(|z| z.re);
    let vec_im = &basis2 * vectors.map(|z| z.im);
    let cutoff = zero_eigenvalue_cutoff::<T>();
    let mut kept_values = Vec::new();
    let mut kept_modes: Vec<Vec<Cplx<T>>> = Vec::new();
    for m in 0..values.len() {
        if cabs(values[m]) < cutoff {
            continue;
        }
        let block: Vec<Cplx<T>> = (0..n).map(|i| Cplx::new(vec_re[(i, m)], vec_im[(i, m)])).collect();
        let norm = block.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if !(norm > T::default_epsilon()) {
            continue;
        }
        kept_values.push(values[m]);
        kept_modes.push(block.into_iter().map(|z| z.unscale(norm)).collect());
    }
    if kept_values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let modes = DMatrix::from_fn(n, kept_values.len(), |i, j| kept_modes[j][i]);

    let mut amplitudes = fit_amplitudes(red, &modes, &kept_values)?;
    symmetrize_amplitudes(&kept_values, &modes, &mut amplitudes);

    Ok(DmdSpectrum::from_parts(modes, kept_values, amplitudes, params.dt, red.geometry)?.into_reduced())
}

/// Least-squares amplitudes `a` minimizing
/// `sum_k || Vhat[:, k] - sum_m a_m u_m mu_m^k ||^2` over all `K` reduced snapshots.
///
/// `modes` holds the reduced modes as columns (`N x M`). The structured normal
/// equations `((U^H U) o conj(P P^H)) a = A^H vec(Vhat)`, with `P` the
/// `M x K` Vandermonde matrix of eigenvalue powers, are solved and then refined
/// against the true residual, which is evaluated in factored form. This costs
/// `O((N + K) M^2)` instead of the `O(N K M^2)` of a dense QR of the stacked
/// system while matching its accuracy for well-conditioned problems.
pub fn fit_amplitudes<T: Real>(
    red: &SvdTruncation<T>,
    modes: &DMatrix<Cplx<T>>,
    eigenvalues: &[Cplx<T>],
) -> Result<Vec<Cplx<T>>> {
    let m = eigenvalues.len();
    if m == 0 {
        return Err(Error::EmptySpectrum);
    }
    let (n, k) = red.reduced.shape();
    if modes.nrows() != n || modes.ncols() != m {
        return Err(Error::InvalidParameter(format!(
            "modes are {}x{}, expected {n}x{m}",
            modes.nrows(),
            modes.ncols()
        )));
    }
    let mut vand = DMatrix::<Cplx<T>>::zeros(m, k);
    for j in 0..m {
        let mut p = Cplx::new(T::one(), T::zero());
        for s in 0..k {
            vand[(j, s)] = p;
            p *= eigenvalues[j];
        }
    }
    let target = red.reduced.map(|x| Cplx::new(x, T::zero()));
    let gram_u = modes.adjoint() * modes;
    let gram_v = &vand * vand.adjoint();
    let normal = DMatrix::from_fn(m, m, |i, j| gram_u[(i, j)] * cconj(gram_v[(i, j)]));

    // A^H vec(R) for an N x K residual R.
    let apply_adjoint = |r: &DMatrix<Cplx<T>>| {
        let ur = modes.adjoint() * r;
        DMatrix::from_fn(m, 1, |j, _| {
            (0..k).fold(Cplx::new(T::zero(), T::zero()), |acc, s| {
                acc + cconj(vand[(j, s)]) * ur[(j, s)]
            })
        })
    };
    let residual = |a: &DMatrix<Cplx<T>>| {
        let scaled = DMatrix::from_fn(m, k, |j, s| a[(j, 0)] * vand[(j, s)]);
        &target - modes * scaled
    };

    let mut a = lstsq(&normal, &apply_adjoint(&target))?;
    let mut best = residual(&a).norm();
    for _ in 0..3 {
        let step = lstsq(&normal, &apply_adjoint(&residual(&a)))?;
        let trial = &a + step;
        let err = residual(&trial).norm();
        if !(err < best) {
            break;
        }
        a = trial;
        best = err;
    }
    if !a.iter().all(|z| z.re.is_finite_value() && z.im.is_finite_value()) {
        return Err(Error::NumericalFailure(
            "amplitude fit produced non-finite values".into(),
        ));
    }
    Ok(a.column(0).iter().copied().collect())
}

/// For real data, conjugate modes carry conjugate amplitudes and real modes
/// carry real amplitudes; enforce that exactly.
fn symmetrize_amplitudes<T: Real>(values: &[Cplx<T>], modes: &DMatrix<Cplx<T>>, amps: &mut [Cplx<T>]) {
    let m = values.len();
    let mut done = vec![false; m];
    for i in 0..m {
        if done[i] {
            continue;
        }
        done[i] = true;
        if values[i].im == T::zero() {
            if modes.column(i).iter().all(|z| z.im == T::zero()) {
                amps[i].im = T::zero();
            }
            continue;
        }
        let partner = (0..m).find(|&j| {
            !done[j]
                && values[j] == cconj(values[i])
                && modes
                    .column(j)
                    .iter()
                    .zip(modes.column(i).iter())
                    .all(|(a, b)| *a == cconj(*b))
        });
        if let Some(j) = partner {
            done[j] = true;
            let avg = (amps[i] + cconj(amps[j])).unscale(T::lit(2.0));
            amps[i] = avg;
            amps[j] = cconj(avg);
        }
    }
}

/// Full analysis: truncated SVD, DMD-d, amplitude retention, and lifting of the
/// retained modes to pixel space (`u_m = W * uhat_m`, renormalized).
///
/// `params.dt` is the authoritative frame interval.
pub fn analyze<T: Real>(v: &SnapshotMatrix<T>, params: &HodmdParams<T>) -> Result<(SvdTruncation<T>, DmdSpectrum<T>)> {
    params.validate(v.snapshots())?;
    let red = truncated_svd(v, params.eps_svd)?;
    let raw = dmd_d(&red, params)?;
    let kept = retain_modes(&raw, params.eps_dmd)?;
    let full = kept.lift(&red.basis_w)?;
    Ok((red, full))
}
