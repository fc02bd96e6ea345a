//! Dense kernels used by the decomposition: thin SVD, general complex
//! eigendecomposition and minimum-norm least squares.
//!
//! Matrices are `nalgebra` types throughout. Singular value decompositions run
//! on `faer`, whose SVD stays accurate on exactly rank-deficient input (the
//! usual case for noiseless snapshot data); the Schur form comes from
//! `nalgebra`. This module pins down the contracts (ordering, orthonormality,
//! unit eigenvectors, rank cutoff) that the algorithm relies on.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::scalar::{cabs, Cplx, Real};

/// Thin singular value decomposition `A = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: Real> {
    /// `J x r` matrix with orthonormal columns.
    pub u: DMatrix<T>,
    /// `r` singular values, descending and non-negative.
    pub s: Vec<T>,
    /// `r x K` matrix with orthonormal rows.
    pub vt: DMatrix<T>,
}

impl<T: Real> ThinSvd<T> {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Recomposes `u * diag(s) * vt`.
    pub fn recompose(&self) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * &self.vt
    }
}

/// Eigenpairs of a square complex matrix. Column `m` of `vectors` is a
/// unit-norm eigenvector for `values[m]`.
#[derive(Debug, Clone)]
pub struct EigenPairs<T: Real> {
    pub values: Vec<Cplx<T>>,
    pub vectors: DMatrix<Cplx<T>>,
}

impl<T: Real> EigenPairs<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Raw SVD factors `a = u * diag(s) * vt` with `s` descending.
pub struct SvdFactors<S, T> {
    pub u: DMatrix<S>,
    pub s: Vec<T>,
    pub vt: DMatrix<S>,
}

/// Dense SVD kernels for a real scalar type and its complex counterpart.
pub trait SvdKernel: Sized {
    fn svd_real(a: &DMatrix<Self>) -> Option<SvdFactors<Self, Self>>;
    fn svd_complex(a: &DMatrix<Cplx<Self>>) -> Option<SvdFactors<Cplx<Self>, Self>>;
}

fn faer_svd<S, T>(a: &DMatrix<S>) -> Option<SvdFactors<S, T>>
where
    S: faer::traits::ComplexField<Canonical = S> + ComplexField<RealField = T> + Copy,
{
    let m = faer::Mat::<S>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let svd = m.thin_svd().ok()?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Some(SvdFactors {
        u: DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s: (0..s.nrows()).map(|i| s[i].real()).collect(),
        vt: DMatrix::from_fn(v.ncols(), v.nrows(), |i, j| v[(j, i)].conjugate()),
    })
}

macro_rules! faer_kernel {
    ($t:ty) => {
        impl SvdKernel for $t {
            fn svd_real(a: &DMatrix<Self>) -> Option<SvdFactors<Self, Self>> {
                faer_svd(a)
            }

            fn svd_complex(a: &DMatrix<Cplx<Self>>) -> Option<SvdFactors<Cplx<Self>, Self>> {
                faer_svd(a)
            }
        }
    };
}

faer_kernel!(f32);
faer_kernel!(f64);

/// Scalars (real or complex) with an SVD whose singular values are `Self::RealField`.
pub trait SvdScalar: ComplexField + Copy {
    fn svd(a: &DMatrix<Self>) -> Option<SvdFactors<Self, Self::RealField>>;
}

impl<T: Real> SvdScalar for T {
    fn svd(a: &DMatrix<Self>) -> Option<SvdFactors<Self, Self>> {
        T::svd_real(a)
    }
}

impl<T: Real> SvdScalar for Cplx<T> {
    fn svd(a: &DMatrix<Self>) -> Option<SvdFactors<Self, T>> {
        T::svd_complex(a)
    }
}

fn max_iterations(n: usize) -> usize {
    (100 * n).max(1000)
}

fn check_finite<S: ComplexField>(a: &DMatrix<S>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} contains non-finite entries")))
    }
}

/// Thin SVD of a real matrix; rank `r = min(J, K)`.
pub fn thin_svd<T: Real>(a: &DMatrix<T>) -> Result<ThinSvd<T>> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot decompose an empty {rows}x{cols} matrix"
        )));
    }
    check_finite(a, "matrix")?;
    let SvdFactors { u, s, vt } =
        T::svd_real(a).ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(ThinSvd { u, s, vt })
}

/// Eigendecomposition of a general square complex matrix.
///
/// Computed from the complex Schur form `A = Q T Q^H`: eigenvectors of the
/// triangular factor are obtained by back substitution and mapped through `Q`.
/// Eigenvalues come back in Schur order; callers sort as needed.
pub fn eig<T: Real>(a: &DMatrix<Cplx<T>>) -> Result<EigenPairs<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    check_finite(a, "matrix")?;
    if n == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }

    let schur = Schur::try_new(a.clone(), T::default_epsilon(), max_iterations(n))
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();

    let values: Vec<Cplx<T>> = (0..n).map(|k| t[(k, k)]).collect();
    let scale = t.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)));
    let smin = (T::default_epsilon() * scale).max(T::min_value().unwrap_or(T::default_epsilon()));
    let big = T::lit(1e100).min(T::max_value().unwrap_or(T::lit(1e30)) * T::default_epsilon());

    let mut vectors = DMatrix::<Cplx<T>>::zeros(n, n);
    let mut y = DVector::<Cplx<T>>::zeros(n);
    for k in 0..n {
        let lambda = values[k];
        y.fill(Cplx::new(T::zero(), T::zero()));
        y[k] = Cplx::new(T::one(), T::zero());
        for i in (0..k).rev() {
            let mut s = Cplx::new(T::zero(), T::zero());
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if cabs(denom) < smin {
                denom = Cplx::new(smin, T::zero());
            }
            y[i] = -s / denom;
            if cabs(y[i]) > big {
                let f = T::one() / cabs(y[i]);
                for j in i..=k {
                    y[j] = y[j].scale(f);
                }
            }
        }
        let v = q.columns(0, k + 1) * y.rows(0, k + 1);
        let norm = v.norm();
        if !(norm > T::zero()) || !norm.is_finite_value() {
            return Err(Error::NumericalFailure(format!(
                "eigenvector {k} could not be normalized"
            )));
        }
        vectors.set_column(k, &v.unscale(norm));
    }

    Ok(EigenPairs { values, vectors })
}

/// Relative singular-value cutoff below which directions are treated as null.
pub fn lstsq_cutoff<T: Real>() -> T {
    T::floor_tol(1e-12, 16.0)
}

/// Minimum-norm minimizer of `||a x - b||_F`.
///
/// Singular values below `lstsq_cutoff() * sigma_1` are treated as zero. Tall
/// systems are first compressed with a QR factorization so the SVD only sees
/// the `n x n` triangular factor.
pub fn lstsq<S, T>(a: &DMatrix<S>, b: &DMatrix<S>) -> Result<DMatrix<S>>
where
    S: SvdScalar + ComplexField<RealField = T>,
    T: Real,
{
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "least squares needs a non-empty system, got {m}x{n}"
        )));
    }
    if b.nrows() != m {
        return Err(Error::InvalidParameter(format!(
            "right-hand side has {} rows, system has {m}",
            b.nrows()
        )));
    }
    check_finite(a, "system matrix")?;
    check_finite(b, "right-hand side")?;

    let (sys, rhs) = if m > n {
        let qr = a.clone().qr();
        let q = qr.q();
        (qr.r(), q.adjoint() * b)
    } else {
        (a.clone(), b.clone())
    };

    let SvdFactors { u, s: sigma, vt } =
        S::svd(&sys).ok_or_else(|| Error::NumericalFailure("SVD did not converge in least squares".into()))?;

    let sigma_max = sigma.iter().fold(T::zero(), |acc, &s| acc.max(s));
    let cutoff = lstsq_cutoff::<T>() * sigma_max;

    // x = V diag(1/s) U^H rhs, restricted to the retained directions.
    let mut coeffs = u.adjoint() * rhs;
    for (i, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > T::zero() {
            coeffs.row_mut(i).scale_mut(T::one() / s);
        } else {
            coeffs.row_mut(i).fill(S::zero());
        }
    }
    Ok(vt.adjoint() * coeffs)
}

/// Largest singular value, used to express tolerances relative to `||A||_2`.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> Result<T> {
    if a.is_empty() {
        return Ok(T::zero());
    }
    Ok(thin_svd(a)?.s[0])
}

/// Spectral norm of a complex matrix.
pub fn spectral_norm_complex<T: Real>(a: &DMatrix<Cplx<T>>) -> Result<T> {
    if a.is_empty() {
        return Ok(T::zero());
    }
    check_finite(a, "matrix")?;
    let svd = T::svd_complex(a).ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.s[0])
}
