//! Higher order dynamic mode decomposition (HODMD / DMD-d) for image
//! sequences, mode-image rendering, synthetic corpora with known spectra, and
//! classification dataset assembly.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases below fix it for the common cases.

// `!(x > 0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod hodmd;
pub mod modes;
pub mod numerics;
pub mod pipeline;
pub mod scalar;
pub mod sidecar;
pub mod snapshot;
pub mod spectrum;
pub mod spectrum_io;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use hodmd::{analyze, HodmdParams, SvdTruncation};
pub use scalar::{Cplx, Real};
pub use snapshot::{ClassLabel, CropRect, FrameSequence, SnapshotMatrix};
pub use spectrum::{reconstruct, retain_modes, DmdSpectrum};

pub type Snapshots = SnapshotMatrix<f64>;
pub type Snapshots32 = SnapshotMatrix<f32>;
pub type Spectrum = DmdSpectrum<f64>;
pub type Spectrum32 = DmdSpectrum<f32>;
pub type Truncation = SvdTruncation<f64>;
pub type Truncation32 = SvdTruncation<f32>;
pub type Params = HodmdParams<f64>;
pub type Params32 = HodmdParams<f32>;
