//! Rectal MRI classification pipeline primitives.
//!
//! The crate covers the whole path from a T2-weighted volume to an
//! evaluation report:
//!
//! * [`volume`]: NIfTI-1 subset and raw volume codecs, trilinear resampling.
//! * [`preprocess`]: mask centroid, fixed-size center crop, percentile clip
//!   and z-score normalization.
//! * [`freq`]: centered 2-D FFT, radial spectral perturbation, and the
//!   skip-connected convolutional autoencoder used for harmonization.
//! * [`augment`]: flips, intensity transforms and Gibbs ringing.
//! * [`features`]: 512-d slice features, slice aggregation and view fusion.
//! * [`learn`]: PCA, logistic regression, MLP head and classification losses.
//! * [`nn`]: 3-D tensors, convolutions, squeeze-and-excitation and the
//!   anisotropic SE-ResNet.
//! * [`metrics`]: confusion-table metrics, rank AUC, bootstrap intervals and
//!   report assembly.
//! * [`phantom`]: deterministic synthetic cohorts with planted findings.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod error;
pub mod features;
pub mod freq;
pub mod learn;
pub mod metrics;
pub mod nn;
pub mod phantom;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{LabelMask, Plane, Slice2d, Volume};
