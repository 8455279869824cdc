//! Open-set classification at desk scale: a spectral-normalized cosine
//! classifier trained with contrastive, unknown-probability and
//! entropic-transport class-anchor losses on synthetic proposal data,
//! plus the open-set evaluation suite (WI, AOSE, mAP over known classes,
//! AP of the unknown class, cluster-validity indices).
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense matrices/vectors, stable softmax, power iteration,
//!   seeded RNG.
//! - [`transport`]: ground costs, log-domain Sinkhorn, debiased divergence,
//!   and an exact brute-force solver for tiny instances.
//! - [`model`]: the feedforward network with a contrastive head and a
//!   spectral-normalized scaled-cosine classifier, with analytic gradients.
//! - [`losses`]: the four loss components, memory bank, anchors,
//!   hard-example mining and the combined objective.
//! - [`eval`]: detection-record metrics and cluster-validity indices.
//! - [`pipeline`]: synthetic data, the training loop, evaluation, sweeps and
//!   file formats; the `openset` binary wraps this module.

pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod transport;

pub use error::{Error, Result};
