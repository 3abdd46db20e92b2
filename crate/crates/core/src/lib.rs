//! Multi-view low-rank preserving embedding.
//!
//! Every view is coded against per-sample k-NN dictionaries under a
//! nuclear-norm penalty, embedded so the reconstruction relations survive,
//! and fused into a centroid embedding with automatically learned view
//! weights. Samples are matrix columns throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod lowrank;
pub mod lpe;
pub mod mvlpe;
pub mod par;

pub use error::{Error, Result};
