//! Median histogram matching (MHM) for color-shifted photo collections.
//!
//! A damaged scan and a reference scan of the same print rarely line up
//! pixel for pixel, but their per-channel intensity distributions can be
//! aligned: matching the percentiles of each CMY dye channel yields one
//! monotone transfer curve per channel and pair, and the pointwise median
//! of those curves over a training set gives a single robust correction
//! that can be applied to a whole collection in batch.
//!
//! Modules:
//! - [`colorspace`]: RGB/CMY duality plus CIELAB/CIELUV conversions.
//! - [`histogram`]: per-channel empirical quantiles and densities.
//! - [`transfer`]: curve estimation, median aggregation, batch application.
//! - [`document`] / [`curve_export`]: transform persistence and plotting.
//! - [`evaluation`]: transform-distance metrics, leave-one-out
//!   cross-validation, per-pixel perceptual distances.
//! - [`synth`]: synthetic degradations for closed-loop testing.
//! - [`pipeline`]: corpus ingestion and batch orchestration.

pub mod colorspace;
pub mod curve_export;
pub mod document;
mod error;
pub mod evaluation;
pub mod histogram;
pub mod image;
pub mod pipeline;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
