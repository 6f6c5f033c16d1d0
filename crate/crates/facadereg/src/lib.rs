//! Regularization of detected facade-primitive bounding boxes.
//!
//! Detected windows, doors and balconies come out of an object detector with
//! slightly inconsistent positions and sizes. This crate restores the layout
//! regularity by snapping each box attribute (x, y, w, h) to a small set of
//! shared model values, chosen by solving a binary integer program exactly:
//! per attribute, candidate values are mean-shift cluster centers, each box
//! one-hot-selects a candidate, and the objective trades residual error
//! against the number of distinct values in use.
//!
//! Entry points:
//! - [`pipeline::regularize`] runs the whole pipeline on a detection set.
//! - [`formats`] parses detection files and writes result files.
//! - [`solve`] exposes the exact solvers individually.

pub mod bip;
pub mod error;
pub mod formats;
pub mod meanshift;
pub mod pipeline;
pub mod solve;
pub mod svg;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Attribute, BoundingBox, DetectionSet, PrimitiveClass};
