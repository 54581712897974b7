//! Synthetic X-ray inspection core: specimen geometry, projection
//! simulation, filtered back projection, small neural networks and the
//! post-processing used to turn feature maps into defect tables.
//!
//! The crate builds without `std` (with `alloc`). Enable `parallel` for
//! row-parallel rendering and inference; results are identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ct;
pub mod error;
pub mod features;
pub mod geom;
pub mod math;
pub mod nn;
pub mod par;
pub mod cnn;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod xray;
pub mod zprofile;

pub use error::{Error, Result};
