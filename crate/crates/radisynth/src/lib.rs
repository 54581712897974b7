//! Synthetic radiography and tomography datasets with a pore and
//! delamination detection pipeline: file formats, a content-addressed
//! artifact workspace and the `radisynth` command line.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod imageio;
pub mod modelio;
pub mod stl;
pub mod tables;
pub mod volumeio;
pub mod workspace;

pub use error::{Error, Result};
