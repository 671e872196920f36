//! Standard-library companion to `helmfmm-core`: mesh file formats, JSON and
//! CSV reports, and the `helmfmm` command-line driver.

pub mod app;
pub mod cli;
pub mod error;
pub mod mesh_io;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
