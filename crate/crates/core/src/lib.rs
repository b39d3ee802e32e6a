//! Server-side pipeline for interactive anatomy visualization: labeled-volume
//! preprocessing, surface extraction, mesh-guided volume ray marching and
//! foveated frame coding.

pub mod error;
pub mod foveate;
pub mod homotopy;
pub mod mesh;
pub mod render;
pub mod volume;

pub use error::{Error, Result};
