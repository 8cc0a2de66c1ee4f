//! Assigns egocentric videos to the viewers visible in a top-view video.
//!
//! Both views are described as graphs: top-view nodes carry field-of-view
//! overlap matrices derived from trajectories, egocentric nodes carry
//! descriptor self-similarity matrices. A cross-correlation affinity between
//! the two graphs is solved by spectral graph matching, optionally jointly
//! with a per-video time delay.

pub mod correlation;
pub mod delay_opt;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod matrix;
pub mod simulator;

pub use error::{Error, Result};
pub use matrix::Matrix;
