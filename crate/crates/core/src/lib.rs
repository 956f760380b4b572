//! Library for pseudo-3D WiFi indoor positioning: floor detection from
//! installation-registry features fed to a small neural network, 2D
//! localization via ranked signal-strength distance models, and trajectory
//! refinement with a per-axis Kalman filter. Includes a radio-propagation
//! simulator for generating labelled evaluation data.

pub mod error;
pub mod floor;
pub mod formats;
pub mod geo;
pub mod loc2d;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod refine;
pub mod scan;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
