pub mod error;
pub mod image;

pub use error::{Error, Result};
pub use image::ImageChip;
pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod features;
pub mod harness;
pub mod linalg;
pub mod synth;
