pub mod error;
pub mod imaging;
pub mod morphology;
pub mod pca;
pub mod texture;
pub mod blobs;
pub mod splitting;
pub mod evaluation;
pub mod reporting;
pub mod synth;
pub mod config;
pub mod pipeline;

pub use error::{AccError, Result};
