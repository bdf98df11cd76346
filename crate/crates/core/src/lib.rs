//! Device-free human identification from WiFi channel state information.
//!
//! The pipeline filters CSI amplitude streams, reduces each antenna pair to a
//! few principal components, segments walking events with a mean absolute
//! deviation detector, compresses each event with a Daubechies-4 wavelet
//! approximation, and labels it with a DTW nearest-neighbor classifier.

pub mod classifier;
pub mod config;
pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod pca;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod segmentation;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
