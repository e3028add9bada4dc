//! Toolkit for turning continuous speech features into compact discrete
//! unit corpora and measuring what that buys.
//!
//! The pipeline runs FBANK extraction ([`fbank`]), k-means quantization
//! ([`kmeans`]), de-duplication and masking ([`units`]), subword merging
//! ([`bpe`]) and fixed-width bit packing ([`pack`]). [`analysis`] accounts
//! for sequence lengths at each stage and checks CTC length feasibility
//! under convolutional subsampling. [`cca`] scores candidate feature
//! layers against labels.

pub mod analysis;
pub mod bpe;
pub mod cca;
pub mod cli;
pub mod config;
pub mod error;
pub mod fbank;
pub mod feature_io;
pub mod kmeans;
pub mod pack;
pub mod rng;
pub mod synth;
pub mod units;

pub use error::{Error, Result};
pub use feature_io::FeatureMatrix;
pub use units::{Stage, UnitSequence};
