//! Non-neural core of a HoVer-Net-style nucleus segmentation and
//! classification pipeline: ground-truth target encoding with two distance
//! map groups, marker-controlled watershed decoding, branch-wise ensemble
//! averaging, the weighted loss stack with analytic gradients, and the
//! class-averaged panoptic-quality / count-R² evaluation metrics.

pub mod augment;
pub mod batch;
pub mod components;
pub mod dataset;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod folds;
pub mod grid;
pub mod instance;
pub mod losses;
pub mod metrics;
pub mod npy;
pub mod postprocess;
pub mod rng;
pub mod sobel;
pub mod types;

pub use error::{Error, Result};
pub use grid::Grid;
pub use types::{ClassId, Instance, InstanceSet, LabeledImage, PredictionMaps};
