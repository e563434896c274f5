//! Infrared/visible image fusion with edge-aware weighting.
//!
//! The pipeline runs [`le2`] on the visible image to get complementary edge
//! weights, extracts per-modality features with [`extractor`], mixes them in
//! [`fuser`] and decodes a fused luma plane. [`losses`] and [`trainer`] fit the
//! model; [`metrics`] scores results.

pub mod cli;
pub mod error;
pub mod extractor;
pub mod fuser;
pub mod imaging;
pub mod le2;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod params;
pub mod trainer;

pub use error::{FusionError, Result};
pub use fuser::{fuse_pair, fuse_tensors};
pub use imaging::{load_image, save_image, Image};
pub use le2::{le2_forward, EdgeWeights};
pub use losses::{LossReport, LossWeights};
pub use params::{Ablation, ModelParams};
pub use trainer::{train, FusionConfig};
