//! The SocialTGCN forecaster.

pub mod adjacency;
pub mod checkpoint;
pub mod config;
pub mod layers;
pub mod network;
pub mod params;

pub use adjacency::{mean_spatial_adjacency, spatial_adjacency, SpatialAdjacency};
pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{AdjacencyFrames, ModelConfig};
pub use network::{ForwardTrace, Prediction, SocialTgcn};
pub use params::{Params, Tensor};

/// Seeded model construction.
pub fn build_model(config: ModelConfig, seed: u64) -> crate::Result<SocialTgcn> {
    SocialTgcn::build(config, seed)
}
