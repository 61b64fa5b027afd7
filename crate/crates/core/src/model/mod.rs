//! The observation-conditioned forecast corrector.

mod checkpoint;
mod config;
mod net;
mod params;
mod tokens;

pub use checkpoint::{
    check_architecture, decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    MAGIC, SCHEMA_VERSION,
};
pub use config::ModelConfig;
pub use net::{Correction, EncodedObservations, DEFAULT_CHUNK};
pub use params::{expected_shapes, shape_layout, snap_to_f32, ModelParameters, Weights};
pub use tokens::{
    observation_features, order_embedding, target_features, AssembledTokens, ObservationToken, Sample, TargetToken,
    TokenFeatures,
};
