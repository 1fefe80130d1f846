//! Three-layer tanh MLP with a two-way softmax head, trained with AdamW.

mod adamw;
mod io;
mod mlp;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use adamw::{adamw_step, adamw_update, AdamWConfig, AdamWState};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use mlp::{
    backward, bce_loss, forward, forward_cached, mean_loss, padded_width, softmax2, zeros_like, Dense, DropoutMasks,
    ForwardCache, Layers, MlpParameters, LAYER_NAMES, PROB_CLAMP,
};
pub use train::{train, EpochLog, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    SingleClass(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {0} (non-finite parameters)")]
    Diverged(usize),
    #[error("model file checksum mismatch (truncated or corrupted)")]
    Checksum,
    #[error("model file format version {found} is not supported by this build (supports version {supported})")]
    Version { found: u32, supported: u32 },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
