//! The patch classifier: network assembly, training, inference, vote
//! aggregation and checkpoints.

mod checkpoint;
mod network;
mod train;
mod vote;

pub use checkpoint::{
    check_channels, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use network::{parse_filters, predict_patch, ModelConfig, Network, NetworkGradients, STAGES};
pub use train::{train, train_with, TrainConfig};
pub use vote::{temporal_fuse, vote_frame, FrameVote, VoteHistogram};
