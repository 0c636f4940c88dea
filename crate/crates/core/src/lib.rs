//! Detection of spatial misalignment between a depth (LiDAR) channel and
//! co-registered video and optical-flow channels.
//!
//! Frames are cut into multi-channel patches, each patch is classified into
//! one of N discrete depth-shift classes by a small convolutional network,
//! and the patch votes are aggregated per frame and across consecutive frames.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod flow;
pub mod frame;
pub mod kv;
pub mod model;
pub mod nn;
pub mod offsets;
pub mod pipeline;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
