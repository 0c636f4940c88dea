//! Layer primitives: convolution, pooling, activations, the softmax output
//! layer, SGD and initialization. Every op is generic over `f32`/`f64`.

mod activation;
mod conv;
mod dense;
mod init;
mod pool;
mod sgd;

pub use activation::{relu, relu_backward};
pub(crate) use activation::{relu_backward_in_place, relu_in_place};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_dim, ConvGradients, ConvLayerParams};
pub(crate) use conv::{conv2d_backward_with, conv2d_forward_with};
pub(crate) use dense::dense_backward_with;
pub use dense::{dense_logits, dense_softmax_xent, softmax, softmax_xent, DenseGradients, DenseParams, SoftmaxXent};
pub use init::init_he;
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, PoolIndices};
pub use sgd::{sgd_step, Sgd, SgdState};
