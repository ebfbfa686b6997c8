//! Dense tensors and the handful of layers the recognition networks need.
//!
//! Activations are laid out `[channel, row, col]` in row-major order; batches
//! are processed one sample at a time. Every kernel accumulates in a fixed
//! order, so results do not depend on the thread count.

mod adam;
mod cgw1;
mod kernels;
mod layers;
mod loss;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use cgw1::{read_cgw1, write_cgw1, NamedTensor};
pub use kernels::{global_maxpool, linear_1x1, relu};
pub use layers::{conv2d_forward, ConvSpec, Gradients, Layer, Network};
pub use loss::{pixelwise_cross_entropy, softmax, softmax_cross_entropy};
pub use tensor::{Scalar, Tensor};

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables the rayon-backed channel parallelism in the
/// convolution kernels. Output is bit-identical either way.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed) && rayon::current_num_threads() > 1
}
