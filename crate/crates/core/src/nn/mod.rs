//! A small reverse-mode differentiable substrate: matrices, a recording
//! tape with fused recurrent and attention operations, parameter storage,
//! optimizers, checkpoints, and finite-difference gradient checks.

mod checkpoint;
mod gradcheck;
mod graph;
mod mat;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, TensorCheck};
pub use graph::{log_softmax_row, Graph, Var};
pub use mat::{gemm_into, matmul, sigmoid, Mat, Real};
pub use params::{Grads, Optimizer, OptimizerKind, ParamId, ParamStore};
