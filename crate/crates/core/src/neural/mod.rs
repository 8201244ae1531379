//! Minimal neural-network layers with hand-written backward passes.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod lstm;
pub mod network;
pub mod optim;
pub mod tensor;

pub use layer::{
    Activation, ActivationKind, Conv1d, Dense, Dropout, EmbeddingLookup, GlobalMaxPool, Layer,
    LayerKind, LayerSpec, Mode, Param,
};
pub use loss::LossKind;
pub use lstm::BiLstm;
pub use network::Network;
pub use optim::{adam_step, Optimizer, OptimizerState};
pub use tensor::{Real, Tensor};
