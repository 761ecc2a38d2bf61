//! A small differentiable network engine.
//!
//! Networks are directed acyclic graphs of layers over batched, channels-last
//! tensors. Every layer has a hand-written backward pass; there is no tape.
//! The layer set is what the positioning estimators and the conditional GAN
//! need: 1-D convolution and transposed convolution, max pooling, dropout,
//! LSTM, dense, embedding, and the reshaping glue between them.

pub mod activation;
pub mod archive;
pub mod gradcheck;
mod error;
mod gemm;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
mod tensor;
pub mod train;

pub use activation::Activation;
pub use archive::{load_archive, save_archive, ArchiveManifest};
pub use error::{NnError, Result};
pub use layers::{LayerSpec, Padding};
pub use loss::Loss;
pub use network::{Gradients, GraphBuilder, Network, NetworkSpec, NodeSpec, Trace};
pub use optim::{adam_step, AdamState};
pub use tensor::Tensor;
pub use train::{train, train_with_validation, EarlyStopping, EpochRecord, History, StopDecision, TrainConfig};

/// RNG used for initialization, shuffling and dropout masks.
pub type SeedRng = rand_chacha::ChaCha8Rng;

/// Seeded RNG constructor used throughout the crate.
pub fn seeded_rng(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    SeedRng::seed_from_u64(seed)
}
