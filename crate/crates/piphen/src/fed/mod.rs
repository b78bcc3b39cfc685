//! Federated distillation: clients train locally on private data and share
//! only soft labels over a fixed proxy set; the server averages them into an
//! ensemble teacher and fits the global model to it with a KL objective.

mod distill;
mod model;

pub use distill::{
    aggregate, fd_round, kd_loss, run_federation, FdClient, FdConfig, FdRoundRecord,
};
pub use model::{
    batch_value, cross_entropy_tape, init_fd_model, logits, logits_tape, make_blobs,
    proxy_inputs, soft_label_bytes, weight_bytes, FdDataset, FdModelConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FedError {
    #[error("invalid federation input: {0}")]
    Invalid(String),
    #[error(
        "soft-label bytes per round ({label_bytes}) not below weight bytes ({weight_bytes})"
    )]
    ByteBudget { label_bytes: u64, weight_bytes: u64 },
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
}
