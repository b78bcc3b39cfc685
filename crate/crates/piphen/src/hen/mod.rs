//! Energy-aware control: a behavior-cloned policy over hybrid
//! representations and a learned Hamiltonian whose drift along the policy's
//! flow is penalized during training.

pub mod expert;
pub mod model;
pub mod train;

pub use expert::{
    control_accel, expert_rollout, phase_rep, scripted_expert, ExpertAction, ExpertConfig, ExpertRollout,
};
pub use model::{
    dh_dt, dh_dt_with, hamiltonian, hamiltonian_tape, hen_loss, init_hen, phase_gradient, policy,
    policy_tape, HenConfig, HenModel, PhaseState,
};
pub use train::{
    collect_demos, load_demos, mean_abs_dhdt, save_demos, train_hen, HenDemoStep, HenTrainConfig,
    HenTrainReport, DEMO_VERSION,
};

use crate::autodiff::AutodiffError;
use crate::physics::PhysicsError;

#[derive(Debug, thiserror::Error)]
pub enum HenError {
    #[error("{0}")]
    Invalid(String),
    #[error("unreachable goal: {0}")]
    UnreachableGoal(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
