//! Runtime orchestration: brain/cerebellum topology, episode execution with
//! ablation modes, the generate-purify-deploy pipeline, and suite runs.

mod episode;
mod metrics;
mod pipeline;
mod suite;
mod topology;

pub use episode::{
    builtin_scenario, run_episode, train_episode_models, EpisodeMode, EpisodeModels,
    EpisodeScenario, RobotSpec,
};
pub use metrics::{balance, clopper_pearson, EpisodeMetrics};
pub use pipeline::{
    generate_purify_deploy, inject_energy_jump, inject_momentum_error, random_scene,
    verify_trajectory, PipelineConfig, PipelineOutcome, PipelineReport, RejectReason,
    VerifierOutcome,
};
pub use suite::{
    parse_suite_config, render_report, run_suite, SuiteConfig, SuiteReport, SuiteRow,
    SuiteSummary,
};
pub use topology::{invoke_remote, CapabilityRegistry, NodeRole, Topology};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid orchestrator input: {0}")]
    Invalid(String),
    #[error("mode {0} requires trained models")]
    UntrainedModel(String),
    #[error("capability '{0}' is not registered")]
    CapabilityNotFound(String),
    #[error("capability '{0}' is unloaded")]
    CapabilityUnavailable(String),
    #[error(transparent)]
    Physics(#[from] crate::physics::PhysicsError),
    #[error(transparent)]
    Pipn(#[from] crate::pipn::PipnError),
    #[error(transparent)]
    Hen(#[from] crate::hen::HenError),
    #[error(transparent)]
    Semcom(#[from] crate::semcom::SemcomError),
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AutodiffError),
}
