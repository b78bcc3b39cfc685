//! PIPHEN-style distributed physical cognition-control stack at desk scale.
//!
//! The crate is organized as a closed loop:
//!
//! * [`autodiff`] — reverse-mode tape over dense tensors; every network here
//!   is built on it.
//! * [`physics`] — deterministic ground-truth dynamics: a 2-D rigid-body
//!   world and a search-and-rescue grid world.
//! * [`pipn`] — the physical interaction prediction network: graph attention,
//!   causal temporal prediction, conservation-regularized losses and
//!   three-way uncertainty.
//! * [`hen`] — the Hamiltonian-penalized controller trained by behavior
//!   cloning.
//! * [`fed`] — federated distillation: soft-label exchange on a shared proxy
//!   set instead of weight exchange.
//! * [`semcom`] — value-gated semantic communication: deltas, a DHT knowledge
//!   index, and a discrete-event network with exact byte accounting.
//! * [`orchestrator`] — the brain/cerebellum topology, episode execution,
//!   ablations, the generate-purify-deploy pipeline and suite runs.
//!
//! See the crate examples for one runnable entry point per capability.

pub mod autodiff;
pub mod fed;
pub mod hen;
pub mod orchestrator;
pub mod physics;
pub mod pipn;
pub mod semcom;
