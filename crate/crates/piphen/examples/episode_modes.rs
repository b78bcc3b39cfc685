//! One scenario, several system configurations: the oracle upper bound,
//! the full learned stack, and an ablation that ships raw frames instead
//! of gated semantic state.

use piphen::orchestrator::{builtin_scenario, run_episode, train_episode_models, EpisodeMode};

fn main() {
    let scenario = builtin_scenario("two-robot", 1).unwrap();
    let models = train_episode_models(7, 2, 60).unwrap();

    for mode in [EpisodeMode::Oracle, EpisodeMode::Learned, EpisodeMode::CentralizedRaw] {
        let m = run_episode(&scenario, mode, Some(&models), 1).unwrap();
        println!(
            "{mode:?}: score {:.2}  balance {:.2}  mean latency {:.1} ms  bytes {}  compression {:.2e}",
            m.score,
            m.balance,
            m.mean_latency_ms(),
            m.bytes_transferred,
            m.compression_ratio
        );
    }
}
