//! Episode execution: per-cycle observe → share → fuse → act loops across
//! the brain/cerebellum topology, with ablation modes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hen::{
    collect_demos, phase_rep, policy, scripted_expert, train_hen, ExpertConfig, HenConfig,
    HenModel, HenTrainConfig, PhaseState,
};
use crate::physics::{oracle_future, step_world_accel, BodyId, RigidBody, WorldState};
use crate::pipn::{
    make_dataset, pipn_forward, train_pipn, PipnConfig, PipnModel, PipnTrainConfig,
    STATE_WIDTH,
};
use crate::semcom::{
    embed_tokens, encode_delta, encode_frame, should_share, value_score, CacheEntry,
    FrameKind, KnowledgeGraph, KnowledgeItem, LinkConfig, NetSim, Tier, ValueWeights,
};

use super::metrics::{balance, EpisodeMetrics};
use super::topology::{NodeRole, Topology};
use super::OrchestratorError;

/// Simulated compute stand-ins, microseconds per control cycle.
const REP_BUILD_US: u64 = 15_000;
const FUSE_US: u64 = 25_000;
const ACT_US: u64 = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeMode {
    /// Trained prediction and control over value-gated semantic links.
    Learned,
    /// Ground-truth future states and the scripted expert controller.
    Oracle,
    /// Learned prediction with the energy-aware controller replaced by a
    /// crude proportional law.
    NoHen,
    /// Learned, but every representation is shared without gating.
    NoValueGate,
    /// Learned control, but full raw observations ship to the brain.
    CentralizedRaw,
}

impl EpisodeMode {
    pub const ALL: [EpisodeMode; 5] = [
        EpisodeMode::Learned,
        EpisodeMode::Oracle,
        EpisodeMode::NoHen,
        EpisodeMode::NoValueGate,
        EpisodeMode::CentralizedRaw,
    ];

    pub fn needs_models(self) -> bool {
        self != EpisodeMode::Oracle
    }

    fn gates(self) -> bool {
        !matches!(self, EpisodeMode::NoValueGate | EpisodeMode::CentralizedRaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    /// Also the robot's node id; node 0 is the brain.
    pub robot_id: u32,
    pub body: BodyId,
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScenario {
    pub name: String,
    pub world: WorldState,
    pub robots: Vec<RobotSpec>,
    pub cycles: usize,
    /// Physics step per control cycle, seconds.
    pub dt: f64,
    /// Goal tolerance, meters.
    pub eps: f64,
    /// Size of one robot's raw sensor frame per cycle (models a 30 MB/s
    /// stream sampled at the control rate).
    pub raw_bytes_per_cycle: u64,
    pub link: LinkConfig,
}

impl EpisodeScenario {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.robots.is_empty() {
            return Err(OrchestratorError::Invalid("scenario has no robots".into()));
        }
        if self.cycles == 0 || self.dt <= 0.0 || self.eps <= 0.0 {
            return Err(OrchestratorError::Invalid("degenerate episode parameters".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for r in &self.robots {
            if r.robot_id == 0 {
                return Err(OrchestratorError::Invalid("node 0 is reserved for the brain".into()));
            }
            if !ids.insert(r.robot_id) {
                return Err(OrchestratorError::Invalid(format!(
                    "duplicate robot id {}",
                    r.robot_id
                )));
            }
            if self.world.body(r.body).is_none() {
                return Err(OrchestratorError::Invalid(format!(
                    "robot {} controls unknown body {}",
                    r.robot_id, r.body
                )));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        let mut roles = BTreeMap::new();
        roles.insert(0, NodeRole::Brain);
        for r in &self.robots {
            roles.insert(r.robot_id, NodeRole::Cerebellum(r.robot_id));
        }
        Topology { roles }
    }
}

/// Built-in scenario registry used by the suite runner and the CLI.
pub fn builtin_scenario(name: &str, seed: u64) -> Result<EpisodeScenario, OrchestratorError> {
    let n_robots = match name {
        "two-robot" => 2,
        "three-robot" => 3,
        other => {
            return Err(OrchestratorError::Invalid(format!(
                "unknown scenario '{other}' (expected 'two-robot' or 'three-robot')"
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FFEE);
    let mut bodies = Vec::new();
    let mut robots = Vec::new();
    for i in 0..n_robots {
        // spaced far apart so maneuvers never collide
        let base_x = 12.0 * i as f64;
        let pos = [base_x + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let goal = [base_x + rng.gen_range(1.5..3.0), rng.gen_range(0.5..2.5)];
        let id = (i + 1) as u32;
        bodies.push(RigidBody::new(id, 1.0, pos, [0.0, 0.0], 0.3)?);
        robots.push(RobotSpec { robot_id: id, body: id, goal });
    }
    Ok(EpisodeScenario {
        name: name.to_string(),
        world: WorldState::new(bodies, 9.81),
        robots,
        cycles: 100,
        dt: 0.1,
        eps: 0.25,
        raw_bytes_per_cycle: 3_000_000,
        link: LinkConfig::default(),
    })
}

#[derive(Debug, Clone)]
pub struct EpisodeModels {
    pub pipn: PipnModel,
    pub hen: HenModel,
}

/// Train small prediction and control models for episode use. Widths follow
/// the `small()` variants so this stays test-speed.
pub fn train_episode_models(
    seed: u64,
    pipn_steps: usize,
    hen_steps: usize,
) -> Result<EpisodeModels, OrchestratorError> {
    // bodies within interaction radius so the edge projections get signal
    let scene = WorldState::new(
        vec![
            RigidBody::new(1, 1.0, [0.0, 5.0], [0.5, 0.0], 0.3)?,
            RigidBody::new(2, 2.0, [1.0, 5.2], [-0.4, 0.2], 0.3)?,
        ],
        9.81,
    );
    let dataset = make_dataset(&[scene], 4, 0.05)?;
    let pipn_cfg = PipnConfig { dropout: 0.0, ..PipnConfig::small() };
    let train_cfg = PipnTrainConfig { steps: pipn_steps, seed, ..Default::default() };
    let (pipn, _) = train_pipn(&dataset, &pipn_cfg, &train_cfg)?;

    let expert = expert_config(0.02);
    let world = WorldState::new(vec![RigidBody::new(1, 1.0, [0.0, 0.0], [0.0, 0.0], 0.3)?], 9.81);
    let arch = HenConfig::small();
    let mut demos = Vec::new();
    for (i, goal) in [[1.5, 1.0], [-1.0, 2.0], [2.0, -0.5]].iter().enumerate() {
        let all = collect_demos(&world, 1, *goal, &expert, arch.d_rep, 300)?;
        demos.extend(all.into_iter().skip(i).step_by(12));
    }
    let hen_cfg = HenTrainConfig {
        steps: hen_steps,
        seed,
        optim: crate::autodiff::OptimConfig { lr: 3e-3, ..Default::default() },
        ..Default::default()
    };
    let report = train_hen(&demos, &arch, &hen_cfg)?;
    Ok(EpisodeModels { pipn, hen: report.model })
}

fn expert_config(dt: f64) -> ExpertConfig {
    // u_max matches the policy head's tanh range
    ExpertConfig { u_max: 1.0, dt, ..Default::default() }
}

fn clamp_norm(v: [f64; 2], max: f64) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n > max {
        [v[0] * max / n, v[1] * max / n]
    } else {
        v
    }
}

/// Deterministic string form of the scene, shared by every cerebellum.
fn graph_of_world(world: &WorldState, version: u64) -> KnowledgeGraph {
    let mut g = KnowledgeGraph { version, ..Default::default() };
    for b in &world.bodies {
        let mut fields = BTreeMap::new();
        fields.insert("position".into(), format!("{:.3},{:.3}", b.position[0], b.position[1]));
        fields.insert("velocity".into(), format!("{:.3},{:.3}", b.velocity[0], b.velocity[1]));
        fields.insert("orientation".into(), format!("{:.3}", b.orientation));
        fields.insert("mass".into(), format!("{}", b.mass));
        fields.insert("radius".into(), format!("{}", b.radius));
        g.nodes.insert(b.id, fields);
    }
    g
}

/// Predicted final position per controlled body, mode-dependent source.
fn predicted_positions(
    scenario: &EpisodeScenario,
    mode: EpisodeMode,
    models: Option<&EpisodeModels>,
) -> Result<BTreeMap<BodyId, [f64; 2]>, OrchestratorError> {
    let mut out = BTreeMap::new();
    match mode {
        EpisodeMode::Oracle => {
            let traj = oracle_future(&scenario.world, scenario.cycles.min(20), scenario.dt)?;
            for rec in traj.states.last().into_iter().flatten() {
                out.insert(rec.id, rec.position);
            }
        }
        _ => {
            let models = models.expect("checked by run_episode");
            let tape = crate::autodiff::Tape::new();
            let tokens = crate::pipn::default_task_tokens(
                &models.pipn.config,
                scenario.dt,
                1,
                scenario.world.gravity,
            );
            let o = pipn_forward(
                &tape,
                &models.pipn,
                std::slice::from_ref(&scenario.world),
                crate::pipn::default_radius(&scenario.world),
                &tokens,
                None,
                None,
            )?;
            for (k, (s, _)) in o.per_node.iter().enumerate() {
                let v = tape.value_of(*s);
                let t_last = tape.shape_of(*s)[0] - 1;
                out.insert(
                    scenario.world.bodies[k].id,
                    [v.data[t_last * STATE_WIDTH], v.data[t_last * STATE_WIDTH + 1]],
                );
            }
        }
    }
    Ok(out)
}

/// Greedy conflict-minimizing goal assignment at the brain: robots in id
/// order each take the remaining goal nearest their predicted position.
fn assign_goals(
    scenario: &EpisodeScenario,
    predicted: &BTreeMap<BodyId, [f64; 2]>,
) -> Vec<[f64; 2]> {
    let mut free: Vec<[f64; 2]> = scenario.robots.iter().map(|r| r.goal).collect();
    let mut assigned = Vec::with_capacity(scenario.robots.len());
    for r in &scenario.robots {
        let from = predicted
            .get(&r.body)
            .copied()
            .unwrap_or_else(|| scenario.world.body(r.body).unwrap().position);
        let best = free
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (a[0] - from[0]).powi(2) + (a[1] - from[1]).powi(2);
                let db = (b[0] - from[0]).powi(2) + (b[1] - from[1]).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        assigned.push(free.remove(best));
    }
    assigned
}

pub fn run_episode(
    scenario: &EpisodeScenario,
    mode: EpisodeMode,
    models: Option<&EpisodeModels>,
    _seed: u64,
) -> Result<EpisodeMetrics, OrchestratorError> {
    scenario.validate()?;
    scenario.topology().validate()?;
    if mode.needs_models() {
        match models {
            Some(m) if m.pipn.trained && m.hen.trained => {}
            _ => return Err(OrchestratorError::UntrainedModel(format!("{mode:?}"))),
        }
    }

    let mut sim = NetSim::new();
    for r in &scenario.robots {
        sim.add_link(r.robot_id, 0, scenario.link)?;
        sim.add_link(0, r.robot_id, scenario.link)?;
    }

    let goals = assign_goals(scenario, &predicted_positions(scenario, mode, models)?);
    let expert = expert_config(scenario.dt);
    let weights = ValueWeights::default();
    let task_emb = embed_tokens(&["reach", "assigned", "goal"]);

    let n = scenario.robots.len();
    let mut world = scenario.world.clone();
    let mut action_counts = vec![0u64; n];
    let mut latency_ms = Vec::with_capacity(n * scenario.cycles);
    let mut last_shared: Vec<KnowledgeGraph> = vec![KnowledgeGraph::default(); n];
    let mut kbs: Vec<Vec<KnowledgeItem>> = vec![Vec::new(); n];
    let mut caches: Vec<Vec<CacheEntry>> = vec![Vec::new(); n];
    let mut ratio_sum = 0.0;

    for cycle in 0..scenario.cycles {
        let t0 = sim.now_us();
        // observe + share
        let mut sent_bytes_cycle = 0u64;
        let mut up_sent = vec![false; n];
        for (i, r) in scenario.robots.iter().enumerate() {
            let payload = if mode == EpisodeMode::CentralizedRaw {
                Some(encode_frame(
                    FrameKind::RawObservation,
                    &vec![0u8; scenario.raw_bytes_per_cycle as usize],
                ))
            } else {
                let graph = graph_of_world(&world, cycle as u64 + 1);
                let delta = encode_delta(&last_shared[i], &graph);
                let body = world.body(r.body).unwrap();
                let item = KnowledgeItem::new(
                    format!("robot{}/cycle{cycle}", r.robot_id),
                    Tier::Core,
                    embed_tokens(&[
                        &format!("robot{}", r.robot_id),
                        &format!("px{:.0}", body.position[0] * 2.0),
                        &format!("py{:.0}", body.position[1] * 2.0),
                    ]),
                    serde_json::to_vec(&delta).expect("delta serializes"),
                    cycle as u64,
                )?;
                let share = if mode.gates() {
                    let v = value_score(&item, &task_emb, &kbs[i], &caches[i], cycle as u64, &weights)?;
                    let load = sim.load(r.robot_id, 0, 100_000);
                    should_share(v, load, &weights)?.share
                } else {
                    true
                };
                if share {
                    caches[i].push(CacheEntry { embedding: item.embedding.clone(), sent_at: cycle as u64 });
                    kbs[i].push(item.clone());
                    last_shared[i] = graph;
                    Some(encode_frame(FrameKind::Delta, &item.payload))
                } else {
                    // withheld knowledge stays local and is re-scored next cycle
                    None
                }
            };
            if let Some(bytes) = payload {
                sent_bytes_cycle += bytes.len() as u64;
                sim.net_send(r.robot_id, 0, bytes)?;
                up_sent[i] = true;
            }
        }
        let mut up_delivery = vec![t0; n];
        for msg in sim.net_run() {
            if let Some(i) = scenario.robots.iter().position(|r| r.robot_id == msg.src) {
                up_delivery[i] = msg.delivery_us;
            }
        }
        // brain fuses and issues coordination
        sim.advance(FUSE_US);
        let down_enqueue = sim.now_us();
        for (i, r) in scenario.robots.iter().enumerate() {
            let cmd = serde_json::to_vec(&goals[i]).expect("goal serializes");
            sim.net_send(0, r.robot_id, encode_frame(FrameKind::Response, &cmd))?;
        }
        let mut down_delivery = vec![down_enqueue; n];
        for msg in sim.net_run() {
            if let Some(i) = scenario.robots.iter().position(|r| r.robot_id == msg.dst) {
                down_delivery[i] = msg.delivery_us;
            }
        }
        // decision latency: observation availability to action issuance
        for i in 0..n {
            let rep_us = if mode == EpisodeMode::CentralizedRaw { 0 } else { REP_BUILD_US };
            let up_us = if up_sent[i] { up_delivery[i] - t0 } else { 0 };
            let total =
                rep_us + up_us + FUSE_US + (down_delivery[i] - down_enqueue) + ACT_US;
            latency_ms.push(total as f64 / 1000.0);
        }
        ratio_sum += if mode == EpisodeMode::CentralizedRaw {
            1.0
        } else {
            sent_bytes_cycle as f64 / (scenario.raw_bytes_per_cycle * n as u64) as f64
        };

        // act
        let mut accels = Vec::with_capacity(n);
        let mut dist_before = Vec::with_capacity(n);
        for (i, r) in scenario.robots.iter().enumerate() {
            let b = world.body(r.body).unwrap();
            let goal = goals[i];
            dist_before.push(((goal[0] - b.position[0]).powi(2) + (goal[1] - b.position[1]).powi(2)).sqrt());
            let u = match mode {
                EpisodeMode::Oracle => scripted_expert(&world, r.body, goal, &expert)?.u,
                EpisodeMode::NoHen => clamp_norm(
                    [4.0 * expert.kp() * (goal[0] - b.position[0]), 4.0 * expert.kp() * (goal[1] - b.position[1])],
                    expert.u_max,
                ),
                _ => {
                    let m = models.expect("checked above");
                    let state = PhaseState::new(
                        b.position.to_vec(),
                        vec![b.mass * b.velocity[0], b.mass * b.velocity[1]],
                    )?;
                    let rep = phase_rep(&state, goal, m.hen.config.d_rep)?;
                    let u = policy(&m.hen, &rep)?;
                    [u[0], u[1]]
                }
            };
            let mut a = crate::hen::control_accel(&u, &b.velocity, expert.servo_tau);
            a[1] += world.gravity; // altitude hold
            accels.push((r.body, a));
        }
        world = step_world_accel(&world, scenario.dt, &accels)?;
        for (i, r) in scenario.robots.iter().enumerate() {
            let b = world.body(r.body).unwrap();
            let d = ((goals[i][0] - b.position[0]).powi(2) + (goals[i][1] - b.position[1]).powi(2)).sqrt();
            if d < dist_before[i] {
                action_counts[i] += 1;
            }
        }
    }

    let mut reached = 0usize;
    for (i, r) in scenario.robots.iter().enumerate() {
        let b = world.body(r.body).unwrap();
        let d = ((goals[i][0] - b.position[0]).powi(2) + (goals[i][1] - b.position[1]).powi(2)).sqrt();
        if d <= scenario.eps {
            reached += 1;
        }
    }

    Ok(EpisodeMetrics {
        success: reached == n,
        score: reached as f64 / n as f64,
        steps: scenario.cycles as u64,
        balance: balance(&action_counts)?,
        action_counts,
        latency_ms,
        bytes_transferred: sim.total_stats().bytes_sent,
        compression_ratio: ratio_sum / scenario.cycles as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_models() -> EpisodeModels {
        train_episode_models(7, 2, 30).unwrap()
    }

    #[test]
    fn oracle_episode_succeeds_without_models() {
        let scenario = builtin_scenario("two-robot", 1).unwrap();
        let m = run_episode(&scenario, EpisodeMode::Oracle, None, 1).unwrap();
        assert!(m.success, "expert reaches both goals: {m:?}");
        assert_eq!(m.score, 1.0);
        assert!(m.balance > 0.0 && m.balance <= 1.0);
        assert!(!m.latency_ms.is_empty());
    }

    #[test]
    fn untrained_models_rejected_in_learned_modes() {
        let scenario = builtin_scenario("two-robot", 1).unwrap();
        assert!(matches!(
            run_episode(&scenario, EpisodeMode::Learned, None, 1),
            Err(OrchestratorError::UntrainedModel(_))
        ));
        let mut models = tiny_models();
        models.hen.trained = false;
        assert!(matches!(
            run_episode(&scenario, EpisodeMode::Learned, Some(&models), 1),
            Err(OrchestratorError::UntrainedModel(_))
        ));
    }

    #[test]
    fn identical_config_gives_identical_metrics() {
        let scenario = builtin_scenario("three-robot", 5).unwrap();
        let models = tiny_models();
        let a = run_episode(&scenario, EpisodeMode::Learned, Some(&models), 5).unwrap();
        let b = run_episode(&scenario, EpisodeMode::Learned, Some(&models), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centralized_raw_is_much_slower_than_semantic() {
        let mut scenario = builtin_scenario("two-robot", 2).unwrap();
        scenario.cycles = 10;
        let models = tiny_models();
        let sem = run_episode(&scenario, EpisodeMode::Learned, Some(&models), 2).unwrap();
        let raw = run_episode(&scenario, EpisodeMode::CentralizedRaw, Some(&models), 2).unwrap();
        assert!(raw.mean_latency_ms() / sem.mean_latency_ms() >= 3.0);
        assert_eq!(raw.compression_ratio, 1.0);
        assert!(sem.compression_ratio <= 0.05);
        assert!(raw.bytes_transferred > sem.bytes_transferred);
    }

    #[test]
    fn value_gate_reduces_traffic() {
        let mut scenario = builtin_scenario("two-robot", 3).unwrap();
        scenario.cycles = 20;
        let models = tiny_models();
        let gated = run_episode(&scenario, EpisodeMode::Learned, Some(&models), 3).unwrap();
        let open = run_episode(&scenario, EpisodeMode::NoValueGate, Some(&models), 3).unwrap();
        assert!(gated.bytes_transferred <= open.bytes_transferred);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut s = builtin_scenario("two-robot", 1).unwrap();
        s.robots[0].robot_id = 0;
        assert!(run_episode(&s, EpisodeMode::Oracle, None, 1).is_err());
        let mut s = builtin_scenario("two-robot", 1).unwrap();
        s.robots.clear();
        assert!(run_episode(&s, EpisodeMode::Oracle, None, 1).is_err());
        assert!(builtin_scenario("warehouse", 1).is_err());
    }
}
