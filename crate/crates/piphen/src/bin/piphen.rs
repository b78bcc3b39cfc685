//! Thin command-line front end: each subcommand wraps one library entry
//! point, prints line-delimited JSON records followed by a summary line,
//! and exits 0 only if every requested run completed.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use piphen::autodiff::save_checkpoint;
use piphen::fed::{
    init_fd_model, make_blobs, proxy_inputs, run_federation, FdClient, FdConfig, FdModelConfig,
};
use piphen::hen::{
    collect_demos, mean_abs_dhdt, save_demos, train_hen, ExpertConfig, HenConfig, HenTrainConfig,
};
use piphen::orchestrator::{
    builtin_scenario, generate_purify_deploy, inject_energy_jump, parse_suite_config,
    render_report, run_episode, run_suite, train_episode_models, EpisodeMode, EpisodeScenario,
    PipelineConfig, SuiteConfig,
};
use piphen::physics::{load_scenario, RigidBody, ScenarioBody, WorldState};
use piphen::pipn::{make_dataset, train_pipn, PipnConfig, PipnTrainConfig};

#[derive(Parser)]
#[command(name = "piphen", about = "Distributed physical cognition-control stack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the physics-informed prediction network and save a checkpoint.
    TrainPipn {
        /// Rigid-body scenario file; defaults to a built-in two-body scene.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Output directory for the checkpoint and loss curve.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the energy-aware controller on scripted-expert demos.
    TrainHen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run federated distillation rounds and report per-round KL and bytes.
    FedRun {
        #[arg(long, default_value_t = 3)]
        clients: usize,
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shared unlabeled proxy set size; soft-label bytes must stay
        /// below one weight download.
        #[arg(long, default_value_t = 32)]
        proxy: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate scenes, reject conservation violations, train a student.
    Pipeline {
        #[arg(long, default_value_t = 8)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt every Nth generated scene with an energy jump (0 = none).
        #[arg(long, default_value_t = 0)]
        corrupt_every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one episode in the given mode and print its metrics.
    Episode {
        /// Built-in scenario name or a JSON scenario file path.
        #[arg(long, default_value = "two-robot")]
        scenario: String,
        /// learned | oracle | no-hen | no-value-gate | centralized-raw
        #[arg(long, default_value = "learned")]
        mode: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scenario x mode x seed grid and print the report.
    Suite {
        /// Suite config JSON; defaults to the built-in grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_out(out: &Option<PathBuf>) -> Result<(), Box<dyn Error>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_out(out: &Option<PathBuf>, name: &str, text: &str) -> Result<(), Box<dyn Error>> {
    if let Some(dir) = out {
        fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn parse_mode(s: &str) -> Result<EpisodeMode, Box<dyn Error>> {
    match s {
        "learned" => Ok(EpisodeMode::Learned),
        "oracle" => Ok(EpisodeMode::Oracle),
        "no-hen" => Ok(EpisodeMode::NoHen),
        "no-value-gate" => Ok(EpisodeMode::NoValueGate),
        "centralized-raw" => Ok(EpisodeMode::CentralizedRaw),
        other => Err(format!(
            "unknown mode {other:?}; expected learned, oracle, no-hen, no-value-gate, or centralized-raw"
        )
        .into()),
    }
}

fn training_world() -> Result<WorldState, Box<dyn Error>> {
    // bodies within interaction radius so the graph has edges
    Ok(WorldState::new(
        vec![
            RigidBody::new(1, 1.0, [0.0, 5.0], [0.5, 0.0], 0.3)?,
            RigidBody::new(2, 2.0, [1.0, 5.2], [-0.4, 0.2], 0.3)?,
        ],
        9.81,
    ))
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::TrainPipn { scenario, seed, steps, out } => {
            ensure_out(&out)?;
            let (world, horizon, dt) = match scenario {
                Some(path) => match load_scenario(&path)?.body {
                    ScenarioBody::Rigid { world, dt, horizon } => (world, horizon, dt),
                    ScenarioBody::Sar { .. } => {
                        return Err("train-pipn needs a rigid-body scenario".into())
                    }
                },
                None => (training_world()?, 4, 0.05),
            };
            let dataset = make_dataset(&[world], horizon, dt)?;
            let arch = PipnConfig { dropout: 0.0, ..PipnConfig::small() };
            let cfg = PipnTrainConfig { steps, seed, ..Default::default() };
            let (model, curve) = train_pipn(&dataset, &arch, &cfg)?;
            let mut lines = String::new();
            for (i, loss) in curve.iter().enumerate() {
                let line = json!({"step": i, "loss": loss}).to_string();
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            write_out(&out, "pipn_curve.jsonl", &lines)?;
            if let Some(dir) = &out {
                save_checkpoint(&model.params, &dir.join("pipn.ckpt"))?;
            }
            println!(
                "{}",
                json!({
                    "summary": "train-pipn",
                    "steps": steps,
                    "final_loss": curve.last(),
                    "params": model.params.numel(),
                })
            );
            Ok(())
        }
        Command::TrainHen { seed, steps, out } => {
            ensure_out(&out)?;
            let expert = ExpertConfig { u_max: 1.0, dt: 0.02, ..Default::default() };
            let world =
                WorldState::new(vec![RigidBody::new(1, 1.0, [0.0, 0.0], [0.0, 0.0], 0.3)?], 9.81);
            let arch = HenConfig::small();
            let mut demos = Vec::new();
            for (i, goal) in [[1.5, 1.0], [-1.0, 2.0], [2.0, -0.5]].iter().enumerate() {
                let all = collect_demos(&world, 1, *goal, &expert, arch.d_rep, 300)?;
                demos.extend(all.into_iter().skip(i).step_by(12));
            }
            let cfg = HenTrainConfig {
                steps,
                seed,
                optim: piphen::autodiff::OptimConfig { lr: 3e-3, ..Default::default() },
                ..Default::default()
            };
            let report = train_hen(&demos, &arch, &cfg)?;
            let mut lines = String::new();
            for (i, (clone, dhdt)) in
                report.clone_curve.iter().zip(&report.dhdt_curve).enumerate()
            {
                let line = json!({"step": i, "clone_loss": clone, "dhdt": dhdt}).to_string();
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            write_out(&out, "hen_curve.jsonl", &lines)?;
            if let Some(dir) = &out {
                save_checkpoint(&report.model.params, &dir.join("hen.ckpt"))?;
                save_demos(&dir.join("demos.json"), &demos)?;
            }
            println!(
                "{}",
                json!({
                    "summary": "train-hen",
                    "steps": steps,
                    "demos": demos.len(),
                    "final_clone_loss": report.clone_curve.last(),
                    "mean_abs_dhdt": mean_abs_dhdt(&report.model, &demos)?,
                })
            );
            Ok(())
        }
        Command::FedRun { clients, rounds, seed, proxy, out } => {
            ensure_out(&out)?;
            let model_cfg = FdModelConfig::small();
            let mut server = init_fd_model(&model_cfg, seed)?;
            let mut members: Vec<FdClient> = (0..clients)
                .map(|i| FdClient {
                    id: i as u32,
                    data: make_blobs(&model_cfg, 24, seed.wrapping_add(10 + i as u64)),
                    params: piphen::autodiff::Params::new(),
                    failed: false,
                })
                .collect();
            let proxy_set = proxy_inputs(&model_cfg, proxy, seed.wrapping_add(999));
            let fd_cfg =
                FdConfig { rounds, lr: 1e-2, proxy_size: proxy, ..Default::default() };
            let records =
                run_federation(&mut server, &mut members, &proxy_set, &model_cfg, &fd_cfg)?;
            let mut lines = String::new();
            for r in &records {
                let line = serde_json::to_string(r)?;
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            write_out(&out, "fed_rounds.jsonl", &lines)?;
            if let Some(dir) = &out {
                save_checkpoint(&server, &dir.join("global.ckpt"))?;
            }
            println!(
                "{}",
                json!({
                    "summary": "fed-run",
                    "rounds": rounds,
                    "clients": clients,
                    "first_kd_loss": records.first().map(|r| r.kd_loss),
                    "final_kd_loss": records.last().map(|r| r.kd_loss),
                })
            );
            Ok(())
        }
        Command::Pipeline { scenes, seed, corrupt_every, out } => {
            ensure_out(&out)?;
            let cfg = PipelineConfig { n_scenes: scenes, seed, ..Default::default() };
            let jump = 10.0 * cfg.tol_e_rel;
            let outcome = generate_purify_deploy(&cfg, |i, traj| {
                if corrupt_every > 0 && i % corrupt_every == 0 {
                    inject_energy_jump(traj, 9.81, jump);
                }
            })?;
            let mut lines = String::new();
            for i in &outcome.report.accepted {
                let line = json!({"scene": i, "accepted": true}).to_string();
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            for (i, reason) in &outcome.report.rejected {
                let line = json!({"scene": i, "accepted": false, "reason": reason}).to_string();
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            write_out(&out, "pipeline_scenes.jsonl", &lines)?;
            if let Some(dir) = &out {
                save_checkpoint(&outcome.student.params, &dir.join("student.ckpt"))?;
            }
            println!("{}", serde_json::to_string(&outcome.report)?);
            Ok(())
        }
        Command::Episode { scenario, mode, seed, out } => {
            ensure_out(&out)?;
            let mode = parse_mode(&mode)?;
            let scn: EpisodeScenario = if Path::new(&scenario).is_file() {
                serde_json::from_str(&fs::read_to_string(&scenario)?)
                    .map_err(|e| format!("scenario file: {e}"))?
            } else {
                builtin_scenario(&scenario, seed)?
            };
            let models = if mode.needs_models() {
                Some(train_episode_models(seed, 2, 60)?)
            } else {
                None
            };
            let metrics = run_episode(&scn, mode, models.as_ref(), seed)?;
            let line = serde_json::to_string(&metrics)?;
            println!("{line}");
            write_out(&out, "episode.json", &line)?;
            println!(
                "{}",
                json!({
                    "summary": "episode",
                    "scenario": scn.name,
                    "mode": format!("{mode:?}"),
                    "success": metrics.success,
                    "score": metrics.score,
                })
            );
            Ok(())
        }
        Command::Suite { config, out } => {
            ensure_out(&out)?;
            let cfg: SuiteConfig = match config {
                Some(path) => parse_suite_config(&fs::read_to_string(&path)?)?,
                None => SuiteConfig::default(),
            };
            let report = run_suite(&cfg)?;
            let text = render_report(&report);
            print!("{text}");
            write_out(&out, "suite_report.jsonl", &text)?;
            println!(
                "{}",
                json!({
                    "summary": "suite",
                    "rows": report.rows.len(),
                    "cells": report.summary.len(),
                })
            );
            Ok(())
        }
    }
}
