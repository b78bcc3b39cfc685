//! Suite runs: a scenario x mode x seed grid with per-cell metrics and
//! Clopper-Pearson intervals on success rates, rendered deterministically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::episode::{builtin_scenario, run_episode, train_episode_models, EpisodeMode};
use super::metrics::clopper_pearson;
use super::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Built-in scenario names.
    pub scenarios: Vec<String>,
    pub modes: Vec<EpisodeMode>,
    pub seeds: Vec<u64>,
    pub model_seed: u64,
    pub pipn_steps: usize,
    pub hen_steps: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            scenarios: vec!["two-robot".into(), "three-robot".into()],
            modes: vec![EpisodeMode::Learned, EpisodeMode::Oracle],
            seeds: vec![1, 2, 3],
            model_seed: 7,
            pipn_steps: 2,
            hen_steps: 60,
        }
    }
}

/// Parse a JSON suite config; malformed input is rejected with the parser's
/// line/column diagnostic.
pub fn parse_suite_config(text: &str) -> Result<SuiteConfig, OrchestratorError> {
    serde_json::from_str(text)
        .map_err(|e| OrchestratorError::Invalid(format!("suite config: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub success: bool,
    pub score: f64,
    pub balance: f64,
    pub mean_latency_ms: f64,
    pub bytes: u64,
    pub compression_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub scenario: String,
    pub mode: String,
    pub successes: u64,
    pub trials: u64,
    pub success_rate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    pub summary: Vec<SuiteSummary>,
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport, OrchestratorError> {
    let models = if config.modes.iter().any(|m| *m != EpisodeMode::Oracle) {
        Some(train_episode_models(config.model_seed, config.pipn_steps, config.hen_steps)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut cells: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for scenario_name in &config.scenarios {
        for mode in &config.modes {
            for &seed in &config.seeds {
                let scenario = builtin_scenario(scenario_name, seed)?;
                let metrics = run_episode(&scenario, *mode, models.as_ref(), seed)?;
                let mode_name = format!("{mode:?}");
                let cell = cells.entry((scenario_name.clone(), mode_name.clone())).or_insert((0, 0));
                cell.0 += metrics.success as u64;
                cell.1 += 1;
                rows.push(SuiteRow {
                    scenario: scenario_name.clone(),
                    mode: mode_name,
                    seed,
                    success: metrics.success,
                    score: metrics.score,
                    balance: metrics.balance,
                    mean_latency_ms: metrics.mean_latency_ms(),
                    bytes: metrics.bytes_transferred,
                    compression_ratio: metrics.compression_ratio,
                });
            }
        }
    }
    let mut summary = Vec::new();
    for ((scenario, mode), (k, n)) in cells {
        let (lo, hi) = clopper_pearson(k, n, 0.95)?;
        summary.push(SuiteSummary {
            scenario,
            mode,
            successes: k,
            trials: n,
            success_rate: k as f64 / n as f64,
            ci_lower: lo,
            ci_upper: hi,
        });
    }
    Ok(SuiteReport { rows, summary })
}

/// Line-delimited structured records followed by summary lines. Identical
/// reports render byte-identically.
pub fn render_report(report: &SuiteReport) -> String {
    let mut out = String::new();
    for row in &report.rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    for s in &report.summary {
        out.push_str(&serde_json::to_string(s).expect("summary serializes"));
        out.push('\n');
    }
    out
}
