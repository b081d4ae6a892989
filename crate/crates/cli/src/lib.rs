//! Commands behind the `bottleneck` binary. Every command takes a validated
//! [`RunConfig`], writes its artifacts under `output_dir` and a
//! `manifest.json` describing how to reproduce the run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bottleneck_core::agent::{episode_seed, select_action, train, ActorParams, DdpgAgent, EpisodeLog};
use bottleneck_core::checkpoint::{Checkpoint, NetworkSet};
use bottleneck_core::config::{Mode, RunConfig};
use bottleneck_core::env::{run_episode, BottleneckEnv, CavControl};
use bottleneck_core::metrics::{compare, heatmap_svg, trajectory_csv, ComparisonReport, Controller, EpisodeMetrics};
use bottleneck_core::scenario::ScenarioName;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const METRICS_FILE: &str = "episode_metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Values given on the command line; each one replaces the config file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<ScenarioName>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Reads the config file (or defaults), applies overrides and validates.
pub fn load_config(path: Option<&Path>, mode: Mode, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str::<RunConfig>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = overrides.scenario {
        cfg.scenario = s;
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(e) = overrides.episodes {
        cfg.episodes = e;
    }
    if let Some(c) = &overrides.checkpoint {
        cfg.checkpoint = Some(c.to_string_lossy().into_owned());
    }
    if let Some(o) = &overrides.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Mode,
    seed: u64,
    scenario: ScenarioName,
    config_sha256: String,
    config: &'a RunConfig,
    inputs: Vec<String>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(serde_json::to_vec(cfg).expect("config serialises"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates the output directory and writes the manifest, so an unwritable
/// destination fails before any simulation work.
fn prepare_output(cfg: &RunConfig, inputs: Vec<String>) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let manifest = Manifest {
        tool: "bottleneck",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.mode,
        seed: cfg.seed,
        scenario: cfg.scenario,
        config_sha256: config_hash(cfg),
        config: cfg,
        inputs,
    };
    write_file(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub episodes: Vec<EpisodeLog>,
    pub checkpoint: PathBuf,
}

/// Runs DDPG training. Writes `training_log.csv` (one row per episode),
/// `checkpoint_epNNNN.json` every `checkpoint_interval` episodes and the
/// final `checkpoint.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let dir = prepare_output(cfg, Vec::new())?;
    let mut env = BottleneckEnv::new(cfg.scenario_spec(), &cfg.env_settings(), CavControl::Learned)?;
    let mut agent = DdpgAgent::new(cfg.train, cfg.seed)?;
    let log_path = dir.join(TRAINING_LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    writeln!(log, "{}", EpisodeLog::CSV_HEADER)?;
    let interval = cfg.train.checkpoint_interval;
    let episodes = train(&mut env, &mut agent, cfg.seed, |row, agent| {
        writeln!(log, "{}", row.csv_row()).map_err(io_to_core)?;
        if (row.episode + 1) % interval == 0 {
            let path = dir.join(format!("checkpoint_ep{:04}.json", row.episode + 1));
            fs::write(&path, Checkpoint::from_agent(agent).to_json()).map_err(io_to_core)?;
        }
        Ok(())
    })?;
    log.flush()?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    write_file(&checkpoint, &Checkpoint::from_agent(&agent).to_json())?;
    Ok(TrainSummary { episodes, checkpoint })
}

fn io_to_core(e: std::io::Error) -> bottleneck_core::Error {
    bottleneck_core::Error::Invariant(format!("I/O error: {e}"))
}

/// Rule-based episodes: CAVs drive with the IDM and lane-change rules.
pub fn cmd_baseline(cfg: &RunConfig) -> Result<Vec<EpisodeMetrics>> {
    let dir = prepare_output(cfg, Vec::new())?;
    let mut env = BottleneckEnv::new(cfg.scenario_spec(), &cfg.env_settings(), CavControl::RuleBased)?;
    let metrics = run_episodes(cfg, &mut env, Controller::Baseline, |obs| Ok(vec![0.0; obs.node_count()]), &dir)?;
    Ok(metrics)
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let nets = Checkpoint::from_json(&text)
        .and_then(|c| c.networks())
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(nets)
}

/// Noise-free rollouts of the checkpoint's online actor.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EpisodeMetrics>> {
    let Some(ckpt) = &cfg.checkpoint else {
        bail!("eval needs a checkpoint (--checkpoint PATH)");
    };
    let nets = load_checkpoint(Path::new(ckpt))?;
    let dir = prepare_output(cfg, vec![ckpt.clone()])?;
    evaluate_actor(cfg, &nets.actor, &dir)
}

/// Evaluates `actor` without exploration noise and writes the same artifact
/// set as the baseline.
pub fn evaluate_actor(cfg: &RunConfig, actor: &ActorParams, dir: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut env = BottleneckEnv::new(cfg.scenario_spec(), &cfg.env_settings(), CavControl::Learned)?;
    run_episodes(cfg, &mut env, Controller::Learned, |obs| select_action(actor, obs, None), dir)
}

fn run_episodes<F>(
    cfg: &RunConfig,
    env: &mut BottleneckEnv,
    controller: Controller,
    mut policy: F,
    dir: &Path,
) -> Result<Vec<EpisodeMetrics>>
where
    F: FnMut(&bottleneck_core::obs::GraphObservation) -> bottleneck_core::Result<Vec<f64>>,
{
    let mut metrics = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let seed = episode_seed(cfg.seed, episode);
        let m = run_episode(env, seed, episode, controller, &mut policy)?;
        if episode == 0 {
            write_file(&dir.join("trajectory.csv"), &trajectory_csv(env.trajectory()))?;
            write_grids(&m, dir)?;
        }
        metrics.push(m);
    }
    write_file(&dir.join(METRICS_FILE), &serde_json::to_string_pretty(&metrics)?)?;
    Ok(metrics)
}

fn write_grids(m: &EpisodeMetrics, dir: &Path) -> Result<()> {
    write_file(&dir.join("mean_speed_grid.csv"), &m.mean_speed_grid.to_csv())?;
    write_file(&dir.join("speed_std_grid.csv"), &m.speed_std_grid.to_csv())?;
    let controller = match m.controller {
        Controller::Baseline => "rule-based",
        Controller::Learned => "learned",
    };
    let title = format!("{} scenario, {} controller, episode {} (seed {})", m.scenario, controller, m.episode, m.seed);
    write_file(&dir.join("heatmap.svg"), &heatmap_svg(&m.mean_speed_grid, &m.speed_std_grid, &title))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pairs two metric files episode by episode; writes `comparison.json` and
/// `comparison.csv`.
pub fn cmd_compare(cfg: &RunConfig, baseline: &Path, learned: &Path) -> Result<ComparisonReport> {
    let b = read_metrics(baseline)?;
    let l = read_metrics(learned)?;
    let report = compare(&b, &l)?;
    let dir = prepare_output(
        cfg,
        vec![baseline.display().to_string(), learned.display().to_string()],
    )?;
    write_file(&dir.join("comparison.json"), &serde_json::to_string_pretty(&report)?)?;
    write_file(&dir.join("comparison.csv"), &report.to_csv())?;
    Ok(report)
}

/// Re-renders the grids and heatmap of one recorded episode.
pub fn cmd_render(cfg: &RunConfig, metrics: &Path, episode: usize) -> Result<()> {
    let all = read_metrics(metrics)?;
    let Some(m) = all.iter().find(|m| m.episode == episode) else {
        bail!("{} has no episode {episode}", metrics.display());
    };
    let dir = prepare_output(cfg, vec![metrics.display().to_string()])?;
    write_grids(m, &dir)
}
