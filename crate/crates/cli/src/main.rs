use std::path::PathBuf;
use std::process::ExitCode;

use bottleneck_cli::{cmd_baseline, cmd_compare, cmd_eval, cmd_render, cmd_train, load_config, Overrides};
use bottleneck_core::config::Mode;
use bottleneck_core::scenario::ScenarioName;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bottleneck", version, about = "Lane-drop bottleneck simulator with a GCN + DDPG CAV controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// moderate or severe.
    #[arg(long, global = true)]
    scenario: Option<ScenarioName>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the controller and write checkpoints and a training log.
    Train,
    /// Run rule-based episodes.
    Baseline,
    /// Run noise-free episodes with a trained checkpoint.
    Eval,
    /// Compare two episode_metrics.json files.
    Compare { baseline: PathBuf, learned: PathBuf },
    /// Re-render grids and heatmap of one episode from episode_metrics.json.
    Render {
        metrics: PathBuf,
        #[arg(long, default_value_t = 0)]
        episode: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = cli.common;
    let overrides = Overrides {
        scenario: c.scenario,
        seed: c.seed,
        episodes: c.episodes,
        checkpoint: c.checkpoint,
        out: c.out,
    };
    let mode = match &cli.command {
        Command::Train => Mode::Train,
        Command::Baseline => Mode::Baseline,
        Command::Eval => Mode::Eval,
        Command::Compare { .. } => Mode::Compare,
        Command::Render { .. } => Mode::Render,
    };
    let cfg = load_config(c.config.as_deref(), mode, &overrides)?;
    match cli.command {
        Command::Train => {
            let s = cmd_train(&cfg)?;
            let last = s.episodes.last();
            println!(
                "trained {} episodes ({} steps); checkpoint {}",
                s.episodes.len(),
                last.map_or(0, |e| e.step),
                s.checkpoint.display()
            );
        }
        Command::Baseline | Command::Eval => {
            let metrics = if mode == Mode::Eval { cmd_eval(&cfg)? } else { cmd_baseline(&cfg)? };
            for m in &metrics {
                println!(
                    "episode {:>3}  reward {:>12.1}  throughput {:>4}  steps {:>5}  cells<8km/h {:>4}",
                    m.episode, m.episode_reward, m.throughput, m.episode_length, m.cells_below_8kmh
                );
            }
        }
        Command::Compare { baseline, learned } => {
            let r = cmd_compare(&cfg, &baseline, &learned)?;
            println!(
                "mean reward {:.1} -> {:.1}; mean throughput {:.2} -> {:.2}; cells<8km/h {} -> {}",
                r.baseline_mean_reward,
                r.learned_mean_reward,
                r.baseline_mean_throughput,
                r.learned_mean_throughput,
                r.baseline_cells_below_8kmh,
                r.learned_cells_below_8kmh
            );
        }
        Command::Render { metrics, episode } => cmd_render(&cfg, &metrics, episode)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
