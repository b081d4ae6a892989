//! Episode analytics: trajectory logs, 50 m x 10 s time-space grids, episode
//! records and baseline/learned comparisons.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioName;
use crate::sim::{SimState, VehicleKind};
use crate::{Error, Result};

pub const CELL_LENGTH: f64 = 50.0;
pub const CELL_DURATION: f64 = 10.0;
pub const MS_TO_KMH: f64 = 3.6;
/// Threshold used for the congested-cell count.
pub const CONGESTED_KMH: f64 = 8.0;

/// One vehicle sample of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub id: u64,
    pub kind: VehicleKind,
    pub lane: usize,
    pub position: f64,
    /// m/s.
    pub speed: f64,
}

impl TrajectoryRow {
    /// One row per vehicle currently in the corridor.
    pub fn snapshot(state: &SimState) -> impl Iterator<Item = TrajectoryRow> + '_ {
        state.vehicles.iter().map(|v| TrajectoryRow {
            time: state.time,
            id: v.id,
            kind: v.kind,
            lane: v.lane,
            position: v.position,
            speed: v.speed,
        })
    }
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("time,id,kind,lane,position,speed\n");
    for r in rows {
        let kind = match r.kind {
            VehicleKind::Cav => "cav",
            VehicleKind::Hdv => "hdv",
        };
        writeln!(out, "{},{},{},{},{},{}", r.time, r.id, kind, r.lane, r.position, r.speed).unwrap();
    }
    out
}

/// Space-time grid. Row `s` covers positions `[50s, 50(s+1))`, column `t`
/// covers times `[10t, 10(t+1))`. Values are km/h; `None` marks a cell with
/// no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub cell_length: f64,
    pub cell_duration: f64,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl HeatmapGrid {
    pub fn space_cells(&self) -> usize {
        self.values.len()
    }

    pub fn time_cells(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn get(&self, space: usize, time: usize) -> Option<f64> {
        self.values.get(space)?.get(time).copied().flatten()
    }

    pub fn total_samples(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// CSV matrix, upstream rows first; missing cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map_or_else(|| "NA".to_string(), |x| x.to_string()))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cell index of a sample, rejecting samples outside the corridor.
fn cell_of(row: &TrajectoryRow, total_length: f64) -> Result<(usize, usize)> {
    if !(row.position.is_finite() && row.position >= 0.0 && row.position <= total_length) {
        return Err(Error::OutOfCorridor {
            position: row.position,
            length: total_length,
        });
    }
    if !(row.time.is_finite() && row.time >= 0.0) {
        return Err(Error::Invariant(format!("trajectory sample at time {}", row.time)));
    }
    let space = ((row.position / CELL_LENGTH).floor() as usize).min(space_cells(total_length) - 1);
    Ok((space, (row.time / CELL_DURATION).floor() as usize))
}

fn space_cells(total_length: f64) -> usize {
    ((total_length / CELL_LENGTH).ceil() as usize).max(1)
}

/// Mean and population std of `xs`; two passes so the result does not depend
/// on a running-sum formulation.
pub fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Bins every sample into its 50 m x 10 s cell and returns the mean-speed and
/// speed-std grids in km/h.
pub fn accumulate_grids(log: &[TrajectoryRow], total_length: f64) -> Result<(HeatmapGrid, HeatmapGrid)> {
    let rows = space_cells(total_length);
    let mut cells = Vec::with_capacity(log.len());
    for r in log {
        cells.push(cell_of(r, total_length)?);
    }
    let cols = cells.iter().map(|&(_, t)| t + 1).max().unwrap_or(0);
    let mut samples = vec![vec![Vec::new(); cols]; rows];
    for (r, &(s, t)) in log.iter().zip(&cells) {
        samples[s][t].push(r.speed * MS_TO_KMH);
    }
    let counts: Vec<Vec<usize>> = samples.iter().map(|row| row.iter().map(Vec::len).collect()).collect();
    let mut mean = vec![vec![None; cols]; rows];
    let mut std = vec![vec![None; cols]; rows];
    for s in 0..rows {
        for t in 0..cols {
            if !samples[s][t].is_empty() {
                let (m, sd) = mean_and_std(&samples[s][t]);
                mean[s][t] = Some(m);
                std[s][t] = Some(sd);
            }
        }
    }
    let grid = |values| HeatmapGrid {
        cell_length: CELL_LENGTH,
        cell_duration: CELL_DURATION,
        values,
        counts: counts.clone(),
    };
    Ok((grid(mean), grid(std)))
}

/// Non-missing cells strictly below `threshold_kmh`.
pub fn count_cells_below(grid: &HeatmapGrid, threshold_kmh: f64) -> usize {
    grid.values
        .iter()
        .flatten()
        .filter(|v| v.is_some_and(|x| x < threshold_kmh))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Baseline,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub scenario: ScenarioName,
    pub controller: Controller,
    pub episode: usize,
    pub seed: u64,
    pub episode_reward: f64,
    /// Vehicles that exited during the episode.
    pub throughput: usize,
    /// RL steps.
    pub episode_length: usize,
    pub cells_below_8kmh: usize,
    pub mean_speed_grid: HeatmapGrid,
    pub speed_std_grid: HeatmapGrid,
}

pub fn episode_throughput(metrics: &[EpisodeMetrics]) -> Result<Vec<usize>> {
    if metrics.is_empty() {
        return Err(Error::NoEpisodes);
    }
    Ok(metrics.iter().map(|m| m.throughput).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeComparison {
    pub episode: usize,
    pub baseline_throughput: usize,
    pub learned_throughput: usize,
    pub throughput_delta: i64,
    pub baseline_reward: f64,
    pub learned_reward: f64,
    pub baseline_length: usize,
    pub learned_length: usize,
    pub baseline_cells_below_8kmh: usize,
    pub learned_cells_below_8kmh: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: ScenarioName,
    pub episodes: Vec<EpisodeComparison>,
    pub baseline_mean_reward: f64,
    pub learned_mean_reward: f64,
    pub baseline_mean_throughput: f64,
    pub learned_mean_throughput: f64,
    pub baseline_cells_below_8kmh: usize,
    pub learned_cells_below_8kmh: usize,
    /// Episodes where the learned throughput is strictly higher.
    pub learned_wins: usize,
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Pairs episodes by position. Both sets must be non-empty and come from the
/// same scenario.
pub fn compare(baseline: &[EpisodeMetrics], learned: &[EpisodeMetrics]) -> Result<ComparisonReport> {
    if baseline.is_empty() || learned.is_empty() {
        return Err(Error::NoEpisodes);
    }
    let scenario = baseline[0].scenario;
    if let Some(m) = baseline.iter().chain(learned).find(|m| m.scenario != scenario) {
        return Err(Error::Config(format!(
            "cannot compare {} episodes with {} episodes",
            scenario, m.scenario
        )));
    }
    let episodes: Vec<EpisodeComparison> = baseline
        .iter()
        .zip(learned)
        .enumerate()
        .map(|(i, (b, l))| EpisodeComparison {
            episode: i,
            baseline_throughput: b.throughput,
            learned_throughput: l.throughput,
            throughput_delta: l.throughput as i64 - b.throughput as i64,
            baseline_reward: b.episode_reward,
            learned_reward: l.episode_reward,
            baseline_length: b.episode_length,
            learned_length: l.episode_length,
            baseline_cells_below_8kmh: b.cells_below_8kmh,
            learned_cells_below_8kmh: l.cells_below_8kmh,
        })
        .collect();
    Ok(ComparisonReport {
        scenario,
        learned_wins: episodes.iter().filter(|e| e.throughput_delta > 0).count(),
        episodes,
        baseline_mean_reward: mean_of(baseline.iter().map(|m| m.episode_reward)),
        learned_mean_reward: mean_of(learned.iter().map(|m| m.episode_reward)),
        baseline_mean_throughput: mean_of(baseline.iter().map(|m| m.throughput as f64)),
        learned_mean_throughput: mean_of(learned.iter().map(|m| m.throughput as f64)),
        baseline_cells_below_8kmh: baseline.iter().map(|m| m.cells_below_8kmh).sum(),
        learned_cells_below_8kmh: learned.iter().map(|m| m.cells_below_8kmh).sum(),
    })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "episode,baseline_throughput,learned_throughput,throughput_delta,baseline_reward,learned_reward,\
             baseline_length,learned_length,baseline_cells_below_8kmh,learned_cells_below_8kmh\n",
        );
        for e in &self.episodes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                e.episode,
                e.baseline_throughput,
                e.learned_throughput,
                e.throughput_delta,
                e.baseline_reward,
                e.learned_reward,
                e.baseline_length,
                e.learned_length,
                e.baseline_cells_below_8kmh,
                e.learned_cells_below_8kmh
            )
            .unwrap();
        }
        out
    }
}

/// Piecewise-linear colour ramp over `(value, rgb)` stops; values outside the
/// range take the end colours.
#[derive(Debug, Clone, Copy)]
pub struct ColorRamp {
    pub stops: &'static [(f64, [u8; 3])],
}

/// Mean speed, km/h: dark red at a standstill through orange and yellow to
/// dark green at 108 km/h (the 30 m/s speed limit).
pub const SPEED_RAMP: ColorRamp = ColorRamp {
    stops: &[
        (0.0, [0x8b, 0x00, 0x00]),
        (20.0, [0xff, 0x45, 0x00]),
        (50.0, [0xff, 0xd7, 0x00]),
        (80.0, [0x9a, 0xcd, 0x32]),
        (108.0, [0x00, 0x64, 0x00]),
    ],
};

/// Speed standard deviation, km/h: white at 0 to dark blue at 20 and above.
pub const STD_RAMP: ColorRamp = ColorRamp {
    stops: &[
        (0.0, [0xf7, 0xfb, 0xff]),
        (5.0, [0x9e, 0xca, 0xe1]),
        (10.0, [0x31, 0x82, 0xbd]),
        (20.0, [0x08, 0x30, 0x6b]),
    ],
};

pub const MISSING_COLOR: &str = "#d9d9d9";

impl ColorRamp {
    pub fn color(&self, value: f64) -> String {
        let stops = self.stops;
        let rgb = if value <= stops[0].0 {
            stops[0].1
        } else if value >= stops[stops.len() - 1].0 {
            stops[stops.len() - 1].1
        } else {
            let k = stops.windows(2).position(|w| value < w[1].0).unwrap_or(0);
            let ((x0, c0), (x1, c1)) = (stops[k], stops[k + 1]);
            let f = (value - x0) / (x1 - x0);
            let mut out = [0u8; 3];
            for i in 0..3 {
                out[i] = (c0[i] as f64 + f * (c1[i] as f64 - c0[i] as f64)).round() as u8;
            }
            out
        };
        format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
    }
}

const CELL_W: usize = 6;
const CELL_H: usize = 12;
const MARGIN: usize = 40;

fn svg_panel(out: &mut String, grid: &HeatmapGrid, ramp: &ColorRamp, x0: usize, label: &str) {
    let rows = grid.space_cells();
    let cols = grid.time_cells();
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text>"#,
        x0,
        MARGIN - 10,
        label
    )
    .unwrap();
    for s in 0..rows {
        // Upstream at the bottom, as in a time-space diagram.
        let y = MARGIN + (rows - 1 - s) * CELL_H;
        for t in 0..cols {
            let fill = grid.get(s, t).map_or_else(|| MISSING_COLOR.to_string(), |v| ramp.color(v));
            writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="{fill}"/>"#,
                x0 + t * CELL_W,
                y
            )
            .unwrap();
        }
    }
    let bottom = MARGIN + rows * CELL_H;
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" font-family="sans-serif">time ({} s cells) / position ({} m cells, upstream at bottom)</text>"#,
        x0,
        bottom + 14,
        grid.cell_duration,
        grid.cell_length
    )
    .unwrap();
}

/// Side-by-side mean-speed and speed-std panels.
pub fn heatmap_svg(mean: &HeatmapGrid, std: &HeatmapGrid, title: &str) -> String {
    let panel_w = mean.time_cells().max(1) * CELL_W;
    let width = 3 * MARGIN + 2 * panel_w;
    let height = 2 * MARGIN + mean.space_cells() * CELL_H + 10;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{MARGIN}" y="14" font-size="13" font-family="sans-serif">{}</text>"#,
        escape(title)
    )
    .unwrap();
    svg_panel(&mut out, mean, &SPEED_RAMP, MARGIN, "mean speed (km/h)");
    svg_panel(&mut out, std, &STD_RAMP, 2 * MARGIN + panel_w, "speed std (km/h)");
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
