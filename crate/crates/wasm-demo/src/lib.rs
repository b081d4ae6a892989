//! Browser bindings. Each export returns a JSON string so the page can stay
//! plain JavaScript.

use bottleneck_core::agent::OuNoise;
use bottleneck_core::env::{baseline_episode, run_episode, BottleneckEnv, CavControl, EnvSettings};
use bottleneck_core::metrics::{heatmap_svg, Controller, EpisodeMetrics};
use bottleneck_core::scenario::ScenarioName;
use bottleneck_core::sim::{idm_acceleration, IdmParams, ACTION_BOUND};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct EpisodeView {
    scenario: ScenarioName,
    controller: Controller,
    seed: u64,
    episode_reward: f64,
    throughput: usize,
    episode_length: usize,
    cells_below_8kmh: usize,
    svg: String,
}

impl EpisodeView {
    fn new(m: EpisodeMetrics, label: &str) -> Self {
        let title = format!("{} scenario, {label}, seed {}", m.scenario, m.seed);
        Self {
            svg: heatmap_svg(&m.mean_speed_grid, &m.speed_std_grid, &title),
            scenario: m.scenario,
            controller: m.controller,
            seed: m.seed,
            episode_reward: m.episode_reward,
            throughput: m.throughput,
            episode_length: m.episode_length,
            cells_below_8kmh: m.cells_below_8kmh,
        }
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Runs one episode. With `hold_accel` undefined the CAVs follow the IDM;
/// otherwise every CAV holds that acceleration (clamped to the action bounds).
pub fn episode_json(scenario: &str, seed: u64, hold_accel: Option<f64>) -> Result<String, String> {
    let name: ScenarioName = scenario.parse().map_err(|e: bottleneck_core::Error| e.to_string())?;
    let spec = name.spec();
    let settings = EnvSettings::default();
    let view = match hold_accel {
        None => EpisodeView::new(
            baseline_episode(&spec, &settings, seed, 0).map_err(|e| e.to_string())?,
            "rule-based CAVs",
        ),
        Some(a) => {
            let a = if a.is_finite() { a.clamp(-ACTION_BOUND, ACTION_BOUND) } else { 0.0 };
            let mut env = BottleneckEnv::new(spec, &settings, CavControl::Learned).map_err(|e| e.to_string())?;
            let m = run_episode(&mut env, seed, 0, Controller::Learned, |obs| Ok(vec![a; obs.node_count()]))
                .map_err(|e| e.to_string())?;
            EpisodeView::new(m, &format!("CAVs holding {a:.2} m/s²"))
        }
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn run_episode_json(scenario: &str, seed: u32, hold_accel: Option<f64>) -> Result<String, JsError> {
    episode_json(scenario, seed as u64, hold_accel).map_err(js_err)
}

#[derive(Serialize)]
struct CurvePoint {
    speed: f64,
    accel: f64,
}

/// IDM acceleration over follower speeds `0..=v0` for a fixed gap and
/// leader speed.
pub fn idm_curve(gap: f64, leader_speed: f64, points: usize) -> Result<String, String> {
    let idm = IdmParams::default();
    let n = points.clamp(2, 500);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let speed = idm.v0 * i as f64 / (n - 1) as f64;
        let accel = idm_acceleration(speed, gap, leader_speed, &idm).map_err(|e| e.to_string())?;
        out.push(CurvePoint { speed, accel });
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn idm_curve_json(gap: f64, leader_speed: f64, points: u32) -> Result<String, JsError> {
    idm_curve(gap, leader_speed, points as usize).map_err(js_err)
}

#[derive(Serialize)]
struct NoiseTrace {
    values: Vec<f64>,
    empirical_std: f64,
    stationary_std: f64,
}

/// One OU exploration-noise trace.
pub fn ou_trace(theta: f64, sigma: f64, steps: usize, seed: u64) -> Result<String, String> {
    if !(theta > 0.0 && theta.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
        return Err(format!("need theta > 0 and sigma >= 0, got theta={theta}, sigma={sigma}"));
    }
    let mut noise = OuNoise::new(theta, sigma, seed);
    let values: Vec<f64> = (0..steps.min(100_000)).map(|_| noise.next(0)).collect();
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let trace = NoiseTrace {
        empirical_std: var.sqrt(),
        stationary_std: noise.stationary_std(),
        values,
    };
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn ou_trace_json(theta: f64, sigma: f64, steps: u32, seed: u32) -> Result<String, JsError> {
    ou_trace(theta, sigma, steps as usize, seed as u64).map_err(js_err)
}
