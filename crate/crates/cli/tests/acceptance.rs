//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 8 and 9 train real controllers and take several minutes. They are
//! seeded, so their outcome is reproducible, but they are soft: a FAIL there
//! is reported and does not change the exit code. Any other FAIL does.
//!
//! `ACCEPTANCE_CRITERIA=1,2,3` runs a subset; the rest print SKIP.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use bottleneck_cli::{cmd_compare, cmd_train, evaluate_actor, load_checkpoint, read_metrics, TRAINING_LOG_FILE};
use bottleneck_core::agent::{soft_update, td_target, ActorParams, CriticParams, ReplayBuffer, Transition};
use bottleneck_core::config::{Mode, RunConfig};
use bottleneck_core::env::{baseline_episode, BottleneckEnv, CavControl, EnvSettings, RewardConfig};
use bottleneck_core::env::{throughput_reward, variance_penalty};
use bottleneck_core::metrics::{accumulate_grids, mean_and_std, EpisodeMetrics, TrajectoryRow, MS_TO_KMH};
use bottleneck_core::nn::{finite_diff_check, flatten, glorot_uniform, unflatten, GraphConvLayer, Matrix};
use bottleneck_core::obs::{build_adjacency, normalize_adjacency, GraphObservation, FEATURE_DIM};
use bottleneck_core::scenario::{Horizon, ScenarioName};
use bottleneck_core::sim::{
    idm_acceleration, CorridorSpec, Demand, IdmParams, LaneChangeParams, Segment, SimParams, SimState, Simulator,
    VehicleKind, VehicleState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_obs(n: usize, rng: &mut ChaCha8Rng) -> GraphObservation {
    GraphObservation {
        features: glorot_uniform(n, FEATURE_DIM, rng).map(|v| v * 1.5),
        adjacency: build_adjacency(n).unwrap(),
        cav_ids: (0..n as u64).collect(),
    }
}

const STEP: f64 = 1e-5;

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut actor_err, mut critic_err, mut action_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let obs = random_obs(3, &mut rng);
        let actor = ActorParams::init(&mut rng);
        let weights: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace = actor.forward_trace(&obs).map_err(|e| e.to_string())?;
        let grads = actor.backward(&trace, &weights).map_err(|e| e.to_string())?;
        actor_err = actor_err.max(finite_diff_check(
            |p| {
                let mut a = actor.clone();
                unflatten(&mut a, p);
                let raw = a.forward_trace(&obs).unwrap().raw;
                raw.iter().zip(&weights).map(|(r, w)| r * w).sum()
            },
            &flatten(&actor),
            &flatten(&grads),
            STEP,
        ));

        let critic = CriticParams::init(&mut rng);
        let actions: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let trace = critic.forward_trace(&obs, &actions).map_err(|e| e.to_string())?;
        let (grads, d_actions) = critic.backward(&trace, 1.0).map_err(|e| e.to_string())?;
        critic_err = critic_err.max(finite_diff_check(
            |p| {
                let mut c = critic.clone();
                unflatten(&mut c, p);
                c.forward(&obs, &actions).unwrap()
            },
            &flatten(&critic),
            &flatten(&grads),
            STEP,
        ));
        action_err = action_err.max(finite_diff_check(
            |a| critic.forward(&obs, a).unwrap(),
            &actions,
            &d_actions,
            STEP,
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = actor_err.max(critic_err).max(action_err);
    check(
        worst < 1e-4 && secs < 10.0,
        format!(
            "worst relative error actor {actor_err:.1e}, critic {critic_err:.1e}, dQ/da {action_err:.1e} over 20 observations, {secs:.1} s"
        ),
    )
}

fn dense_product(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

fn gcn_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_norm: f64 = 0.0;
    let mut worst_inv_n: f64 = 0.0;
    let mut worst_conv: f64 = 0.0;
    for n in 1..=8 {
        let a = build_adjacency(n).map_err(|e| e.to_string())?;
        let mut with_loops = Matrix::zeros(n, n);
        let mut d_inv_sqrt = Matrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                let v = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
                with_loops.set(i, j, v);
                degree += v;
            }
            d_inv_sqrt.set(i, i, 1.0 / degree.sqrt());
        }
        let oracle = dense_product(&dense_product(&d_inv_sqrt, &with_loops), &d_inv_sqrt);
        let s = normalize_adjacency(&a);
        worst_norm = worst_norm.max(s.max_abs_diff(&oracle));
        for v in s.data() {
            worst_inv_n = worst_inv_n.max((v - 1.0 / n as f64).abs());
        }

        let layer = GraphConvLayer {
            weights: glorot_uniform(7, 5, &mut rng),
            bias: glorot_uniform(1, 5, &mut rng),
        };
        let h = glorot_uniform(n, 7, &mut rng);
        let (out, _) = layer.forward(&h, &s).map_err(|e| e.to_string())?;
        let mut expected = dense_product(&dense_product(&oracle, &h), &layer.weights);
        for i in 0..n {
            for j in 0..5 {
                expected.set(i, j, (expected.get(i, j) + layer.bias.get(0, j)).max(0.0));
            }
        }
        worst_conv = worst_conv.max(out.max_abs_diff(&expected));
    }
    let worst = worst_norm.max(worst_inv_n).max(worst_conv);
    check(
        worst <= 1e-12,
        format!("n=1..8: normalisation {worst_norm:.1e}, 1/n entries {worst_inv_n:.1e}, graph conv {worst_conv:.1e}"),
    )
}

fn idm_properties() -> Outcome {
    let idm = IdmParams::default();
    let err = |e: bottleneck_core::Error| e.to_string();
    let free = idm_acceleration(idm.v0, f64::INFINITY, 0.0, &idm).map_err(err)?;
    let jam = idm_acceleration(0.0, idm.s0, 0.0, &idm).map_err(err)?;

    // Speed monotonicity is checked where the leader is not faster than the
    // follower. With a faster leader and a small gap the desired gap shrinks
    // as v grows, so the acceleration can rise with v; those cases are only
    // counted.
    let speeds: Vec<f64> = (0..50).map(|i| idm.v0 * i as f64 / 49.0).collect();
    let gaps: Vec<f64> = (0..50).map(|i| 0.5 + 200.0 * i as f64 / 49.0).collect();
    let mut speed_breaks = 0;
    let mut faster_leader_rises = 0;
    let mut gap_breaks = 0;
    for &leader in &[0.0, 15.0, 30.0] {
        for &gap in &gaps {
            let row: Vec<f64> = speeds.iter().map(|&v| idm_acceleration(v, gap, leader, &idm).unwrap()).collect();
            for (w, v) in row.windows(2).zip(&speeds) {
                if w[1] > w[0] {
                    if *v >= leader {
                        speed_breaks += 1;
                    } else {
                        faster_leader_rises += 1;
                    }
                }
            }
        }
        for &v in &speeds {
            let col: Vec<f64> = gaps.iter().map(|&g| idm_acceleration(v, g, leader, &idm).unwrap()).collect();
            gap_breaks += col.windows(2).filter(|w| w[1] < w[0]).count();
        }
    }
    let monotone = speed_breaks == 0 && gap_breaks == 0;

    let corridor = CorridorSpec::new(
        20_000.0,
        vec![Segment {
            start: 0.0,
            lanes: 1,
        }],
        30.0,
    )
    .map_err(err)?;
    let demand = Demand {
        inflow_rate: 1000.0,
        total_vehicles: 11,
        cav_count: 1,
    };
    let sim = Simulator::new(corridor, demand, idm, LaneChangeParams::default(), SimParams::default()).map_err(err)?;
    let mut state: SimState = sim.initial_state(0);
    let vehicle = |id: u64, kind, position: f64, speed: f64| VehicleState {
        id,
        kind,
        lane: 0,
        position,
        speed,
        accel: 0.0,
        length: 5.0,
        idm,
        last_lane_change: None,
    };
    state.vehicles.push(vehicle(0, VehicleKind::Cav, 2000.0, 0.0));
    for i in 1..=10u64 {
        state.vehicles.push(vehicle(i, VehicleKind::Hdv, 2000.0 - 60.0 * i as f64, 25.0));
    }
    state.spawned_count = 11;
    state.cav_spawned = 1;
    let hold = BTreeMap::from([(0u64, -3.0)]);
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..10_000 {
        sim.step(&mut state, &hold, sim.params.dt).map_err(err)?;
        for pair in state.vehicles.windows(2) {
            let gap = pair[0].rear() - pair[1].position;
            min_gap = min_gap.min(gap);
            if gap <= 0.0 {
                violations += 1;
            }
        }
    }
    check(
        free == 0.0 && jam == 0.0 && monotone && violations == 0,
        format!(
            "fixed points {free} and {jam}; 50x50 grid breaks: speed {speed_breaks}, gap {gap_breaks} (faster-leader rises {faster_leader_rises}); platoon violations {violations}, min gap {min_gap:.3} m"
        ),
    )
}

fn reward_identities() -> Outcome {
    let spec = ScenarioName::Moderate.spec();
    let settings = EnvSettings::default();
    let cfg = settings.reward;
    let mut env = BottleneckEnv::new(spec.clone(), &settings, CavControl::RuleBased).map_err(|e| e.to_string())?;
    let mut obs = env.reset(3).map_err(|e| e.to_string())?;
    let mut steps = 0;
    let mut mismatches = 0;
    while !env.is_done() {
        let out = env.step(&vec![0.0; obs.node_count()]).map_err(|e| e.to_string())?;
        let state = env.state();
        let recount = state
            .exit_log
            .iter()
            .filter(|&&e| e > state.time - cfg.window && e <= state.time)
            .count();
        if out.info.r1 != 3600.0 * recount as f64 / cfg.window {
            mismatches += 1;
        }
        obs = out.obs;
        steps += 1;
    }

    let corridor = &spec.corridor;
    let hand = RewardConfig { beta: 1.0, window: 10.0 };
    let with_speeds = |speeds: &[f64]| {
        let mut state = env.state().clone();
        state.vehicles = speeds
            .iter()
            .enumerate()
            .map(|(i, &speed)| VehicleState {
                id: i as u64,
                kind: VehicleKind::Hdv,
                lane: i % 4,
                position: 100.0,
                speed,
                accel: 0.0,
                length: 5.0,
                idm: IdmParams::default(),
                last_lane_change: None,
            })
            .collect();
        state
    };
    let uniform = variance_penalty(&with_speeds(&[17.0, 17.0, 17.0]), corridor, &hand);
    let split = variance_penalty(&with_speeds(&[10.0, 20.0]), corridor, &hand);
    let window_case = throughput_reward(&[0.0, 5.0, 10.0], 10.0, &cfg);
    check(
        mismatches == 0 && uniform.abs() <= 1e-12 && (split + 12.5).abs() <= 1e-12 && window_case == 720.0,
        format!("{mismatches} r1 mismatches over {steps} steps; uniform {uniform}, {{10,20}} {split}"),
    )
}

fn algorithm_mechanics() -> Outcome {
    let y = td_target(1.0, 0.99, false, 2.0);
    let terminal = td_target(1.0, 0.99, true, 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let online = CriticParams::init(&mut rng);
    let mut target = CriticParams::init(&mut rng);
    let tau = 1e-3;
    let start: Vec<f64> = flatten(&target).iter().zip(flatten(&online)).map(|(t, o)| t - o).collect();
    let k = 100;
    for _ in 0..k {
        soft_update(&mut target, &online, tau);
    }
    let factor = (1.0 - tau).powi(k);
    let contraction = flatten(&target)
        .iter()
        .zip(flatten(&online))
        .zip(&start)
        .map(|((t, o), d0)| ((t - o) - factor * d0).abs())
        .fold(0.0, f64::max);

    let obs = random_obs(1, &mut rng);
    let size = 16;
    let mut buffer = ReplayBuffer::new(size).map_err(|e| e.to_string())?;
    for i in 0..size {
        buffer
            .push(Transition {
                obs: obs.clone(),
                actions: vec![0.0],
                reward: i as f64,
                next_obs: obs.clone(),
                done: false,
            })
            .map_err(|e| e.to_string())?;
    }
    let mut counts = vec![0usize; size];
    let batches = 25_000;
    for _ in 0..batches {
        for i in buffer.sample_indices(4, &mut rng).map_err(|e| e.to_string())? {
            counts[i] += 1;
        }
    }
    let expected = (batches * 4) as f64 / size as f64;
    let spread = counts
        .iter()
        .map(|&c| (c as f64 - expected).abs() / expected)
        .fold(0.0, f64::max);
    check(
        (y - 2.98).abs() <= 1e-12 && terminal == 1.0 && contraction <= 1e-12 && spread <= 0.05,
        format!(
            "y={y}, terminal y={terminal}; contraction error {contraction:.1e} after {k} updates; replay max deviation {:.2}% over 1e5 draws",
            100.0 * spread
        ),
    )
}

fn small_training_config(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.mode = Mode::Train;
    cfg.seed = 21;
    cfg.output_dir = dir.to_string_lossy().into_owned();
    cfg.train.max_episodes = Some(3);
    cfg.train.warmup_steps = 50;
    cfg.train.batch_size = 16;
    cfg
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let cfg = small_training_config(&tmp.path().join(run));
        cmd_train(&cfg).map_err(|e| e.to_string())?;
        logs.push(fs::read(tmp.path().join(run).join(TRAINING_LOG_FILE)).map_err(|e| e.to_string())?);
    }
    let spec = ScenarioName::Moderate.spec();
    let settings = EnvSettings::default();
    let rewards: Vec<f64> = (0..3)
        .map(|_| baseline_episode(&spec, &settings, 7, 0).map(|m| m.episode_reward))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let rows = logs[0].iter().filter(|&&b| b == b'\n').count();
    check(
        logs[0] == logs[1] && rows > 1 && rewards.iter().all(|&r| r == rewards[0]),
        format!(
            "training logs identical: {} ({} lines); baseline reward {} on 3 runs",
            logs[0] == logs[1],
            rows,
            rewards[0]
        ),
    )
}

fn scenario_fidelity() -> Outcome {
    let m = ScenarioName::Moderate.spec();
    let s = ScenarioName::Severe.spec();
    let lanes = |spec: &bottleneck_core::scenario::ScenarioSpec| -> Vec<(f64, usize)> {
        spec.corridor.segments.iter().map(|seg| (seg.start, seg.lanes)).collect()
    };
    let moderate_ok = m.corridor.total_length == 500.0
        && lanes(&m) == [(0.0, 4), (300.0, 3), (400.0, 2)]
        && m.inflow_rate == 1500.0
        && m.total_vehicles == 50
        && m.cav_count == 5;
    let severe_ok = s.corridor.total_length == 1000.0
        && lanes(&s) == [(0.0, 4), (600.0, 2), (800.0, 1)]
        && s.inflow_rate == 2300.0
        && s.total_vehicles == 140
        && s.cav_count == 10
        && s.horizon == Horizon::Fixed { steps: 1500 };
    check(
        moderate_ok && severe_ok,
        format!(
            "moderate {} m {:?} {} veh/h {}/{} CAVs; severe {} m {:?} {} veh/h {}/{} CAVs {:?}",
            m.corridor.total_length,
            lanes(&m),
            m.inflow_rate,
            m.cav_count,
            m.total_vehicles,
            s.corridor.total_length,
            lanes(&s),
            s.inflow_rate,
            s.cav_count,
            s.total_vehicles,
            s.horizon
        ),
    )
}

const EVAL_SEED: u64 = 10_000;
const EVAL_EPISODES: usize = 10;

struct Trained {
    baseline: Vec<EpisodeMetrics>,
    learned: Vec<EpisodeMetrics>,
}

/// Trains on `scenario` for `episodes` episodes, then evaluates the final
/// actor and the rule-based controller on the same evaluation seeds.
fn train_and_evaluate(scenario: ScenarioName, seed: u64, episodes: usize) -> Result<Trained, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.mode = Mode::Train;
    cfg.scenario = scenario;
    cfg.seed = seed;
    cfg.output_dir = tmp.path().join("train").to_string_lossy().into_owned();
    cfg.train.max_episodes = Some(episodes);
    let summary = cmd_train(&cfg).map_err(|e| format!("{e:#}"))?;
    let nets = load_checkpoint(&summary.checkpoint).map_err(|e| format!("{e:#}"))?;

    cfg.mode = Mode::Eval;
    cfg.seed = EVAL_SEED;
    cfg.episodes = EVAL_EPISODES;
    let eval_dir = tmp.path().join("eval");
    fs::create_dir_all(&eval_dir).map_err(|e| e.to_string())?;
    let learned = evaluate_actor(&cfg, &nets.actor, &eval_dir).map_err(|e| format!("{e:#}"))?;
    let spec = scenario.spec();
    let settings = cfg.env_settings();
    let baseline = (0..EVAL_EPISODES)
        .map(|i| baseline_episode(&spec, &settings, EVAL_SEED + i as u64, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Trained { baseline, learned })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn learning_sanity() -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in [1u64, 2, 3] {
        let t = train_and_evaluate(ScenarioName::Moderate, seed, 200)?;
        let b = mean(t.baseline.iter().map(|m| m.episode_reward));
        let l = mean(t.learned.iter().map(|m| m.episode_reward));
        if l >= b {
            wins += 1;
        }
        parts.push(format!("seed {seed}: learned {l:.0} vs baseline {b:.0}"));
    }
    check(wins >= 2, format!("{wins}/3 seeds at or above baseline ({})", parts.join("; ")))
}

fn severe_throughput(out: &mut Option<Trained>) -> Outcome {
    let t = train_and_evaluate(ScenarioName::Severe, 1, 20)?;
    let b = mean(t.baseline.iter().map(|m| m.throughput as f64));
    let l = mean(t.learned.iter().map(|m| m.throughput as f64));
    let dominated = t
        .baseline
        .iter()
        .zip(&t.learned)
        .filter(|(b, l)| l.throughput > b.throughput)
        .count();
    *out = Some(t);
    check(
        l >= b,
        format!("mean throughput learned {l:.1} vs baseline {b:.1}; learned strictly higher in {dominated}/{EVAL_EPISODES} episodes"),
    )
}

/// Stand-in for the trained controller when criterion 9 is skipped.
fn zero_actor_severe() -> Result<Trained, String> {
    let mut cfg = RunConfig::default();
    cfg.scenario = ScenarioName::Severe;
    cfg.seed = EVAL_SEED;
    cfg.episodes = 2;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let learned = evaluate_actor(&cfg, &ActorParams::zeros(), tmp.path()).map_err(|e| format!("{e:#}"))?;
    let spec = cfg.scenario_spec();
    let baseline = (0..2)
        .map(|i| baseline_episode(&spec, &cfg.env_settings(), EVAL_SEED + i as u64, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Trained { baseline, learned })
}

fn heatmap_pipeline(severe: Option<&Trained>) -> Outcome {
    let spec = ScenarioName::Severe.spec();
    let settings = EnvSettings::default();
    let mut env = BottleneckEnv::new(spec.clone(), &settings, CavControl::RuleBased).map_err(|e| e.to_string())?;
    env.set_recording(true);
    let mut obs = env.reset(4).map_err(|e| e.to_string())?;
    while !env.is_done() {
        obs = env.step(&vec![0.0; obs.node_count()]).map_err(|e| e.to_string())?.obs;
    }
    let log: &[TrajectoryRow] = env.trajectory();
    let (mean_grid, std_grid) = accumulate_grids(log, spec.corridor.total_length).map_err(|e| e.to_string())?;

    let rows = (spec.corridor.total_length / 50.0).ceil() as usize;
    let mut bins: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for r in log {
        let s = ((r.position / 50.0).floor() as usize).min(rows - 1);
        let t = (r.time / 10.0).floor() as usize;
        bins.entry((s, t)).or_default().push(r.speed * MS_TO_KMH);
    }
    let cols = bins.keys().map(|&(_, t)| t + 1).max().unwrap_or(0);
    let mut mismatches = 0;
    for s in 0..rows {
        for t in 0..cols {
            let want = bins.get(&(s, t)).map(|xs| mean_and_std(xs));
            let got = mean_grid.get(s, t).zip(std_grid.get(s, t));
            if want != got {
                mismatches += 1;
            }
        }
    }
    let shape_ok = mean_grid.space_cells() == rows && mean_grid.time_cells() == cols;

    let untrained;
    let trained = match severe {
        Some(t) => t,
        None => {
            untrained = zero_actor_severe()?;
            &untrained
        }
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, m: &[EpisodeMetrics]| -> Result<std::path::PathBuf, String> {
        let path = tmp.path().join(name);
        fs::write(&path, serde_json::to_string(m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Ok(path)
    };
    let b_path = write("baseline.json", &trained.baseline)?;
    let l_path = write("learned.json", &trained.learned)?;
    let mut cfg = RunConfig::default();
    cfg.mode = Mode::Compare;
    cfg.output_dir = tmp.path().join("cmp").to_string_lossy().into_owned();
    cmd_compare(&cfg, &b_path, &l_path).map_err(|e| format!("{e:#}"))?;
    let text = fs::read_to_string(tmp.path().join("cmp/comparison.json")).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let emitted = |key: &str| report.get(key).and_then(serde_json::Value::as_u64);
    let sum = |m: &[EpisodeMetrics]| m.iter().map(|e| e.cells_below_8kmh as u64).sum::<u64>();
    let base_cells = emitted("baseline_cells_below_8kmh");
    let learned_cells = emitted("learned_cells_below_8kmh");
    let reread = read_metrics(&b_path).map_err(|e| e.to_string())? == trained.baseline;
    check(
        mismatches == 0
            && shape_ok
            && reread
            && base_cells == Some(sum(&trained.baseline))
            && learned_cells == Some(sum(&trained.learned)),
        format!(
            "{mismatches} cell mismatches over {rows}x{cols} cells from {} samples; severe cells below 8 km/h: baseline {}, learned {}",
            log.len(),
            base_cells.map_or("missing".into(), |c| c.to_string()),
            learned_cells.map_or("missing".into(), |c| c.to_string()),
        ),
    )
}

fn main() -> ExitCode {
    let mut severe = None;
    let mut results: Vec<(usize, &str, bool, Option<Outcome>)> = Vec::new();
    let selected: Option<Vec<usize>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut run = |n: usize, name: &'static str, soft: bool, f: &mut dyn FnMut() -> Outcome| {
        if selected.as_ref().is_some_and(|s| !s.contains(&n)) {
            results.push((n, name, soft, None));
            return;
        }
        let start = Instant::now();
        let outcome = f();
        eprintln!("criterion {n} finished in {:.1} s", start.elapsed().as_secs_f64());
        results.push((n, name, soft, Some(outcome)));
    };
    run(1, "gradient correctness", false, &mut gradients);
    run(2, "GCN oracle", false, &mut gcn_oracle);
    run(3, "IDM properties", false, &mut idm_properties);
    run(4, "reward identities", false, &mut reward_identities);
    run(5, "update mechanics", false, &mut algorithm_mechanics);
    run(6, "determinism", false, &mut determinism);
    run(7, "scenario fidelity", false, &mut scenario_fidelity);
    run(8, "learning sanity (soft)", true, &mut learning_sanity);
    run(9, "severe throughput (soft)", true, &mut || severe_throughput(&mut severe));
    run(10, "heatmap pipeline", false, &mut || heatmap_pipeline(severe.as_ref()));

    let mut hard_failure = false;
    for (n, name, soft, outcome) in &results {
        let (verdict, detail) = match outcome {
            None => ("SKIP", "not selected"),
            Some(Ok(d)) => ("PASS", d.as_str()),
            Some(Err(d)) => ("FAIL", d.as_str()),
        };
        hard_failure |= outcome.as_ref().is_some_and(|o| o.is_err()) && !soft;
        println!("criterion {n:>2} {verdict}  {name}: {detail}");
    }
    if hard_failure {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
