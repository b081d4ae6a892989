use bottleneck_core::agent::{select_action, train, DdpgAgent, TrainConfig};
use bottleneck_core::checkpoint::Checkpoint;
use bottleneck_core::config::RunConfig;
use bottleneck_core::env::{baseline_episode, run_episode, BottleneckEnv, CavControl, EnvSettings};
use bottleneck_core::metrics::{compare, Controller};
use bottleneck_core::scenario::ScenarioName;
use bottleneck_core::Error;

fn small_config() -> TrainConfig {
    TrainConfig {
        max_episodes: Some(2),
        warmup_steps: 30,
        batch_size: 8,
        ..TrainConfig::default()
    }
}

#[test]
fn short_training_run_round_trips_through_a_checkpoint() {
    let spec = ScenarioName::Moderate.spec();
    let mut env = BottleneckEnv::new(spec, &EnvSettings::default(), CavControl::Learned).unwrap();
    let mut agent = DdpgAgent::new(small_config(), 4).unwrap();
    let mut seen = 0;
    let logs = train(&mut env, &mut agent, 4, |_, _| {
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(logs.len(), 2);
    assert_eq!(seen, 2);
    assert!(logs[0].critic_loss.is_some(), "updates start after 30 of ~136 steps");
    assert_eq!(logs[1].step, logs[0].step + logs[1].episode_steps);

    let restored = Checkpoint::from_json(&Checkpoint::from_agent(&agent).to_json())
        .unwrap()
        .networks()
        .unwrap();
    assert_eq!(restored.actor, agent.actor);
    assert_eq!(restored.critic_target, agent.critic_target);

    let obs = env.reset(99).unwrap();
    assert_eq!(
        select_action(&restored.actor, &obs, None).unwrap(),
        agent.select_action(&obs, None).unwrap()
    );
}

#[test]
fn training_stops_at_the_step_budget() {
    let cfg = TrainConfig {
        total_steps: 25,
        max_episodes: None,
        ..small_config()
    };
    let mut env = BottleneckEnv::new(ScenarioName::Severe.spec(), &EnvSettings::default(), CavControl::Learned).unwrap();
    let mut agent = DdpgAgent::new(cfg, 0).unwrap();
    let logs = train(&mut env, &mut agent, 0, |_, _| Ok(())).unwrap();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].episode_steps, 25);
    assert_eq!(logs[0].critic_loss, None);
}

#[test]
fn callback_errors_abort_training() {
    let mut env = BottleneckEnv::new(ScenarioName::Moderate.spec(), &EnvSettings::default(), CavControl::Learned).unwrap();
    let mut agent = DdpgAgent::new(small_config(), 0).unwrap();
    let err = train(&mut env, &mut agent, 0, |_, _| Err(Error::Invariant("stop".into()))).unwrap_err();
    assert!(err.to_string().contains("stop"));
}

#[test]
fn baseline_metrics_are_consistent() {
    let cfg = RunConfig::default();
    let m = baseline_episode(&cfg.scenario_spec(), &cfg.env_settings(), 2, 0).unwrap();
    assert_eq!(m.controller, Controller::Baseline);
    assert_eq!(m.mean_speed_grid.space_cells(), 10);
    assert_eq!(m.mean_speed_grid.counts, m.speed_std_grid.counts);
    assert!(m.mean_speed_grid.time_cells() * 10 >= m.episode_length);
    let csv = m.mean_speed_grid.to_csv();
    assert_eq!(csv.lines().count(), 10);

    let report = compare(std::slice::from_ref(&m), std::slice::from_ref(&m)).unwrap();
    assert_eq!(report.baseline_mean_reward, report.learned_mean_reward);
    assert_eq!(report.learned_wins, 0);
}

#[test]
fn rule_based_env_ignores_actions() {
    let spec = ScenarioName::Moderate.spec();
    let settings = EnvSettings::default();
    let mut env = BottleneckEnv::new(spec.clone(), &settings, CavControl::RuleBased).unwrap();
    let braking = run_episode(&mut env, 5, 0, Controller::Baseline, |obs| Ok(vec![-3.0; obs.node_count()])).unwrap();
    let idle = baseline_episode(&spec, &settings, 5, 0).unwrap();
    assert_eq!(braking.episode_reward, idle.episode_reward);
}
