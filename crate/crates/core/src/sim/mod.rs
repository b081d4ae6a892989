//! Deterministic microscopic simulation of a lane-drop corridor.
//!
//! HDVs follow the IDM; CAVs take externally commanded accelerations (or
//! fall back to the IDM when no command is given, which is how the
//! rule-based baseline runs). Every vehicle passes through an emergency
//! braking guard that keeps the kinematics physical regardless of what the
//! controller asks for. Lane changes are evaluated on a fixed cadence after
//! the kinematic update.

mod corridor;
mod idm;
mod lane_change;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use corridor::{CorridorSpec, Segment};
pub use idm::{desired_gap, idm_acceleration, safe_entry_speed, IdmParams};
pub use lane_change::{lane_change_decision, LaneChangeParams};

use lane_change::{obstacle_ahead, Obstacle};

use crate::{Error, Result};

/// Bounds on commanded CAV accelerations, m/s².
pub const ACTION_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Cav,
    Hdv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: u64,
    pub kind: VehicleKind,
    pub lane: usize,
    /// Front bumper coordinate in metres.
    pub position: f64,
    pub speed: f64,
    /// Acceleration applied during the last substep.
    pub accel: f64,
    pub length: f64,
    pub idm: IdmParams,
    pub last_lane_change: Option<f64>,
}

impl VehicleState {
    pub fn rear(&self) -> f64 {
        self.position - self.length
    }

    pub fn is_cav(&self) -> bool {
        self.kind == VehicleKind::Cav
    }
}

/// Traffic demand of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    /// Vehicles per hour entering at position 0.
    pub inflow_rate: f64,
    pub total_vehicles: usize,
    pub cav_count: usize,
}

impl Demand {
    /// Seconds between insertion attempts.
    pub fn headway(&self) -> f64 {
        3600.0 / self.inflow_rate
    }

    /// Every `k`-th spawned vehicle is a CAV, `k = round(total / cavs)`.
    pub fn cav_spacing(&self) -> Option<usize> {
        (self.cav_count > 0)
            .then(|| ((self.total_vehicles as f64 / self.cav_count as f64).round() as usize).max(1))
    }
}

/// Integrator and guard settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Substep length in seconds.
    pub dt: f64,
    /// Seconds between lane-change evaluations.
    pub lane_change_interval: f64,
    pub vehicle_length: f64,
    /// Net gap (m) the emergency guard keeps in reserve.
    pub guard_min_gap: f64,
    /// Seconds per RL decision; commands are held for this long.
    pub action_interval: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            lane_change_interval: 1.0,
            vehicle_length: 5.0,
            guard_min_gap: 0.5,
            action_interval: 1.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("dt", self.dt),
            ("lane_change_interval", self.lane_change_interval),
            ("vehicle_length", self.vehicle_length),
            ("action_interval", self.action_interval),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "sim.{name} must be a finite positive number, got {value}"
                )));
            }
        }
        if !(self.guard_min_gap.is_finite() && self.guard_min_gap >= 0.0) {
            return Err(Error::Config(format!(
                "sim.guard_min_gap must be >= 0, got {}",
                self.guard_min_gap
            )));
        }
        if self.lane_change_interval < self.dt {
            return Err(Error::Config(
                "sim.lane_change_interval must be at least one substep".into(),
            ));
        }
        Ok(())
    }

    /// Substeps in one RL decision interval.
    pub fn substeps_per_action(&self) -> usize {
        (self.action_interval / self.dt).round().max(1.0) as usize
    }

    fn substeps_per_lane_change(&self) -> u64 {
        (self.lane_change_interval / self.dt).round().max(1.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    /// Vehicles in the corridor, in spawn order.
    pub vehicles: Vec<VehicleState>,
    pub spawned_count: usize,
    pub exited_count: usize,
    pub cav_spawned: usize,
    /// Exit times in seconds, in exit order.
    pub exit_log: Vec<f64>,
    pub rng: ChaCha8Rng,
    next_attempt: f64,
    entry_offset: usize,
    substeps: u64,
}

impl SimState {
    pub fn vehicle(&self, id: u64) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    /// CAV ids currently in the corridor, ascending.
    pub fn cav_ids(&self) -> Vec<u64> {
        self.vehicles.iter().filter(|v| v.is_cav()).map(|v| v.id).collect()
    }

    pub fn substeps(&self) -> u64 {
        self.substeps
    }
}

/// Static configuration of one simulated corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    pub corridor: CorridorSpec,
    pub demand: Demand,
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub params: SimParams,
}

impl Simulator {
    pub fn new(
        corridor: CorridorSpec,
        demand: Demand,
        idm: IdmParams,
        lane_change: LaneChangeParams,
        params: SimParams,
    ) -> Result<Self> {
        corridor.validate()?;
        idm.validate("idm")?;
        lane_change.validate()?;
        params.validate()?;
        if !(demand.inflow_rate.is_finite() && demand.inflow_rate > 0.0) {
            return Err(Error::Config(format!(
                "scenario.inflow_rate must be positive, got {}",
                demand.inflow_rate
            )));
        }
        if demand.cav_count > demand.total_vehicles {
            return Err(Error::Config(format!(
                "scenario.cav_count {} exceeds total_vehicles {}",
                demand.cav_count, demand.total_vehicles
            )));
        }
        Ok(Self {
            corridor,
            demand,
            idm,
            lane_change,
            params,
        })
    }

    /// Fresh state for an episode. The seed draws the phase of the first
    /// insertion within one headway and the lane that starts the entry
    /// round-robin; everything after that is deterministic.
    pub fn initial_state(&self, seed: u64) -> SimState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let next_attempt = rng.random::<f64>() * self.demand.headway();
        let entry_offset = rng.random_range(0..self.corridor.entry_lanes());
        SimState {
            time: 0.0,
            vehicles: Vec::new(),
            spawned_count: 0,
            exited_count: 0,
            cav_spawned: 0,
            exit_log: Vec::new(),
            rng,
            next_attempt,
            entry_offset,
            substeps: 0,
        }
    }

    /// Inserts every vehicle whose scheduled attempt time has passed, in
    /// spawn order, as long as the entry gap in its assigned lane is safe.
    /// A blocked vehicle holds up the ones behind it until a later call.
    pub fn spawn_inflow(&self, state: &mut SimState) -> Vec<u64> {
        let mut inserted = Vec::new();
        let headway = self.demand.headway();
        let entry_lanes = self.corridor.entry_lanes();
        while state.spawned_count < self.demand.total_vehicles && state.next_attempt <= state.time + 1e-9 {
            let lane = (state.entry_offset + state.spawned_count) % entry_lanes;
            let nearest = state
                .vehicles
                .iter()
                .filter(|v| v.lane == lane)
                .min_by(|a, b| a.position.total_cmp(&b.position));
            let (gap, leader_speed) = nearest.map_or((f64::INFINITY, 0.0), |l| (l.rear(), l.speed));
            let Some(speed) = safe_entry_speed(gap, leader_speed, self.corridor.speed_limit, &self.idm) else {
                break;
            };
            let index = state.spawned_count;
            let is_cav = self
                .demand
                .cav_spacing()
                .is_some_and(|k| index.is_multiple_of(k) && state.cav_spawned < self.demand.cav_count);
            let id = index as u64;
            state.vehicles.push(VehicleState {
                id,
                kind: if is_cav { VehicleKind::Cav } else { VehicleKind::Hdv },
                lane,
                position: 0.0,
                speed,
                accel: 0.0,
                length: self.params.vehicle_length,
                idm: self.idm,
                last_lane_change: None,
            });
            state.spawned_count += 1;
            state.cav_spawned += usize::from(is_cav);
            state.next_attempt += headway;
            inserted.push(id);
        }
        inserted
    }

    /// Per lane, vehicle indices sorted downstream first.
    fn lanes(&self, state: &SimState) -> Vec<Vec<usize>> {
        let mut lanes = vec![Vec::new(); self.corridor.max_lanes()];
        for (i, v) in state.vehicles.iter().enumerate() {
            lanes[v.lane].push(i);
        }
        for lane in &mut lanes {
            lane.sort_by(|&a, &b| state.vehicles[b].position.total_cmp(&state.vehicles[a].position));
        }
        lanes
    }

    /// Advances the state by one substep of length `dt`.
    ///
    /// CAVs listed in `cav_accels` take the commanded acceleration; every
    /// other vehicle uses the IDM. All vehicles then pass the emergency
    /// guard, are integrated with semi-implicit Euler, and leave the corridor
    /// once their front passes `total_length`. Lane changes run when the
    /// substep counter hits the lane-change cadence. Returns the number of
    /// vehicles that exited.
    pub fn step(&self, state: &mut SimState, cav_accels: &BTreeMap<u64, f64>, dt: f64) -> Result<usize> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invariant(format!("step length must be positive, got {dt}")));
        }
        for (&id, &a) in cav_accels {
            let v = state.vehicle(id).ok_or(Error::UnknownVehicle(id))?;
            if !v.is_cav() {
                return Err(Error::NotCav(id));
            }
            if !(a.is_finite() && a.abs() <= ACTION_BOUND) {
                return Err(Error::ActionRange { vehicle: id, value: a });
            }
        }

        let lanes = self.lanes(state);
        let mut leaders: Vec<Option<Obstacle>> = vec![None; state.vehicles.len()];
        for (lane, order) in lanes.iter().enumerate() {
            for (rank, &i) in order.iter().enumerate() {
                let leader = rank.checked_sub(1).map(|r| &state.vehicles[order[r]]);
                leaders[i] = obstacle_ahead(leader, lane, &self.corridor);
            }
        }

        let mut accels = Vec::with_capacity(state.vehicles.len());
        for (v, leader) in state.vehicles.iter().zip(&leaders) {
            let desired = match (cav_accels.get(&v.id), leader) {
                (Some(&a), _) => a,
                (None, None) => idm_acceleration(v.speed, f64::INFINITY, 0.0, &v.idm)?,
                (None, Some(o)) => idm_acceleration(v.speed, o.rear - v.position, o.speed, &v.idm)
                    .map_err(|e| match e {
                        Error::Collision { gap, .. } => Error::Collision { vehicle: v.id, gap },
                        other => other,
                    })?,
            };
            accels.push(self.guard(v, desired, *leader, dt));
        }

        let limit = self.corridor.speed_limit;
        for (v, a) in state.vehicles.iter_mut().zip(accels) {
            let mut speed = (v.speed + a * dt).max(0.0);
            if v.is_cav() {
                speed = speed.min(limit);
            }
            v.accel = (speed - v.speed) / dt;
            v.speed = speed;
            v.position += speed * dt;
        }
        state.time += dt;
        state.substeps += 1;

        let before = state.vehicles.len();
        let length = self.corridor.total_length;
        let time = state.time;
        let mut exits = 0;
        state.vehicles.retain(|v| {
            let stays = v.position < length;
            if !stays {
                exits += 1;
            }
            stays
        });
        state.exit_log.extend(std::iter::repeat_n(time, exits));
        state.exited_count += before - state.vehicles.len();

        if state.substeps.is_multiple_of(self.params.substeps_per_lane_change()) {
            self.apply_lane_changes(state)?;
        }
        self.check_invariants(state)?;
        Ok(exits)
    }

    /// Spawns due vehicles, then steps once.
    pub fn advance(&self, state: &mut SimState, cav_accels: &BTreeMap<u64, f64>) -> Result<usize> {
        self.spawn_inflow(state);
        self.step(state, cav_accels, self.params.dt)
    }

    /// Replaces `desired` with full braking when, assuming the obstacle ahead
    /// brakes as hard as it can, the vehicle could no longer stop in time.
    fn guard(&self, v: &VehicleState, desired: f64, obstacle: Option<Obstacle>, dt: f64) -> f64 {
        let Some(o) = obstacle else { return desired };
        let brake = v.idm.max_decel;
        let next_speed = (v.speed + desired * dt).max(0.0);
        let leader_speed = (o.speed - brake * dt).max(0.0);
        let next_gap = o.rear + leader_speed * dt - (v.position + next_speed * dt);
        let stopping = ((next_speed * next_speed - leader_speed * leader_speed) / (2.0 * brake)).max(0.0);
        if next_gap < stopping + self.params.guard_min_gap {
            desired.min(-brake)
        } else {
            desired
        }
    }

    fn apply_lane_changes(&self, state: &mut SimState) -> Result<()> {
        let mut order: Vec<(u64, f64)> = state.vehicles.iter().map(|v| (v.id, v.position)).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (id, _) in order {
            if let Some(target) = lane_change_decision(id, state, &self.corridor, &self.lane_change)? {
                let time = state.time;
                let v = state
                    .vehicles
                    .iter_mut()
                    .find(|v| v.id == id)
                    .ok_or(Error::UnknownVehicle(id))?;
                v.lane = target;
                v.last_lane_change = Some(time);
            }
        }
        Ok(())
    }

    /// Lane validity, non-negative speeds and per-lane non-overlap.
    pub fn check_invariants(&self, state: &SimState) -> Result<()> {
        for v in &state.vehicles {
            if !(v.speed.is_finite() && v.speed >= 0.0 && v.position.is_finite()) {
                return Err(Error::Invariant(format!(
                    "vehicle {} has speed {} at position {}",
                    v.id, v.speed, v.position
                )));
            }
            if v.lane >= self.corridor.lane_count_at(v.position) {
                return Err(Error::Invariant(format!(
                    "vehicle {} is on lane {} at {} m where only {} lanes exist",
                    v.id,
                    v.lane,
                    v.position,
                    self.corridor.lane_count_at(v.position)
                )));
            }
        }
        for order in self.lanes(state) {
            for pair in order.windows(2) {
                let (leader, follower) = (&state.vehicles[pair[0]], &state.vehicles[pair[1]]);
                let gap = leader.rear() - follower.position;
                if gap < 0.0 || leader.position <= follower.position {
                    return Err(Error::Collision {
                        vehicle: follower.id,
                        gap,
                    });
                }
            }
        }
        if state.spawned_count != state.vehicles.len() + state.exited_count {
            return Err(Error::Invariant(format!(
                "spawned {} != present {} + exited {}",
                state.spawned_count,
                state.vehicles.len(),
                state.exited_count
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn corridor() -> CorridorSpec {
        CorridorSpec::new(
            500.0,
            vec![
                Segment { start: 0.0, lanes: 4 },
                Segment { start: 300.0, lanes: 3 },
                Segment { start: 400.0, lanes: 2 },
            ],
            30.0,
        )
        .unwrap()
    }

    fn simulator(total: usize, cavs: usize) -> Simulator {
        Simulator::new(
            corridor(),
            Demand {
                inflow_rate: 1500.0,
                total_vehicles: total,
                cav_count: cavs,
            },
            IdmParams::default(),
            LaneChangeParams::default(),
            SimParams::default(),
        )
        .unwrap()
    }

    fn vehicle(id: u64, kind: VehicleKind, lane: usize, position: f64, speed: f64) -> VehicleState {
        VehicleState {
            id,
            kind,
            lane,
            position,
            speed,
            accel: 0.0,
            length: 5.0,
            idm: IdmParams::default(),
            last_lane_change: None,
        }
    }

    fn state_with(sim: &Simulator, vehicles: Vec<VehicleState>) -> SimState {
        let mut s = sim.initial_state(0);
        s.spawned_count = vehicles.len();
        s.next_attempt = f64::INFINITY;
        s.vehicles = vehicles;
        s
    }

    #[test]
    fn coasting_vehicle_moves_speed_times_dt() {
        let sim = simulator(0, 0);
        let mut s = state_with(&sim, vec![vehicle(0, VehicleKind::Cav, 0, 100.0, 10.0)]);
        let cmds = BTreeMap::from([(0, 0.0)]);
        sim.step(&mut s, &cmds, 0.1).unwrap();
        assert!((s.vehicles[0].position - 101.0).abs() < 1e-12);
    }

    #[test]
    fn vehicle_at_the_end_exits() {
        let sim = simulator(0, 0);
        let mut s = state_with(&sim, vec![vehicle(0, VehicleKind::Cav, 0, 499.5, 10.0)]);
        let cmds = BTreeMap::from([(0, 0.0)]);
        let exited = sim.step(&mut s, &cmds, 0.1).unwrap();
        assert_eq!(exited, 1);
        assert!(s.vehicles.is_empty());
        assert_eq!(s.exited_count, 1);
        assert_eq!(s.exit_log.len(), 1);
    }

    #[test]
    fn commands_are_validated() {
        let sim = simulator(0, 0);
        let mut s = state_with(
            &sim,
            vec![
                vehicle(0, VehicleKind::Cav, 0, 100.0, 10.0),
                vehicle(1, VehicleKind::Hdv, 1, 100.0, 10.0),
            ],
        );
        assert!(matches!(
            sim.step(&mut s.clone(), &BTreeMap::from([(0, 3.5)]), 0.1),
            Err(Error::ActionRange { .. })
        ));
        assert!(matches!(
            sim.step(&mut s.clone(), &BTreeMap::from([(1, 0.0)]), 0.1),
            Err(Error::NotCav(1))
        ));
        assert!(matches!(
            sim.step(&mut s, &BTreeMap::from([(7, 0.0)]), 0.1),
            Err(Error::UnknownVehicle(7))
        ));
    }

    #[test]
    fn guard_overrides_reckless_commands() {
        let sim = simulator(0, 0);
        let mut s = state_with(
            &sim,
            vec![
                vehicle(0, VehicleKind::Hdv, 0, 200.0, 0.0),
                vehicle(1, VehicleKind::Cav, 0, 150.0, 25.0),
            ],
        );
        s.vehicles[0].idm.v0 = 0.0001;
        for _ in 0..200 {
            let cmds: BTreeMap<u64, f64> = s.cav_ids().into_iter().map(|id| (id, 3.0)).collect();
            sim.step(&mut s, &cmds, 0.1).unwrap();
        }
    }

    #[test]
    fn inflow_schedule_and_cav_share() {
        let sim = simulator(50, 5);
        assert!((sim.demand.headway() - 2.4).abs() < 1e-12);
        assert_eq!(sim.demand.cav_spacing(), Some(10));
        let mut s = sim.initial_state(3);
        let empty = BTreeMap::new();
        while s.spawned_count < 50 {
            sim.advance(&mut s, &empty).unwrap();
            assert!(s.time < 1000.0);
        }
        assert_eq!(s.cav_spawned, 5);
        assert!(sim.spawn_inflow(&mut s).is_empty());
    }

    #[test]
    fn spawn_defers_when_entry_blocked() {
        let sim = simulator(10, 0);
        let mut s = sim.initial_state(0);
        s.next_attempt = 0.0;
        let lane = s.entry_offset;
        s.vehicles.push(vehicle(99, VehicleKind::Hdv, lane, 6.0, 0.0));
        s.spawned_count = 0;
        let inserted = sim.spawn_inflow(&mut s);
        assert!(inserted.is_empty());
    }
}
