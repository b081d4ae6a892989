//! Rule-based lane changing: mandatory merges ahead of a lane drop and
//! incentive-driven discretionary changes, both gated by a safety check on
//! the new follower.

use serde::{Deserialize, Serialize};

use super::idm::idm_acceleration;
use super::{CorridorSpec, SimState, VehicleState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneChangeParams {
    /// Largest IDM deceleration (m/s², positive) a change may impose on the
    /// new follower.
    pub safe_decel: f64,
    /// Minimum acceleration gain (m/s²) for a discretionary change.
    pub incentive_threshold: f64,
    /// Distance (m) per required merge before a lane drop at which
    /// occupants of the dropping lane start a mandatory merge.
    pub mandatory_lookahead: f64,
    /// Minimum time (s) between two changes of the same vehicle.
    pub cooldown: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self {
            safe_decel: 4.0,
            incentive_threshold: 0.2,
            mandatory_lookahead: 150.0,
            cooldown: 2.0,
        }
    }
}

impl LaneChangeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("safe_decel", self.safe_decel),
            ("incentive_threshold", self.incentive_threshold),
            ("mandatory_lookahead", self.mandatory_lookahead),
            ("cooldown", self.cooldown),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "lane_change.{name} must be a finite positive number, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// The closest thing ahead of a vehicle in some lane: another vehicle's rear
/// bumper or the end of the lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Obstacle {
    pub rear: f64,
    pub speed: f64,
}

struct Neighbors<'a> {
    leader: Option<&'a VehicleState>,
    follower: Option<&'a VehicleState>,
}

fn neighbors<'a>(state: &'a SimState, lane: usize, position: f64, exclude: u64) -> Neighbors<'a> {
    let mut leader: Option<&VehicleState> = None;
    let mut follower: Option<&VehicleState> = None;
    for v in state.vehicles.iter().filter(|v| v.lane == lane && v.id != exclude) {
        if v.position > position {
            if leader.is_none_or(|l| v.position < l.position) {
                leader = Some(v);
            }
        } else if follower.is_none_or(|f| v.position > f.position) {
            follower = Some(v);
        }
    }
    Neighbors { leader, follower }
}

pub(crate) fn obstacle_ahead(
    leader: Option<&VehicleState>,
    lane: usize,
    corridor: &CorridorSpec,
) -> Option<Obstacle> {
    match leader {
        Some(l) => Some(Obstacle {
            rear: l.rear(),
            speed: l.speed,
        }),
        None => corridor.lane_end(lane).map(|end| Obstacle {
            rear: end,
            speed: 0.0,
        }),
    }
}

fn predicted_accel(vehicle: &VehicleState, obstacle: Option<Obstacle>) -> Result<Option<f64>> {
    match obstacle {
        None => idm_acceleration(vehicle.speed, f64::INFINITY, 0.0, &vehicle.idm).map(Some),
        Some(o) => {
            let gap = o.rear - vehicle.position;
            if gap <= 0.0 {
                return Ok(None);
            }
            idm_acceleration(vehicle.speed, gap, o.speed, &vehicle.idm).map(Some)
        }
    }
}

struct Candidate {
    lane: usize,
    own_accel: f64,
    lead_gap: f64,
}

/// Evaluates moving `vehicle` into `lane`. Returns `None` when the move is
/// unsafe for either the vehicle or its new follower.
fn evaluate(
    vehicle: &VehicleState,
    lane: usize,
    state: &SimState,
    corridor: &CorridorSpec,
    lc: &LaneChangeParams,
) -> Result<Option<Candidate>> {
    let n = neighbors(state, lane, vehicle.position, vehicle.id);
    let obstacle = obstacle_ahead(n.leader, lane, corridor);
    let lead_gap = obstacle.map_or(f64::INFINITY, |o| o.rear - vehicle.position);
    if lead_gap <= 0.0 {
        return Ok(None);
    }
    if let Some(o) = obstacle {
        let stopping = (vehicle.speed.powi(2) - o.speed.powi(2)) / (2.0 * vehicle.idm.max_decel);
        if lead_gap < stopping {
            return Ok(None);
        }
    }
    if let Some(f) = n.follower {
        let back_gap = vehicle.rear() - f.position;
        if back_gap <= 0.0 {
            return Ok(None);
        }
        let induced = idm_acceleration(f.speed, back_gap, vehicle.speed, &f.idm)?;
        if induced < -lc.safe_decel {
            return Ok(None);
        }
        let stopping = (f.speed.powi(2) - vehicle.speed.powi(2)) / (2.0 * f.idm.max_decel);
        if back_gap < stopping {
            return Ok(None);
        }
    }
    let Some(own_accel) = predicted_accel(vehicle, obstacle)? else {
        return Ok(None);
    };
    Ok(Some(Candidate {
        lane,
        own_accel,
        lead_gap,
    }))
}

/// True when a vehicle at `position` on `lane` is inside the zone where it
/// must merge away from an upcoming lane end.
fn in_mandatory_zone(lane: usize, position: f64, corridor: &CorridorSpec, lc: &LaneChangeParams) -> bool {
    match corridor.lane_end(lane) {
        Some(end) => end - position <= lc.mandatory_lookahead * corridor.merges_needed(lane) as f64,
        None => false,
    }
}

/// Decides whether `vehicle_id` should change lanes now.
///
/// Mandatory merges take precedence: a vehicle whose lane ends within
/// `mandatory_lookahead` per required merge moves to a safe adjacent lane
/// that survives at least as long (strictly longer on the right), left
/// first, then by larger lead gap. Otherwise a
/// discretionary change is taken when the predicted IDM acceleration in an
/// adjacent lane beats the current lane by at least `incentive_threshold`.
/// Lanes that would put the vehicle straight into a mandatory zone are never
/// chosen discretionarily.
pub fn lane_change_decision(
    vehicle_id: u64,
    state: &SimState,
    corridor: &CorridorSpec,
    lc: &LaneChangeParams,
) -> Result<Option<usize>> {
    let vehicle = state
        .vehicle(vehicle_id)
        .ok_or(Error::UnknownVehicle(vehicle_id))?;
    if let Some(t) = vehicle.last_lane_change {
        if state.time - t < lc.cooldown {
            return Ok(None);
        }
    }
    let lane = vehicle.lane;
    let lanes_here = corridor.lane_count_at(vehicle.position);
    let left = lane.checked_sub(1);
    let right = (lane + 1 < lanes_here).then_some(lane + 1);

    if in_mandatory_zone(lane, vehicle.position, corridor, lc) {
        let own_end = corridor.lane_end(lane).unwrap_or(f64::INFINITY);
        let mut best: Option<(bool, Candidate)> = None;
        for (is_left, target) in [(true, left), (false, right)] {
            let Some(target) = target else { continue };
            let target_end = corridor.lane_end(target).unwrap_or(f64::INFINITY);
            // Two lanes may end at the same drop; moving left still brings the
            // vehicle one merge closer to a surviving lane.
            if target_end < own_end || (!is_left && target_end == own_end) {
                continue;
            }
            if let Some(c) = evaluate(vehicle, target, state, corridor, lc)? {
                let better = match &best {
                    None => true,
                    Some((best_left, b)) => {
                        (is_left && !best_left) || (is_left == *best_left && c.lead_gap > b.lead_gap)
                    }
                };
                if better {
                    best = Some((is_left, c));
                }
            }
        }
        return Ok(best.map(|(_, c)| c.lane));
    }

    let here = neighbors(state, lane, vehicle.position, vehicle.id);
    let Some(current) = predicted_accel(vehicle, obstacle_ahead(here.leader, lane, corridor))? else {
        return Ok(None);
    };
    let mut best: Option<Candidate> = None;
    for target in [left, right].into_iter().flatten() {
        if in_mandatory_zone(target, vehicle.position, corridor, lc) {
            continue;
        }
        if let Some(c) = evaluate(vehicle, target, state, corridor, lc)? {
            if c.own_accel - current < lc.incentive_threshold {
                continue;
            }
            if best.as_ref().is_none_or(|b| c.own_accel > b.own_accel) {
                best = Some(c);
            }
        }
    }
    Ok(best.map(|c| c.lane))
}
