//! CAV graph observation: per-CAV node features built from own kinematics and
//! sensed HDVs, plus the CAV connectivity graph.

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::sim::{CorridorSpec, SimState, VehicleKind};
use crate::{Error, Result};

/// Width of a node feature row.
pub const FEATURE_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsConfig {
    /// Sensing radius in metres (longitudinal, all lanes, closed ball).
    pub rho: f64,
    pub pos_scale: f64,
    pub speed_scale: f64,
    /// HDV count that maps to a feature value of 1.
    pub max_sensed: usize,
    /// Lane count used to normalise lane indices.
    pub max_lanes: usize,
}

impl ObsConfig {
    pub fn for_corridor(corridor: &CorridorSpec, rho: f64, max_sensed: usize) -> Self {
        Self {
            rho,
            pos_scale: corridor.total_length,
            speed_scale: corridor.speed_limit,
            max_sensed,
            max_lanes: corridor.max_lanes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rho", self.rho),
            ("pos_scale", self.pos_scale),
            ("speed_scale", self.speed_scale),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("obs.{name} must be positive, got {value}")));
            }
        }
        if self.max_sensed == 0 {
            return Err(Error::Config("obs.max_sensed must be at least 1".into()));
        }
        if self.max_lanes == 0 {
            return Err(Error::Config("obs.max_lanes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Node features `X` (N x 6), binary adjacency `A` (N x N) and the CAV id
/// behind each row.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphObservation {
    pub features: Matrix,
    pub adjacency: Matrix,
    pub cav_ids: Vec<u64>,
}

impl GraphObservation {
    /// Observation with no nodes, used once every CAV has left.
    pub fn empty() -> Self {
        Self {
            features: Matrix::zeros(0, FEATURE_DIM),
            adjacency: Matrix::zeros(0, 0),
            cav_ids: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.cav_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cav_ids.is_empty()
    }

    pub fn normalized_adjacency(&self) -> Matrix {
        normalize_adjacency(&self.adjacency)
    }

    /// Reorders nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = perm.len();
        let mut adjacency = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                adjacency.set(i, j, self.adjacency.get(perm[i], perm[j]));
            }
        }
        Self {
            features: self.features.select_rows(perm),
            adjacency,
            cav_ids: perm.iter().map(|&p| self.cav_ids[p]).collect(),
        }
    }
}

/// HDVs within `rho` of the CAV, as `(relative position, speed)` sorted by
/// relative position.
pub fn sense(cav_id: u64, state: &SimState, cfg: &ObsConfig) -> Result<Vec<(f64, f64)>> {
    let cav = state.vehicle(cav_id).ok_or(Error::UnknownVehicle(cav_id))?;
    if !cav.is_cav() {
        return Err(Error::NotCav(cav_id));
    }
    let mut sensed: Vec<(f64, f64)> = state
        .vehicles
        .iter()
        .filter(|v| v.kind == VehicleKind::Hdv)
        .map(|v| (v.position - cav.position, v.speed))
        .filter(|(dp, _)| dp.abs() <= cfg.rho)
        .collect();
    sensed.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(sensed)
}

/// Feature row per CAV (ascending id):
/// `[p/pos_scale, v/speed_scale, lane/(max_lanes-1), n/max_sensed (≤1),
///   mean(Δp)/rho, mean(v_hdv)/speed_scale]`, with zeros when nothing is sensed.
pub fn build_features(state: &SimState, cfg: &ObsConfig) -> Result<(Matrix, Vec<u64>)> {
    let ids = state.cav_ids();
    if ids.is_empty() {
        return Err(Error::NoCavs);
    }
    let lane_scale = cfg.max_lanes.saturating_sub(1).max(1) as f64;
    let mut features = Matrix::zeros(ids.len(), FEATURE_DIM);
    for (row, &id) in ids.iter().enumerate() {
        let cav = state.vehicle(id).ok_or(Error::UnknownVehicle(id))?;
        let sensed = sense(id, state, cfg)?;
        let n = sensed.len();
        let (mean_dp, mean_v) = if n == 0 {
            (0.0, 0.0)
        } else {
            let inv = 1.0 / n as f64;
            (
                sensed.iter().map(|s| s.0).sum::<f64>() * inv,
                sensed.iter().map(|s| s.1).sum::<f64>() * inv,
            )
        };
        let values = [
            cav.position / cfg.pos_scale,
            cav.speed / cfg.speed_scale,
            cav.lane as f64 / lane_scale,
            (n as f64 / cfg.max_sensed as f64).min(1.0),
            mean_dp / cfg.rho,
            mean_v / cfg.speed_scale,
        ];
        for (dst, v) in features.row_mut(row).iter_mut().zip(values) {
            *dst = v.clamp(-1.0, 1.0);
        }
    }
    features.check_finite("build_features")?;
    Ok((features, ids))
}

/// Complete CAV graph: every pair connected, no self loops.
pub fn build_adjacency(n_cavs: usize) -> Result<Matrix> {
    if n_cavs == 0 {
        return Err(Error::NoCavs);
    }
    let mut a = Matrix::filled(n_cavs, n_cavs, 1.0);
    for i in 0..n_cavs {
        a.set(i, i, 0.0);
    }
    Ok(a)
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the degree matrix of `A + I`.
pub fn normalize_adjacency(adjacency: &Matrix) -> Matrix {
    let n = adjacency.rows();
    let mut with_loops = adjacency.clone();
    for i in 0..n {
        with_loops.set(i, i, with_loops.get(i, i) + 1.0);
    }
    let degree: Vec<f64> = (0..n).map(|i| with_loops.row(i).iter().sum()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = with_loops.get(i, j);
            if a != 0.0 {
                out.set(i, j, a / (degree[i] * degree[j]).sqrt());
            }
        }
    }
    out
}

/// Full observation of `state`; empty when no CAV is present.
pub fn observe(state: &SimState, cfg: &ObsConfig) -> Result<GraphObservation> {
    if state.cav_ids().is_empty() {
        return Ok(GraphObservation::empty());
    }
    let (features, cav_ids) = build_features(state, cfg)?;
    let adjacency = build_adjacency(cav_ids.len())?;
    Ok(GraphObservation {
        features,
        adjacency,
        cav_ids,
    })
}
