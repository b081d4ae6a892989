use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One constant-width stretch of the corridor, starting at `start` metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub lanes: usize,
}

/// A one-directional multi-lane corridor with lane drops.
///
/// Lane 0 is the leftmost lane. A drop removes the rightmost lane(s), so lane
/// `l` exists at position `x` iff `l < lane_count_at(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub total_length: f64,
    pub segments: Vec<Segment>,
    pub speed_limit: f64,
}

impl CorridorSpec {
    pub fn new(total_length: f64, segments: Vec<Segment>, speed_limit: f64) -> Result<Self> {
        let spec = Self {
            total_length,
            segments,
            speed_limit,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_length.is_finite() && self.total_length > 0.0) {
            return Err(Error::Config(format!(
                "corridor.total_length must be positive, got {}",
                self.total_length
            )));
        }
        if !(self.speed_limit.is_finite() && self.speed_limit > 0.0) {
            return Err(Error::Config(format!(
                "corridor.speed_limit must be positive, got {}",
                self.speed_limit
            )));
        }
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::Config("corridor.segments must not be empty".into()))?;
        if first.start != 0.0 {
            return Err(Error::Config(format!(
                "corridor.segments[0].start must be 0, got {}",
                first.start
            )));
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if !(b.start > a.start && b.start < self.total_length) {
                return Err(Error::Config(format!(
                    "corridor.segments[{}].start must increase and stay below total_length",
                    i + 1
                )));
            }
            if b.lanes > a.lanes {
                return Err(Error::Config(format!(
                    "corridor.segments[{}] widens from {} to {} lanes; only lane drops are supported",
                    i + 1,
                    a.lanes,
                    b.lanes
                )));
            }
        }
        if self.segments.iter().any(|s| s.lanes == 0) {
            return Err(Error::Config("corridor segments need at least one lane".into()));
        }
        Ok(())
    }

    /// Number of lanes at `position`. Positions outside the corridor are
    /// clamped to its ends.
    pub fn lane_count_at(&self, position: f64) -> usize {
        self.segments
            .iter()
            .rev()
            .find(|s| s.start <= position)
            .unwrap_or(&self.segments[0])
            .lanes
    }

    pub fn max_lanes(&self) -> usize {
        self.segments[0].lanes
    }

    pub fn entry_lanes(&self) -> usize {
        self.segments[0].lanes
    }

    /// Position where `lane` stops existing, or `None` if it reaches the exit.
    pub fn lane_end(&self, lane: usize) -> Option<f64> {
        self.segments
            .iter()
            .find(|s| s.lanes <= lane)
            .map(|s| s.start)
    }

    /// Position of the first lane drop.
    pub fn first_drop(&self) -> Option<f64> {
        self.segments.get(1).map(|s| s.start)
    }

    /// How many lane changes a vehicle on `lane` needs to survive the drop
    /// that ends its lane. Zero for lanes that reach the exit.
    pub fn merges_needed(&self, lane: usize) -> usize {
        match self.lane_end(lane) {
            Some(end) => lane + 1 - self.lane_count_at(end),
            None => 0,
        }
    }

    pub fn contains(&self, position: f64) -> bool {
        (0.0..self.total_length).contains(&position)
    }
}
