//! Intelligent Driver Model (Treiber, Hennecke & Helbing) car following.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// IDM parameters for one driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// Maximum acceleration in m/s².
    pub a_max: f64,
    /// Comfortable deceleration in m/s².
    pub b_comfort: f64,
    /// Desired (free-flow) speed in m/s.
    pub v0: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Minimum standstill gap in m.
    pub s0: f64,
    /// Desired time headway in s.
    pub t_headway: f64,
    /// Hard braking bound in m/s² (positive). Accelerations are clamped to
    /// `[-max_decel, a_max]`.
    pub max_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a_max: 1.0,
            b_comfort: 1.5,
            v0: 30.0,
            delta: 4.0,
            s0: 2.0,
            t_headway: 1.0,
            max_decel: 6.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self, section: &str) -> Result<()> {
        let positive = [
            ("a_max", self.a_max),
            ("b_comfort", self.b_comfort),
            ("v0", self.v0),
            ("s0", self.s0),
            ("t_headway", self.t_headway),
            ("max_decel", self.max_decel),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "{section}.{name} must be a finite positive number, got {value}"
                )));
            }
        }
        if !(self.delta.is_finite() && self.delta >= 1.0) {
            return Err(Error::Config(format!(
                "{section}.delta must be >= 1, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Desired dynamic gap `s*(v, Δv) = s0 + v·T + v·Δv / (2·√(a·b))`, clamped at 0.
///
/// `dv` is the approach rate `v - v_leader`.
pub fn desired_gap(v: f64, dv: f64, idm: &IdmParams) -> f64 {
    let interaction = v * dv / (2.0 * (idm.a_max * idm.b_comfort).sqrt());
    (idm.s0 + v * idm.t_headway + interaction).max(0.0)
}

/// IDM acceleration for a follower at speed `v` with net gap `gap` to a
/// leader travelling at `leader_speed`.
///
/// Pass `gap = f64::INFINITY` for a free road; `leader_speed` is then ignored.
/// A finite gap that is not strictly positive means two vehicles overlap and
/// is reported as [`Error::Collision`] with a placeholder vehicle id of 0;
/// callers that know the id should map the error.
pub fn idm_acceleration(v: f64, gap: f64, leader_speed: f64, idm: &IdmParams) -> Result<f64> {
    if gap <= 0.0 || gap.is_nan() {
        return Err(Error::Collision { vehicle: 0, gap });
    }
    let free = (v / idm.v0).powf(idm.delta);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let ratio = desired_gap(v, v - leader_speed, idm) / gap;
        ratio * ratio
    };
    let acc = idm.a_max * (1.0 - free - interaction);
    Ok(acc.clamp(-idm.max_decel, idm.a_max))
}

/// Largest speed in `[0, cap]` at which a vehicle can be placed `gap` metres
/// behind a leader moving at `leader_speed` without violating either the IDM
/// desired gap or a kinematic stopping bound at `max_decel`.
///
/// Returns `None` when even a standing vehicle would be closer than `s0`.
pub fn safe_entry_speed(gap: f64, leader_speed: f64, cap: f64, idm: &IdmParams) -> Option<f64> {
    if gap.is_infinite() {
        return Some(cap);
    }
    if gap <= idm.s0 {
        return None;
    }
    // s*(v) = s0 + v T + v (v - vl) / (2 sqrt(ab)) is a convex quadratic in v
    // with s*(0) = s0 < gap, so the feasible set is [0, root].
    let k = 1.0 / (2.0 * (idm.a_max * idm.b_comfort).sqrt());
    let b = idm.t_headway - leader_speed * k;
    let c = idm.s0 - gap;
    let root = (-b + (b * b - 4.0 * k * c).sqrt()) / (2.0 * k);
    let kinematic = (leader_speed * leader_speed + 2.0 * idm.max_decel * gap).sqrt();
    Some(root.min(kinematic).min(cap).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> IdmParams {
        IdmParams::default()
    }

    #[test]
    fn desired_gap_standstill_is_s0() {
        assert_eq!(desired_gap(0.0, 0.0, &params()), 2.0);
    }

    #[test]
    fn desired_gap_steady_following() {
        assert_abs_diff_eq!(desired_gap(20.0, 0.0, &params()), 22.0, epsilon = 1e-12);
    }

    #[test]
    fn desired_gap_clamps_negative_total() {
        // 2 + 10 - 50 / (2 sqrt(1.5)) = -8.41 before clamping.
        let raw = 2.0 + 10.0 + 10.0 * -5.0 / (2.0 * 1.5f64.sqrt());
        assert!(raw < -8.4 && raw > -8.42);
        assert_eq!(desired_gap(10.0, -5.0, &params()), 0.0);
    }

    #[test]
    fn idm_free_road_at_desired_speed_is_zero() {
        let p = params();
        assert_eq!(idm_acceleration(p.v0, f64::INFINITY, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn idm_standstill_at_minimum_gap_is_zero() {
        let p = params();
        assert_eq!(idm_acceleration(0.0, p.s0, 0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn idm_half_speed_free_road() {
        let p = params();
        let a = idm_acceleration(15.0, f64::INFINITY, 0.0, &p).unwrap();
        assert_abs_diff_eq!(a, 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn idm_rejects_overlap() {
        let p = params();
        assert!(matches!(
            idm_acceleration(5.0, 0.0, 0.0, &p),
            Err(Error::Collision { .. })
        ));
        assert!(idm_acceleration(5.0, -1.0, 0.0, &p).is_err());
    }

    #[test]
    fn idm_is_clamped_to_emergency_braking() {
        let p = params();
        let a = idm_acceleration(30.0, 0.5, 0.0, &p).unwrap();
        assert_eq!(a, -p.max_decel);
    }

    #[test]
    fn entry_speed_respects_gap() {
        let p = params();
        assert_eq!(safe_entry_speed(1.0, 0.0, 30.0, &p), None);
        assert_eq!(safe_entry_speed(f64::INFINITY, 0.0, 30.0, &p), Some(30.0));
        let v = safe_entry_speed(40.0, 10.0, 30.0, &p).unwrap();
        assert!(desired_gap(v, v - 10.0, &p) <= 40.0 + 1e-9);
        assert!(desired_gap(v + 0.01, v + 0.01 - 10.0, &p) > 40.0 - 1e-9 || v == 30.0);
    }

    #[test]
    fn validate_names_the_field() {
        let mut p = params();
        p.delta = 0.5;
        let msg = p.validate("idm").unwrap_err().to_string();
        assert!(msg.contains("idm.delta"), "{msg}");
    }
}
