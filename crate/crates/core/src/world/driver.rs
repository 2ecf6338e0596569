//! Rule-based behaviour of the non-ego vehicles, plus the longitudinal laws
//! shared with the ego's controllers.

use serde::{Deserialize, Serialize};

use super::{WorldError, WorldState};
use crate::dynamics::ControlInput;

/// Per-vehicle driving style, fixed when the scenario is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub desired_speed: f64,
    /// Ignores the stop region and the priority order.
    pub runs_stop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverParams {
    pub k_v: f64,
    pub k_gap: f64,
    pub k_rel: f64,
    pub headway: f64,
    pub min_gap: f64,
    /// Deceleration used to place the start of stop-line braking.
    pub brake_comfort: f64,
    /// Stop target, measured back from the end of the stop region.
    pub stop_offset: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams {
            k_v: 0.8,
            k_gap: 0.25,
            k_rel: 0.6,
            headway: 1.5,
            min_gap: 4.0,
            brake_comfort: 2.0,
            stop_offset: 3.0,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("k_v", self.k_v),
            ("k_gap", self.k_gap),
            ("k_rel", self.k_rel),
            ("headway", self.headway),
            ("min_gap", self.min_gap),
            ("brake_comfort", self.brake_comfort),
            ("stop_offset", self.stop_offset),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!(
                    "driver.{name} must be finite and >= 0, got {value}"
                ));
            }
        }
        if self.brake_comfort == 0.0 {
            return Err("driver.brake_comfort must be > 0".into());
        }
        Ok(())
    }
}

/// Gap-keeping law: drives the bumper gap towards `headway * v + min_gap`.
pub fn follow_accel(
    gap: f64,
    v: f64,
    v_lead: f64,
    headway: f64,
    min_gap: f64,
    k_gap: f64,
    k_rel: f64,
) -> f64 {
    k_gap * (gap - (headway * v + min_gap)) + k_rel * (v_lead - v)
}

/// Constant-deceleration profile that brings speed `v` to zero over the
/// remaining distance `d`; close to the target it stops outright.
pub fn stop_accel(v: f64, d: f64, dt: f64) -> f64 {
    if d <= 0.3 || (v <= 0.3 && d <= 1.5) {
        -v / dt
    } else {
        -(v * v) / (2.0 * d)
    }
}

/// Distance from which stop-line braking starts.
pub fn braking_envelope(v: f64, brake: f64) -> f64 {
    v * v / (2.0 * brake) + 1.0
}

/// Policy supplying inputs for every non-ego vehicle.
pub trait NonEgoPolicy {
    fn action(&self, s: &WorldState, i: usize) -> ControlInput;
}

/// The default non-ego behaviour: speed tracking, car following, and (for
/// compliant drivers) stop-then-go at the stop region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleDriver {
    pub params: DriverParams,
    pub dt: f64,
}

impl NonEgoPolicy for RuleDriver {
    fn action(&self, s: &WorldState, i: usize) -> ControlInput {
        non_ego_action(s, i, &self.params, self.dt).unwrap_or(ControlInput::ZERO)
    }
}

pub fn non_ego_action(
    s: &WorldState,
    i: usize,
    params: &DriverParams,
    dt: f64,
) -> Result<ControlInput, WorldError> {
    if i == 0 {
        return Err(WorldError::EgoIndex);
    }
    let veh = s.vehicles.get(i).ok_or(WorldError::InvalidIndex(i))?;
    let driver = veh.driver.ok_or(WorldError::NoDriver(i))?;
    let g = &s.geometry;
    let v = veh.state.cont.v;
    let (p, q) = s.local_position(i);

    let mut accel = params.k_v * (driver.desired_speed - v);
    if let Some(lead) = s.lead_vehicle(i, g.nearest_lane(q)) {
        accel = accel.min(follow_accel(
            lead.gap,
            v,
            lead.speed,
            params.headway,
            params.min_gap,
            params.k_gap,
            params.k_rel,
        ));
    }

    if !driver.runs_stop {
        let end = g.stop_region_end();
        if !veh.disc.has_stopped_in_stop_region && p < end {
            let d = end - params.stop_offset - p;
            if d <= braking_envelope(v, params.brake_comfort) {
                accel = accel.min(stop_accel(v, d, dt));
            }
        } else if veh.disc.has_stopped_in_stop_region && g.in_stop_region(p, q) {
            let go = s.highest_priority(i) && s.intersection_is_clear(i);
            if !go {
                accel = accel.min(-v / dt);
            }
        }
    }

    Ok(ControlInput {
        accel: accel.max(-v / dt),
        steer_rate: 0.0,
    })
}
