//! Programmed low-level controllers, one law per option.

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, NO_GAP};
use super::OptionId;
use crate::dynamics::ControlInput;
use crate::world::{braking_envelope, follow_accel, stop_accel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonOption {
    /// Steps after which the option completes.
    pub horizon_steps: usize,
    pub timeout_steps: usize,
}

impl Default for HorizonOption {
    fn default() -> Self {
        HorizonOption {
            horizon_steps: 20,
            timeout_steps: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopOption {
    pub timeout_steps: usize,
    pub brake_comfort: f64,
    /// Stop target, measured back from the end of the stop region.
    pub stop_offset: f64,
}

impl Default for StopOption {
    fn default() -> Self {
        StopOption {
            timeout_steps: 300,
            brake_comfort: 2.0,
            stop_offset: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaitOption {
    pub timeout_steps: usize,
    /// Look-ahead of the crossing gap check (s).
    pub cross_horizon: f64,
    /// Safety margin around the ego's crossing interval (s).
    pub cross_margin: f64,
}

impl Default for WaitOption {
    fn default() -> Self {
        WaitOption {
            timeout_steps: 300,
            cross_horizon: 10.0,
            cross_margin: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowOption {
    pub horizon_steps: usize,
    pub timeout_steps: usize,
    pub headway: f64,
    pub min_gap: f64,
    pub k_gap: f64,
    pub k_rel: f64,
}

impl Default for FollowOption {
    fn default() -> Self {
        FollowOption {
            horizon_steps: 20,
            timeout_steps: 300,
            headway: 1.5,
            min_gap: 5.0,
            k_gap: 0.3,
            k_rel: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangeLaneOption {
    pub timeout_steps: usize,
    pub lateral_tol: f64,
    pub heading_tol: f64,
}

impl Default for ChangeLaneOption {
    fn default() -> Self {
        ChangeLaneOption {
            timeout_steps: 300,
            lateral_tol: 0.2,
            heading_tol: 0.05,
        }
    }
}

/// Controller gains and per-option settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionsConfig {
    pub k_v: f64,
    pub k_lat: f64,
    pub k_head: f64,
    /// Speed floor in the cross-track term.
    pub v_soft: f64,
    /// Rate gain that steers `psi` towards the commanded angle.
    pub k_steer: f64,
    /// Car-following applied by every option that drives forward.
    pub acc_headway: f64,
    pub acc_min_gap: f64,
    pub acc_k_gap: f64,
    pub acc_k_rel: f64,
    /// Attach the liveness and spacing monitors of KeepLane and Follow.
    pub training_monitors: bool,
    pub keep_lane: HorizonOption,
    pub stop: StopOption,
    pub wait: WaitOption,
    pub follow: FollowOption,
    pub change_lane: ChangeLaneOption,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        OptionsConfig {
            k_v: 1.0,
            k_lat: 0.5,
            k_head: 1.0,
            v_soft: 1.0,
            k_steer: 3.0,
            acc_headway: 1.5,
            acc_min_gap: 4.0,
            acc_k_gap: 0.25,
            acc_k_rel: 0.6,
            training_monitors: true,
            keep_lane: HorizonOption::default(),
            stop: StopOption::default(),
            wait: WaitOption::default(),
            follow: FollowOption::default(),
            change_lane: ChangeLaneOption::default(),
        }
    }
}

impl OptionsConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("k_v", self.k_v),
            ("k_lat", self.k_lat),
            ("k_head", self.k_head),
            ("v_soft", self.v_soft),
            ("k_steer", self.k_steer),
            ("acc_headway", self.acc_headway),
            ("acc_min_gap", self.acc_min_gap),
            ("acc_k_gap", self.acc_k_gap),
            ("acc_k_rel", self.acc_k_rel),
            ("stop.brake_comfort", self.stop.brake_comfort),
            ("stop.stop_offset", self.stop.stop_offset),
            ("wait.cross_horizon", self.wait.cross_horizon),
            ("wait.cross_margin", self.wait.cross_margin),
            ("follow.headway", self.follow.headway),
            ("follow.min_gap", self.follow.min_gap),
            ("follow.k_gap", self.follow.k_gap),
            ("follow.k_rel", self.follow.k_rel),
            ("change_lane.lateral_tol", self.change_lane.lateral_tol),
            ("change_lane.heading_tol", self.change_lane.heading_tol),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!(
                    "options.{name} must be finite and >= 0, got {value}"
                ));
            }
        }
        if self.v_soft == 0.0 {
            return Err("options.v_soft must be > 0".into());
        }
        if self.stop.brake_comfort == 0.0 {
            return Err("options.stop.brake_comfort must be > 0".into());
        }
        for (name, t) in [
            ("keep_lane", self.keep_lane.timeout_steps),
            ("stop", self.stop.timeout_steps),
            ("wait", self.wait.timeout_steps),
            ("follow", self.follow.timeout_steps),
            ("change_lane", self.change_lane.timeout_steps),
        ] {
            if t == 0 {
                return Err(format!("options.{name}.timeout_steps must be positive"));
            }
        }
        if self.keep_lane.horizon_steps == 0 || self.follow.horizon_steps == 0 {
            return Err("option horizons must be positive".into());
        }
        Ok(())
    }
}

/// Constants the laws need besides their gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub speed_limit: f64,
    pub a_max: f64,
    pub psi_max: f64,
    pub dt: f64,
}

/// Mutable state an option keeps while it runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OptionMemory {
    /// Wait has left the stop region.
    pub departed: bool,
    /// Wait has had its centre inside the intersection.
    pub entered: bool,
}

/// Steering-angle command from heading and cross-track error, the latter
/// weighted by inverse speed so the closed loop keeps its damping.
pub fn steer_command(phi: &FeatureVector, cfg: &OptionsConfig, lim: &Limits) -> f64 {
    let cross = (cfg.k_lat * phi.lateral_error / phi.speed.max(cfg.v_soft)).atan();
    (cfg.k_head * phi.heading_error + cross).clamp(-lim.psi_max, lim.psi_max)
}

fn lateral_rate(phi: &FeatureVector, cfg: &OptionsConfig, lim: &Limits) -> f64 {
    let psi_cmd = steer_command(phi, cfg, lim);
    cfg.k_steer * (psi_cmd - phi.psi)
}

fn cruise(phi: &FeatureVector, cfg: &OptionsConfig, lim: &Limits) -> f64 {
    cfg.k_v * (lim.speed_limit - phi.speed)
}

fn with_acc(accel: f64, phi: &FeatureVector, cfg: &OptionsConfig) -> f64 {
    if phi.gap_ahead == NO_GAP {
        return accel;
    }
    let lead_speed = phi.speed + phi.rel_speed_ahead;
    accel.min(follow_accel(
        phi.gap_ahead,
        phi.speed,
        lead_speed,
        cfg.acc_headway,
        cfg.acc_min_gap,
        cfg.acc_k_gap,
        cfg.acc_k_rel,
    ))
}

/// Distance from the ego to the Stop option's target point.
pub fn stop_distance(phi: &FeatureVector, cfg: &OptionsConfig) -> f64 {
    phi.dist_to_stop_region_end - cfg.stop.stop_offset
}

/// Whether Wait may leave the stop region now.
pub fn wait_may_go(phi: &FeatureVector) -> bool {
    phi.has_stopped > 0.5
        && phi.highest_priority > 0.5
        && phi.intersection_is_clear > 0.5
        && phi.cross_traffic_clear > 0.5
}

/// Speed the option is trying to hold; the speed error is measured against it.
pub fn reference_speed(
    id: OptionId,
    phi: &FeatureVector,
    mem: &OptionMemory,
    cfg: &OptionsConfig,
    lim: &Limits,
) -> f64 {
    match id {
        OptionId::KeepLane | OptionId::ChangeLane => lim.speed_limit,
        OptionId::Follow => {
            if phi.gap_ahead == NO_GAP {
                lim.speed_limit
            } else {
                (phi.speed + phi.rel_speed_ahead).clamp(0.0, lim.speed_limit)
            }
        }
        OptionId::Stop => {
            let d = stop_distance(phi, cfg).max(0.0);
            (2.0 * cfg.stop.brake_comfort * d)
                .sqrt()
                .min(lim.speed_limit)
        }
        OptionId::Wait => {
            if mem.departed {
                lim.speed_limit
            } else {
                0.0
            }
        }
    }
}

/// The option's control law. Updates `mem` when Wait departs.
pub fn low_level_action(
    id: OptionId,
    phi: &FeatureVector,
    mem: &mut OptionMemory,
    cfg: &OptionsConfig,
    lim: &Limits,
) -> ControlInput {
    let steer_rate = lateral_rate(phi, cfg, lim);
    let accel = match id {
        OptionId::KeepLane | OptionId::ChangeLane => with_acc(cruise(phi, cfg, lim), phi, cfg),
        OptionId::Stop => {
            let d = stop_distance(phi, cfg);
            let mut a = cruise(phi, cfg, lim);
            if d <= braking_envelope(phi.speed, cfg.stop.brake_comfort) {
                a = a.min(stop_accel(phi.speed, d, lim.dt));
            }
            with_acc(a, phi, cfg)
        }
        OptionId::Wait => {
            if !mem.departed && (phi.in_stop_region < 0.5 || wait_may_go(phi)) {
                mem.departed = true;
            }
            if mem.departed {
                with_acc(cruise(phi, cfg, lim), phi, cfg)
            } else {
                -phi.speed / lim.dt
            }
        }
        OptionId::Follow => {
            let mut a = cruise(phi, cfg, lim);
            if phi.gap_ahead != NO_GAP {
                let f = &cfg.follow;
                let lead_speed = phi.speed + phi.rel_speed_ahead;
                a = a.min(follow_accel(
                    phi.gap_ahead,
                    phi.speed,
                    lead_speed,
                    f.headway,
                    f.min_gap,
                    f.k_gap,
                    f.k_rel,
                ));
            }
            a
        }
    };
    ControlInput {
        accel: accel.max(-phi.speed / lim.dt),
        steer_rate,
    }
}
