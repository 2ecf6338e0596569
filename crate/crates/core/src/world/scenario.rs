use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    footprints_overlap, Driver, Lane, RoadGeometry, Route, Vehicle, WorldError, WorldState,
};

/// Random scenario parameters. Spawn intervals are route-local positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub max_non_ego: usize,
    /// Probability that a sampled non-ego ignores the stop rule.
    pub p_run_stop: f64,
    /// Desired-speed range of non-egos, as fractions of the speed limit.
    pub desired_speed_min: f64,
    pub desired_speed_max: f64,
    /// Minimum bumper gap between vehicles sharing a lane at spawn.
    pub min_spawn_gap: f64,
    pub spawn_retries: usize,
    pub ego_spawn: [f64; 2],
    pub approach_spawn: [f64; 2],
    pub depart_spawn: [f64; 2],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            max_non_ego: 6,
            p_run_stop: 0.25,
            desired_speed_min: 0.7,
            desired_speed_max: 1.0,
            min_spawn_gap: 10.0,
            spawn_retries: 200,
            ego_spawn: [-60.0, -45.0],
            approach_spawn: [-60.0, -32.0],
            depart_spawn: [12.0, 40.0],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_non_ego > 6 {
            return Err(format!(
                "scenario.max_non_ego must be at most 6, got {}",
                self.max_non_ego
            ));
        }
        if !(0.0..=1.0).contains(&self.p_run_stop) {
            return Err("scenario.p_run_stop must lie in [0, 1]".into());
        }
        if !(self.desired_speed_min > 0.0
            && self.desired_speed_min <= self.desired_speed_max
            && self.desired_speed_max <= 1.0)
        {
            return Err("scenario desired speed fractions must satisfy 0 < min <= max <= 1".into());
        }
        if !(self.min_spawn_gap.is_finite() && self.min_spawn_gap >= 0.0) {
            return Err("scenario.min_spawn_gap must be finite and >= 0".into());
        }
        if self.spawn_retries == 0 {
            return Err("scenario.spawn_retries must be positive".into());
        }
        for (name, r) in [
            ("ego_spawn", self.ego_spawn),
            ("approach_spawn", self.approach_spawn),
            ("depart_spawn", self.depart_spawn),
        ] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(format!(
                    "scenario.{name} must be an ordered finite interval"
                ));
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn random_lane<R: Rng + ?Sized>(rng: &mut R) -> Lane {
    if rng.gen_bool(0.5) {
        Lane::Right
    } else {
        Lane::Left
    }
}

fn placement_ok(candidate: &Vehicle, placed: &[Vehicle], g: &RoadGeometry, min_gap: f64) -> bool {
    let c = &candidate.state.cont;
    let (pc, qc) = RoadGeometry::to_local(candidate.route, c.x, c.y);
    placed.iter().all(|other| {
        let o = &other.state.cont;
        if footprints_overlap(c, o, g.veh_len, g.veh_wid) {
            return false;
        }
        if other.route != candidate.route {
            return true;
        }
        let (po, qo) = RoadGeometry::to_local(other.route, o.x, o.y);
        g.nearest_lane(qo) != g.nearest_lane(qc) || (po - pc).abs() - g.veh_len >= min_gap
    })
}

/// Draws an initial world: the ego on the horizontal route, then a uniform
/// number of non-egos placed on random routes, lanes and spawn intervals.
pub fn sample_initial_state<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    g: &RoadGeometry,
    rng: &mut R,
) -> Result<WorldState, WorldError> {
    let lane = random_lane(rng);
    let p = uniform(rng, cfg.ego_spawn);
    let v = rng.gen_range(0.0..=g.speed_limit);
    let mut vehicles = vec![Vehicle::on_route(
        Route::Horizontal,
        p,
        g.lane_center(lane),
        v,
        None,
    )];

    let count = rng.gen_range(0..=cfg.max_non_ego);
    let approach_len = cfg.approach_spawn[1] - cfg.approach_spawn[0];
    let depart_len = cfg.depart_spawn[1] - cfg.depart_spawn[0];
    let approach_weight = if approach_len + depart_len > 0.0 {
        approach_len / (approach_len + depart_len)
    } else {
        0.5
    };
    for k in 0..count {
        let mut placed = None;
        for _ in 0..cfg.spawn_retries {
            let route = if rng.gen_bool(0.5) {
                Route::Horizontal
            } else {
                Route::Vertical
            };
            let lane = random_lane(rng);
            let interval = if rng.gen_bool(approach_weight) {
                cfg.approach_spawn
            } else {
                cfg.depart_spawn
            };
            let p = uniform(rng, interval);
            let v = rng.gen_range(0.0..=g.speed_limit);
            let frac = uniform(rng, [cfg.desired_speed_min, cfg.desired_speed_max]);
            let runs_stop = rng.gen_bool(cfg.p_run_stop);
            let driver = Driver {
                desired_speed: frac * g.speed_limit,
                runs_stop,
            };
            let candidate = Vehicle::on_route(route, p, g.lane_center(lane), v, Some(driver));
            if placement_ok(&candidate, &vehicles, g, cfg.min_spawn_gap) {
                placed = Some(candidate);
                break;
            }
        }
        match placed {
            Some(v) => vehicles.push(v),
            None => {
                return Err(WorldError::PlacementInfeasible {
                    vehicle: k + 1,
                    attempts: cfg.spawn_retries,
                })
            }
        }
    }
    Ok(WorldState::new(vehicles, *g))
}
