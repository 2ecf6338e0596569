use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

/// One-way route through the intersection. Horizontal traffic drives
/// towards +X, vertical traffic towards -Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Right,
    Left,
}

impl Lane {
    pub fn other(self) -> Lane {
        match self {
            Lane::Right => Lane::Left,
            Lane::Left => Lane::Right,
        }
    }
}

/// Intersection layout and the thresholds used by proposition evaluation.
///
/// Positions along a route are expressed in a route-local frame: `p` grows
/// in the driving direction and is zero at the intersection centre, `q` is
/// the signed lateral offset, positive to the driver's left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadGeometry {
    pub lane_width: f64,
    /// Half side of the square intersection box.
    pub intersection_half: f64,
    pub stop_region_depth: f64,
    /// Routes span `p` in `[-route_half_length, route_half_length]`.
    pub route_half_length: f64,
    pub goal_length: f64,
    pub speed_limit: f64,
    pub veh_len: f64,
    pub veh_wid: f64,
    pub v_stop_eps: f64,
    pub lookahead_dist: f64,
    pub headway_time: f64,
    pub min_gap: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry {
            lane_width: 4.0,
            intersection_half: 8.0,
            stop_region_depth: 8.0,
            route_half_length: 60.0,
            goal_length: 10.0,
            speed_limit: 11.0,
            veh_len: 4.5,
            veh_wid: 1.8,
            v_stop_eps: 0.05,
            lookahead_dist: 40.0,
            headway_time: 0.5,
            min_gap: 2.0,
        }
    }
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("lane_width", self.lane_width),
            ("intersection_half", self.intersection_half),
            ("stop_region_depth", self.stop_region_depth),
            ("route_half_length", self.route_half_length),
            ("goal_length", self.goal_length),
            ("speed_limit", self.speed_limit),
            ("veh_len", self.veh_len),
            ("veh_wid", self.veh_wid),
            ("v_stop_eps", self.v_stop_eps),
            ("lookahead_dist", self.lookahead_dist),
            ("min_gap", self.min_gap),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!(
                    "geometry.{name} must be finite and > 0, got {value}"
                ));
            }
        }
        if !(self.headway_time.is_finite() && self.headway_time >= 0.0) {
            return Err("geometry.headway_time must be finite and >= 0".into());
        }
        if self.lane_width > self.intersection_half {
            return Err("geometry.lane_width must not exceed intersection_half".into());
        }
        let stop_start = self.intersection_half + self.stop_region_depth;
        if stop_start >= self.route_half_length {
            return Err("stop region must lie on the route".into());
        }
        if self.route_half_length - self.goal_length <= self.intersection_half {
            return Err("goal region must not touch the intersection".into());
        }
        Ok(())
    }

    /// Compass heading of traffic on `route`.
    pub fn route_heading(route: Route) -> f64 {
        match route {
            Route::Horizontal => FRAC_PI_2,
            Route::Vertical => PI,
        }
    }

    pub fn to_local(route: Route, x: f64, y: f64) -> (f64, f64) {
        match route {
            Route::Horizontal => (x, y),
            Route::Vertical => (-y, x),
        }
    }

    pub fn to_world(route: Route, p: f64, q: f64) -> (f64, f64) {
        match route {
            Route::Horizontal => (p, q),
            Route::Vertical => (q, -p),
        }
    }

    pub fn lane_center(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Right => -self.lane_width / 2.0,
            Lane::Left => self.lane_width / 2.0,
        }
    }

    /// Lane whose centerline is nearest to lateral offset `q`.
    pub fn nearest_lane(&self, q: f64) -> Lane {
        if q >= 0.0 {
            Lane::Left
        } else {
            Lane::Right
        }
    }

    /// Half-open along the route, `[-half - depth, -half)`, so the region
    /// abuts the intersection box without sharing its edge.
    pub fn in_stop_region(&self, p: f64, q: f64) -> bool {
        let end = -self.intersection_half;
        p >= end - self.stop_region_depth && p < end && q.abs() <= self.lane_width
    }

    pub fn in_intersection(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.intersection_half && y.abs() <= self.intersection_half
    }

    /// The goal is the last `goal_length` metres of the horizontal route.
    pub fn in_goal_region(&self, x: f64, y: f64) -> bool {
        x >= self.route_half_length - self.goal_length
            && x <= self.route_half_length
            && y.abs() <= self.lane_width
    }

    pub fn stop_region_end(&self) -> f64 {
        -self.intersection_half
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}
