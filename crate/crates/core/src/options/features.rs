use serde::{Deserialize, Serialize};

use crate::world::{wrap_angle, Lane, Observation, RoadGeometry};

/// Sentinel used for `gap_ahead` when no vehicle is within the lookahead.
pub const NO_GAP: f64 = f64::INFINITY;

/// Parameters of the crossing gap-acceptance test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub k_v: f64,
    pub a_max: f64,
    pub dt: f64,
    pub horizon: f64,
    pub margin: f64,
}

/// Option-local targets that shape the features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTarget {
    pub lane: Lane,
    pub ref_speed: f64,
    /// Also treat the vehicle ahead in this lane as a lead (lane changes).
    pub also_watch: Option<Lane>,
    /// Evaluate crossing gap acceptance; the flag reads 0 when skipped.
    pub cross_check: Option<CrossCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub speed: f64,
    pub ref_speed: f64,
    /// Reference minus actual speed.
    pub speed_error: f64,
    /// Offset from the target centerline, positive to the left.
    pub lateral_error: f64,
    /// Route heading minus vehicle heading, positive when pointing left.
    pub heading_error: f64,
    pub psi: f64,
    pub dist_to_stop_region_end: f64,
    /// Distance to the intersection entry, negative once past it.
    pub dist_to_intersection: f64,
    pub dist_to_intersection_exit: f64,
    pub gap_ahead: f64,
    pub rel_speed_ahead: f64,
    pub waited: f64,
    pub in_stop_region: f64,
    pub in_intersection: f64,
    pub has_stopped: f64,
    pub highest_priority: f64,
    pub intersection_is_clear: f64,
    pub cross_traffic_clear: f64,
}

impl FeatureVector {
    pub const LEN: usize = 18;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.speed,
            self.ref_speed,
            self.speed_error,
            self.lateral_error,
            self.heading_error,
            self.psi,
            self.dist_to_stop_region_end,
            self.dist_to_intersection,
            self.dist_to_intersection_exit,
            self.gap_ahead,
            self.rel_speed_ahead,
            self.waited,
            self.in_stop_region,
            self.in_intersection,
            self.has_stopped,
            self.highest_priority,
            self.intersection_is_clear,
            self.cross_traffic_clear,
        ]
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Nearest vehicle ahead of the ego on its route in `lane`, as
/// `(bumper gap, speed)`.
pub fn lead_in_lane(o: &Observation, lane: Lane, g: &RoadGeometry) -> Option<(f64, f64)> {
    let (p, _) = RoadGeometry::to_local(o.ego_route, o.ego.cont.x, o.ego.cont.y);
    let mut best: Option<(f64, f64)> = None;
    for (j, a) in o.alpha.iter().enumerate() {
        if a.route != o.ego_route {
            continue;
        }
        let (x, y) = o.other_position(j);
        let (pj, qj) = RoadGeometry::to_local(o.ego_route, x, y);
        let dp = pj - p;
        if dp > 0.0
            && dp <= g.lookahead_dist
            && g.nearest_lane(qj) == lane
            && best.is_none_or(|(d, _)| dp < d)
        {
            best = Some((dp, a.v));
        }
    }
    best.map(|(dp, v)| (dp - g.veh_len, v))
}

pub fn extract_features(
    o: &Observation,
    target: &FeatureTarget,
    g: &RoadGeometry,
) -> FeatureVector {
    let c = &o.ego.cont;
    let (p, q) = RoadGeometry::to_local(o.ego_route, c.x, c.y);
    let mut lead = lead_in_lane(o, target.lane, g);
    if let Some(lane) = target.also_watch {
        if let Some(other) = lead_in_lane(o, lane, g) {
            if lead.is_none_or(|(gap, _)| other.0 < gap) {
                lead = Some(other);
            }
        }
    }
    let (gap_ahead, rel_speed_ahead) = match lead {
        Some((gap, v)) => (gap, v - c.v),
        None => (NO_GAP, 0.0),
    };
    FeatureVector {
        speed: c.v,
        ref_speed: target.ref_speed,
        speed_error: target.ref_speed - c.v,
        lateral_error: q - g.lane_center(target.lane),
        heading_error: wrap_angle(RoadGeometry::route_heading(o.ego_route) - c.theta),
        psi: c.psi,
        dist_to_stop_region_end: g.stop_region_end() - p,
        dist_to_intersection: -g.intersection_half - p,
        dist_to_intersection_exit: g.intersection_half - p,
        gap_ahead,
        rel_speed_ahead,
        waited: o.ego_disc.waited as f64,
        in_stop_region: flag(o.props.in_stop_region),
        in_intersection: flag(o.props.in_intersection),
        has_stopped: flag(o.props.has_stopped_in_stop_region),
        highest_priority: flag(o.props.highest_priority),
        intersection_is_clear: flag(o.props.intersection_is_clear),
        cross_traffic_clear: flag(
            target
                .cross_check
                .is_some_and(|c| cross_traffic_clear(o, g, &c)),
        ),
    }
}

/// Gap acceptance for crossing: predicts when every other vehicle's centre
/// is inside the intersection box and checks that none of those intervals
/// meets the ego's own crossing interval widened by `margin` seconds.
///
/// Other vehicles are extrapolated with their last acceleration, speed kept
/// within `[0, speed_limit]`. Vehicles behind the ego in its own lane are
/// ignored since they cannot pass it.
pub fn cross_traffic_clear(o: &Observation, g: &RoadGeometry, check: &CrossCheck) -> bool {
    let CrossCheck {
        k_v,
        a_max,
        dt,
        horizon,
        margin,
    } = *check;
    let c = &o.ego.cont;
    let (p_ego, q_ego) = RoadGeometry::to_local(o.ego_route, c.x, c.y);
    let half = g.intersection_half;
    let ego_lane = g.nearest_lane(q_ego);

    // Ego crossing profile under the speed-tracking law.
    let mut t = 0.0;
    let (mut p, mut v) = (p_ego, c.v);
    let mut t_in = if p >= -half { Some(0.0) } else { None };
    while p <= half && t < horizon {
        let a = (k_v * (g.speed_limit - v)).min(a_max).max(0.0);
        p += v * dt + 0.5 * a * dt * dt;
        v += a * dt;
        t += dt;
        if t_in.is_none() && p >= -half {
            t_in = Some(t);
        }
    }
    let t_in = t_in.unwrap_or(t) - margin;
    let t_out = t + margin;

    for (j, a) in o.alpha.iter().enumerate() {
        let (x, y) = o.other_position(j);
        let (pj, qj) = RoadGeometry::to_local(a.route, x, y);
        if pj > half {
            continue;
        }
        if a.route == o.ego_route && g.nearest_lane(qj) == ego_lane && pj < p_ego {
            continue;
        }
        if let Some((enter, exit)) = box_interval(pj, a.v, a.a_prev, half, g.speed_limit, t_out) {
            if enter <= t_out && exit >= t_in {
                return false;
            }
        }
    }
    true
}

/// Time interval during which a vehicle at `p` with speed `v` and constant
/// acceleration `a` has `|p| <= half`, searched up to `until`.
fn box_interval(p0: f64, v0: f64, a: f64, half: f64, v_max: f64, until: f64) -> Option<(f64, f64)> {
    let step = 0.05;
    let (mut p, mut v, mut t) = (p0, v0, 0.0);
    let mut enter = None;
    loop {
        let inside = p.abs() <= half;
        if inside && enter.is_none() {
            enter = Some(t);
        }
        if !inside && enter.is_some() {
            return enter.map(|e| (e, t));
        }
        if t > until || (v <= 0.0 && a <= 0.0) {
            return enter.map(|e| (e, f64::INFINITY));
        }
        let a_eff = if (v >= v_max && a > 0.0) || (v <= 0.0 && a < 0.0) {
            0.0
        } else {
            a
        };
        p += v * step + 0.5 * a_eff * step * step;
        v = (v + a_eff * step).clamp(0.0, v_max.max(v0));
        t += step;
    }
}
