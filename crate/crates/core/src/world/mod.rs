//! Intersection world: geometry, discrete vehicle state, proposition
//! evaluation, the hybrid step, the ego observation and scenario sampling.

mod collision;
mod driver;
mod geometry;
mod props;
mod scenario;

pub use collision::footprints_overlap;
pub use driver::{
    braking_envelope, follow_accel, non_ego_action, stop_accel, Driver, DriverParams, NonEgoPolicy,
    RuleDriver,
};
pub use geometry::{wrap_angle, Lane, RoadGeometry, Route};
pub use props::{GlobalProps, LocalProps, Props, PROPOSITIONS};
pub use scenario::{sample_initial_state, ScenarioConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    step_vehicle, ContinuousVehicleState, ControlInput, DynamicsParams, VehicleState,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("vehicle index {0} out of range")]
    InvalidIndex(usize),
    #[error("vehicle 0 is the ego and has no rule-based driver")]
    EgoIndex,
    #[error("vehicle {0} has no driver profile")]
    NoDriver(usize),
    #[error("could not place vehicle {vehicle} after {attempts} attempts")]
    PlacementInfeasible { vehicle: usize, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteVehicleState {
    pub has_stopped_in_stop_region: bool,
    pub has_entered_stop_region: bool,
    /// Steps spent in the stop region so far, -1 when outside it.
    pub waited: i64,
}

impl Default for DiscreteVehicleState {
    fn default() -> Self {
        DiscreteVehicleState {
            has_stopped_in_stop_region: false,
            has_entered_stop_region: false,
            waited: -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub state: VehicleState,
    pub disc: DiscreteVehicleState,
    pub route: Route,
    /// `None` for the ego.
    pub driver: Option<Driver>,
}

impl Vehicle {
    /// A vehicle at rest-state `(p, q)` of `route`, aligned with the road.
    pub fn on_route(route: Route, p: f64, q: f64, v: f64, driver: Option<Driver>) -> Self {
        let (x, y) = RoadGeometry::to_world(route, p, q);
        Vehicle {
            state: VehicleState {
                cont: ContinuousVehicleState {
                    x,
                    y,
                    theta: RoadGeometry::route_heading(route),
                    v,
                    psi: 0.0,
                },
                u_prev: ControlInput::ZERO,
            },
            disc: DiscreteVehicleState::default(),
            route,
            driver,
        }
    }
}

/// Nearest vehicle ahead in a lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    pub index: usize,
    /// Bumper-to-bumper distance.
    pub gap: f64,
    pub speed: f64,
}

/// Global hybrid state. Vehicle 0 is the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub vehicles: Vec<Vehicle>,
    pub time_step: u64,
    /// Vehicle currently granted the intersection.
    pub priority_holder: Option<usize>,
    pub geometry: RoadGeometry,
}

pub fn eval_local_props(
    veh: &VehicleState,
    z: &DiscreteVehicleState,
    route: Route,
    g: &RoadGeometry,
) -> LocalProps {
    let c = &veh.cont;
    let (p, q) = RoadGeometry::to_local(route, c.x, c.y);
    LocalProps {
        in_stop_region: g.in_stop_region(p, q),
        has_entered_stop_region: z.has_entered_stop_region,
        has_stopped_in_stop_region: z.has_stopped_in_stop_region,
        in_intersection: g.in_intersection(c.x, c.y),
        in_goal_region: g.in_goal_region(c.x, c.y),
        stopped_now: c.v.abs() < g.v_stop_eps,
        over_speed_limit: c.v > g.speed_limit,
    }
}

pub fn update_discrete(z: DiscreteVehicleState, local: &LocalProps) -> DiscreteVehicleState {
    if local.in_stop_region {
        DiscreteVehicleState {
            has_stopped_in_stop_region: z.has_stopped_in_stop_region || local.stopped_now,
            has_entered_stop_region: true,
            waited: z.waited + 1,
        }
    } else {
        DiscreteVehicleState { waited: -1, ..z }
    }
}

impl WorldState {
    pub fn new(vehicles: Vec<Vehicle>, geometry: RoadGeometry) -> Self {
        let mut s = WorldState {
            vehicles,
            time_step: 0,
            priority_holder: None,
            geometry,
        };
        s.update_priority();
        s
    }

    pub fn ego(&self) -> &Vehicle {
        &self.vehicles[0]
    }

    /// Route-local `(p, q)` of vehicle `i`.
    pub fn local_position(&self, i: usize) -> (f64, f64) {
        let v = &self.vehicles[i];
        RoadGeometry::to_local(v.route, v.state.cont.x, v.state.cont.y)
    }

    pub fn local_props(&self, i: usize) -> LocalProps {
        let v = &self.vehicles[i];
        eval_local_props(&v.state, &v.disc, v.route, &self.geometry)
    }

    /// No vehicle other than `i` has its centre inside the intersection.
    pub fn intersection_is_clear(&self, i: usize) -> bool {
        self.vehicles.iter().enumerate().all(|(j, v)| {
            j == i
                || !self
                    .geometry
                    .in_intersection(v.state.cont.x, v.state.cont.y)
        })
    }

    /// Vehicle in a stop region with the largest `waited`, lowest index on ties.
    pub fn longest_waiter(&self) -> Option<usize> {
        let mut best: Option<(usize, i64)> = None;
        for (j, v) in self.vehicles.iter().enumerate() {
            if v.disc.waited >= 0 && best.is_none_or(|(_, w)| v.disc.waited > w) {
                best = Some((j, v.disc.waited));
            }
        }
        best.map(|(j, _)| j)
    }

    /// The vehicle that currently has priority: the token holder, or the
    /// longest waiter when nobody holds it.
    pub fn priority_vehicle(&self) -> Option<usize> {
        self.priority_holder.or_else(|| self.longest_waiter())
    }

    pub fn highest_priority(&self, i: usize) -> bool {
        self.priority_vehicle() == Some(i)
    }

    /// The holder keeps the token until it is neither in its stop region
    /// nor in the intersection; the token then passes to the longest waiter.
    pub fn update_priority(&mut self) {
        if let Some(h) = self.priority_holder {
            if h < self.vehicles.len() {
                let l = self.local_props(h);
                if l.in_stop_region || l.in_intersection {
                    return;
                }
            }
        }
        self.priority_holder = self.longest_waiter();
    }

    /// Nearest vehicle ahead of `i` on its route in `lane`, within the
    /// lookahead distance.
    pub fn lead_vehicle(&self, i: usize, lane: Lane) -> Option<Lead> {
        let g = &self.geometry;
        let route = self.vehicles[i].route;
        let (p, _) = self.local_position(i);
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in self.vehicles.iter().enumerate() {
            if j == i || v.route != route {
                continue;
            }
            let (pj, qj) = RoadGeometry::to_local(route, v.state.cont.x, v.state.cont.y);
            let dp = pj - p;
            if dp > 0.0
                && dp <= g.lookahead_dist
                && g.nearest_lane(qj) == lane
                && best.is_none_or(|(_, d)| dp < d)
            {
                best = Some((j, dp));
            }
        }
        best.map(|(j, dp)| Lead {
            index: j,
            gap: dp - g.veh_len,
            speed: self.vehicles[j].state.cont.v,
        })
    }

    pub fn global_props(&self, i: usize) -> Result<GlobalProps, WorldError> {
        if i >= self.vehicles.len() {
            return Err(WorldError::InvalidIndex(i));
        }
        let g = &self.geometry;
        let (_, q) = self.local_position(i);
        let lead = self.lead_vehicle(i, g.nearest_lane(q));
        let v = self.vehicles[i].state.cont.v;
        Ok(GlobalProps {
            intersection_is_clear: self.intersection_is_clear(i),
            highest_priority: self.highest_priority(i),
            veh_ahead: lead.is_some(),
            veh_ahead_too_close: lead.is_some_and(|l| l.gap < g.headway_time * v + g.min_gap),
        })
    }

    pub fn props(&self, i: usize) -> Result<Props, WorldError> {
        Ok(Props::new(self.local_props(i), self.global_props(i)?))
    }

    pub fn ego_props(&self) -> Props {
        Props::new(
            self.local_props(0),
            self.global_props(0).expect("ego exists"),
        )
    }

    /// Advances every vehicle by one step. Non-ego inputs are computed from
    /// the pre-step state.
    pub fn step_in_place<M: NonEgoPolicy + ?Sized>(
        &mut self,
        a: ControlInput,
        mu: &M,
        p: &DynamicsParams,
    ) {
        let inputs: Vec<ControlInput> = (0..self.vehicles.len())
            .map(|i| if i == 0 { a } else { mu.action(self, i) })
            .collect();
        let g = self.geometry;
        for (veh, u) in self.vehicles.iter_mut().zip(inputs) {
            veh.state = step_vehicle(&veh.state, u, p);
            let local = eval_local_props(&veh.state, &veh.disc, veh.route, &g);
            veh.disc = update_discrete(veh.disc, &local);
        }
        self.update_priority();
        self.time_step += 1;
    }

    pub fn check_collision(&self) -> bool {
        let g = &self.geometry;
        let ego = &self.vehicles[0].state.cont;
        self.vehicles[1..]
            .iter()
            .any(|v| footprints_overlap(ego, &v.state.cont, g.veh_len, g.veh_wid))
    }
}

pub fn world_step<M: NonEgoPolicy + ?Sized>(
    s: &WorldState,
    a: ControlInput,
    mu: &M,
    p: &DynamicsParams,
) -> WorldState {
    let mut next = s.clone();
    next.step_in_place(a, mu, p);
    next
}

pub fn check_collision(s: &WorldState) -> bool {
    s.check_collision()
}

/// What the ego sees of another vehicle. `route` is carried alongside the
/// relative kinematics so lane membership can be reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub dx: f64,
    pub dy: f64,
    pub v: f64,
    pub a_prev: f64,
    pub waited: i64,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ego: VehicleState,
    pub ego_disc: DiscreteVehicleState,
    pub ego_route: Route,
    pub props: Props,
    pub alpha: Vec<Alpha>,
}

impl Observation {
    /// World position of the vehicle behind `alpha[j]`.
    pub fn other_position(&self, j: usize) -> (f64, f64) {
        let a = &self.alpha[j];
        (self.ego.cont.x - a.dx, self.ego.cont.y - a.dy)
    }
}

pub fn observe(s: &WorldState) -> Observation {
    let ego = &s.vehicles[0];
    let alpha = s.vehicles[1..]
        .iter()
        .map(|v| Alpha {
            dx: ego.state.cont.x - v.state.cont.x,
            dy: ego.state.cont.y - v.state.cont.y,
            v: v.state.cont.v,
            a_prev: v.state.u_prev.accel,
            waited: v.disc.waited,
            route: v.route,
        })
        .collect();
    Observation {
        ego: ego.state,
        ego_disc: ego.disc,
        ego_route: ego.route,
        props: s.ego_props(),
        alpha,
    }
}
