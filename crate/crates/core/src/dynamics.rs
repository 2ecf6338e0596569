//! Per-vehicle continuous dynamics: kinematic bicycle, input saturation and
//! jerk estimation.
//!
//! Heading is measured from the +Y axis towards +X, so `theta = 0` drives
//! along +Y and `theta = pi/2` along +X.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContinuousVehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub accel: f64,
    pub steer_rate: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        accel: 0.0,
        steer_rate: 0.0,
    };

    pub fn new(accel: f64, steer_rate: f64) -> Self {
        ControlInput { accel, steer_rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub cont: ContinuousVehicleState,
    /// Input applied on the previous step; zero at episode start.
    pub u_prev: ControlInput,
}

/// Yaw-rate law. `TanRatio` is `v * tan(psi / L)`, `Standard` the textbook
/// `v * tan(psi) / L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicycleVariant {
    #[default]
    TanRatio,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    pub dt: f64,
    pub wheel_base: f64,
    pub a_max: f64,
    pub rho_max: f64,
    pub psi_max: f64,
    pub bicycle_variant: BicycleVariant,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            dt: 0.1,
            wheel_base: 2.7,
            a_max: 3.0,
            rho_max: 0.5,
            psi_max: 0.5,
            bicycle_variant: BicycleVariant::TanRatio,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("dt", self.dt),
            ("wheel_base", self.wheel_base),
            ("a_max", self.a_max),
            ("rho_max", self.rho_max),
            ("psi_max", self.psi_max),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!(
                    "dynamics.{name} must be finite and > 0, got {value}"
                ));
            }
        }
        Ok(())
    }

    fn yaw_rate(&self, v: f64, psi: f64) -> f64 {
        match self.bicycle_variant {
            BicycleVariant::TanRatio => v * (psi / self.wheel_base).tan(),
            BicycleVariant::Standard => v * psi.tan() / self.wheel_base,
        }
    }
}

/// Saturates `u` to the action box and limits the steering rate so one
/// Euler step of `dt` keeps `psi` inside `[-psi_max, psi_max]`.
pub fn clamp_input(
    u: ControlInput,
    s: &ContinuousVehicleState,
    p: &DynamicsParams,
) -> ControlInput {
    let accel = u.accel.clamp(-p.a_max, p.a_max);
    let mut rate = u.steer_rate.clamp(-p.rho_max, p.rho_max);
    let lo = ((-p.psi_max - s.psi) / p.dt).min(0.0);
    let hi = ((p.psi_max - s.psi) / p.dt).max(0.0);
    rate = rate.clamp(lo, hi);
    ControlInput {
        accel,
        steer_rate: rate,
    }
}

#[derive(Clone, Copy)]
struct Deriv {
    x: f64,
    y: f64,
    theta: f64,
    v: f64,
    psi: f64,
}

fn derivative(s: &ContinuousVehicleState, u: &ControlInput, p: &DynamicsParams) -> Deriv {
    let (sin, cos) = s.theta.sin_cos();
    Deriv {
        x: s.v * sin,
        y: s.v * cos,
        theta: p.yaw_rate(s.v, s.psi),
        v: u.accel,
        psi: u.steer_rate,
    }
}

fn offset(s: &ContinuousVehicleState, d: &Deriv, h: f64) -> ContinuousVehicleState {
    ContinuousVehicleState {
        x: s.x + h * d.x,
        y: s.y + h * d.y,
        theta: s.theta + h * d.theta,
        v: s.v + h * d.v,
        psi: s.psi + h * d.psi,
    }
}

/// One classical RK4 step of length `h` with the input held constant.
pub fn rk4_step(
    s: &ContinuousVehicleState,
    u: &ControlInput,
    p: &DynamicsParams,
    h: f64,
) -> ContinuousVehicleState {
    let k1 = derivative(s, u, p);
    let k2 = derivative(&offset(s, &k1, h / 2.0), u, p);
    let k3 = derivative(&offset(s, &k2, h / 2.0), u, p);
    let k4 = derivative(&offset(s, &k3, h), u, p);
    let w = h / 6.0;
    ContinuousVehicleState {
        x: s.x + w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: s.y + w * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        theta: s.theta + w * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
        v: s.v + w * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
        psi: s.psi + w * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
    }
}

/// Advances the state by `p.dt`. `u` is expected to be clamped already.
pub fn integrate(
    s: &ContinuousVehicleState,
    u: &ControlInput,
    p: &DynamicsParams,
) -> ContinuousVehicleState {
    let mut next = rk4_step(s, u, p, p.dt);
    next.psi = next.psi.clamp(-p.psi_max, p.psi_max);
    next
}

pub fn step_vehicle(x: &VehicleState, u: ControlInput, p: &DynamicsParams) -> VehicleState {
    let applied = clamp_input(u, &x.cont, p);
    VehicleState {
        cont: integrate(&x.cont, &applied, p),
        u_prev: applied,
    }
}

pub fn jerk_estimate(u: &ControlInput, u_prev: &ControlInput, dt: f64) -> f64 {
    (u.accel - u_prev.accel) / dt
}
