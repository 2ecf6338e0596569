//! Manoeuvre layer: option specifications, availability, feature
//! extraction and monitored execution until termination.

mod control;
mod features;

pub use control::{
    low_level_action, reference_speed, steer_command, stop_distance, wait_may_go, ChangeLaneOption,
    FollowOption, HorizonOption, Limits, OptionMemory, OptionsConfig, StopOption, WaitOption,
};
pub use features::{
    cross_traffic_clear, extract_features, lead_in_lane, CrossCheck, FeatureTarget, FeatureVector,
    NO_GAP,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{clamp_input, ControlInput, DynamicsParams};
use crate::ltl::{self, Formula, LtlError, Monitor, Verdict};
use crate::reward::{inst_cost, CostTerms, RewardSpec};
use crate::world::{
    observe, wrap_angle, DriverParams, Lane, Props, RoadGeometry, RuleDriver, Vehicle, WorldError,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionId {
    KeepLane,
    Stop,
    Wait,
    Follow,
    ChangeLane,
}

impl OptionId {
    pub const ALL: [OptionId; 5] = [
        OptionId::KeepLane,
        OptionId::Stop,
        OptionId::Wait,
        OptionId::Follow,
        OptionId::ChangeLane,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OptionId::KeepLane => "KeepLane",
            OptionId::Stop => "Stop",
            OptionId::Wait => "Wait",
            OptionId::Follow => "Follow",
            OptionId::ChangeLane => "ChangeLane",
        }
    }
}

impl std::fmt::Display for OptionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Why an option or an episode ended. A violation carries the formula text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    LtlViolation(String),
    Collision,
    Timeout,
}

impl Outcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::LtlViolation(_) | Outcome::Collision)
    }
}

pub const KEEP_LANE_PRECONDITION: &str = "true";
pub const STOP_PRECONDITION: &str = "G(not has_stopped_in_stop_region)";
pub const WAIT_PRECONDITION: &str =
    "G((has_stopped_in_stop_region and in_stop_region) U highest_priority)";
pub const FOLLOW_PRECONDITION: &str = "G(veh_ahead)";
pub const CHANGE_LANE_PRECONDITION: &str = "G(not(in_intersection or in_stop_region))";
pub const KEEP_LANE_LIVENESS: &str = "G(not stopped_now)";
pub const FOLLOW_SPACING: &str = "G(not veh_ahead_too_close)";

#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    pub id: OptionId,
    pub precondition: Formula,
    pub precondition_text: String,
    /// Extra property monitored on post-step states while the option runs.
    pub training: Option<(String, Formula)>,
    pub timeout_steps: usize,
    /// Fixed completion horizon for options without a goal state.
    pub horizon_steps: Option<usize>,
}

impl OptionSpec {
    pub fn build(id: OptionId, cfg: &OptionsConfig) -> Result<Self, LtlError> {
        let (pre, training, timeout, horizon) = match id {
            OptionId::KeepLane => (
                KEEP_LANE_PRECONDITION,
                Some(KEEP_LANE_LIVENESS),
                cfg.keep_lane.timeout_steps,
                Some(cfg.keep_lane.horizon_steps),
            ),
            OptionId::Stop => (STOP_PRECONDITION, None, cfg.stop.timeout_steps, None),
            OptionId::Wait => (WAIT_PRECONDITION, None, cfg.wait.timeout_steps, None),
            OptionId::Follow => (
                FOLLOW_PRECONDITION,
                Some(FOLLOW_SPACING),
                cfg.follow.timeout_steps,
                Some(cfg.follow.horizon_steps),
            ),
            OptionId::ChangeLane => (
                CHANGE_LANE_PRECONDITION,
                None,
                cfg.change_lane.timeout_steps,
                None,
            ),
        };
        let training = match training {
            Some(text) if cfg.training_monitors => Some((text.to_string(), ltl::parse(text)?)),
            _ => None,
        };
        Ok(OptionSpec {
            id,
            precondition: ltl::parse(pre)?,
            precondition_text: pre.to_string(),
            training,
            timeout_steps: timeout,
            horizon_steps: horizon,
        })
    }
}

/// Episode-level traffic rules, monitored on every state of an episode.
pub const EPISODE_RULES: [&str; 4] = [
    ltl::STOP_RULE,
    ltl::CLEARANCE_RULE,
    ltl::PRIORITY_RULE,
    ltl::SPEED_RULE,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub text: String,
    pub formula: Formula,
}

#[derive(Debug, Error)]
pub enum OptionError {
    #[error(transparent)]
    Ltl(#[from] LtlError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("option {0} is not available in this state")]
    Unavailable(OptionId),
    #[error("the episode has already ended")]
    EpisodeOver,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Everything held fixed while simulating: dynamics, non-ego behaviour,
/// option specs, rewards and the episode rules.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub dynamics: DynamicsParams,
    pub driver: RuleDriver,
    pub options: OptionsConfig,
    pub specs: Vec<OptionSpec>,
    pub reward: RewardSpec,
    pub rules: Vec<Rule>,
    pub max_episode_steps: usize,
}

impl SimContext {
    pub fn new(
        dynamics: DynamicsParams,
        driver: DriverParams,
        options: OptionsConfig,
        reward: RewardSpec,
        max_episode_steps: usize,
    ) -> Result<Self, OptionError> {
        dynamics.validate().map_err(OptionError::Config)?;
        driver.validate().map_err(OptionError::Config)?;
        options.validate().map_err(OptionError::Config)?;
        reward.validate().map_err(OptionError::Config)?;
        let specs = OptionId::ALL
            .iter()
            .map(|&id| OptionSpec::build(id, &options))
            .collect::<Result<_, _>>()?;
        let rules = EPISODE_RULES
            .iter()
            .map(|text| {
                Ok(Rule {
                    text: text.to_string(),
                    formula: ltl::parse(text)?,
                })
            })
            .collect::<Result<_, LtlError>>()?;
        Ok(SimContext {
            dynamics,
            driver: RuleDriver {
                params: driver,
                dt: dynamics.dt,
            },
            options,
            specs,
            reward,
            rules,
            max_episode_steps,
        })
    }

    pub fn spec(&self, id: OptionId) -> &OptionSpec {
        &self.specs[id.index()]
    }

    pub fn limits(&self, g: &RoadGeometry) -> Limits {
        Limits {
            speed_limit: g.speed_limit,
            a_max: self.dynamics.a_max,
            psi_max: self.dynamics.psi_max,
            dt: self.dynamics.dt,
        }
    }
}

impl Default for SimContext {
    fn default() -> Self {
        SimContext::new(
            DynamicsParams::default(),
            DriverParams::default(),
            OptionsConfig::default(),
            RewardSpec::default(),
            1000,
        )
        .expect("defaults are valid")
    }
}

/// World plus the episode monitors and the current ego valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub world: WorldState,
    pub monitors: Vec<Monitor>,
    pub props: Props,
    /// Set once the episode has ended.
    pub terminal: Option<Outcome>,
}

impl EpisodeState {
    /// Starts monitoring at `world`; the initial valuation is the first
    /// monitored step.
    pub fn new(world: WorldState, ctx: &SimContext) -> Result<Self, OptionError> {
        let props = world.ego_props();
        let mut monitors: Vec<Monitor> = ctx
            .rules
            .iter()
            .map(|r| Monitor::new(r.formula.clone()))
            .collect();
        let mut terminal = None;
        for (m, rule) in monitors.iter_mut().zip(&ctx.rules) {
            if m.step(&props)? == Verdict::Violated && terminal.is_none() {
                terminal = Some(Outcome::LtlViolation(rule.text.clone()));
            }
        }
        if terminal.is_none() && world.check_collision() {
            terminal = Some(Outcome::Collision);
        }
        Ok(EpisodeState {
            world,
            monitors,
            props,
            terminal,
        })
    }

    pub fn time_step(&self) -> usize {
        self.world.time_step as usize
    }
}

/// One-step precondition check plus controller applicability.
pub fn is_available(
    state: &EpisodeState,
    id: OptionId,
    ctx: &SimContext,
) -> Result<bool, OptionError> {
    let mut m = Monitor::new(ctx.spec(id).precondition.clone());
    if m.step(&state.props)? == Verdict::Violated {
        return Ok(false);
    }
    Ok(match id {
        OptionId::Follow => state.props.veh_ahead,
        _ => true,
    })
}

pub fn available_options(
    state: &EpisodeState,
    ctx: &SimContext,
) -> Result<Vec<OptionId>, OptionError> {
    let mut out = Vec::with_capacity(OptionId::ALL.len());
    for id in OptionId::ALL {
        if is_available(state, id, ctx)? {
            out.push(id);
        }
    }
    Ok(out)
}

/// Lane the option steers to, fixed when it starts.
pub fn target_lane(id: OptionId, world: &WorldState) -> Lane {
    let (_, q) = world.local_position(0);
    let lane = world.geometry.nearest_lane(q);
    match id {
        OptionId::ChangeLane => lane.other(),
        _ => lane,
    }
}

fn feature_target(
    id: OptionId,
    lane: Lane,
    start_lane: Lane,
    ctx: &SimContext,
    g: &RoadGeometry,
) -> FeatureTarget {
    FeatureTarget {
        lane,
        ref_speed: g.speed_limit,
        also_watch: (lane != start_lane).then_some(start_lane),
        cross_check: (id == OptionId::Wait).then_some(CrossCheck {
            k_v: ctx.options.k_v,
            a_max: ctx.dynamics.a_max,
            dt: ctx.dynamics.dt,
            horizon: ctx.options.wait.cross_horizon,
            margin: ctx.options.wait.cross_margin,
        }),
    }
}

/// Features with the option's reference speed filled in.
pub fn option_features(
    id: OptionId,
    world: &WorldState,
    lane: Lane,
    start_lane: Lane,
    mem: &OptionMemory,
    ctx: &SimContext,
) -> FeatureVector {
    let g = &world.geometry;
    let obs = observe(world);
    let mut phi = extract_features(&obs, &feature_target(id, lane, start_lane, ctx, g), g);
    phi.ref_speed = reference_speed(id, &phi, mem, &ctx.options, &ctx.limits(g));
    phi.speed_error = phi.ref_speed - phi.speed;
    phi
}

/// Option-specific completion predicate on the post-step world.
pub fn option_success(
    id: OptionId,
    world: &WorldState,
    lane: Lane,
    mem: &OptionMemory,
    steps_elapsed: usize,
    ctx: &SimContext,
) -> bool {
    let g = &world.geometry;
    let ego = world.ego();
    match id {
        OptionId::KeepLane => steps_elapsed >= ctx.options.keep_lane.horizon_steps,
        OptionId::Follow => steps_elapsed >= ctx.options.follow.horizon_steps,
        OptionId::Stop => ego.disc.has_stopped_in_stop_region,
        OptionId::Wait => {
            let (p, _) = world.local_position(0);
            mem.entered
                && !g.in_intersection(ego.state.cont.x, ego.state.cont.y)
                && p > g.intersection_half
        }
        OptionId::ChangeLane => {
            let (_, q) = world.local_position(0);
            let head = wrap_angle(RoadGeometry::route_heading(ego.route) - ego.state.cont.theta);
            (q - g.lane_center(lane)).abs() < ctx.options.change_lane.lateral_tol
                && head.abs() < ctx.options.change_lane.heading_tol
        }
    }
}

/// First matching cause in the order violation, collision, success, timeout.
pub fn check_termination(
    violation: Option<&str>,
    collision: bool,
    success: bool,
    steps_elapsed: usize,
    timeout_steps: usize,
) -> Option<Outcome> {
    if let Some(text) = violation {
        Some(Outcome::LtlViolation(text.to_string()))
    } else if collision {
        Some(Outcome::Collision)
    } else if success {
        Some(Outcome::Success)
    } else if steps_elapsed >= timeout_steps {
        Some(Outcome::Timeout)
    } else {
        None
    }
}

/// One simulated step of an option run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub option: OptionId,
    /// Pre-step vehicles.
    pub vehicles: Vec<Vehicle>,
    /// Pre-step ego valuation.
    pub valuation: Props,
    /// Input actually applied (after saturation).
    pub action: ControlInput,
    pub cost: f64,
    pub cost_terms: CostTerms,
}

#[derive(Debug, Clone)]
pub struct OptionRun {
    pub option: OptionId,
    /// Filled only when recording was requested.
    pub steps: Vec<StepRecord>,
    /// Per-step costs, always filled.
    pub costs: Vec<f64>,
    pub outcome: Outcome,
    /// Minus the discounted segment cost, discounted from the segment start.
    pub segment_return: f64,
    pub final_state: EpisodeState,
}

impl OptionRun {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn episode_outcome(&self) -> Option<&Outcome> {
        self.final_state.terminal.as_ref()
    }
}

/// Executes option `id` from `state` until it terminates or the episode ends.
pub fn run_option(
    state: &EpisodeState,
    id: OptionId,
    ctx: &SimContext,
    record: bool,
) -> Result<OptionRun, OptionError> {
    if state.terminal.is_some() {
        return Err(OptionError::EpisodeOver);
    }
    if !is_available(state, id, ctx)? {
        return Err(OptionError::Unavailable(id));
    }
    let spec = ctx.spec(id);
    let mut st = state.clone();
    let g = st.world.geometry;
    let lim = ctx.limits(&g);
    let start_lane = target_lane(OptionId::KeepLane, &st.world);
    let lane = target_lane(id, &st.world);
    let mut pre = Monitor::new(spec.precondition.clone());
    let mut training = spec
        .training
        .as_ref()
        .map(|(text, f)| (text.as_str(), Monitor::new(f.clone())));
    let mut mem = OptionMemory {
        departed: false,
        entered: st.props.in_intersection,
    };
    let mut steps = Vec::new();
    let mut costs = Vec::new();
    let mut segment_return = 0.0;
    let mut discount = 1.0;

    let outcome = loop {
        if pre.step(&st.props)? == Verdict::Violated {
            break Outcome::LtlViolation(spec.precondition_text.clone());
        }
        let phi = option_features(id, &st.world, lane, start_lane, &mem, ctx);
        let raw = low_level_action(id, &phi, &mut mem, &ctx.options, &lim);
        let ego = st.world.ego().state;
        let a = clamp_input(raw, &ego.cont, &ctx.dynamics);
        let terms = CostTerms::new(&phi, &a, &ego.u_prev, ctx.dynamics.dt);
        let cost = inst_cost(&terms, &ctx.reward.weights);
        if record {
            steps.push(StepRecord {
                t: st.world.time_step,
                option: id,
                vehicles: st.world.vehicles.clone(),
                valuation: st.props,
                action: a,
                cost,
                cost_terms: terms,
            });
        }
        costs.push(cost);
        segment_return -= discount * cost;
        discount *= ctx.reward.gamma;

        st.world.step_in_place(a, &ctx.driver, &ctx.dynamics);
        st.props = st.world.ego_props();
        mem.entered |= st.props.in_intersection;

        let mut rule_violation = None;
        for (m, rule) in st.monitors.iter_mut().zip(&ctx.rules) {
            if m.step(&st.props)? == Verdict::Violated && rule_violation.is_none() {
                rule_violation = Some(rule.text.as_str());
            }
        }
        let mut training_violation = None;
        if let Some((text, m)) = training.as_mut() {
            if m.step(&st.props)? == Verdict::Violated {
                training_violation = Some(*text);
            }
        }
        let collision = st.world.check_collision();
        let goal = st.props.in_goal_region && st.world.ego().state.cont.v <= g.speed_limit;
        let budget = st.time_step() >= ctx.max_episode_steps;

        st.terminal = if let Some(text) = rule_violation {
            Some(Outcome::LtlViolation(text.to_string()))
        } else if collision {
            Some(Outcome::Collision)
        } else if goal {
            Some(Outcome::Success)
        } else if budget {
            Some(Outcome::Timeout)
        } else {
            None
        };

        let success = option_success(id, &st.world, lane, &mem, costs.len(), ctx);
        let ended = check_termination(
            rule_violation.or(training_violation),
            collision,
            success,
            costs.len(),
            spec.timeout_steps,
        );
        if let Some(outcome) = ended {
            break outcome;
        }
        if let Some(episode) = &st.terminal {
            break match episode {
                Outcome::Success => Outcome::Success,
                _ => Outcome::Timeout,
            };
        }
    };

    Ok(OptionRun {
        option: id,
        steps,
        costs,
        outcome,
        segment_return,
        final_state: st,
    })
}
