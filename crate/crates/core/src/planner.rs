//! High-level option selection: a fixed decision graph and UCT tree search
//! that simulates candidate options under the episode monitors.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::options::{
    available_options, is_available, run_option, EpisodeState, OptionError, OptionId, OptionRun,
    SimContext,
};
use crate::reward::term_reward;
use crate::world::{braking_envelope, RoadGeometry};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Option(#[from] OptionError),
    #[error("no option is available in this state")]
    NoOptions,
    #[error("no rule of the decision graph fired")]
    NoRule,
}

/// Options graph used by the manual mode and as the search rollout policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManualPolicyGraph {
    /// Extra stopping distance on top of the comfortable braking distance.
    pub stop_margin: f64,
    /// Window on the adjacent lane that must be empty to change lanes,
    /// measured behind and ahead of the ego.
    pub change_clear_behind: f64,
    pub change_clear_ahead: f64,
    /// Time budgeted for a lane change before the stopping manoeuvre.
    pub change_duration: f64,
}

impl Default for ManualPolicyGraph {
    fn default() -> Self {
        ManualPolicyGraph {
            stop_margin: 5.0,
            change_clear_behind: 15.0,
            change_clear_ahead: 20.0,
            change_duration: 6.0,
        }
    }
}

impl ManualPolicyGraph {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("stop_margin", self.stop_margin),
            ("change_clear_behind", self.change_clear_behind),
            ("change_clear_ahead", self.change_clear_ahead),
            ("change_duration", self.change_duration),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("planner.manual.{name} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Whether the ego's adjacent lane has no vehicle within the change window.
pub fn adjacent_lane_clear(state: &EpisodeState, graph: &ManualPolicyGraph) -> bool {
    let w = &state.world;
    let g = &w.geometry;
    let ego = w.ego();
    let (p, q) = w.local_position(0);
    let target = g.nearest_lane(q).other();
    w.vehicles.iter().skip(1).all(|v| {
        if v.route != ego.route {
            return true;
        }
        let (pj, qj) = RoadGeometry::to_local(v.route, v.state.cont.x, v.state.cont.y);
        let dp = pj - p;
        g.nearest_lane(qj) != target
            || dp < -graph.change_clear_behind - g.veh_len
            || dp > graph.change_clear_ahead + g.veh_len
    })
}

/// First matching rule of the decision graph:
/// 1. stopped inside the stop region without priority -> Wait;
/// 2. stop region ahead within the stopping distance and not yet stopped -> Stop;
/// 3. too close to the lead -> Follow;
/// 4. lead ahead, adjacent lane clear and ChangeLane available -> ChangeLane;
/// 5. otherwise -> KeepLane.
///
/// A rule whose option is unavailable falls through to the next one.
pub fn baseline_choose(
    state: &EpisodeState,
    ctx: &SimContext,
    graph: &ManualPolicyGraph,
) -> Result<OptionId, PlannerError> {
    let props = &state.props;
    let w = &state.world;
    let g = &w.geometry;
    let (p, _) = w.local_position(0);
    let v = w.ego().state.cont.v;
    let stopped = w.ego().disc.has_stopped_in_stop_region;
    let dist_end = g.stop_region_end() - p;

    let mut rules: [Option<OptionId>; 5] = [None; 5];
    if props.in_stop_region && stopped && !props.highest_priority {
        rules[0] = Some(OptionId::Wait);
    }
    if !stopped && dist_end > 0.0 {
        let d = dist_end - ctx.options.stop.stop_offset;
        if d <= baseline_stop_reach(v, ctx, graph, g.speed_limit) {
            rules[1] = Some(OptionId::Stop);
        }
    }
    if props.veh_ahead_too_close {
        rules[2] = Some(OptionId::Follow);
    }
    let room = p > g.intersection_half || {
        let d = dist_end - g.stop_region_depth;
        d > graph.change_duration * g.speed_limit.max(v)
            + baseline_stop_reach(v, ctx, graph, g.speed_limit)
    };
    if props.veh_ahead && room && adjacent_lane_clear(state, graph) {
        rules[3] = Some(OptionId::ChangeLane);
    }
    rules[4] = Some(OptionId::KeepLane);

    for id in rules.into_iter().flatten() {
        if is_available(state, id, ctx)? {
            return Ok(id);
        }
    }
    Err(PlannerError::NoRule)
}

/// Distance to the stop target below which rule 2 fires: travel during one
/// fixed-horizon option at full acceleration, then comfortable braking from
/// the speed reached.
pub fn baseline_stop_reach(
    v: f64,
    ctx: &SimContext,
    graph: &ManualPolicyGraph,
    speed_limit: f64,
) -> f64 {
    let o = &ctx.options;
    let t = o.keep_lane.horizon_steps.max(o.follow.horizon_steps) as f64 * ctx.dynamics.dt;
    let v_hi = (v + ctx.dynamics.a_max * t).min(speed_limit.max(v));
    braking_envelope(v_hi, o.stop.brake_comfort) + t * v_hi + graph.stop_margin
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsConfig {
    pub iterations: usize,
    pub c_uct: f64,
    /// Option-level depth of the tree below the root.
    pub max_depth: usize,
    /// Options simulated by the rollout policy from a new leaf.
    pub rollout_horizon: usize,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            iterations: 100,
            c_uct: 1.4,
            max_depth: 10,
            rollout_horizon: 25,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.iterations == 0 {
            return Err("planner.iterations must be >= 1".into());
        }
        if !(self.c_uct.is_finite() && self.c_uct >= 0.0) {
            return Err("planner.c_uct must be finite and >= 0".into());
        }
        if self.max_depth == 0 {
            return Err("planner.max_depth must be >= 1".into());
        }
        Ok(())
    }
}

/// `Q + c sqrt(ln(parent_n) / n)`, or infinity for an unvisited child.
pub fn uct_score(n: u64, q: f64, parent_n: u64, c: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    q + c * ((parent_n.max(1) as f64).ln() / n as f64).sqrt()
}

/// One node of the search tree. Values are normalised by the reward scale.
#[derive(Debug, Clone)]
pub struct MctsNode {
    pub state: EpisodeState,
    pub depth: usize,
    /// Option that led here from the parent.
    pub option: Option<OptionId>,
    /// Normalised return of the incoming option, terminal reward included.
    pub edge_return: f64,
    /// Steps taken by the incoming option.
    pub edge_len: usize,
    pub visits: u64,
    /// Sum of backed-up returns, measured from the parent's state.
    pub total: f64,
    pub untried: Vec<OptionId>,
    pub children: Vec<usize>,
    /// Cached rollout value from this state (the simulation is deterministic).
    pub rollout: Option<f64>,
}

impl MctsNode {
    pub fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.state.terminal.is_some()
    }
}

/// Search result: the choice plus root statistics.
#[derive(Debug, Clone)]
pub struct MctsResult {
    pub choice: OptionId,
    /// `(option, visits, Q)` of every root child, in enumeration order.
    pub root_stats: Vec<(OptionId, u64, f64)>,
    pub nodes: usize,
    pub aborted_iterations: usize,
}

/// Normalised value of `run`: segment cost plus the discounted terminal
/// reward when the episode ended inside it.
fn edge_value(run: &OptionRun, ctx: &SimContext) -> f64 {
    let mut value = run.segment_return;
    if let Some(outcome) = run.episode_outcome() {
        value += ctx.reward.gamma.powi(run.len() as i32) * term_reward(outcome, &ctx.reward);
    }
    value / ctx.reward.scale()
}

/// Normalised return of the decision graph from `state` for up to `horizon` options.
pub fn rollout_value(
    state: &EpisodeState,
    ctx: &SimContext,
    graph: &ManualPolicyGraph,
    horizon: usize,
) -> Result<f64, PlannerError> {
    let mut st = state.clone();
    let mut value = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        if st.terminal.is_some() {
            break;
        }
        let id = baseline_choose(&st, ctx, graph)?;
        let run = run_option(&st, id, ctx, false)?;
        value += discount * edge_value(&run, ctx);
        discount *= ctx.reward.gamma.powi(run.len() as i32);
        st = run.final_state;
    }
    Ok(value)
}

fn options_at(state: &EpisodeState, ctx: &SimContext) -> Result<Vec<OptionId>, PlannerError> {
    if state.terminal.is_some() {
        Ok(Vec::new())
    } else {
        Ok(available_options(state, ctx)?)
    }
}

/// UCT search over options from `root`. `root` is never modified.
pub fn mcts_search<R: Rng + ?Sized>(
    root: &EpisodeState,
    ctx: &SimContext,
    cfg: &MctsConfig,
    graph: &ManualPolicyGraph,
    rng: &mut R,
) -> Result<MctsResult, PlannerError> {
    let available = options_at(root, ctx)?;
    if available.is_empty() {
        return Err(PlannerError::NoOptions);
    }
    if available.len() == 1 {
        return Ok(MctsResult {
            choice: available[0],
            root_stats: Vec::new(),
            nodes: 1,
            aborted_iterations: 0,
        });
    }

    let mut tree = vec![MctsNode {
        state: root.clone(),
        depth: 0,
        option: None,
        edge_return: 0.0,
        edge_len: 0,
        visits: 0,
        total: 0.0,
        untried: available,
        children: Vec::new(),
        rollout: None,
    }];
    let mut aborted = 0;
    let mut path = Vec::with_capacity(cfg.max_depth + 2);

    for _ in 0..cfg.iterations {
        path.clear();
        let mut node = 0;
        path.push(node);
        let leaf_value = loop {
            let n = &tree[node];
            if n.is_terminal() {
                break 0.0;
            }
            if n.depth >= cfg.max_depth {
                break cached_rollout(&mut tree, node, ctx, graph, cfg.rollout_horizon)?;
            }
            if !n.untried.is_empty() {
                let k = rng.gen_range(0..n.untried.len());
                let id = tree[node].untried.remove(k);
                let run = run_option(&tree[node].state, id, ctx, false)?;
                let edge_return = edge_value(&run, ctx);
                let edge_len = run.len();
                let state = run.final_state;
                let untried = options_at(&state, ctx)?;
                let child = MctsNode {
                    state,
                    depth: tree[node].depth + 1,
                    option: Some(id),
                    edge_return,
                    edge_len,
                    visits: 0,
                    total: 0.0,
                    untried,
                    children: Vec::new(),
                    rollout: None,
                };
                tree.push(child);
                let c = tree.len() - 1;
                tree[node].children.push(c);
                path.push(c);
                if tree[c].is_terminal() {
                    break 0.0;
                }
                break cached_rollout(&mut tree, c, ctx, graph, cfg.rollout_horizon)?;
            }
            if n.children.is_empty() {
                aborted += 1;
                break cached_rollout(&mut tree, node, ctx, graph, cfg.rollout_horizon)?;
            }
            let parent_n = n.visits;
            let mut best = n.children[0];
            let mut best_score = f64::NEG_INFINITY;
            for &c in &n.children {
                let s = uct_score(tree[c].visits, tree[c].q(), parent_n, cfg.c_uct);
                if s > best_score {
                    best_score = s;
                    best = c;
                }
            }
            node = best;
            path.push(node);
        };

        let mut g = leaf_value;
        for &i in path.iter().rev() {
            let n = &mut tree[i];
            if i != 0 {
                g = n.edge_return + ctx.reward.gamma.powi(n.edge_len as i32) * g;
            }
            n.visits += 1;
            n.total += g;
        }
    }

    let mut root_stats: Vec<(OptionId, u64, f64)> = tree[0]
        .children
        .iter()
        .map(|&c| {
            (
                tree[c].option.expect("child has an option"),
                tree[c].visits,
                tree[c].q(),
            )
        })
        .collect();
    root_stats.sort_by_key(|s| s.0);
    let mut choice = root_stats[0];
    for &s in &root_stats[1..] {
        if s.1 > choice.1 || (s.1 == choice.1 && s.2 > choice.2) {
            choice = s;
        }
    }
    Ok(MctsResult {
        choice: choice.0,
        root_stats,
        nodes: tree.len(),
        aborted_iterations: aborted,
    })
}

fn cached_rollout(
    tree: &mut [MctsNode],
    node: usize,
    ctx: &SimContext,
    graph: &ManualPolicyGraph,
    horizon: usize,
) -> Result<f64, PlannerError> {
    if let Some(v) = tree[node].rollout {
        return Ok(v);
    }
    let v = rollout_value(&tree[node].state, ctx, graph, horizon)?;
    tree[node].rollout = Some(v);
    Ok(v)
}

/// Option chosen by UCT search from `state`.
pub fn mcts_plan<R: Rng + ?Sized>(
    state: &EpisodeState,
    ctx: &SimContext,
    cfg: &MctsConfig,
    graph: &ManualPolicyGraph,
    rng: &mut R,
) -> Result<OptionId, PlannerError> {
    Ok(mcts_search(state, ctx, cfg, graph, rng)?.choice)
}
