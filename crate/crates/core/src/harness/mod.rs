//! Run configuration, seeded episodes, JSONL traces, metrics, rendering and
//! the command-line front end.

mod cli;
mod metrics;
mod render;

pub use cli::{main_with_args, Cli, Command};
pub use metrics::{
    compare, evaluate, format_table, metrics_csv, Comparison, EpisodeSummary, Metrics, TrialMetrics,
};
pub use render::{
    render, render_ascii_frame, render_svg_frame, write_svg_frames, Canvas, RenderStyle,
};

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlInput, DynamicsParams};
use crate::ltl::Verdict;
use crate::options::{
    run_option, EpisodeState, OptionError, OptionId, OptionsConfig, Outcome, SimContext,
};
use crate::planner::{baseline_choose, mcts_plan, ManualPolicyGraph, MctsConfig, PlannerError};
use crate::reward::{episode_value, CostTerms, RewardError, RewardSpec};
use crate::world::{
    sample_initial_state, DriverParams, Props, RoadGeometry, ScenarioConfig, Vehicle, WorldError,
    WorldState,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read configuration {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    ConfigParse(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Option(#[from] OptionError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("simulation failed at step {t}: {source}")]
    Simulation {
        t: u64,
        #[source]
        source: Box<HarnessError>,
        /// Records produced before the failure.
        partial: Box<EpisodeTrace>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed trace line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    Manual,
    Mcts,
    /// Learned high-level policy; recognised but not supported.
    Rl,
}

impl PlannerMode {
    pub fn name(self) -> &'static str {
        match self {
            PlannerMode::Manual => "manual",
            PlannerMode::Mcts => "mcts",
            PlannerMode::Rl => "rl",
        }
    }
}

impl std::str::FromStr for PlannerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manual" => Ok(PlannerMode::Manual),
            "mcts" => Ok(PlannerMode::Mcts),
            "rl" => Ok(PlannerMode::Rl),
            other => Err(format!(
                "unknown planner `{other}` (expected manual or mcts)"
            )),
        }
    }
}

fn reject_rl(mode: PlannerMode) -> Result<(), HarnessError> {
    if mode == PlannerMode::Rl {
        return Err(HarnessError::Config(
            "planner mode `rl` needs a learned high-level policy, which this build does not include; use `manual` or `mcts`".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub mode: PlannerMode,
    pub iterations: usize,
    pub c_uct: f64,
    pub max_depth: usize,
    pub rollout_horizon: usize,
    pub manual: ManualPolicyGraph,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let m = MctsConfig::default();
        PlannerConfig {
            mode: PlannerMode::Mcts,
            iterations: m.iterations,
            c_uct: m.c_uct,
            max_depth: m.max_depth,
            rollout_horizon: m.rollout_horizon,
            manual: ManualPolicyGraph::default(),
        }
    }
}

impl PlannerConfig {
    pub fn mcts(&self) -> MctsConfig {
        MctsConfig {
            iterations: self.iterations,
            c_uct: self.c_uct,
            max_depth: self.max_depth,
            rollout_horizon: self.rollout_horizon,
        }
    }
}

/// Everything needed to reproduce an evaluation. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub geometry: RoadGeometry,
    pub dynamics: DynamicsParams,
    pub driver: DriverParams,
    pub options: OptionsConfig,
    pub reward: RewardSpec,
    pub planner: PlannerConfig,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_episode_steps: usize,
    /// Worker threads for `evaluate`; 0 uses all cores.
    pub threads: usize,
    /// Directory for metrics and traces.
    pub out_dir: Option<PathBuf>,
    /// Write one trace file per evaluated episode.
    pub write_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            geometry: RoadGeometry::default(),
            dynamics: DynamicsParams::default(),
            driver: DriverParams::default(),
            options: OptionsConfig::default(),
            reward: RewardSpec::default(),
            planner: PlannerConfig::default(),
            episodes: 100,
            trials: 10,
            seed: 0,
            max_episode_steps: 1000,
            threads: 0,
            out_dir: None,
            write_traces: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let checks = [
            self.scenario.validate(),
            self.geometry.validate(),
            self.dynamics.validate(),
            self.driver.validate(),
            self.options.validate(),
            self.reward.validate(),
            self.planner.mcts().validate(),
            self.planner.manual.validate(),
        ];
        for c in checks {
            c.map_err(HarnessError::Config)?;
        }
        reject_rl(self.planner.mode)?;
        if self.episodes == 0 || self.trials == 0 {
            return Err(HarnessError::Config(
                "episodes and trials must be positive".into(),
            ));
        }
        if self.max_episode_steps == 0 {
            return Err(HarnessError::Config(
                "max_episode_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn sim_context(&self) -> Result<SimContext, HarnessError> {
        Ok(SimContext::new(
            self.dynamics,
            self.driver,
            self.options,
            self.reward,
            self.max_episode_steps,
        )?)
    }
}

/// Random stream of episode `episode` in trial `trial`: seed `base + trial`,
/// stream `episode`.
pub fn episode_rng(base_seed: u64, trial: usize, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(trial as u64));
    rng.set_stream(episode as u64);
    rng
}

/// Samples the initial world and starts fresh episode monitors.
pub fn reset(
    cfg: &RunConfig,
    ctx: &SimContext,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeState, HarnessError> {
    let world = sample_initial_state(&cfg.scenario, &cfg.geometry, rng)?;
    Ok(EpisodeState::new(world, ctx)?)
}

/// Outcome class used for accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Success,
    Violation,
    Collision,
    Timeout,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 4] = [
        OutcomeClass::Success,
        OutcomeClass::Violation,
        OutcomeClass::Collision,
        OutcomeClass::Timeout,
    ];

    pub fn of(outcome: &Outcome) -> Self {
        match outcome {
            Outcome::Success => OutcomeClass::Success,
            Outcome::LtlViolation(_) => OutcomeClass::Violation,
            Outcome::Collision => OutcomeClass::Collision,
            Outcome::Timeout => OutcomeClass::Timeout,
        }
    }
}

/// One line of a JSONL trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Start {
        seed: u64,
        trial: usize,
        episode: usize,
        planner: PlannerMode,
        dt: f64,
        geometry: RoadGeometry,
    },
    Decision {
        t: u64,
        option: OptionId,
        available: Vec<OptionId>,
    },
    Step {
        t: u64,
        time: f64,
        option: OptionId,
        vehicles: Vec<Vehicle>,
        valuation: Props,
        action: ControlInput,
        cost: f64,
        cost_terms: CostTerms,
    },
    Terminal {
        t: u64,
        outcome: OutcomeClass,
        /// Violated formula, for violations.
        formula: Option<String>,
        value: f64,
        decisions: Vec<u64>,
        vehicles: Vec<Vehicle>,
        valuation: Props,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, HarnessError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| HarnessError::Trace {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(&line).map_err(|e| HarnessError::Trace {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(r);
        }
        Ok(EpisodeTrace { records })
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(io_err(path))?;
        f.flush().map_err(io_err(path))
    }

    pub fn steps(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r, TraceRecord::Step { .. }))
    }

    pub fn step_count(&self) -> usize {
        self.steps().count()
    }

    /// Ego valuations `y_0 .. y_T`: every pre-step valuation plus the terminal one.
    pub fn valuations(&self) -> Vec<Props> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Step { valuation, .. } | TraceRecord::Terminal { valuation, .. } => {
                    Some(*valuation)
                }
                _ => None,
            })
            .collect()
    }

    pub fn terminal(&self) -> Option<&TraceRecord> {
        self.records
            .iter()
            .rev()
            .find(|r| matches!(r, TraceRecord::Terminal { .. }))
    }
}

/// Result of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub value: f64,
    pub steps: usize,
    pub decision_times: Vec<u64>,
    pub costs: Vec<f64>,
    pub final_state: EpisodeState,
    pub trace: Option<EpisodeTrace>,
}

/// Where an episode sits in an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpisodeId {
    pub seed: u64,
    pub trial: usize,
    pub episode: usize,
}

/// Resets and runs one episode: choose an option, run it to termination,
/// repeat until the episode ends.
pub fn run_episode(
    cfg: &RunConfig,
    ctx: &SimContext,
    mode: PlannerMode,
    id: EpisodeId,
    record: bool,
) -> Result<EpisodeResult, HarnessError> {
    reject_rl(mode)?;
    let mut rng = episode_rng(id.seed, id.trial, id.episode);
    let state = reset(cfg, ctx, &mut rng)?;
    run_from(state, cfg, ctx, mode, id, record, &mut rng)
}

/// Runs an episode from a given start state; `rng` drives the tree search.
pub fn run_from(
    mut state: EpisodeState,
    cfg: &RunConfig,
    ctx: &SimContext,
    mode: PlannerMode,
    id: EpisodeId,
    record: bool,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult, HarnessError> {
    reject_rl(mode)?;
    let mut trace = EpisodeTrace::default();
    if record {
        trace.records.push(TraceRecord::Start {
            seed: id.seed,
            trial: id.trial,
            episode: id.episode,
            planner: mode,
            dt: ctx.dynamics.dt,
            geometry: state.world.geometry,
        });
    }
    let mcts = cfg.planner.mcts();
    let graph = cfg.planner.manual;
    let mut costs = Vec::new();
    let mut decision_times = Vec::new();

    while state.terminal.is_none() {
        let t = state.world.time_step;
        let step = (|| -> Result<_, HarnessError> {
            let choice = match mode {
                PlannerMode::Manual => baseline_choose(&state, ctx, &graph)?,
                _ => mcts_plan(&state, ctx, &mcts, &graph, rng)?,
            };
            let available = if record {
                crate::options::available_options(&state, ctx)?
            } else {
                Vec::new()
            };
            let run = run_option(&state, choice, ctx, record)?;
            Ok((choice, available, run))
        })();
        let (choice, available, run) = match step {
            Ok(v) => v,
            Err(e) => {
                return Err(HarnessError::Simulation {
                    t,
                    source: Box::new(e),
                    partial: Box::new(trace),
                });
            }
        };
        decision_times.push(t);
        if record {
            trace.records.push(TraceRecord::Decision {
                t,
                option: choice,
                available,
            });
            for s in run.steps {
                trace.records.push(TraceRecord::Step {
                    t: s.t,
                    time: s.t as f64 * ctx.dynamics.dt,
                    option: s.option,
                    vehicles: s.vehicles,
                    valuation: s.valuation,
                    action: s.action,
                    cost: s.cost,
                    cost_terms: s.cost_terms,
                });
            }
        }
        costs.extend_from_slice(&run.costs);
        state = run.final_state;
    }

    let outcome = state
        .terminal
        .clone()
        .expect("loop exits on a terminal state");
    let times: Vec<usize> = decision_times.iter().map(|&t| t as usize).collect();
    let value = episode_value(&costs, &times, Some(&outcome), &ctx.reward)?.value;
    if record {
        trace.records.push(TraceRecord::Terminal {
            t: state.world.time_step,
            outcome: OutcomeClass::of(&outcome),
            formula: match &outcome {
                Outcome::LtlViolation(f) => Some(f.clone()),
                _ => None,
            },
            value,
            decisions: decision_times.clone(),
            vehicles: state.world.vehicles.clone(),
            valuation: state.props,
        });
    }
    Ok(EpisodeResult {
        outcome,
        value,
        steps: costs.len(),
        decision_times,
        costs,
        final_state: state,
        trace: record.then_some(trace),
    })
}

/// Initial world stored in a trace, rebuilt from its first step record.
pub fn trace_initial_world(trace: &EpisodeTrace) -> Option<WorldState> {
    let geometry = trace.records.iter().find_map(|r| match r {
        TraceRecord::Start { geometry, .. } => Some(*geometry),
        _ => None,
    })?;
    let vehicles = trace.records.iter().find_map(|r| match r {
        TraceRecord::Step { vehicles, .. } => Some(vehicles.clone()),
        _ => None,
    })?;
    Some(WorldState::new(vehicles, geometry))
}

/// Outcome of checking a property against a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyReport {
    pub verdict: Verdict,
    /// 0-based index of the step at which the verdict became Violated.
    pub violated_at: Option<usize>,
    pub steps: usize,
}

/// Reads valuations from JSONL: either flat `{name: bool}` objects or trace
/// records, of which step and terminal records contribute their valuation.
pub fn read_valuations<R: BufRead>(
    reader: R,
) -> Result<Vec<std::collections::BTreeMap<String, bool>>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| HarnessError::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| HarnessError::Trace {
                line: i + 1,
                message: e.to_string(),
            })?;
        let obj = match &value {
            serde_json::Value::Object(m) if m.contains_key("kind") => match m.get("valuation") {
                Some(serde_json::Value::Object(v)) => v,
                _ => continue,
            },
            serde_json::Value::Object(m) => m,
            _ => {
                return Err(HarnessError::Trace {
                    line: i + 1,
                    message: "expected a JSON object".into(),
                })
            }
        };
        let mut row = std::collections::BTreeMap::new();
        for (k, v) in obj {
            let b = v.as_bool().ok_or_else(|| HarnessError::Trace {
                line: i + 1,
                message: format!("proposition `{k}` is not a boolean"),
            })?;
            row.insert(k.clone(), b);
        }
        out.push(row);
    }
    Ok(out)
}

/// Monitors `property` over the valuations in a trace.
pub fn verify_trace<R: BufRead>(property: &str, reader: R) -> Result<VerifyReport, HarnessError> {
    let formula =
        crate::ltl::parse(property).map_err(|e| HarnessError::Config(format!("property: {e}")))?;
    let rows = read_valuations(reader)?;
    let mut m = crate::ltl::Monitor::new(formula);
    for row in &rows {
        m.step(row)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let verdict = m.verdict();
    let violated_at = (verdict == Verdict::Violated)
        .then(|| m.decided_at())
        .flatten();
    Ok(VerifyReport {
        verdict,
        violated_at,
        steps: rows.len(),
    })
}
