use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, run_episode, EpisodeId, HarnessError, OutcomeClass, PlannerMode, RunConfig};

/// Per-episode summary kept for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub trial: usize,
    pub episode: usize,
    pub outcome: OutcomeClass,
    pub formula: Option<String>,
    pub steps: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub success_pct: f64,
    pub violation_pct: f64,
    pub collision_pct: f64,
    pub timeout_pct: f64,
}

impl TrialMetrics {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.success_pct,
            self.violation_pct,
            self.collision_pct,
            self.timeout_pct,
        ]
    }
}

/// Outcome percentages per trial with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub planner: PlannerMode,
    pub trials: Vec<TrialMetrics>,
    /// Success, violation, collision, timeout.
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub episodes: Vec<EpisodeSummary>,
}

impl Metrics {
    pub fn from_episodes(
        planner: PlannerMode,
        mut episodes: Vec<EpisodeSummary>,
        trials: usize,
    ) -> Self {
        episodes.sort_by_key(|e| (e.trial, e.episode));
        let rows: Vec<TrialMetrics> = (0..trials)
            .map(|trial| {
                let mut counts = [0usize; 4];
                let mut n = 0;
                for e in episodes.iter().filter(|e| e.trial == trial) {
                    counts[OutcomeClass::ALL
                        .iter()
                        .position(|c| *c == e.outcome)
                        .expect("known class")] += 1;
                    n += 1;
                }
                let pct = |c: usize| {
                    if n == 0 {
                        0.0
                    } else {
                        100.0 * c as f64 / n as f64
                    }
                };
                TrialMetrics {
                    trial,
                    success_pct: pct(counts[0]),
                    violation_pct: pct(counts[1]),
                    collision_pct: pct(counts[2]),
                    timeout_pct: pct(counts[3]),
                }
            })
            .collect();
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for k in 0..4 {
            let xs: Vec<f64> = rows.iter().map(|r| r.as_array()[k]).collect();
            mean[k] = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            if xs.len() > 1 {
                let ss: f64 = xs.iter().map(|x| (x - mean[k]).powi(2)).sum();
                std[k] = (ss / (xs.len() - 1) as f64).sqrt();
            }
        }
        Metrics {
            planner,
            trials: rows,
            mean,
            std,
            episodes,
        }
    }

    pub fn count(&self, class: OutcomeClass) -> usize {
        self.episodes.iter().filter(|e| e.outcome == class).count()
    }
}

/// CSV with one row per trial followed by `mean` and `std` rows.
pub fn metrics_csv(m: &Metrics) -> String {
    let mut out = String::from("trial,success_pct,violation_pct,collision_pct,timeout_pct\n");
    for r in &m.trials {
        let a = r.as_array();
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4}",
            r.trial, a[0], a[1], a[2], a[3]
        )
        .unwrap();
    }
    writeln!(
        out,
        "mean,{:.4},{:.4},{:.4},{:.4}",
        m.mean[0], m.mean[1], m.mean[2], m.mean[3]
    )
    .unwrap();
    writeln!(
        out,
        "std,{:.4},{:.4},{:.4},{:.4}",
        m.std[0], m.std[1], m.std[2], m.std[3]
    )
    .unwrap();
    out
}

/// Human-readable `mean (std)` table, one row per planner.
pub fn format_table(rows: &[&Metrics]) -> String {
    let mut out = format!(
        "{:<8} {:>16} {:>16} {:>16} {:>16}\n",
        "planner", "success", "violation", "collision", "timeout"
    );
    for m in rows {
        let cell = |k: usize| format!("{:.2} ({:.2})", m.mean[k], m.std[k]);
        writeln!(
            out,
            "{:<8} {:>16} {:>16} {:>16} {:>16}",
            m.planner.name(),
            cell(0),
            cell(1),
            cell(2),
            cell(3)
        )
        .unwrap();
    }
    out
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Runs `trials x episodes` episodes with `mode` on a worker pool. Results are
/// sorted by (trial, episode), so the metrics do not depend on scheduling.
/// Traces go to `out_dir/traces/<planner>_t<trial>_e<episode>.jsonl` when enabled.
pub fn evaluate(cfg: &RunConfig, mode: PlannerMode) -> Result<Metrics, HarnessError> {
    cfg.validate()?;
    super::reject_rl(mode)?;
    let ctx = cfg.sim_context()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| (0..cfg.episodes).map(move |e| (t, e)))
        .collect();
    let trace_dir = match (&cfg.out_dir, cfg.write_traces) {
        (Some(d), true) => Some(d.join("traces")),
        _ => None,
    };
    if let Some(d) = &trace_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let results: Result<Vec<EpisodeSummary>, HarnessError> = pool(cfg.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(trial, episode)| {
                let id = EpisodeId {
                    seed: cfg.seed,
                    trial,
                    episode,
                };
                let r = run_episode(cfg, &ctx, mode, id, trace_dir.is_some())?;
                if let (Some(dir), Some(trace)) = (&trace_dir, &r.trace) {
                    trace.write(
                        &dir.join(format!("{}_t{trial:03}_e{episode:04}.jsonl", mode.name())),
                    )?;
                }
                Ok(EpisodeSummary {
                    trial,
                    episode,
                    outcome: OutcomeClass::of(&r.outcome),
                    formula: match r.outcome {
                        crate::options::Outcome::LtlViolation(f) => Some(f),
                        _ => None,
                    },
                    steps: r.steps,
                    value: r.value,
                })
            })
            .collect()
    });
    let m = Metrics::from_episodes(mode, results?, cfg.trials);
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(format!("metrics_{}.csv", mode.name()));
        std::fs::write(&path, metrics_csv(&m)).map_err(io_err(&path))?;
    }
    Ok(m)
}

/// Both planners on the same episode seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub manual: Metrics,
    pub mcts: Metrics,
}

impl Comparison {
    /// Episodes where one planner succeeded and the other did not, as
    /// (mcts only, manual only).
    pub fn paired_wins(&self) -> (usize, usize) {
        let mut mcts_only = 0;
        let mut manual_only = 0;
        for (a, b) in self.mcts.episodes.iter().zip(&self.manual.episodes) {
            let (sa, sb) = (
                a.outcome == OutcomeClass::Success,
                b.outcome == OutcomeClass::Success,
            );
            mcts_only += (sa && !sb) as usize;
            manual_only += (sb && !sa) as usize;
        }
        (mcts_only, manual_only)
    }

    pub fn table(&self) -> String {
        format_table(&[&self.manual, &self.mcts])
    }
}

/// Matched-seed evaluation of the manual graph and the tree search.
pub fn compare(cfg: &RunConfig) -> Result<Comparison, HarnessError> {
    let manual = evaluate(cfg, PlannerMode::Manual)?;
    let mcts = evaluate(cfg, PlannerMode::Mcts)?;
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join("comparison.txt");
        std::fs::write(&path, format_table(&[&manual, &mcts])).map_err(io_err(&path))?;
    }
    Ok(Comparison { manual, mcts })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(io_err(path))
}
