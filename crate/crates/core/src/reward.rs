//! Instantaneous cost, terminal reward and the discounted episode value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{jerk_estimate, ControlInput};
use crate::options::{FeatureVector, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub speed: f64,
    pub lateral: f64,
    pub jerk: f64,
    pub steer_rate: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            speed: 0.05,
            lateral: 0.1,
            jerk: 0.01,
            steer_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub gamma: f64,
    pub weights: CostWeights,
    pub term_success: f64,
    pub term_failure: f64,
    pub timeout_reward: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            gamma: 0.99,
            weights: CostWeights::default(),
            term_success: 100.0,
            term_failure: -100.0,
            timeout_reward: 0.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!(
                "reward.gamma must lie in (0, 1), got {}",
                self.gamma
            ));
        }
        let w = &self.weights;
        for (name, value) in [
            ("speed", w.speed),
            ("lateral", w.lateral),
            ("jerk", w.jerk),
            ("steer_rate", w.steer_rate),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(format!("reward.weights.{name} must be finite and >= 0"));
            }
        }
        if !(self.term_success > 0.0 && self.term_failure < 0.0) {
            return Err("reward requires term_success > 0 > term_failure".into());
        }
        if !self.timeout_reward.is_finite() {
            return Err("reward.timeout_reward must be finite".into());
        }
        Ok(())
    }

    /// Largest terminal magnitude, used to scale returns for tree search.
    pub fn scale(&self) -> f64 {
        self.term_success.abs().max(self.term_failure.abs())
    }
}

/// The error terms entering the instantaneous cost.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub speed_error: f64,
    pub lateral_error: f64,
    pub jerk: f64,
    pub steer_rate: f64,
}

impl CostTerms {
    pub fn new(features: &FeatureVector, a: &ControlInput, u_prev: &ControlInput, dt: f64) -> Self {
        CostTerms {
            speed_error: features.speed_error,
            lateral_error: features.lateral_error,
            jerk: jerk_estimate(a, u_prev, dt),
            steer_rate: a.steer_rate,
        }
    }
}

/// Weighted Euclidean norm of the cost terms; enters the value with a minus sign.
pub fn inst_cost(terms: &CostTerms, w: &CostWeights) -> f64 {
    (w.speed * terms.speed_error * terms.speed_error
        + w.lateral * terms.lateral_error * terms.lateral_error
        + w.jerk * terms.jerk * terms.jerk
        + w.steer_rate * terms.steer_rate * terms.steer_rate)
        .sqrt()
}

pub fn term_reward(outcome: &Outcome, spec: &RewardSpec) -> f64 {
    match outcome {
        Outcome::Success => spec.term_success,
        Outcome::Collision | Outcome::LtlViolation(_) => spec.term_failure,
        Outcome::Timeout => spec.timeout_reward,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturn {
    pub value: f64,
    /// Terminal step.
    pub t_terminal: usize,
    /// Number of decision instants.
    pub k: usize,
    pub decision_times: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("trace has no terminal outcome")]
    Incomplete,
    #[error("decision times must start at 0 and increase strictly")]
    BadDecisionTimes,
}

/// `-sum_t gamma^t c_t + gamma^T term(outcome)` over per-step costs `c_0..c_{T-1}`.
pub fn discounted_value(costs: &[f64], outcome: &Outcome, spec: &RewardSpec) -> f64 {
    let mut value = 0.0;
    let mut discount = 1.0;
    for c in costs {
        value -= discount * c;
        discount *= spec.gamma;
    }
    value + discount * term_reward(outcome, spec)
}

/// Minus the discounted cost of one option segment, discounted from the
/// segment's own start.
pub fn segment_return(costs: &[f64], gamma: f64) -> f64 {
    let mut value = 0.0;
    let mut discount = 1.0;
    for c in costs {
        value -= discount * c;
        discount *= gamma;
    }
    value
}

/// Episode value from logged per-step costs, the decision instants and the
/// terminal outcome. `outcome` is `None` for an unfinished trace.
pub fn episode_value(
    costs: &[f64],
    decision_times: &[usize],
    outcome: Option<&Outcome>,
    spec: &RewardSpec,
) -> Result<EpisodeReturn, RewardError> {
    let outcome = outcome.ok_or(RewardError::Incomplete)?;
    if !decision_times.is_empty()
        && (decision_times[0] != 0 || decision_times.windows(2).any(|w| w[0] >= w[1]))
    {
        return Err(RewardError::BadDecisionTimes);
    }
    Ok(EpisodeReturn {
        value: discounted_value(costs, outcome, spec),
        t_terminal: costs.len(),
        k: decision_times.len(),
        decision_times: decision_times.to_vec(),
    })
}
