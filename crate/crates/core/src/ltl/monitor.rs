use serde::{Deserialize, Serialize};

use super::formula::Formula;
use super::progress::{progress_with, Simplify, Valuation};
use super::LtlError;

/// Three-valued status of a property on a finite trace prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    Violated,
    Undetermined,
}

impl Verdict {
    pub fn is_conclusive(self) -> bool {
        !matches!(self, Verdict::Undetermined)
    }

    fn of_residual(residual: &Formula) -> Self {
        match residual {
            Formula::True => Verdict::Satisfied,
            Formula::False => Verdict::Violated,
            _ => Verdict::Undetermined,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "Satisfied",
            Verdict::Violated => "Violated",
            Verdict::Undetermined => "Undetermined",
        })
    }
}

/// Incremental monitor for one property.
///
/// Satisfied and Violated are absorbing: once reached, later steps do not
/// touch the residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monitor {
    original: Formula,
    residual: Formula,
    verdict: Verdict,
    steps_consumed: usize,
    decided_at: Option<usize>,
    simplify: Simplify,
}

impl Monitor {
    pub fn new(formula: Formula) -> Self {
        Self::with_simplify(formula, Simplify::Standard)
    }

    pub fn with_simplify(formula: Formula, simplify: Simplify) -> Self {
        let verdict = Verdict::of_residual(&formula);
        Monitor {
            residual: formula.clone(),
            original: formula,
            verdict,
            steps_consumed: 0,
            decided_at: None,
            simplify,
        }
    }

    pub fn original(&self) -> &Formula {
        &self.original
    }

    pub fn residual(&self) -> &Formula {
        &self.residual
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn steps_consumed(&self) -> usize {
        self.steps_consumed
    }

    /// 0-based index of the step that made the verdict conclusive.
    pub fn decided_at(&self) -> Option<usize> {
        self.decided_at
    }

    /// Consumes one valuation and returns the updated verdict.
    pub fn step<V: Valuation + ?Sized>(&mut self, valuation: &V) -> Result<Verdict, LtlError> {
        if !self.verdict.is_conclusive() {
            self.residual = progress_with(&self.residual, valuation, self.simplify)?;
            self.verdict = Verdict::of_residual(&self.residual);
            if self.verdict.is_conclusive() {
                self.decided_at = Some(self.steps_consumed);
            }
        }
        self.steps_consumed += 1;
        Ok(self.verdict)
    }

    /// End-of-trace verdict. Open obligations stay Undetermined, which
    /// callers treat as non-violation.
    pub fn finalize(&self) -> Verdict {
        match self.verdict {
            Verdict::Violated => Verdict::Violated,
            _ if self.residual.is_true() => Verdict::Satisfied,
            _ => Verdict::Undetermined,
        }
    }
}

/// Value-style form of [`Monitor::step`]: the input monitor is left intact.
pub fn monitor_step<V: Valuation + ?Sized>(
    monitor: &Monitor,
    valuation: &V,
) -> Result<(Monitor, Verdict), LtlError> {
    let mut next = monitor.clone();
    let verdict = next.step(valuation)?;
    Ok((next, verdict))
}

/// Monitors `formula` over a whole trace and returns the final verdict.
pub fn evaluate_trace<V: Valuation>(formula: &Formula, trace: &[V]) -> Result<Verdict, LtlError> {
    Ok(run_trace(formula, trace)?.finalize())
}

/// Like [`evaluate_trace`] but returns the monitor, so callers can read
/// the index of the deciding step.
pub fn run_trace<V: Valuation>(formula: &Formula, trace: &[V]) -> Result<Monitor, LtlError> {
    let mut monitor = Monitor::new(formula.clone());
    for valuation in trace {
        monitor.step(valuation)?;
    }
    Ok(monitor)
}
