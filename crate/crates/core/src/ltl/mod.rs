//! Property strings, formula progression and three-valued runtime monitors.

mod formula;
mod monitor;
mod parser;
mod progress;

pub use formula::{is_valid_atom_name, Formula};
pub use monitor::{evaluate_trace, monitor_step, run_trace, Monitor, Verdict};
pub use parser::{parse, ParseError};
pub use progress::{mk_and, mk_not, mk_or, progress, progress_with, Simplify, Valuation};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("valuation has no entry for proposition `{0}`")]
    MissingAtom(String),
    #[error("`{0}` is not a valid proposition identifier")]
    InvalidAtom(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Stop completely before leaving the stop region.
pub const STOP_RULE: &str = "G(in_stop_region => (in_stop_region U has_stopped_in_stop_region))";
/// Only enter an unoccupied intersection.
pub const CLEARANCE_RULE: &str = "G(in_intersection => intersection_is_clear)";
/// Stay out of the intersection until holding priority.
pub const PRIORITY_RULE: &str = "G(not in_intersection U highest_priority)";
pub const SPEED_RULE: &str = "G(not over_speed_limit)";
