//! Hierarchical motion planning for a four-way stop intersection, with
//! temporal-logic traffic rules checked at runtime.

pub mod dynamics;
pub mod harness;
pub mod ltl;
pub mod options;
pub mod planner;
pub mod reward;
pub mod world;
