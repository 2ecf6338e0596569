use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::formula::Formula;
use super::LtlError;

/// Truth assignment for propositions at one instant.
///
/// Lookup of an unknown identifier returns `None`; progression turns that
/// into [`LtlError::MissingAtom`] instead of assuming a default.
pub trait Valuation {
    fn lookup(&self, atom: &str) -> Option<bool>;
}

impl Valuation for BTreeMap<String, bool> {
    fn lookup(&self, atom: &str) -> Option<bool> {
        self.get(atom).copied()
    }
}

impl Valuation for HashMap<String, bool> {
    fn lookup(&self, atom: &str) -> Option<bool> {
        self.get(atom).copied()
    }
}

impl<V: Valuation + ?Sized> Valuation for &V {
    fn lookup(&self, atom: &str) -> Option<bool> {
        (**self).lookup(atom)
    }
}

/// Which rewriting is applied to residuals after each progression step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Simplify {
    /// Constant folding and idempotence.
    #[default]
    Standard,
    /// Raw progression; residuals keep every constant.
    None,
}

pub fn mk_not(f: Formula) -> Formula {
    match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        other => Formula::not(other),
    }
}

fn is_and_part(f: &Formula, of: &Formula) -> bool {
    match of {
        Formula::And(l, r) => **l == *f || **r == *f,
        _ => false,
    }
}

fn is_or_part(f: &Formula, of: &Formula) -> bool {
    match of {
        Formula::Or(l, r) => **l == *f || **r == *f,
        _ => false,
    }
}

pub fn mk_and(l: Formula, r: Formula) -> Formula {
    match (&l, &r) {
        (Formula::False, _) | (_, Formula::False) => Formula::False,
        (Formula::True, _) => r,
        (_, Formula::True) => l,
        _ if l == r => l,
        // One level of associativity: a and (a and b) -> a and b.
        _ if is_and_part(&l, &r) => r,
        _ if is_and_part(&r, &l) => l,
        _ => Formula::And(Arc::new(l), Arc::new(r)),
    }
}

pub fn mk_or(l: Formula, r: Formula) -> Formula {
    match (&l, &r) {
        (Formula::True, _) | (_, Formula::True) => Formula::True,
        (Formula::False, _) => r,
        (_, Formula::False) => l,
        _ if l == r => l,
        _ if is_or_part(&l, &r) => r,
        _ if is_or_part(&r, &l) => l,
        _ => Formula::Or(Arc::new(l), Arc::new(r)),
    }
}

/// Rewrites `formula` into the obligation left for the rest of the trace
/// after observing `valuation`, with the standard simplifier.
pub fn progress<V: Valuation + ?Sized>(
    formula: &Formula,
    valuation: &V,
) -> Result<Formula, LtlError> {
    progress_with(formula, valuation, Simplify::Standard)
}

pub fn progress_with<V: Valuation + ?Sized>(
    formula: &Formula,
    valuation: &V,
    simplify: Simplify,
) -> Result<Formula, LtlError> {
    match simplify {
        Simplify::Standard => step(formula, valuation, &Folding),
        Simplify::None => step(formula, valuation, &Raw),
    }
}

trait Builder {
    fn not(&self, f: Formula) -> Formula;
    fn and(&self, l: Formula, r: Formula) -> Formula;
    fn or(&self, l: Formula, r: Formula) -> Formula;
}

struct Folding;

impl Builder for Folding {
    fn not(&self, f: Formula) -> Formula {
        mk_not(f)
    }
    fn and(&self, l: Formula, r: Formula) -> Formula {
        mk_and(l, r)
    }
    fn or(&self, l: Formula, r: Formula) -> Formula {
        mk_or(l, r)
    }
}

struct Raw;

impl Builder for Raw {
    fn not(&self, f: Formula) -> Formula {
        Formula::not(f)
    }
    fn and(&self, l: Formula, r: Formula) -> Formula {
        Formula::and(l, r)
    }
    fn or(&self, l: Formula, r: Formula) -> Formula {
        Formula::or(l, r)
    }
}

fn step<V: Valuation + ?Sized, B: Builder>(f: &Formula, v: &V, b: &B) -> Result<Formula, LtlError> {
    Ok(match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(name) => match v.lookup(name) {
            Some(true) => Formula::True,
            Some(false) => Formula::False,
            None => return Err(LtlError::MissingAtom(name.to_string())),
        },
        Formula::Not(a) => b.not(step(a, v, b)?),
        Formula::And(l, r) => b.and(step(l, v, b)?, step(r, v, b)?),
        Formula::Or(l, r) => b.or(step(l, v, b)?, step(r, v, b)?),
        Formula::Implies(l, r) => b.or(b.not(step(l, v, b)?), step(r, v, b)?),
        Formula::Next(a) => (**a).clone(),
        Formula::Eventually(a) => b.or(step(a, v, b)?, f.clone()),
        Formula::Always(a) => b.and(step(a, v, b)?, f.clone()),
        Formula::Until(l, r) => b.or(step(r, v, b)?, b.and(step(l, v, b)?, f.clone())),
    })
}
