use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::LtlError;

/// A temporal formula over named boolean propositions.
///
/// Children are reference counted so that progression can share the
/// unchanged parts of a formula between successive residuals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Arc<str>),
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Or(Arc<Formula>, Arc<Formula>),
    Implies(Arc<Formula>, Arc<Formula>),
    Next(Arc<Formula>),
    Eventually(Arc<Formula>),
    Always(Arc<Formula>),
    Until(Arc<Formula>, Arc<Formula>),
}

/// Returns true when `name` is a legal proposition identifier.
pub fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !super::parser::is_keyword(name)
}

impl Formula {
    pub fn atom(name: &str) -> Result<Self, LtlError> {
        if is_valid_atom_name(name) {
            Ok(Formula::Atom(Arc::from(name)))
        } else {
            Err(LtlError::InvalidAtom(name.to_string()))
        }
    }

    // Plain constructors: no simplification is applied.

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Arc::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Arc::new(l), Arc::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Arc::new(l), Arc::new(r))
    }

    pub fn implies(l: Formula, r: Formula) -> Self {
        Formula::Implies(Arc::new(l), Arc::new(r))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Arc::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Arc::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Arc::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Self {
        Formula::Until(Arc::new(l), Arc::new(r))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::False)
    }

    /// Longest root-to-leaf path, counting leaves as depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                1 + a.depth()
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Number of nodes in the tree (shared subtrees counted once per use).
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                1 + a.size()
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(name) => {
                out.insert(name);
            }
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                a.collect_atoms(out)
            }
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    // Binding strength used by the printer; mirrors the parser's precedence.
    fn level(&self) -> u8 {
        match self {
            Formula::Implies(..) => 0,
            Formula::Until(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(_) | Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) => 4,
            Formula::True | Formula::False | Formula::Atom(_) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_level: u8) -> fmt::Result {
        if self.level() < min_level {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(name) => f.write_str(name),
            Formula::Not(a) => write_unary(f, "not", a),
            Formula::Next(a) => write_unary(f, "X", a),
            Formula::Eventually(a) => write_unary(f, "F", a),
            Formula::Always(a) => write_unary(f, "G", a),
            Formula::And(a, b) => write_binary(f, a, "and", b, 3, 4),
            Formula::Or(a, b) => write_binary(f, a, "or", b, 2, 3),
            Formula::Until(a, b) => write_binary(f, a, "U", b, 2, 1),
            Formula::Implies(a, b) => write_binary(f, a, "=>", b, 1, 0),
        }
    }
}

fn write_unary(f: &mut fmt::Formatter<'_>, op: &str, operand: &Formula) -> fmt::Result {
    f.write_str(op)?;
    if operand.level() < 4 {
        f.write_str("(")?;
        operand.write_at(f, 0)?;
        f.write_str(")")
    } else {
        f.write_str(" ")?;
        operand.write_at(f, 4)
    }
}

fn write_binary(
    f: &mut fmt::Formatter<'_>,
    l: &Formula,
    op: &str,
    r: &Formula,
    left_min: u8,
    right_min: u8,
) -> fmt::Result {
    l.write_at(f, left_min)?;
    write!(f, " {op} ")?;
    r.write_at(f, right_min)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
