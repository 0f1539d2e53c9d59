//! Formula representation.
//!
//! Stored formulas are always in negation normal form: negation appears only
//! directly on affine atoms. The richer surface syntax (implication,
//! eventually/always, arbitrary negation) lives in [`Expr`] and is eliminated
//! by [`to_nnf`] before anything else sees it.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FormulaError {
    #[error("interval [{lo}, {hi}] is invalid: bounds must satisfy 0 <= lo < hi")]
    BadInterval { lo: f64, hi: f64 },
    #[error("atom coefficient for `{var}` is not finite")]
    NonFiniteCoeff { var: String },
    #[error("atom offset is not finite")]
    NonFiniteOffset,
    #[error("atom has no variables")]
    EmptyAtom,
}

/// Affine predicate `a^T w + c >= 0` over named signal variables.
///
/// Terms are kept sorted by variable name with zero coefficients dropped, so
/// structurally equal predicates compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineAtom {
    terms: Vec<(String, f64)>,
    offset: f64,
}

impl AffineAtom {
    pub fn new(terms: Vec<(String, f64)>, offset: f64) -> Result<Self, FormulaError> {
        if !offset.is_finite() {
            return Err(FormulaError::NonFiniteOffset);
        }
        let mut merged: Vec<(String, f64)> = Vec::new();
        for (var, coeff) in terms {
            if !coeff.is_finite() {
                return Err(FormulaError::NonFiniteCoeff { var });
            }
            match merged.binary_search_by(|(v, _)| v.as_str().cmp(var.as_str())) {
                Ok(i) => merged[i].1 += coeff,
                Err(i) => merged.insert(i, (var, coeff)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        if merged.is_empty() {
            return Err(FormulaError::EmptyAtom);
        }
        Ok(AffineAtom {
            terms: merged,
            offset,
        })
    }

    /// Convenience constructor for a single-variable predicate `coeff*var + offset >= 0`.
    pub fn single(var: &str, coeff: f64, offset: f64) -> Self {
        AffineAtom::new(vec![(var.to_string(), coeff)], offset).expect("nonzero single term")
    }

    pub fn terms(&self) -> &[(String, f64)] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Evaluates `a^T w + c` for a state given as (variable -> value) lookup.
    pub fn value(&self, lookup: &dyn Fn(&str) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(v, c)| c * lookup(v))
            .sum::<f64>()
            + self.offset
    }

    /// The negated predicate `-a^T w - c >= 0`.
    pub fn negated(&self) -> Self {
        AffineAtom {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), -c)).collect(),
            offset: -self.offset,
        }
    }

    /// The predicate with its threshold raised by `delta`: `a^T w + c - delta >= 0`.
    pub fn raised(&self, delta: f64) -> Self {
        AffineAtom {
            terms: self.terms.clone(),
            offset: self.offset - delta,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(v, _)| v.as_str())
    }
}

// Atoms never hold NaN (constructor rejects non-finite values).
impl Eq for AffineAtom {}

impl Hash for AffineAtom {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for (v, c) in &self.terms {
            v.hash(state);
            c.to_bits().hash(state);
        }
        self.offset.to_bits().hash(state);
    }
}

impl fmt::Display for AffineAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            if first {
                if *c == 1.0 {
                    write!(f, "{v}")?;
                } else if *c == -1.0 {
                    write!(f, "-{v}")?;
                } else {
                    write!(f, "{c}*{v}")?;
                }
                first = false;
            } else if *c >= 0.0 {
                if *c == 1.0 {
                    write!(f, " + {v}")?;
                } else {
                    write!(f, " + {c}*{v}")?;
                }
            } else if *c == -1.0 {
                write!(f, " - {v}")?;
            } else {
                write!(f, " - {}*{v}", -c)?;
            }
        }
        write!(f, " >= {}", -self.offset)
    }
}

/// Closed time window of a temporal operator. `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FormulaError> {
        if !(lo >= 0.0) || !(lo < hi) || lo.is_infinite() || hi.is_nan() {
            return Err(FormulaError::BadInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// `[0, inf)`, the window of an unbounded eventually/always.
    pub fn full() -> Self {
        Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi.is_infinite()
    }
}

impl Eq for Interval {}

impl Hash for Interval {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.lo.to_bits().hash(state);
        self.hi.to_bits().hash(state);
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unbounded() && self.lo == 0.0 {
            Ok(())
        } else if self.is_unbounded() {
            write!(f, "[{},inf]", self.lo)
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// Surface syntax: what the parser produces. Sugar and free negation are
/// allowed here and nowhere else.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    True,
    False,
    Atom(AffineAtom),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Until(Interval, Box<Expr>, Box<Expr>),
    Release(Interval, Box<Expr>, Box<Expr>),
    Eventually(Interval, Box<Expr>),
    Always(Interval, Box<Expr>),
}

/// Stored normal form: negation only on atoms, no implication, no
/// eventually/always nodes (they are until/release with a constant side).
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(AffineAtom),
    /// `not (a^T w + c >= 0)`, i.e. `a^T w + c < 0`.
    NegAtom(AffineAtom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Release(Interval, Box<Formula>, Box<Formula>),
}

impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Formula::True => 0u8.hash(state),
            Formula::False => 1u8.hash(state),
            Formula::Atom(a) => {
                2u8.hash(state);
                a.hash(state);
            }
            Formula::NegAtom(a) => {
                3u8.hash(state);
                a.hash(state);
            }
            Formula::And(children) => {
                4u8.hash(state);
                children.hash(state);
            }
            Formula::Or(children) => {
                5u8.hash(state);
                children.hash(state);
            }
            Formula::Until(i, lhs, rhs) => {
                6u8.hash(state);
                i.hash(state);
                lhs.hash(state);
                rhs.hash(state);
            }
            Formula::Release(i, lhs, rhs) => {
                7u8.hash(state);
                i.hash(state);
                lhs.hash(state);
                rhs.hash(state);
            }
        }
    }
}

/// Rewrites surface syntax into negation normal form.
///
/// Implication becomes `!lhs || rhs`; eventually/always become until/release
/// against a constant; negation is pushed to the atoms through the usual
/// dualities. Nested conjunctions/disjunctions are flattened so associativity
/// does not create distinct subformulas.
pub fn to_nnf(expr: &Expr) -> Formula {
    nnf(expr, false)
}

fn nnf(expr: &Expr, negate: bool) -> Formula {
    match expr {
        Expr::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Expr::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Expr::Atom(a) => {
            if negate {
                Formula::NegAtom(a.clone())
            } else {
                Formula::Atom(a.clone())
            }
        }
        Expr::Not(inner) => nnf(inner, !negate),
        Expr::And(children) => {
            let kids: Vec<Formula> = children.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                or_of(kids)
            } else {
                and_of(kids)
            }
        }
        Expr::Or(children) => {
            let kids: Vec<Formula> = children.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                and_of(kids)
            } else {
                or_of(kids)
            }
        }
        Expr::Implies(lhs, rhs) => {
            // lhs -> rhs  ==  !lhs || rhs
            if negate {
                and_of(vec![nnf(lhs, false), nnf(rhs, true)])
            } else {
                or_of(vec![nnf(lhs, true), nnf(rhs, false)])
            }
        }
        Expr::Until(i, lhs, rhs) => {
            if negate {
                Formula::Release(*i, Box::new(nnf(lhs, true)), Box::new(nnf(rhs, true)))
            } else {
                Formula::Until(*i, Box::new(nnf(lhs, false)), Box::new(nnf(rhs, false)))
            }
        }
        Expr::Release(i, lhs, rhs) => {
            if negate {
                Formula::Until(*i, Box::new(nnf(lhs, true)), Box::new(nnf(rhs, true)))
            } else {
                Formula::Release(*i, Box::new(nnf(lhs, false)), Box::new(nnf(rhs, false)))
            }
        }
        Expr::Eventually(i, inner) => {
            // Ev_I f == True U_I f; negated: False R_I !f (always not f).
            if negate {
                Formula::Release(*i, Box::new(Formula::False), Box::new(nnf(inner, true)))
            } else {
                Formula::Until(*i, Box::new(Formula::True), Box::new(nnf(inner, false)))
            }
        }
        Expr::Always(i, inner) => {
            if negate {
                Formula::Until(*i, Box::new(Formula::True), Box::new(nnf(inner, true)))
            } else {
                Formula::Release(*i, Box::new(Formula::False), Box::new(nnf(inner, false)))
            }
        }
    }
}

fn and_of(children: Vec<Formula>) -> Formula {
    let mut flat = Vec::new();
    for c in children {
        match c {
            Formula::And(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => Formula::True,
        1 => flat.pop().unwrap(),
        _ => Formula::And(flat),
    }
}

fn or_of(children: Vec<Formula>) -> Formula {
    let mut flat = Vec::new();
    for c in children {
        match c {
            Formula::Or(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => Formula::False,
        1 => flat.pop().unwrap(),
        _ => Formula::Or(flat),
    }
}

impl Formula {
    /// Embeds a normal-form formula back into surface syntax.
    pub fn to_expr(&self) -> Expr {
        match self {
            Formula::True => Expr::True,
            Formula::False => Expr::False,
            Formula::Atom(a) => Expr::Atom(a.clone()),
            Formula::NegAtom(a) => Expr::Not(Box::new(Expr::Atom(a.clone()))),
            Formula::And(children) => Expr::And(children.iter().map(|c| c.to_expr()).collect()),
            Formula::Or(children) => Expr::Or(children.iter().map(|c| c.to_expr()).collect()),
            Formula::Until(i, lhs, rhs) => {
                Expr::Until(*i, Box::new(lhs.to_expr()), Box::new(rhs.to_expr()))
            }
            Formula::Release(i, lhs, rhs) => {
                Expr::Release(*i, Box::new(lhs.to_expr()), Box::new(rhs.to_expr()))
            }
        }
    }

    /// Names of all variables referenced by atoms, in sorted order.
    pub fn variables(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        self.collect_vars(&mut set);
        set.into_iter().collect()
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) | Formula::NegAtom(a) => {
                for v in a.variables() {
                    out.insert(v.to_string());
                }
            }
            Formula::And(children) | Formula::Or(children) => {
                for c in children {
                    c.collect_vars(out);
                }
            }
            Formula::Until(_, lhs, rhs) | Formula::Release(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(a) => write!(f, "({a})"),
            Formula::NegAtom(a) => write!(f, "!({a})"),
            Formula::And(children) => {
                write!(f, "(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Formula::Or(children) => {
                write!(f, "(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            Formula::Until(i, lhs, rhs) => match **lhs {
                Formula::True => write!(f, "Ev{i}({rhs})"),
                _ => write!(f, "({lhs}) U{} ({rhs})", DisplayBounds(i)),
            },
            Formula::Release(i, lhs, rhs) => match **lhs {
                Formula::False => write!(f, "Alw{i}({rhs})"),
                _ => write!(f, "({lhs}) R{} ({rhs})", DisplayBounds(i)),
            },
        }
    }
}

/// Interval rendering that never collapses to the empty string: the infix
/// until/release syntax requires explicit bounds.
struct DisplayBounds<'a>(&'a Interval);

impl fmt::Display for DisplayBounds<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_unbounded() {
            write!(f, "[{},inf]", self.0.lo())
        } else {
            write!(f, "[{},{}]", self.0.lo(), self.0.hi())
        }
    }
}

/// Strengthens every predicate of a normal-form formula by `delta`.
///
/// Plain atoms get their threshold raised (`a^T w + c >= delta`); negated
/// atoms become plain atoms of the negated predicate (`-a^T w - c >= delta`),
/// so the result contains no negation at all. Connectives and windows are
/// untouched. Every trace satisfying the result satisfies the original.
pub fn tighten(formula: &Formula, delta: f64) -> Formula {
    debug_assert!(delta > 0.0, "tightening margin must be positive");
    match formula {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(a) => Formula::Atom(a.raised(delta)),
        Formula::NegAtom(a) => Formula::Atom(a.negated().raised(delta)),
        Formula::And(children) => {
            Formula::And(children.iter().map(|c| tighten(c, delta)).collect())
        }
        Formula::Or(children) => Formula::Or(children.iter().map(|c| tighten(c, delta)).collect()),
        Formula::Until(i, lhs, rhs) => Formula::Until(
            *i,
            Box::new(tighten(lhs, delta)),
            Box::new(tighten(rhs, delta)),
        ),
        Formula::Release(i, lhs, rhs) => Formula::Release(
            *i,
            Box::new(tighten(lhs, delta)),
            Box::new(tighten(rhs, delta)),
        ),
    }
}
