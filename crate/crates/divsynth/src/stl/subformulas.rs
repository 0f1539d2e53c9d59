//! Enumeration of the distinct subformulas of a normal-form formula.
//!
//! The table drives both the encoder (one certificate bit per subformula and
//! partition cell) and the diversity objectives (valuation matrices are
//! indexed by table position). Order is deterministic: post-order traversal,
//! so every child precedes every node containing it. Structurally identical
//! subtrees share a single entry. The constants true/false are not listed:
//! their valuation is fixed, so no bit is ever allocated for them.

use std::collections::HashMap;

use super::formula::Formula;

#[derive(Debug, Clone)]
pub struct SubformulaTable {
    entries: Vec<Formula>,
    index: HashMap<Formula, usize>,
}

impl SubformulaTable {
    pub fn build(root: &Formula) -> Self {
        let mut table = SubformulaTable {
            entries: Vec::new(),
            index: HashMap::new(),
        };
        table.visit(root);
        table
    }

    fn visit(&mut self, f: &Formula) {
        match f {
            Formula::True | Formula::False => return,
            Formula::Atom(_) | Formula::NegAtom(_) => {}
            Formula::And(children) | Formula::Or(children) => {
                for c in children {
                    self.visit(c);
                }
            }
            Formula::Until(_, lhs, rhs) | Formula::Release(_, lhs, rhs) => {
                self.visit(lhs);
                self.visit(rhs);
            }
        }
        if !self.index.contains_key(f) {
            self.index.insert(f.clone(), self.entries.len());
            self.entries.push(f.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Table position of a subformula, if present. Constants are never present.
    pub fn index_of(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn get(&self, i: usize) -> &Formula {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.entries.iter()
    }

    /// Index of the root formula (always the last entry).
    pub fn root_index(&self) -> usize {
        self.entries.len() - 1
    }
}
