//! Signal temporal logic: formulas in negation normal form, a text parser,
//! subformula enumeration, and a trace monitor.

pub mod formula;
pub mod monitor;
pub mod parser;
pub mod subformulas;

pub use formula::{tighten, to_nnf, AffineAtom, Expr, Formula, FormulaError, Interval};
pub use monitor::{eval_boolean, eval_robust, MonitorError, Robustness};
pub use parser::{parse, parse_expr, ParseError};
pub use subformulas::SubformulaTable;
