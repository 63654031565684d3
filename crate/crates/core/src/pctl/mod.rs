//! PCTL formulas and their model checking over a [`Dtmc`].
//!
//! Grammar (PRISM-like):
//!
//! ```text
//! query  := "P" "=?" "[" path "]"
//!         | "R" ("{" name "}")? "=?" "[" "F" state "]"
//!         | state
//! state  := state "=>" state | state "|" state | state "&" state | "!" state
//!         | "true" | "false" | "\"label\"" | var relop int | "(" state ")"
//!         | "P" ("<" | "<=" | ">" | ">=") prob "[" path "]"
//! path   := "X" state | "F" ("<=" steps)? state | state "U" ("<=" steps)? state
//! ```
//!
//! `F phi` is parsed as `true U phi`, so both forms share one code path.

mod check;
mod parser;
pub mod solver;

use alloc::boxed::Box;
use alloc::string::String;

pub use check::{
    check, check_with, expected_reachability_reward, prob_bounded_until, prob_next, prob_until,
    CheckError, CheckOptions, CheckResult, Solution,
};
pub use parser::{parse_formula, FormulaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    False,
    Label(String),
    /// Comparison of a model variable with an integer, such as `s=7`.
    Atom {
        var: String,
        op: RelOp,
        value: i64,
    },
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Prob {
        bound: Bound,
        p: f64,
        path: Box<PathFormula>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    BoundedUntil(StateFormula, StateFormula, u64),
    Until(StateFormula, StateFormula),
}

/// A top-level query.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    State(StateFormula),
    /// `P=? [ path ]`.
    ProbQuery(PathFormula),
    /// `R{name}=? [ F target ]`; `None` selects the first reward structure.
    RewardQuery {
        reward: Option<String>,
        target: StateFormula,
    },
}

impl Bound {
    /// Compares with the documented tie band: values within `eps` of the
    /// bound satisfy `<=` and `>=` but not `<` and `>`.
    pub fn holds(self, value: f64, p: f64, eps: f64) -> bool {
        match self {
            Bound::Ge => value >= p - eps,
            Bound::Gt => value > p + eps,
            Bound::Le => value <= p + eps,
            Bound::Lt => value < p - eps,
        }
    }
}

impl RelOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }
}
