//! A guarded-command modelling language compiled into explicit DTMCs.
//!
//! The language is a subset of PRISM's:
//!
//! ```text
//! dtmc
//! const double p = 0.1;
//! formula busy = s > 0;
//! module m
//!   s : [0..2] init 0;
//!   [go] s=0 -> p:(s'=1) + (1-p):(s'=2);
//!   [] busy -> (s'=0);
//! endmodule
//! label "done" = s=2;
//! rewards "steps" [go] true : 1; endrewards
//! ```
//!
//! Commands that share an action label across modules fire together, with
//! the product of their update probabilities. When several commands or
//! synchronized command sets are enabled in one state, each is taken with
//! equal weight.

pub mod ast;
mod build;
pub mod expr;
pub(crate) mod lexer;
mod parser;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rational::Rational;
use ast::{ConstType, Domain, ModelAst, RewardTarget};
use expr::{depends_on_state, eval_exact, CExpr, Compiler, ConstValue, Env, Ty, Value};

pub use build::{compose_and_build, BuildError, BuildOptions, DEFAULT_STATE_CAP};
pub use parser::parse_expr;

/// A 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GclError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: undeclared identifier `{name}`")]
    Undeclared { pos: Pos, name: String },
    #[error("{pos}: `{name}` is declared twice")]
    Duplicate { pos: Pos, name: String },
    #[error("{pos}: type error: {msg}")]
    Type { pos: Pos, msg: String },
    #[error("{pos}: {msg}")]
    Eval { pos: Pos, msg: String },
    #[error("{pos}: formula `{name}` refers to itself")]
    CyclicFormula { pos: Pos, name: String },
    #[error("{pos}: probability {value} is outside [0,1]")]
    ProbabilityRange { pos: Pos, value: String },
    #[error("{pos}: probabilities sum to {sum}")]
    ProbabilitySum { pos: Pos, sum: String },
    #[error("{pos}: probability must be an exact rational")]
    InexactProbability { pos: Pos },
    #[error("{pos}: module `{module}` assigns `{var}`, which it does not own")]
    ForeignAssignment {
        pos: Pos,
        module: String,
        var: String,
    },
    #[error("{pos}: `{var}` is assigned twice in one update")]
    DoubleAssignment { pos: Pos, var: String },
    #[error("{pos}: bad domain for `{var}`: {msg}")]
    Domain { pos: Pos, var: String, msg: String },
    #[error("{pos}: unknown action `{name}`")]
    UnknownAction { pos: Pos, name: String },
}

/// A variable after its bounds and initial value have been evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub module: usize,
    pub lo: i64,
    pub hi: i64,
    pub init: i64,
    pub is_bool: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Prob {
    Const(Rational),
    Dynamic(CExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Update {
    pub prob: Prob,
    pub assigns: Vec<(u32, CExpr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Command {
    pub action: Option<u32>,
    pub guard: CExpr,
    pub updates: Vec<Update>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Module {
    pub name: String,
    pub commands: Vec<Command>,
    pub unlabeled: Vec<usize>,
    /// Commands per action id; empty when the action is not in the
    /// module's alphabet.
    pub by_action: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RewardSlot {
    State,
    Transition(Option<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RewardItem {
    pub slot: RewardSlot,
    pub guard: CExpr,
    pub value: CExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Rewards {
    pub name: String,
    pub items: Vec<RewardItem>,
}

/// A parsed and type-checked model, ready to be explored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicModel {
    ast: ModelAst,
    pub(crate) variables: Vec<VariableDecl>,
    pub(crate) formulas: Vec<CExpr>,
    pub(crate) modules: Vec<Module>,
    pub(crate) actions: Vec<String>,
    /// Modules whose alphabet contains each action.
    pub(crate) sync: Vec<Vec<usize>>,
    pub(crate) labels: Vec<(String, CExpr)>,
    pub(crate) rewards: Vec<Rewards>,
}

impl SymbolicModel {
    pub fn ast(&self) -> &ModelAst {
        &self.ast
    }

    pub fn variables(&self) -> &[VariableDecl] {
        &self.variables
    }

    pub fn module_names(&self) -> impl Iterator<Item = &str> {
        self.modules.iter().map(|m| m.name.as_str())
    }

    pub fn n_commands(&self) -> usize {
        self.modules.iter().map(|m| m.commands.len()).sum()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|(n, _)| n.as_str())
    }

    pub fn reward_names(&self) -> impl Iterator<Item = &str> {
        self.rewards.iter().map(|r| r.name.as_str())
    }
}

/// Parses and type-checks a model description.
pub fn parse_model(text: &str) -> Result<SymbolicModel, GclError> {
    let ast = parser::parse(text)?;
    check(ast)
}

fn check(ast: ModelAst) -> Result<SymbolicModel, GclError> {
    let mut c = Compiler::new(&ast.formulas)?;
    let mut seen: BTreeMap<String, Pos> = BTreeMap::new();
    let mut claim = |name: &str, pos: Pos| -> Result<(), GclError> {
        if seen.insert(name.to_string(), pos).is_some() {
            return Err(GclError::Duplicate {
                pos,
                name: name.to_string(),
            });
        }
        Ok(())
    };
    for f in &ast.formulas {
        claim(&f.name, f.pos)?;
    }

    for k in &ast.constants {
        claim(&k.name, k.pos)?;
        let (mut v, ty) = c.constant(&k.value)?;
        let declared = match k.ty {
            Some(ConstType::Int) => Ty::Int,
            Some(ConstType::Double) => Ty::Real,
            Some(ConstType::Bool) => Ty::Bool,
            None => ty,
        };
        match (declared, ty) {
            (a, b) if a == b => {}
            (Ty::Real, Ty::Int) => {
                v = ConstValue {
                    value: Value::Real(v.value.as_f64()),
                    exact: v.exact,
                }
            }
            _ => {
                return Err(GclError::Type {
                    pos: k.value.pos,
                    msg: alloc::format!("constant `{}` has the wrong type", k.name),
                })
            }
        }
        c.consts.insert(k.name.clone(), v);
    }

    let mut variables = Vec::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        claim(&m.name, m.pos)?;
        for v in &m.variables {
            claim(&v.name, v.pos)?;
            let domain_err = |msg: &str| GclError::Domain {
                pos: v.pos,
                var: v.name.clone(),
                msg: msg.to_string(),
            };
            let int_const = |c: &mut Compiler, e: &ast::Expr| -> Result<i64, GclError> {
                match c.constant(e)? {
                    (
                        ConstValue {
                            value: Value::Int(i),
                            ..
                        },
                        _,
                    ) => Ok(i),
                    _ => Err(GclError::Type {
                        pos: e.pos,
                        msg: "expected an integer constant".to_string(),
                    }),
                }
            };
            let (lo, hi, is_bool) = match &v.domain {
                Domain::Bool => (0, 1, true),
                Domain::Range(lo, hi) => (int_const(&mut c, lo)?, int_const(&mut c, hi)?, false),
            };
            if lo > hi {
                return Err(domain_err("empty range"));
            }
            if lo < i32::MIN as i64 || hi > i32::MAX as i64 {
                return Err(domain_err("bounds must fit in 32 bits"));
            }
            let init = match &v.init {
                None => lo,
                Some(e) if is_bool => match c.constant(e)? {
                    (
                        ConstValue {
                            value: Value::Bool(b),
                            ..
                        },
                        _,
                    ) => b as i64,
                    _ => return Err(domain_err("initial value must be a boolean")),
                },
                Some(e) => int_const(&mut c, e)?,
            };
            if init < lo || init > hi {
                return Err(domain_err("initial value outside the range"));
            }
            c.vars
                .insert(v.name.clone(), (variables.len() as u32, is_bool));
            variables.push(VariableDecl {
                name: v.name.clone(),
                module: mi,
                lo,
                hi,
                init,
                is_bool,
            });
        }
    }

    c.allow_state = true;
    let formulas = c.finish_formulas()?;
    let mut formula_dep = vec![false; formulas.len()];
    // Formulas may reference later formulas; iterate to a fixpoint.
    loop {
        let mut changed = false;
        for (i, f) in formulas.iter().enumerate() {
            if !formula_dep[i] && depends_on_state(f, &formula_dep) {
                formula_dep[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut actions: Vec<String> = Vec::new();
    let mut modules = Vec::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        let mut commands = Vec::new();
        for cmd in &m.commands {
            let action = cmd
                .action
                .as_ref()
                .map(|a| match actions.iter().position(|x| x == a) {
                    Some(i) => i as u32,
                    None => {
                        actions.push(a.clone());
                        (actions.len() - 1) as u32
                    }
                });
            let guard = c.compile_typed(&cmd.guard, Ty::Bool)?;
            let mut updates = Vec::new();
            let mut all_const = true;
            let mut sum = Rational::ZERO;
            for u in &cmd.updates {
                let prob = match &u.prob {
                    None => Prob::Const(Rational::ONE),
                    Some(e) => {
                        let ce = c.compile_typed(e, Ty::Real)?;
                        if depends_on_state(&ce, &formula_dep) {
                            Prob::Dynamic(ce)
                        } else {
                            let mut env = Env {
                                vals: &[],
                                formulas: &formulas,
                                cache: &mut [],
                            };
                            let q = eval_exact(&ce, &mut env)
                                .map_err(|_| GclError::InexactProbability { pos: e.pos })?;
                            if q < Rational::ZERO || q > Rational::ONE {
                                return Err(GclError::ProbabilityRange {
                                    pos: e.pos,
                                    value: q.to_string(),
                                });
                            }
                            Prob::Const(q)
                        }
                    }
                };
                match &prob {
                    Prob::Const(q) => sum = sum + *q,
                    Prob::Dynamic(_) => all_const = false,
                }
                let mut assigns: Vec<(u32, CExpr)> = Vec::new();
                for a in &u.assignments {
                    let Some(&(slot, is_bool)) = c.vars.get(&a.var) else {
                        return Err(GclError::Undeclared {
                            pos: a.pos,
                            name: a.var.clone(),
                        });
                    };
                    if variables[slot as usize].module != mi {
                        return Err(GclError::ForeignAssignment {
                            pos: a.pos,
                            module: m.name.clone(),
                            var: a.var.clone(),
                        });
                    }
                    if assigns.iter().any(|(s, _)| *s == slot) {
                        return Err(GclError::DoubleAssignment {
                            pos: a.pos,
                            var: a.var.clone(),
                        });
                    }
                    let want = if is_bool { Ty::Bool } else { Ty::Int };
                    assigns.push((slot, c.compile_typed(&a.value, want)?));
                }
                updates.push(Update { prob, assigns });
            }
            if all_const && sum != Rational::ONE {
                return Err(GclError::ProbabilitySum {
                    pos: cmd.pos,
                    sum: sum.to_string(),
                });
            }
            commands.push(Command {
                action,
                guard,
                updates,
                pos: cmd.pos,
            });
        }
        modules.push((m.name.clone(), commands));
    }

    let n_actions = actions.len();
    let mut sync = vec![Vec::new(); n_actions];
    let modules: Vec<Module> = modules
        .into_iter()
        .enumerate()
        .map(|(mi, (name, commands))| {
            let mut unlabeled = Vec::new();
            let mut by_action = vec![Vec::new(); n_actions];
            for (ci, cmd) in commands.iter().enumerate() {
                match cmd.action {
                    None => unlabeled.push(ci),
                    Some(a) => by_action[a as usize].push(ci),
                }
            }
            for (a, cmds) in by_action.iter().enumerate() {
                if !cmds.is_empty() {
                    sync[a].push(mi);
                }
            }
            Module {
                name,
                commands,
                unlabeled,
                by_action,
            }
        })
        .collect();

    let mut labels = Vec::new();
    for l in &ast.labels {
        if labels.iter().any(|(n, _): &(String, CExpr)| n == &l.name) {
            return Err(GclError::Duplicate {
                pos: l.pos,
                name: l.name.clone(),
            });
        }
        labels.push((l.name.clone(), c.compile_typed(&l.expr, Ty::Bool)?));
    }

    let mut rewards: Vec<Rewards> = Vec::new();
    for r in &ast.rewards {
        if rewards.iter().any(|x| x.name == r.name) {
            return Err(GclError::Duplicate {
                pos: r.pos,
                name: r.name.clone(),
            });
        }
        let mut items = Vec::new();
        for it in &r.items {
            let slot = match &it.target {
                RewardTarget::State => RewardSlot::State,
                RewardTarget::Transition(None) => RewardSlot::Transition(None),
                RewardTarget::Transition(Some(a)) => match actions.iter().position(|x| x == a) {
                    Some(i) => RewardSlot::Transition(Some(i as u32)),
                    None => {
                        return Err(GclError::UnknownAction {
                            pos: it.pos,
                            name: a.clone(),
                        })
                    }
                },
            };
            items.push(RewardItem {
                slot,
                guard: c.compile_typed(&it.guard, Ty::Bool)?,
                value: c.compile_typed(&it.value, Ty::Real)?,
            });
        }
        rewards.push(Rewards {
            name: r.name.clone(),
            items,
        });
    }

    Ok(SymbolicModel {
        ast,
        variables,
        formulas,
        modules,
        actions,
        sync,
        labels,
        rewards,
    })
}
