//! Breadth-first exploration of a [`SymbolicModel`] into a [`Dtmc`].

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::expr::{eval, eval_exact, CExpr, Env, EvalError, Value};
use super::{Command, Pos, Prob, RewardSlot, SymbolicModel};
use crate::dtmc::{Dtmc, DtmcError, DtmcParts, PartsReward, Valuations};
use crate::rational::Rational;

/// Default bound on the number of explored states.
pub const DEFAULT_STATE_CAP: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Add a self-loop to states without enabled commands instead of
    /// failing.
    pub fix_deadlocks: bool,
    pub state_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            fix_deadlocks: false,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("deadlock in state {state}")]
    Deadlock { state: String },
    #[error("update sets {var}={value} outside its range in state {state}")]
    OutOfRange {
        var: String,
        value: i64,
        state: String,
    },
    #[error("more than {cap} states")]
    StateCap { cap: usize },
    #[error("{pos}: {msg} in state {state}")]
    Eval {
        pos: Pos,
        msg: String,
        state: String,
    },
    #[error("{pos}: probabilities sum to {sum} in state {state}")]
    ProbabilitySum {
        pos: Pos,
        sum: String,
        state: String,
    },
    #[error("{pos}: probability {value} is outside [0,1] in state {state}")]
    ProbabilityRange {
        pos: Pos,
        value: String,
        state: String,
    },
    #[error("reward \"{name}\" is negative or not finite in state {state}")]
    BadReward { name: String, state: String },
    #[error(transparent)]
    Chain(#[from] DtmcError),
}

/// Maps valuations to dense state indices.
enum StateIndex {
    /// Every valuation packs into 128 bits.
    Packed {
        map: HashMap<u128, u32>,
        shifts: Vec<u32>,
        los: Vec<i64>,
    },
    Wide(HashMap<Vec<i32>, u32>),
}

impl StateIndex {
    fn new(model: &SymbolicModel) -> Self {
        let mut shifts = Vec::new();
        let mut total = 0u32;
        for v in &model.variables {
            shifts.push(total);
            let span = (v.hi - v.lo) as u64;
            total += 64 - span.leading_zeros();
        }
        if total <= 128 {
            StateIndex::Packed {
                map: HashMap::new(),
                shifts,
                los: model.variables.iter().map(|v| v.lo).collect(),
            }
        } else {
            StateIndex::Wide(HashMap::new())
        }
    }

    /// Returns the index of `vals`, inserting `next` if it is new.
    fn get_or_insert(&mut self, vals: &[i32], next: u32) -> (u32, bool) {
        match self {
            StateIndex::Packed { map, shifts, los } => {
                let mut key = 0u128;
                for ((&v, &sh), &lo) in vals.iter().zip(shifts.iter()).zip(los.iter()) {
                    key |= ((v as i64 - lo) as u128) << sh;
                }
                let mut fresh = false;
                let id = *map.entry(key).or_insert_with(|| {
                    fresh = true;
                    next
                });
                (id, fresh)
            }
            StateIndex::Wide(map) => {
                if let Some(&id) = map.get(vals) {
                    (id, false)
                } else {
                    map.insert(vals.to_vec(), next);
                    (next, true)
                }
            }
        }
    }
}

/// Probability of an update with its `(variable, value)` assignments.
type Branch = (Rational, Vec<(u32, i64)>);

/// One enabled command, or one synchronized set of commands.
struct Alternative {
    action: Option<u32>,
    branches: Vec<Branch>,
}

fn describe(model: &SymbolicModel, vals: &[i32]) -> String {
    let mut out = String::from("(");
    for (i, (v, x)) in model.variables.iter().zip(vals).enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&v.name);
        out.push('=');
        if v.is_bool {
            out.push_str(if *x != 0 { "true" } else { "false" });
        } else {
            out.push_str(&x.to_string());
        }
    }
    out.push(')');
    out
}

struct Explorer<'m> {
    model: &'m SymbolicModel,
    cache: Vec<Option<Value>>,
}

impl<'m> Explorer<'m> {
    fn eval_err(&self, vals: &[i32], pos: Pos, e: EvalError) -> BuildError {
        BuildError::Eval {
            pos,
            msg: e.to_string(),
            state: describe(self.model, vals),
        }
    }

    fn eval(&mut self, e: &CExpr, vals: &[i32], pos: Pos) -> Result<Value, BuildError> {
        let mut env = Env {
            vals,
            formulas: &self.model.formulas,
            cache: &mut self.cache,
        };
        eval(e, &mut env).map_err(|err| self.eval_err(vals, pos, err))
    }

    fn enabled(&mut self, cmd: &Command, vals: &[i32]) -> Result<bool, BuildError> {
        Ok(self.eval(&cmd.guard, vals, cmd.pos)?.as_bool())
    }

    /// Probability and evaluated assignments of each update of `cmd`.
    fn branches(&mut self, cmd: &Command, vals: &[i32]) -> Result<Vec<Branch>, BuildError> {
        let mut out = Vec::with_capacity(cmd.updates.len());
        let mut sum = Rational::ZERO;
        let mut dynamic = false;
        for u in &cmd.updates {
            let q = match &u.prob {
                Prob::Const(q) => *q,
                Prob::Dynamic(e) => {
                    dynamic = true;
                    let mut env = Env {
                        vals,
                        formulas: &self.model.formulas,
                        cache: &mut self.cache,
                    };
                    let q =
                        eval_exact(e, &mut env).map_err(|err| self.eval_err(vals, cmd.pos, err))?;
                    if q < Rational::ZERO || q > Rational::ONE {
                        return Err(BuildError::ProbabilityRange {
                            pos: cmd.pos,
                            value: q.to_string(),
                            state: describe(self.model, vals),
                        });
                    }
                    q
                }
            };
            sum = sum + q;
            let mut assigns = Vec::with_capacity(u.assigns.len());
            for (slot, e) in &u.assigns {
                let v = match self.eval(e, vals, cmd.pos)? {
                    Value::Int(i) => i,
                    Value::Bool(b) => b as i64,
                    Value::Real(_) => unreachable!("assignments are typed int or bool"),
                };
                assigns.push((*slot, v));
            }
            out.push((q, assigns));
        }
        if dynamic && sum != Rational::ONE {
            return Err(BuildError::ProbabilitySum {
                pos: cmd.pos,
                sum: sum.to_string(),
                state: describe(self.model, vals),
            });
        }
        Ok(out)
    }

    fn alternatives(&mut self, vals: &[i32]) -> Result<Vec<Alternative>, BuildError> {
        let model = self.model;
        let mut alts = Vec::new();
        for m in &model.modules {
            for &ci in &m.unlabeled {
                let cmd = &m.commands[ci];
                if self.enabled(cmd, vals)? {
                    alts.push(Alternative {
                        action: None,
                        branches: self.branches(cmd, vals)?,
                    });
                }
            }
        }
        for (a, members) in model.sync.iter().enumerate() {
            // Per participating module: the branch lists of its enabled commands.
            let mut per_module: Vec<Vec<Vec<Branch>>> = Vec::new();
            for &mi in members {
                let m = &model.modules[mi];
                let mut enabled = Vec::new();
                for &ci in &m.by_action[a] {
                    let cmd = &m.commands[ci];
                    if self.enabled(cmd, vals)? {
                        enabled.push(self.branches(cmd, vals)?);
                    }
                }
                if enabled.is_empty() {
                    per_module.clear();
                    break;
                }
                per_module.push(enabled);
            }
            if per_module.is_empty() {
                continue;
            }
            // Every choice of one enabled command per module is an alternative.
            let mut choices: Vec<Vec<Branch>> = vec![vec![(Rational::ONE, Vec::new())]];
            for enabled in &per_module {
                let mut next = Vec::new();
                for partial in &choices {
                    for cmd_branches in enabled {
                        let mut combined = Vec::with_capacity(partial.len() * cmd_branches.len());
                        for (p, pa) in partial {
                            for (q, qa) in cmd_branches {
                                let mut assigns = pa.clone();
                                assigns.extend_from_slice(qa);
                                combined.push((*p * *q, assigns));
                            }
                        }
                        next.push(combined);
                    }
                }
                choices = next;
            }
            for branches in choices {
                alts.push(Alternative {
                    action: Some(a as u32),
                    branches,
                });
            }
        }
        Ok(alts)
    }
}

/// Explores the reachable state space breadth-first from the initial
/// valuation. States are numbered in discovery order.
pub fn compose_and_build(model: &SymbolicModel, opts: &BuildOptions) -> Result<Dtmc, BuildError> {
    let width = model.variables.len();
    let mut explorer = Explorer {
        model,
        cache: vec![None; model.formulas.len()],
    };
    let mut index = StateIndex::new(model);
    let mut arena: Vec<i32> = model.variables.iter().map(|v| v.init as i32).collect();
    index.get_or_insert(&arena[..width], 0);
    let mut n_states = 1usize;

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut edge_actions: Vec<Vec<u32>> = Vec::new();
    let mut trans_rewards: Vec<Vec<Vec<f64>>> = vec![Vec::new(); model.rewards.len()];
    let has_trans: Vec<bool> = model
        .rewards
        .iter()
        .map(|r| {
            r.items
                .iter()
                .any(|it| matches!(it.slot, RewardSlot::Transition(_)))
        })
        .collect();
    let mut state_rewards: Vec<Vec<f64>> = vec![Vec::new(); model.rewards.len()];
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); model.labels.len()];
    let mut vals = vec![0i32; width];
    let mut succ = vec![0i32; width];

    let mut s = 0usize;
    while s < n_states {
        vals.copy_from_slice(&arena[s * width..(s + 1) * width]);
        explorer.cache.iter_mut().for_each(|c| *c = None);

        for (li, (_, e)) in model.labels.iter().enumerate() {
            if explorer.eval(e, &vals, Pos::default())?.as_bool() {
                labels[li].push(s);
            }
        }
        for (ri, r) in model.rewards.iter().enumerate() {
            let mut total = 0.0;
            for it in r.items.iter().filter(|it| it.slot == RewardSlot::State) {
                if explorer.eval(&it.guard, &vals, Pos::default())?.as_bool() {
                    total += explorer.eval(&it.value, &vals, Pos::default())?.as_f64();
                }
            }
            if !(total.is_finite() && total >= 0.0) {
                return Err(BuildError::BadReward {
                    name: r.name.clone(),
                    state: describe(model, &vals),
                });
            }
            state_rewards[ri].push(total);
        }

        let alts = explorer.alternatives(&vals)?;
        let mut row = Vec::new();
        let mut row_actions = Vec::new();
        let mut row_rewards: Vec<Vec<f64>> = vec![Vec::new(); model.rewards.len()];
        if alts.is_empty() {
            if !opts.fix_deadlocks {
                return Err(BuildError::Deadlock {
                    state: describe(model, &vals),
                });
            }
            row.push((s, 1.0));
            row_actions.push(0);
            for rr in &mut row_rewards {
                rr.push(0.0);
            }
        }
        let k = Rational::from_int(alts.len() as i64);
        for alt in &alts {
            let mut alt_reward = vec![0.0; model.rewards.len()];
            for (ri, r) in model.rewards.iter().enumerate() {
                for it in &r.items {
                    if it.slot == RewardSlot::Transition(alt.action)
                        && explorer.eval(&it.guard, &vals, Pos::default())?.as_bool()
                    {
                        alt_reward[ri] += explorer.eval(&it.value, &vals, Pos::default())?.as_f64();
                    }
                }
                if !(alt_reward[ri].is_finite() && alt_reward[ri] >= 0.0) {
                    return Err(BuildError::BadReward {
                        name: r.name.clone(),
                        state: describe(model, &vals),
                    });
                }
            }
            for (q, assigns) in &alt.branches {
                if *q == Rational::ZERO {
                    continue;
                }
                succ.copy_from_slice(&vals);
                for &(slot, v) in assigns {
                    let decl = &model.variables[slot as usize];
                    if v < decl.lo || v > decl.hi {
                        return Err(BuildError::OutOfRange {
                            var: decl.name.clone(),
                            value: v,
                            state: describe(model, &vals),
                        });
                    }
                    succ[slot as usize] = v as i32;
                }
                let (t, fresh) = index.get_or_insert(&succ, n_states as u32);
                if fresh {
                    if n_states >= opts.state_cap {
                        return Err(BuildError::StateCap {
                            cap: opts.state_cap,
                        });
                    }
                    arena.extend_from_slice(&succ);
                    n_states += 1;
                }
                row.push((t as usize, (*q / k).to_f64()));
                row_actions.push(alt.action.map_or(0, |a| a + 1));
                for (ri, rr) in row_rewards.iter_mut().enumerate() {
                    rr.push(alt_reward[ri]);
                }
            }
        }
        rows.push(row);
        edge_actions.push(row_actions);
        for (ri, rr) in row_rewards.into_iter().enumerate() {
            if has_trans[ri] {
                trans_rewards[ri].push(rr);
            }
        }
        s += 1;
    }

    let mut action_names = vec![String::new()];
    action_names.extend(model.actions.iter().cloned());
    let parts = DtmcParts {
        n_states,
        initial: 0,
        rows,
        labels: model
            .labels
            .iter()
            .map(|(n, _)| n.clone())
            .zip(labels)
            .collect(),
        rewards: model
            .rewards
            .iter()
            .zip(state_rewards)
            .zip(trans_rewards)
            .enumerate()
            .map(|(ri, ((r, state), trans))| PartsReward {
                name: r.name.clone(),
                state,
                transition: has_trans[ri].then_some(trans),
            })
            .collect(),
        valuations: Some(Valuations::new(
            model.variables.iter().map(|v| v.name.clone()).collect(),
            arena,
        )),
        action_names,
        actions: Some(edge_actions),
    };
    Ok(Dtmc::from_parts(parts)?)
}
