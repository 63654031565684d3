//! Recursive evaluation of PCTL formulas.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::solver::{self, LinearSystem, SolveStats, DIRECT_SOLVE_LIMIT};
use super::{Formula, PathFormula, StateFormula};
use crate::dtmc::{Dtmc, RewardStructure, StateSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Convergence threshold on the largest relative change per sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Width of the band around a probability bound counted as a tie.
    pub bound_epsilon: f64,
    /// Unknown sets up to this size are solved by dense elimination.
    pub direct_limit: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tolerance: 1e-10,
            max_iterations: 100_000,
            bound_epsilon: 1e-9,
            direct_limit: DIRECT_SOLVE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error("model has no reward structures")]
    NoRewards,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Per-state values of a path formula or reward query.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Largest distance of an unclamped probability outside [0,1].
    pub excursion: f64,
}

/// The outcome of checking a top-level formula.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Value at the initial state: a probability, an expected reward
    /// (possibly infinite), or 1/0 for a boolean formula.
    pub value: f64,
    pub per_state: Vec<f64>,
    /// Satisfaction set, for boolean formulas.
    pub satisfied: Option<StateSet>,
    pub iterations: usize,
    pub residual: f64,
}

/// Checks `f` with default options.
pub fn check(d: &Dtmc, f: &Formula) -> Result<CheckResult, CheckError> {
    check_with(d, f, &CheckOptions::default())
}

pub fn check_with(d: &Dtmc, f: &Formula, opts: &CheckOptions) -> Result<CheckResult, CheckError> {
    let mut c = Checker {
        d,
        opts,
        iterations: 0,
        residual: 0.0,
    };
    let (per_state, satisfied) = match f {
        Formula::State(sf) => {
            let sat = c.sat(sf)?;
            let v = (0..d.n_states())
                .map(|s| sat.contains(s) as u8 as f64)
                .collect();
            (v, Some(sat))
        }
        Formula::ProbQuery(path) => (c.path(path)?, None),
        Formula::RewardQuery { reward, target } => {
            let r = match reward {
                Some(name) => d
                    .reward(name)
                    .ok_or_else(|| CheckError::UnknownReward(name.clone()))?,
                None => d.rewards().first().ok_or(CheckError::NoRewards)?,
            };
            let t = c.sat(target)?;
            let sol = expected_reachability_reward(d, r, &t, opts)?;
            c.absorb(&sol);
            (sol.values, None)
        }
    };
    Ok(CheckResult {
        value: per_state[d.initial()],
        per_state,
        satisfied,
        iterations: c.iterations,
        residual: c.residual,
    })
}

struct Checker<'a> {
    d: &'a Dtmc,
    opts: &'a CheckOptions,
    iterations: usize,
    residual: f64,
}

impl Checker<'_> {
    fn absorb(&mut self, sol: &Solution) {
        self.iterations += sol.iterations;
        self.residual = self.residual.max(sol.residual);
    }

    fn sat(&mut self, f: &StateFormula) -> Result<StateSet, CheckError> {
        let n = self.d.n_states();
        Ok(match f {
            StateFormula::True => StateSet::full(n),
            StateFormula::False => StateSet::empty(n),
            StateFormula::Label(name) => self
                .d
                .label(name)
                .cloned()
                .ok_or_else(|| CheckError::UnknownLabel(name.clone()))?,
            StateFormula::Atom { var, op, value } => {
                let vals = self
                    .d
                    .valuations()
                    .ok_or_else(|| CheckError::UnknownVariable(var.clone()))?;
                let slot = vals
                    .index_of(var)
                    .ok_or_else(|| CheckError::UnknownVariable(var.clone()))?;
                StateSet::from_fn(n, |s| op.holds(vals.state(s)[slot] as i64, *value))
            }
            StateFormula::Not(a) => self.sat(a)?.complement(),
            StateFormula::And(a, b) => self.sat(a)?.intersection(&self.sat(b)?),
            StateFormula::Or(a, b) => self.sat(a)?.union(&self.sat(b)?),
            StateFormula::Prob { bound, p, path } => {
                let values = self.path(path)?;
                let eps = self.opts.bound_epsilon;
                StateSet::from_fn(n, |s| bound.holds(values[s], *p, eps))
            }
        })
    }

    fn path(&mut self, f: &PathFormula) -> Result<Vec<f64>, CheckError> {
        Ok(match f {
            PathFormula::Next(a) => prob_next(self.d, &self.sat(a)?),
            PathFormula::BoundedUntil(a, b, t) => {
                prob_bounded_until(self.d, &self.sat(a)?, &self.sat(b)?, *t)
            }
            PathFormula::Until(a, b) => {
                let sol = prob_until(self.d, &self.sat(a)?, &self.sat(b)?, self.opts)?;
                self.absorb(&sol);
                sol.values
            }
        })
    }
}

/// One-step probability of entering `target`.
pub fn prob_next(d: &Dtmc, target: &StateSet) -> Vec<f64> {
    (0..d.n_states())
        .map(|s| {
            d.row(s)
                .filter(|&(t, _)| target.contains(t))
                .map(|(_, p)| p)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

/// Probability of reaching `rhs` within `t` steps while staying in `lhs`.
pub fn prob_bounded_until(d: &Dtmc, lhs: &StateSet, rhs: &StateSet, t: u64) -> Vec<f64> {
    let n = d.n_states();
    let mut x: Vec<f64> = (0..n).map(|s| rhs.contains(s) as u8 as f64).collect();
    let middle = lhs.difference(rhs);
    let mut next = x.clone();
    for _ in 0..t {
        for s in middle.iter() {
            next[s] = d.row(s).map(|(t, p)| p * x[t]).sum::<f64>();
        }
        core::mem::swap(&mut x, &mut next);
    }
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    x
}

/// Builds the system for `unknowns` where each row is
/// `x_s = b_s + sum over unknown successors of P(s,t) x_t`.
fn restrict(
    d: &Dtmc,
    unknowns: &[usize],
    mut constant: impl FnMut(usize, usize, usize) -> f64,
) -> LinearSystem {
    let n = d.n_states();
    let mut local = vec![usize::MAX; n];
    for (i, &s) in unknowns.iter().enumerate() {
        local[s] = i;
    }
    let mut sys = LinearSystem {
        ptr: Vec::with_capacity(unknowns.len() + 1),
        b: Vec::with_capacity(unknowns.len()),
        ..Default::default()
    };
    sys.ptr.push(0);
    for &s in unknowns {
        let mut b = 0.0;
        for e in d.row_range(s) {
            let t = d.edge_target(e);
            let p = d.edge_prob(e);
            b += constant(s, e, t);
            if local[t] != usize::MAX {
                sys.cols.push(local[t]);
                sys.vals.push(p);
            }
        }
        sys.b.push(b);
        sys.ptr.push(sys.cols.len());
    }
    sys
}

fn solve(sys: &LinearSystem, opts: &CheckOptions) -> Result<(Vec<f64>, SolveStats), CheckError> {
    if sys.is_empty() {
        return Ok((
            Vec::new(),
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    if sys.len() <= opts.direct_limit {
        return Ok(solver::solve_direct(sys));
    }
    solver::solve_gauss_seidel(sys, opts.tolerance, opts.max_iterations).map_err(|s| {
        CheckError::NotConverged {
            iterations: s.iterations,
            residual: s.residual,
        }
    })
}

/// Probability of reaching `rhs` while staying in `lhs`, with exact
/// zero/one sets from graph analysis and a linear solve for the rest.
pub fn prob_until(
    d: &Dtmc,
    lhs: &StateSet,
    rhs: &StateSet,
    opts: &CheckOptions,
) -> Result<Solution, CheckError> {
    let n = d.n_states();
    let no = solver::prob0(d, lhs, rhs);
    let yes = solver::prob1(d, lhs, rhs, &no);
    let unknowns: Vec<usize> = (0..n)
        .filter(|&s| !no.contains(s) && !yes.contains(s))
        .collect();
    let sys = restrict(d, &unknowns, |_, e, t| {
        if yes.contains(t) {
            d.edge_prob(e)
        } else {
            0.0
        }
    });
    let (x, stats) = solve(&sys, opts)?;
    let mut values: Vec<f64> = (0..n).map(|s| yes.contains(s) as u8 as f64).collect();
    let mut excursion: f64 = 0.0;
    for (&s, &v) in unknowns.iter().zip(&x) {
        excursion = excursion.max(-v).max(v - 1.0);
        values[s] = v.clamp(0.0, 1.0);
    }
    Ok(Solution {
        values,
        iterations: stats.iterations,
        residual: stats.residual,
        excursion: excursion.max(0.0),
    })
}

/// Expected reward accumulated before first reaching `target`. States
/// that reach `target` with probability below one get `f64::INFINITY`.
pub fn expected_reachability_reward(
    d: &Dtmc,
    r: &RewardStructure,
    target: &StateSet,
    opts: &CheckOptions,
) -> Result<Solution, CheckError> {
    let n = d.n_states();
    let all = StateSet::full(n);
    let no = solver::prob0(d, &all, target);
    let sure = solver::prob1(d, &all, target, &no);
    let unknowns: Vec<usize> = sure.difference(target).iter().collect();
    let sys = restrict(d, &unknowns, |s, e, _| {
        let trans = r.transition.as_ref().map_or(0.0, |t| t[e]);
        let first = d.row_range(s).start == e;
        d.edge_prob(e) * trans + if first { r.state[s] } else { 0.0 }
    });
    let (x, stats) = solve(&sys, opts)?;
    let mut values: Vec<f64> = (0..n)
        .map(|s| if sure.contains(s) { 0.0 } else { f64::INFINITY })
        .collect();
    for (&s, &v) in unknowns.iter().zip(&x) {
        values[s] = v.max(0.0);
    }
    Ok(Solution {
        values,
        iterations: stats.iterations,
        residual: stats.residual,
        excursion: 0.0,
    })
}
