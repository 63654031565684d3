//! Random chains and brute-force oracles shared by the test targets.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windcheck_core::dtmc::{DtmcParts, PartsReward};
use windcheck_core::{Dtmc, StateSet};

pub const MAX_STATES: usize = 8;

/// A small chain with two labels ("a" for the path constraint, "b" for the
/// target) and one reward structure "r" with state and transition parts.
pub struct RandomChain {
    pub dtmc: Dtmc,
    pub lhs: StateSet,
    pub rhs: StateSet,
}

/// Deterministic random chain for `seed`: 1 to 8 states, 1 to 3 distinct
/// successors per row, integer weights normalized per row.
pub fn random_chain(seed: u64) -> RandomChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=MAX_STATES);
    let mut rows = Vec::with_capacity(n);
    let mut trans = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(1..=n.min(3));
        let mut targets: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            targets.swap(i, j);
        }
        targets.truncate(k);
        let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=9)).collect();
        let total: u32 = weights.iter().sum();
        rows.push(
            targets
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| (t, w as f64 / total as f64))
                .collect::<Vec<_>>(),
        );
        trans.push(
            (0..k)
                .map(|_| rng.gen_range(0..=3) as f64)
                .collect::<Vec<_>>(),
        );
    }
    let lhs: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.75)).collect();
    let rhs: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    let state: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=5) as f64).collect();
    let mut parts = DtmcParts::from_rows(rows);
    parts.labels = BTreeMap::from([
        ("a".to_string(), lhs.clone()),
        ("b".to_string(), rhs.clone()),
    ]);
    parts.rewards.push(PartsReward {
        name: "r".into(),
        state,
        transition: Some(trans),
    });
    let dtmc = Dtmc::from_parts(parts).expect("generated chain is valid");
    RandomChain {
        lhs: StateSet::from_indices(n, lhs),
        rhs: StateSet::from_indices(n, rhs),
        dtmc,
    }
}

/// Sum over all paths of length at most `t` that stay in `lhs` until they
/// hit `rhs`.
pub fn bounded_until_by_paths(d: &Dtmc, lhs: &StateSet, rhs: &StateSet, s: usize, t: u64) -> f64 {
    if rhs.contains(s) {
        return 1.0;
    }
    if t == 0 || !lhs.contains(s) {
        return 0.0;
    }
    d.row(s)
        .map(|(u, p)| p * bounded_until_by_paths(d, lhs, rhs, u, t - 1))
        .sum()
}

/// States that can reach `rhs` through `lhs`, by forward search from each
/// state.
fn can_reach(d: &Dtmc, lhs: &StateSet, rhs: &StateSet) -> Vec<bool> {
    let n = d.n_states();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                if rhs.contains(v) {
                    return true;
                }
                if !lhs.contains(v) {
                    continue;
                }
                for (u, _) in d.row(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            false
        })
        .collect()
}

/// Solves `x = A x + b` over `unknowns` with dense LU.
fn dense_solve(d: &Dtmc, unknowns: &[usize], b: impl Fn(usize) -> f64) -> Vec<f64> {
    let m = unknowns.len();
    if m == 0 {
        return Vec::new();
    }
    let pos: BTreeMap<usize, usize> = unknowns.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, &s) in unknowns.iter().enumerate() {
        rhs[i] = b(s);
        for (u, p) in d.row(s) {
            if let Some(&j) = pos.get(&u) {
                a[(i, j)] -= p;
            }
        }
    }
    let x = a.lu().solve(&rhs).expect("system is nonsingular");
    x.iter().copied().collect()
}

/// Unbounded until by graph analysis and dense elimination.
pub fn until_by_elimination(d: &Dtmc, lhs: &StateSet, rhs: &StateSet) -> Vec<f64> {
    let n = d.n_states();
    let reach = can_reach(d, lhs, rhs);
    let unknowns: Vec<usize> = (0..n).filter(|&s| reach[s] && !rhs.contains(s)).collect();
    let x = dense_solve(d, &unknowns, |s| {
        d.row(s)
            .filter(|&(u, _)| rhs.contains(u))
            .map(|(_, p)| p)
            .sum()
    });
    let mut out: Vec<f64> = (0..n)
        .map(|s| if rhs.contains(s) { 1.0 } else { 0.0 })
        .collect();
    for (&s, v) in unknowns.iter().zip(x) {
        out[s] = v;
    }
    out
}

/// States reaching `target` almost surely: those that cannot reach, while
/// avoiding `target`, a state from which `target` is unreachable.
pub fn almost_sure(d: &Dtmc, target: &StateSet) -> Vec<bool> {
    let n = d.n_states();
    let all = StateSet::full(n);
    let reach = can_reach(d, &all, target);
    let dead = StateSet::from_fn(n, |s| !reach[s]);
    let avoid = target.complement();
    let doomed = can_reach(d, &avoid, &dead);
    (0..n).map(|s| !doomed[s]).collect()
}

/// Expected reward "r" until `target` by dense elimination; infinite off the
/// almost-sure set.
pub fn reward_by_elimination(d: &Dtmc, target: &StateSet) -> Vec<f64> {
    let n = d.n_states();
    let r = d.reward("r").expect("reward r");
    let sure = almost_sure(d, target);
    let unknowns: Vec<usize> = (0..n).filter(|&s| sure[s] && !target.contains(s)).collect();
    let x = dense_solve(d, &unknowns, |s| {
        let trans = r.transition.as_ref().expect("transition rewards");
        r.state[s]
            + d.row_range(s)
                .map(|e| d.edge_prob(e) * trans[e])
                .sum::<f64>()
    });
    let mut out: Vec<f64> = (0..n)
        .map(|s| {
            if target.contains(s) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    for (&s, v) in unknowns.iter().zip(x) {
        out[s] = v;
    }
    out
}
