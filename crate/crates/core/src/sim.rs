//! Monte Carlo path sampling over a built chain.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Trace `i` of a batch uses stream `i` of that
//! generator, so a batch gives the same result however it is sharded.
//! Successors are drawn by inverse CDF over the row in target order, with
//! `u = (next_u64 >> 11) * 2^-53`.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dtmc::{Dtmc, RewardStructure, StateSet};

/// Default bound on steps per trace.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

/// How a trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// Absorbed in a state labeled "success".
    Success,
    /// Absorbed in a state labeled "fail".
    Fail,
    /// Absorbed in some other state.
    Absorbed,
    /// Stopped by the step cap.
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: u64,
    pub state: usize,
    /// Action of the edge that entered this state; empty for the first step.
    pub action: String,
    /// Reward accumulated so far, one entry per reward structure.
    pub accumulated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub index: u64,
    pub reward_names: Vec<String>,
    pub steps: Vec<TraceStep>,
    pub terminal: Terminal,
}

/// Generator for trace `index` of a batch seeded with `seed`.
pub fn trace_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws an edge of row `s`; returns the edge index.
fn pick_edge(d: &Dtmc, s: usize, rng: &mut ChaCha8Rng) -> usize {
    let range = d.row_range(s);
    let last = range.end - 1;
    let u = unit(rng);
    let mut acc = 0.0;
    for e in range {
        acc += d.edge_prob(e);
        if u < acc {
            return e;
        }
    }
    last
}

fn edge_reward(r: &RewardStructure, s: usize, e: usize) -> f64 {
    r.state[s] + r.transition.as_ref().map_or(0.0, |t| t[e])
}

fn terminal_of(d: &Dtmc, s: usize) -> Terminal {
    let has = |name| d.label(name).is_some_and(|set| set.contains(s));
    if has("success") {
        Terminal::Success
    } else if has("fail") {
        Terminal::Fail
    } else {
        Terminal::Absorbed
    }
}

/// Samples one trace from the initial state until absorption or `step_cap`
/// transitions.
pub fn simulate_trace(d: &Dtmc, seed: u64, index: u64, step_cap: u64) -> Trace {
    let mut rng = trace_rng(seed, index);
    let rewards = d.rewards();
    let mut acc = alloc::vec![0.0; rewards.len()];
    let mut s = d.initial();
    let mut steps = alloc::vec![TraceStep {
        step: 0,
        state: s,
        action: String::new(),
        accumulated: acc.clone(),
    }];
    let mut n = 0;
    let terminal = loop {
        if d.is_absorbing(s) {
            break terminal_of(d, s);
        }
        if n == step_cap {
            break Terminal::Cap;
        }
        let e = pick_edge(d, s, &mut rng);
        for (a, r) in acc.iter_mut().zip(rewards) {
            *a += edge_reward(r, s, e);
        }
        s = d.edge_target(e);
        n += 1;
        steps.push(TraceStep {
            step: n,
            state: s,
            action: String::from(d.edge_action(e).unwrap_or("")),
            accumulated: acc.clone(),
        });
    };
    Trace {
        seed,
        index,
        reward_names: rewards.iter().map(|r| r.name.clone()).collect(),
        steps,
        terminal,
    }
}

/// One sampled path, reduced to what the estimators need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Whether the target was reached.
    pub hit: bool,
    /// Reward accumulated until the target was reached (or the walk ended).
    pub reward: f64,
    /// Whether the step cap cut the walk short.
    pub truncated: bool,
}

/// Walks trace `index` until it enters `target`, gets absorbed or hits
/// `step_cap`, accumulating `reward` if given.
pub fn sample_path(
    d: &Dtmc,
    seed: u64,
    index: u64,
    step_cap: u64,
    target: &StateSet,
    reward: Option<&RewardStructure>,
) -> Sample {
    let mut rng = trace_rng(seed, index);
    let mut s = d.initial();
    let mut total = 0.0;
    let mut n = 0;
    loop {
        if target.contains(s) {
            return Sample {
                hit: true,
                reward: total,
                truncated: false,
            };
        }
        if d.is_absorbing(s) {
            return Sample {
                hit: false,
                reward: total,
                truncated: false,
            };
        }
        if n == step_cap {
            return Sample {
                hit: false,
                reward: total,
                truncated: true,
            };
        }
        let e = pick_edge(d, s, &mut rng);
        if let Some(r) = reward {
            total += edge_reward(r, s, e);
        }
        s = d.edge_target(e);
        n += 1;
    }
}

/// A sample mean with its 95% normal-approximation half width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Some trace hit the step cap.
    pub truncated: bool,
    /// Fewer than two samples: the interval carries no information.
    pub degenerate: bool,
}

impl Estimate {
    /// Binomial estimate from `hits` out of `n`.
    pub fn proportion(hits: u64, n: u64, seed: u64, truncated: bool) -> Estimate {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let hw = if n == 0 {
            0.0
        } else {
            Z95 * libm::sqrt(p * (1.0 - p) / n as f64)
        };
        Estimate {
            mean: p,
            half_width: hw,
            n_samples: n,
            seed,
            truncated,
            degenerate: n < 2,
        }
    }

    /// Sample-mean estimate; values are summed in the given order.
    pub fn mean_of(values: &[f64], seed: u64, truncated: bool) -> Estimate {
        let n = values.len();
        let mean = if n == 0 {
            0.0
        } else {
            values.iter().sum::<f64>() / n as f64
        };
        let hw = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            Z95 * libm::sqrt(var / n as f64)
        };
        Estimate {
            mean,
            half_width: hw,
            n_samples: n as u64,
            seed,
            truncated,
            degenerate: n < 2,
        }
    }

    /// Standard error implied by the half width.
    pub fn std_error(&self) -> f64 {
        self.half_width / Z95
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error("at least one sample is required")]
    NoSamples,
}

/// Fraction of `n` traces that reach `target_label`.
pub fn estimate_reach_probability(
    d: &Dtmc,
    target_label: &str,
    n: u64,
    seed: u64,
    step_cap: u64,
) -> Result<Estimate, SimError> {
    if n == 0 {
        return Err(SimError::NoSamples);
    }
    let target = d
        .label(target_label)
        .ok_or_else(|| SimError::UnknownLabel(target_label.into()))?;
    let (mut hits, mut truncated) = (0, false);
    for i in 0..n {
        let s = sample_path(d, seed, i, step_cap, target, None);
        hits += s.hit as u64;
        truncated |= s.truncated;
    }
    Ok(Estimate::proportion(hits, n, seed, truncated))
}

/// Mean reward accumulated until `target_label` is reached.
pub fn estimate_expected_reward(
    d: &Dtmc,
    reward_name: &str,
    target_label: &str,
    n: u64,
    seed: u64,
    step_cap: u64,
) -> Result<Estimate, SimError> {
    if n == 0 {
        return Err(SimError::NoSamples);
    }
    let target = d
        .label(target_label)
        .ok_or_else(|| SimError::UnknownLabel(target_label.into()))?;
    let reward = d
        .reward(reward_name)
        .ok_or_else(|| SimError::UnknownReward(reward_name.into()))?;
    let mut truncated = false;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let s = sample_path(d, seed, i, step_cap, target, Some(reward));
            truncated |= s.truncated || !s.hit;
            s.reward
        })
        .collect();
    Ok(Estimate::mean_of(&values, seed, truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::{DtmcParts, PartsReward};
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn chain(
        rows: Vec<Vec<(usize, f64)>>,
        labels: &[(&str, Vec<usize>)],
        state_reward: Vec<f64>,
    ) -> Dtmc {
        let mut parts = DtmcParts::from_rows(rows);
        parts.labels = labels
            .iter()
            .map(|(k, v)| (String::from(*k), v.clone()))
            .collect::<BTreeMap<_, _>>();
        parts.rewards.push(PartsReward {
            name: "r".into(),
            state: state_reward,
            transition: None,
        });
        Dtmc::from_parts(parts).unwrap()
    }

    #[test]
    fn deterministic_chain_has_one_trace() {
        let d = chain(
            vec![
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(3, 1.0)],
                vec![(3, 1.0)],
            ],
            &[("success", vec![3])],
            vec![1.0, 1.0, 1.0, 0.0],
        );
        let a = simulate_trace(&d, 1, 0, DEFAULT_STEP_CAP);
        let b = simulate_trace(&d, 99, 5, DEFAULT_STEP_CAP);
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.terminal, Terminal::Success);
        assert_eq!(a.steps.last().unwrap().accumulated, vec![3.0]);
        let e = estimate_expected_reward(&d, "r", "success", 100, 3, DEFAULT_STEP_CAP).unwrap();
        assert_eq!((e.mean, e.half_width), (3.0, 0.0));
        let p = estimate_reach_probability(&d, "success", 100, 3, DEFAULT_STEP_CAP).unwrap();
        assert_eq!((p.mean, p.half_width), (1.0, 0.0));
    }

    #[test]
    fn cap_is_an_outcome() {
        let d = chain(vec![vec![(1, 1.0)], vec![(0, 1.0)]], &[], vec![0.0, 0.0]);
        let t = simulate_trace(&d, 1, 0, 10);
        assert_eq!((t.terminal, t.steps.len()), (Terminal::Cap, 11));
        let p = estimate_reach_probability(&d, "missing", 1, 1, 10);
        assert_eq!(p, Err(SimError::UnknownLabel("missing".into())));
    }

    #[test]
    fn single_sample_is_degenerate() {
        let e = Estimate::proportion(1, 1, 0, false);
        assert!(e.degenerate);
        assert_eq!(e.half_width, 0.0);
    }
}
