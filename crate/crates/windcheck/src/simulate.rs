//! Parallel Monte Carlo estimates and trace export.
//!
//! Trace `i` always uses stream `i` of the seeded generator and per-trace
//! results are reduced in index order, so estimates do not depend on the
//! number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use windcheck_core::sim::{sample_path, Estimate, SimError, Trace};
use windcheck_core::Dtmc;

/// Fraction of traces reaching `target_label`.
pub fn reach_probability(
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
    let samples: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| sample_path(d, seed, i, step_cap, target, None))
        .collect();
    let hits = samples.iter().filter(|s| s.hit).count() as u64;
    let truncated = samples.iter().any(|s| s.truncated);
    Ok(Estimate::proportion(hits, n, seed, truncated))
}

/// Mean of `reward_name` accumulated until `target_label`.
pub fn expected_reward(
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
    let samples: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| sample_path(d, seed, i, step_cap, target, Some(reward)))
        .collect();
    let truncated = samples.iter().any(|s| s.truncated || !s.hit);
    let values: Vec<f64> = samples.iter().map(|s| s.reward).collect();
    Ok(Estimate::mean_of(&values, seed, truncated))
}

/// Indices of up to `k` traces among the first `n`, preferring those that
/// reach `prefer_label`.
pub fn pick_traces(
    d: &Dtmc,
    prefer_label: &str,
    n: u64,
    k: usize,
    seed: u64,
    step_cap: u64,
) -> Vec<u64> {
    let mut picked: Vec<u64> = match d.label(prefer_label) {
        Some(target) => (0..n)
            .into_par_iter()
            .filter(|&i| sample_path(d, seed, i, step_cap, target, None).hit)
            .collect(),
        None => Vec::new(),
    };
    picked.truncate(k);
    let mut i = 0;
    while picked.len() < k && i < n {
        if !picked.contains(&i) {
            picked.push(i);
        }
        i += 1;
    }
    picked.sort_unstable();
    picked
}

/// Writes a trace as CSV: step, action, one column per variable, then one
/// `<reward>_accum` column per reward structure.
pub fn write_trace_csv<W: Write>(d: &Dtmc, trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let vars: Vec<String> = d.valuations().map(|v| v.names.clone()).unwrap_or_default();
    let mut header = vec!["step".to_string(), "action".to_string()];
    header.extend(vars.iter().cloned());
    if vars.is_empty() {
        header.push("state".into());
    }
    header.extend(trace.reward_names.iter().map(|r| format!("{r}_accum")));
    w.write_record(&header)?;
    for s in &trace.steps {
        let mut rec = vec![s.step.to_string(), s.action.clone()];
        match d.valuations() {
            Some(v) => rec.extend(v.state(s.state).iter().map(|x| x.to_string())),
            None => rec.push(s.state.to_string()),
        }
        rec.extend(s.accumulated.iter().map(|x| format!("{x}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
