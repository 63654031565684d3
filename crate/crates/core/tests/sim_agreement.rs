use std::collections::BTreeMap;

use windcheck_core::dtmc::{DtmcParts, PartsReward};
use windcheck_core::mission::{build_mission_model, scenario_preset};
use windcheck_core::sim::*;
use windcheck_core::Dtmc;

/// 0 loops with probability 0.5 and otherwise moves to 1 (0.3) or 2 (0.2).
fn retry_chain() -> Dtmc {
    let mut parts = DtmcParts::from_rows(vec![
        vec![(0, 0.5), (1, 0.3), (2, 0.2)],
        vec![(1, 1.0)],
        vec![(2, 1.0)],
    ]);
    parts.labels = BTreeMap::from([
        ("success".into(), vec![1]),
        ("fail".into(), vec![2]),
        ("done".into(), vec![1, 2]),
    ]);
    parts.rewards.push(PartsReward {
        name: "steps".into(),
        state: vec![1.0, 0.0, 0.0],
        transition: None,
    });
    Dtmc::from_parts(parts).unwrap()
}

#[test]
fn estimates_agree_with_closed_forms() {
    let d = retry_chain();
    let p = estimate_reach_probability(&d, "success", 100_000, 7, DEFAULT_STEP_CAP).unwrap();
    assert!((p.mean - 0.6).abs() <= 4.0 * p.std_error(), "{p:?}");
    let r = estimate_expected_reward(&d, "steps", "done", 100_000, 7, DEFAULT_STEP_CAP).unwrap();
    assert!((r.mean - 2.0).abs() <= 4.0 * r.std_error(), "{r:?}");
    assert!(!r.truncated && !r.degenerate);
}

#[test]
fn traces_follow_positive_edges() {
    let m = build_mission_model(&scenario_preset(4).unwrap()).unwrap();
    let d = &m.dtmc;
    for i in 0..50 {
        let t = simulate_trace(d, 3, i, DEFAULT_STEP_CAP);
        assert_eq!(t.steps[0].state, d.initial());
        assert_ne!(t.terminal, Terminal::Cap);
        for w in t.steps.windows(2) {
            assert!(d.row(w[0].state).any(|(s, p)| s == w[1].state && p > 0.0));
            assert!(w[0]
                .accumulated
                .iter()
                .zip(&w[1].accumulated)
                .all(|(a, b)| b >= a));
            assert_eq!(w[1].step, w[0].step + 1);
        }
        assert_eq!(t, simulate_trace(d, 3, i, DEFAULT_STEP_CAP));
    }
}

#[test]
fn streams_differ_between_traces() {
    let d = retry_chain();
    let lens: std::collections::BTreeSet<usize> = (0..20)
        .map(|i| simulate_trace(&d, 1, i, 100).steps.len())
        .collect();
    assert!(lens.len() > 1);
}
