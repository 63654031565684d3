//! Explicit discrete-time Markov chains in compressed sparse row form.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Tolerance on the row sums of a stochastic matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A fixed-size bitset over state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    words: Vec<u64>,
    len: usize,
}

impl StateSet {
    pub fn empty(len: usize) -> Self {
        StateSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = StateSet {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        s.trim();
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = StateSet::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = StateSet::empty(len);
        for i in 0..len {
            if f(i) {
                s.insert(i);
            }
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Number of states in the universe (not the number of members).
    pub fn universe(&self) -> usize {
        self.len
    }

    /// Panics if `i` is outside the universe.
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "state {i} outside set of {} states", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> StateSet {
        let mut s = StateSet {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        s.trim();
        s
    }

    fn zip_with(&self, other: &StateSet, f: impl Fn(u64, u64) -> u64) -> StateSet {
        assert_eq!(self.len, other.len, "state sets over different universes");
        StateSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            len: self.len,
        }
    }
}

/// Named per-state and per-edge rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    /// One entry per state.
    pub state: Vec<f64>,
    /// One entry per stored transition, aligned with the CSR arrays.
    /// `None` when the structure has no transition rewards.
    pub transition: Option<Vec<f64>>,
}

/// Per-state variable assignments, kept for traces and state formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuations {
    pub names: Vec<String>,
    values: Vec<i32>,
}

impl Valuations {
    /// `values` is row-major: one row of `names.len()` entries per state.
    pub fn new(names: Vec<String>, values: Vec<i32>) -> Self {
        assert!(names.is_empty() || values.len().is_multiple_of(names.len()));
        Valuations { names, values }
    }

    pub fn state(&self, s: usize) -> &[i32] {
        let w = self.names.len();
        &self.values[s * w..(s + 1) * w]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn n_states(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.values.len() / self.names.len()
        }
    }
}

/// Unchecked chain data, as produced by a builder or a parser.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DtmcParts {
    pub n_states: usize,
    pub initial: usize,
    /// Per-state outgoing edges `(target, probability)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: BTreeMap<String, Vec<usize>>,
    /// Reward name → (state rewards, per-edge rewards keyed like `rows`).
    pub rewards: Vec<PartsReward>,
    pub valuations: Option<Valuations>,
    /// Names referenced by `actions`.
    pub action_names: Vec<String>,
    /// Optional action id per edge, keyed like `rows`.
    pub actions: Option<Vec<Vec<u32>>>,
}

impl DtmcParts {
    /// Rows only, starting in state 0.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        DtmcParts {
            n_states: rows.len(),
            rows,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartsReward {
    pub name: String,
    pub state: Vec<f64>,
    pub transition: Option<Vec<Vec<f64>>>,
}

/// Structural problems found by [`validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// States whose outgoing probabilities do not sum to one, with the sum.
    pub row_sum_violations: Vec<(usize, f64)>,
    /// Edges with a probability outside (0, 1] or a target out of range.
    pub bad_edges: Vec<(usize, usize)>,
    pub unreachable: Vec<usize>,
    /// Labels that mention states outside the chain.
    pub dangling_labels: Vec<String>,
    /// Reward structures with negative, non-finite or misaligned entries.
    pub bad_rewards: Vec<String>,
    pub initial_out_of_range: bool,
}

impl ValidationReport {
    /// True when nothing prevents building a [`Dtmc`]. Unreachable states
    /// are reported but are not an error.
    pub fn is_valid(&self) -> bool {
        self.row_sum_violations.is_empty()
            && self.bad_edges.is_empty()
            && self.dangling_labels.is_empty()
            && self.bad_rewards.is_empty()
            && !self.initial_out_of_range
    }
}

/// Checks chain data for row sums, edge ranges, label indices, rewards and
/// reachability from the initial state.
pub fn validate(parts: &DtmcParts) -> ValidationReport {
    let n = parts.n_states;
    let mut report = ValidationReport {
        initial_out_of_range: parts.initial >= n,
        ..Default::default()
    };
    if parts.rows.len() != n {
        report
            .row_sum_violations
            .extend((parts.rows.len()..n).map(|s| (s, 0.0)));
    }
    for (s, row) in parts.rows.iter().enumerate() {
        let mut sum = 0.0;
        for &(t, p) in row {
            if t >= n || !(p > 0.0 && p <= 1.0) {
                report.bad_edges.push((s, t));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            report.row_sum_violations.push((s, sum));
        }
    }
    if let Some(actions) = &parts.actions {
        let n_names = parts.action_names.len() as u32;
        for (s, (ids, row)) in actions.iter().zip(&parts.rows).enumerate() {
            if ids.len() != row.len() || ids.iter().any(|&a| a >= n_names) {
                report.bad_edges.push((s, usize::MAX));
            }
        }
    }
    for (name, states) in &parts.labels {
        if states.iter().any(|&s| s >= n) {
            report.dangling_labels.push(name.clone());
        }
    }
    for r in &parts.rewards {
        let ok_value = |v: &f64| v.is_finite() && *v >= 0.0;
        let mut ok = r.state.len() == n && r.state.iter().all(ok_value);
        if let Some(tr) = &r.transition {
            ok &= tr.len() == parts.rows.len()
                && tr
                    .iter()
                    .zip(&parts.rows)
                    .all(|(rw, row)| rw.len() == row.len() && rw.iter().all(ok_value));
        }
        if !ok {
            report.bad_rewards.push(r.name.clone());
        }
    }
    if !report.initial_out_of_range && report.bad_edges.is_empty() && parts.rows.len() == n {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([parts.initial]);
        seen[parts.initial] = true;
        while let Some(s) = queue.pop_front() {
            for &(t, _) in &parts.rows[s] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        report.unreachable = (0..n).filter(|&s| !seen[s]).collect();
    }
    report
}

/// Why chain data could not be turned into a [`Dtmc`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DtmcError {
    #[error("initial state {initial} out of range for {n_states} states")]
    InitialOutOfRange { initial: usize, n_states: usize },
    #[error("row {state} sums to {sum}")]
    RowSum { state: usize, sum: f64 },
    #[error("bad transition from {src} to {dst}")]
    BadEdge { src: usize, dst: usize },
    #[error("label \"{0}\" refers to a state outside the chain")]
    DanglingLabel(String),
    #[error("reward structure \"{0}\" has negative, non-finite or misaligned values")]
    BadReward(String),
}

/// A finite DTMC with labels, reward structures and optional valuations.
///
/// Rows are stored in compressed sparse row form with targets sorted in
/// ascending order and duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    initial: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
    labels: BTreeMap<String, StateSet>,
    rewards: Vec<RewardStructure>,
    valuations: Option<Valuations>,
    action_names: Vec<String>,
    actions: Option<Vec<u32>>,
}

impl Dtmc {
    /// Validates `parts` and compresses them. Duplicate edges within a row
    /// are merged; their transition rewards are averaged by probability.
    pub fn from_parts(parts: DtmcParts) -> Result<Dtmc, DtmcError> {
        let report = validate(&parts);
        if report.initial_out_of_range {
            return Err(DtmcError::InitialOutOfRange {
                initial: parts.initial,
                n_states: parts.n_states,
            });
        }
        if let Some(&(src, dst)) = report.bad_edges.first() {
            return Err(DtmcError::BadEdge { src, dst });
        }
        if let Some(&(state, sum)) = report.row_sum_violations.first() {
            return Err(DtmcError::RowSum { state, sum });
        }
        if let Some(name) = report.dangling_labels.into_iter().next() {
            return Err(DtmcError::DanglingLabel(name));
        }
        if let Some(name) = report.bad_rewards.into_iter().next() {
            return Err(DtmcError::BadReward(name));
        }
        Ok(Self::compress(parts))
    }

    fn compress(parts: DtmcParts) -> Dtmc {
        let n = parts.n_states;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        let mut trans: Vec<Option<Vec<f64>>> = parts
            .rewards
            .iter()
            .map(|r| r.transition.as_ref().map(|_| Vec::new()))
            .collect();
        let mut actions = parts.actions.as_ref().map(|_| Vec::new());
        row_ptr.push(0);
        for (s, row) in parts.rows.iter().enumerate() {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by_key(|&i| row[i].0);
            let mut i = 0;
            while i < order.len() {
                let target = row[order[i]].0;
                let mut j = i;
                let mut p = 0.0;
                while j < order.len() && row[order[j]].0 == target {
                    p += row[order[j]].1;
                    j += 1;
                }
                cols.push(target as u32);
                probs.push(p);
                for (k, r) in parts.rewards.iter().enumerate() {
                    if let (Some(src), Some(dst)) = (&r.transition, &mut trans[k]) {
                        let weighted: f64 = order[i..j].iter().map(|&e| row[e].1 * src[s][e]).sum();
                        dst.push(weighted / p);
                    }
                }
                if let (Some(src), Some(dst)) = (&parts.actions, &mut actions) {
                    dst.push(src[s][order[i]]);
                }
                i = j;
            }
            row_ptr.push(cols.len());
        }
        let labels = parts
            .labels
            .into_iter()
            .map(|(name, states)| (name, StateSet::from_indices(n, states)))
            .collect();
        let rewards = parts
            .rewards
            .into_iter()
            .zip(trans)
            .map(|(r, t)| RewardStructure {
                name: r.name,
                state: r.state,
                transition: t,
            })
            .collect();
        Dtmc {
            initial: parts.initial,
            row_ptr,
            cols,
            probs,
            labels,
            rewards,
            valuations: parts.valuations,
            action_names: parts.action_names,
            actions,
        }
    }

    /// Expands the chain back into unchecked parts.
    pub fn to_parts(&self) -> DtmcParts {
        let n = self.n_states();
        let rows = (0..n).map(|s| self.row(s).collect()).collect();
        let split = |v: &[f64]| -> Vec<Vec<f64>> {
            (0..n)
                .map(|s| v[self.row_ptr[s]..self.row_ptr[s + 1]].to_vec())
                .collect()
        };
        DtmcParts {
            n_states: n,
            initial: self.initial,
            rows,
            labels: self
                .labels
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().collect()))
                .collect(),
            rewards: self
                .rewards
                .iter()
                .map(|r| PartsReward {
                    name: r.name.clone(),
                    state: r.state.clone(),
                    transition: r.transition.as_deref().map(split),
                })
                .collect(),
            valuations: self.valuations.clone(),
            action_names: self.action_names.clone(),
            actions: self.actions.as_ref().map(|ids| {
                (0..n)
                    .map(|s| ids[self.row_ptr[s]..self.row_ptr[s + 1]].to_vec())
                    .collect()
            }),
        }
    }

    pub fn n_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_transitions(&self) -> usize {
        self.cols.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Outgoing edges of `s` as `(target, probability)`, targets ascending.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[s]..self.row_ptr[s + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&c, &p)| (c as usize, p))
    }

    /// Range of edge indices belonging to `s`.
    pub fn row_range(&self, s: usize) -> core::ops::Range<usize> {
        self.row_ptr[s]..self.row_ptr[s + 1]
    }

    pub fn edge_target(&self, e: usize) -> usize {
        self.cols[e] as usize
    }

    pub fn edge_prob(&self, e: usize) -> f64 {
        self.probs[e]
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    /// Action name attached to edge `e`, if the chain records actions.
    pub fn edge_action(&self, e: usize) -> Option<&str> {
        self.actions
            .as_ref()
            .map(|a| self.action_names[a[e] as usize].as_str())
    }

    pub fn labels(&self) -> &BTreeMap<String, StateSet> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&StateSet> {
        self.labels.get(name)
    }

    pub fn rewards(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }

    pub fn valuations(&self) -> Option<&Valuations> {
        self.valuations.as_ref()
    }

    /// True when the only edge of `s` is a self-loop.
    pub fn is_absorbing(&self, s: usize) -> bool {
        let r = self.row_range(s);
        r.len() == 1 && self.cols[r.start] as usize == s
    }

    /// States reachable from `start` over positive-probability edges,
    /// including `start`.
    pub fn reachable_from(&self, start: usize) -> StateSet {
        let n = self.n_states();
        let mut seen = StateSet::empty(n);
        seen.insert(start);
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            for (t, p) in self.row(s) {
                if p > 0.0 && !seen.contains(t) {
                    seen.insert(t);
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Predecessor lists in CSR form: `(ptr, sources)`.
    pub fn predecessors(&self) -> (Vec<usize>, Vec<u32>) {
        let n = self.n_states();
        let mut counts = vec![0usize; n + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut preds = vec![0u32; self.cols.len()];
        for s in 0..n {
            for e in self.row_range(s) {
                let t = self.cols[e] as usize;
                preds[fill[t]] = s as u32;
                fill[t] += 1;
            }
        }
        (counts, preds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn chain(rows: Vec<Vec<(usize, f64)>>) -> DtmcParts {
        DtmcParts {
            n_states: rows.len(),
            initial: 0,
            rows,
            ..Default::default()
        }
    }

    #[test]
    fn stochastic_chain_validates_clean() {
        let p = chain(vec![vec![(1, 1.0)], vec![(1, 1.0)]]);
        assert_eq!(validate(&p), ValidationReport::default());
        assert!(Dtmc::from_parts(p).is_ok());
    }

    #[test]
    fn short_row_is_reported() {
        let p = chain(vec![vec![(0, 0.4), (1, 0.5)], vec![(1, 1.0)]]);
        let r = validate(&p);
        assert_eq!(r.row_sum_violations.len(), 1);
        assert_eq!(r.row_sum_violations[0].0, 0);
        assert!((r.row_sum_violations[0].1 - 0.9).abs() < 1e-15);
        assert!(matches!(
            Dtmc::from_parts(p),
            Err(DtmcError::RowSum { state: 0, .. })
        ));
    }

    #[test]
    fn unreachable_and_dangling_labels() {
        let mut p = chain(vec![vec![(0, 1.0)], vec![(0, 1.0)]]);
        p.labels.insert("x".to_string(), vec![5]);
        let r = validate(&p);
        assert_eq!(r.unreachable, vec![1]);
        assert_eq!(r.dangling_labels, vec!["x".to_string()]);
    }

    #[test]
    fn reachability_in_absorbing_chain() {
        let d = Dtmc::from_parts(chain(vec![vec![(1, 1.0)], vec![(1, 1.0)]])).unwrap();
        assert_eq!(d.reachable_from(0).iter().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(d.reachable_from(1).iter().collect::<Vec<_>>(), vec![1]);
        assert!(d.is_absorbing(1));
        assert!(!d.is_absorbing(0));
    }

    #[test]
    fn duplicate_edges_merge_with_weighted_rewards() {
        let mut p = chain(vec![vec![(1, 0.25), (1, 0.75)], vec![(1, 1.0)]]);
        p.rewards.push(PartsReward {
            name: "r".to_string(),
            state: vec![0.0, 0.0],
            transition: Some(vec![vec![4.0, 0.0], vec![0.0]]),
        });
        let d = Dtmc::from_parts(p).unwrap();
        assert_eq!(d.n_transitions(), 2);
        assert_eq!(d.row(0).collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert_eq!(d.reward("r").unwrap().transition.as_ref().unwrap()[0], 1.0);
    }

    #[test]
    fn negative_rewards_are_rejected() {
        let mut p = chain(vec![vec![(0, 1.0)]]);
        p.rewards.push(PartsReward {
            name: "r".to_string(),
            state: vec![-1.0],
            transition: None,
        });
        assert_eq!(
            Dtmc::from_parts(p),
            Err(DtmcError::BadReward("r".to_string()))
        );
    }

    #[test]
    fn state_set_algebra() {
        let a = StateSet::from_indices(70, [0, 3, 65]);
        let b = StateSet::from_indices(70, [3, 69]);
        assert_eq!(a.union(&b).count(), 4);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), vec![3]);
        assert_eq!(a.difference(&b).iter().collect::<Vec<_>>(), vec![0, 65]);
        assert_eq!(a.complement().count(), 67);
        assert_eq!(StateSet::full(70).count(), 70);
        assert!(!a.contains(200));
    }
}
