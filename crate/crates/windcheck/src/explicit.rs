//! Explicit-state text format.
//!
//! ```text
//! # comments start with '#'
//! dtmc <n_states> <initial>
//! actions - <name> ...            optional; '-' is the unlabeled action
//! vars <name> ...                 optional
//! <src> <dst> <prob> [<action>]   one line per transition
//! val <state> <value> ...         one line per state when vars is given
//! label <name>: <state> ...
//! reward <name> state <state>:<value> ...
//! reward <name> trans <src>><dst>:<value> ...
//! ```
//!
//! Numbers are written in Rust's shortest round-trip form, so
//! serialize followed by deserialize is the identity.

use std::collections::BTreeMap;
use std::fmt::Write;

use windcheck_core::dtmc::{DtmcError, DtmcParts, PartsReward, Valuations};
use windcheck_core::Dtmc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplicitError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] DtmcError),
}

pub fn serialize(d: &Dtmc) -> String {
    let p = d.to_parts();
    let mut out = String::new();
    let _ = writeln!(out, "dtmc {} {}", p.n_states, p.initial);
    let action_token = |id: u32| match p.action_names[id as usize].as_str() {
        "" => "-".to_string(),
        name => name.to_string(),
    };
    if p.actions.is_some() {
        let names: Vec<String> = (0..p.action_names.len() as u32).map(action_token).collect();
        let _ = writeln!(out, "actions {}", names.join(" "));
    }
    if let Some(v) = &p.valuations {
        let _ = writeln!(out, "vars {}", v.names.join(" "));
    }
    for (s, row) in p.rows.iter().enumerate() {
        for (e, &(t, prob)) in row.iter().enumerate() {
            let _ = write!(out, "{s} {t} {prob:?}");
            if let Some(ids) = &p.actions {
                let _ = write!(out, " {}", action_token(ids[s][e]));
            }
            out.push('\n');
        }
    }
    if let Some(v) = &p.valuations {
        for s in 0..v.n_states() {
            let vals: Vec<String> = v.state(s).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "val {s} {}", vals.join(" "));
        }
    }
    for (name, states) in &p.labels {
        let idx: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "label {name}: {}", idx.join(" "));
    }
    for r in &p.rewards {
        let _ = write!(out, "reward {} state", r.name);
        for (s, v) in r.state.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = write!(out, " {s}:{v:?}");
        }
        out.push('\n');
        if let Some(tr) = &r.transition {
            let _ = write!(out, "reward {} trans", r.name);
            for (s, row) in tr.iter().enumerate() {
                for (e, v) in row.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    let _ = write!(out, " {s}>{}:{v:?}", p.rows[s][e].0);
                }
            }
            out.push('\n');
        }
    }
    out
}

struct Reader {
    line: usize,
}

impl Reader {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExplicitError> {
        Err(ExplicitError::Syntax {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn num<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T, ExplicitError> {
        tok.parse()
            .or_else(|_| self.err(format!("expected {what}, found `{tok}`")))
    }

    fn state(&self, tok: &str, n: usize) -> Result<usize, ExplicitError> {
        let s: usize = self.num(tok, "a state index")?;
        if s >= n {
            return self.err(format!("state {s} out of range (n_states = {n})"));
        }
        Ok(s)
    }
}

pub fn deserialize(text: &str) -> Result<Dtmc, ExplicitError> {
    let mut rd = Reader { line: 0 };
    let mut parts: Option<DtmcParts> = None;
    let mut action_ids: Option<BTreeMap<String, u32>> = None;
    let mut var_names: Option<Vec<String>> = None;
    let mut vals: BTreeMap<usize, Vec<i32>> = BTreeMap::new();
    let mut edge_actions: Vec<Vec<u32>> = Vec::new();
    let mut rewards: Vec<PartsReward> = Vec::new();
    // Transition rewards keyed by (src, dst) until rows are final.
    let mut trans: BTreeMap<String, BTreeMap<(usize, usize), f64>> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        rd.line = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some(p) = parts.as_mut() else {
            if toks.len() != 3 || toks[0] != "dtmc" {
                return rd.err("expected header `dtmc <n_states> <initial>`");
            }
            let n: usize = rd.num(toks[1], "a state count")?;
            let init: usize = rd.num(toks[2], "an initial state")?;
            let mut p = DtmcParts::from_rows(vec![Vec::new(); n]);
            p.initial = init;
            edge_actions = vec![Vec::new(); n];
            parts = Some(p);
            continue;
        };
        let n = p.n_states;
        match toks[0] {
            "dtmc" => return rd.err("duplicate header"),
            "actions" => {
                let names: Vec<String> = toks[1..]
                    .iter()
                    .map(|t| {
                        if *t == "-" {
                            String::new()
                        } else {
                            t.to_string()
                        }
                    })
                    .collect();
                action_ids = Some(
                    names
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (s.clone(), i as u32))
                        .collect(),
                );
                p.action_names = names;
            }
            "vars" => var_names = Some(toks[1..].iter().map(|s| s.to_string()).collect()),
            "val" => {
                let Some(names) = &var_names else {
                    return rd.err("`val` before `vars`");
                };
                if toks.len() != names.len() + 2 {
                    return rd.err(format!("expected {} values", names.len()));
                }
                let s = rd.state(toks[1], n)?;
                let v = toks[2..]
                    .iter()
                    .map(|t| rd.num(t, "an integer"))
                    .collect::<Result<_, _>>()?;
                vals.insert(s, v);
            }
            "label" => {
                let rest = line["label".len()..].trim();
                let Some((name, idx)) = rest.split_once(':') else {
                    return rd.err("expected `label <name>: <states>`");
                };
                let states = idx
                    .split_whitespace()
                    .map(|t| rd.state(t, n))
                    .collect::<Result<Vec<_>, _>>()?;
                p.labels.insert(name.trim().to_string(), states);
            }
            "reward" => {
                if toks.len() < 3 {
                    return rd.err("expected `reward <name> state|trans ...`");
                }
                let name = toks[1].to_string();
                let pos = match rewards.iter().position(|r| r.name == name) {
                    Some(i) => i,
                    None => {
                        rewards.push(PartsReward {
                            name: name.clone(),
                            state: vec![0.0; n],
                            transition: None,
                        });
                        rewards.len() - 1
                    }
                };
                match toks[2] {
                    "state" => {
                        for t in &toks[3..] {
                            let Some((s, v)) = t.split_once(':') else {
                                return rd.err(format!("expected `<state>:<value>`, found `{t}`"));
                            };
                            rewards[pos].state[rd.state(s, n)?] = rd.num(v, "a reward value")?;
                        }
                    }
                    "trans" => {
                        let entries = trans.entry(name).or_default();
                        for t in &toks[3..] {
                            let parsed = t
                                .split_once(':')
                                .and_then(|(edge, v)| edge.split_once('>').map(|(s, d)| (s, d, v)));
                            let Some((s, d, v)) = parsed else {
                                return rd
                                    .err(format!("expected `<src>><dst>:<value>`, found `{t}`"));
                            };
                            let key = (rd.state(s, n)?, rd.state(d, n)?);
                            entries.insert(key, rd.num(v, "a reward value")?);
                        }
                    }
                    other => {
                        return rd.err(format!("expected `state` or `trans`, found `{other}`"))
                    }
                }
            }
            _ => {
                if !(3..=4).contains(&toks.len()) {
                    return rd.err("expected `<src> <dst> <prob> [<action>]`");
                }
                let s = rd.state(toks[0], n)?;
                let t = rd.state(toks[1], n)?;
                let prob: f64 = rd.num(toks[2], "a probability")?;
                p.rows[s].push((t, prob));
                match (&action_ids, toks.get(3)) {
                    (Some(ids), Some(a)) => {
                        let key = if *a == "-" { "" } else { a };
                        let Some(&id) = ids.get(key) else {
                            return rd.err(format!("action `{a}` not declared in `actions`"));
                        };
                        edge_actions[s].push(id);
                    }
                    (None, Some(_)) => {
                        return rd.err("edge action given without an `actions` line")
                    }
                    (Some(_), None) => return rd.err("missing edge action"),
                    (None, None) => {}
                }
            }
        }
    }
    let Some(mut p) = parts else {
        rd.line += 1;
        return rd.err("missing header `dtmc <n_states> <initial>`");
    };
    if action_ids.is_some() {
        p.actions = Some(edge_actions);
    }
    if let Some(names) = var_names {
        if vals.len() != p.n_states {
            return rd.err("every state needs a `val` line");
        }
        let flat = vals.into_values().flatten().collect();
        p.valuations = Some(Valuations::new(names, flat));
    }
    for r in &mut rewards {
        if let Some(entries) = trans.remove(&r.name) {
            let tr = p
                .rows
                .iter()
                .enumerate()
                .map(|(s, row)| {
                    row.iter()
                        .map(|&(t, _)| entries.get(&(s, t)).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect();
            r.transition = Some(tr);
        }
    }
    p.rewards = rewards;
    Ok(Dtmc::from_parts(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "dtmc 2 0\n0 1 1.0\n1 1 1.0\nlabel goal: 1\nreward r state 0:2.5\n";

    #[test]
    fn two_state_round_trip() {
        let d = deserialize(TWO).unwrap();
        assert_eq!(deserialize(&serialize(&d)).unwrap(), d);
        assert_eq!(d.reward("r").unwrap().state, vec![2.5, 0.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        let e = deserialize("dtmc 2 0\n0 1 0.5\n1 1 1\n").unwrap_err();
        assert!(
            matches!(e, ExplicitError::Invalid(DtmcError::RowSum { .. })),
            "{e}"
        );
        let e = deserialize("dtmc 2 0\n0 7 1\n").unwrap_err();
        assert_eq!(e.to_string(), "line 2: state 7 out of range (n_states = 2)");
        let e = deserialize("# nothing\n").unwrap_err();
        assert!(e.to_string().contains("missing header"));
    }
}
