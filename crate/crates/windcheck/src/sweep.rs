//! Parameter sweeps over mission configs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use windcheck_core::battery::BatteryVariant;
use windcheck_core::mission::{
    build_mission_model, MissionConfig, RECHARGE_QUERY, SUCCESS_QUERY, TIME_QUERY,
};
use windcheck_core::pctl::{check, parse_formula, FormulaError};

/// First line of every CSV the tool writes.
pub const CSV_VERSION_LINE: &str = concat!("# windcheck v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    CNew,
    SafeT,
    PWspC,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::CNew => "c_new",
            SweepParam::SafeT => "safe_t",
            SweepParam::PWspC => "p_wsp_c",
        }
    }

    pub fn apply(self, c: &mut MissionConfig, value: f64) {
        match self {
            SweepParam::CNew => c.battery.c_new = value,
            SweepParam::SafeT => c.safe_t = value,
            SweepParam::PWspC => c.p_wsp_c = value,
        }
    }
}

/// A named property column.
#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub formula: String,
}

impl Property {
    /// Success probability, expected minutes and expected recharges.
    pub fn mission_defaults() -> Vec<Property> {
        [
            ("success", SUCCESS_QUERY),
            ("mt", TIME_QUERY),
            ("rc", RECHARGE_QUERY),
        ]
        .into_iter()
        .map(|(n, f)| Property {
            name: n.into(),
            formula: f.into(),
        })
        .collect()
    }

    /// `name=formula`, or a bare formula used as its own name.
    pub fn parse(text: &str) -> Property {
        match text.split_once('=') {
            Some((name, formula)) if is_name(name) && !formula.starts_with('?') => Property {
                name: name.into(),
                formula: formula.into(),
            },
            _ => Property {
                name: text.into(),
                formula: text.into(),
            },
        }
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub variants: Vec<BatteryVariant>,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("sweep range needs lo < hi and step > 0")]
    Range,
    #[error("sweep needs at least one variant and one property")]
    Empty,
    #[error("property `{name}`: {source}")]
    Formula { name: String, source: FormulaError },
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if !(self.lo < self.hi && self.step > 0.0 && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(SweepError::Range);
        }
        if self.variants.is_empty() || self.properties.is_empty() {
            return Err(SweepError::Empty);
        }
        for p in &self.properties {
            parse_formula(&p.formula).map_err(|source| SweepError::Formula {
                name: p.name.clone(),
                source,
            })?;
        }
        Ok(())
    }

    /// Grid values `lo, lo+step, ...` up to `hi`, rounded to 9 decimals so
    /// that 8 + 3*0.2 prints as 8.6.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub variant: BatteryVariant,
    pub states: usize,
    pub transitions: usize,
    /// One value per property, or the error that stopped this point.
    pub outcome: Result<Vec<f64>, String>,
}

impl SweepRow {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.outcome.as_ref().ok().map(|v| v[i])
    }
}

/// Evaluates every (value, variant) point; rows come back in grid order.
pub fn run_sweep(base: &MissionConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    let formulas: Vec<_> = spec
        .properties
        .iter()
        .map(|p| parse_formula(&p.formula).expect("validated"))
        .collect();
    let points: Vec<(f64, BatteryVariant)> = spec
        .values()
        .into_iter()
        .flat_map(|v| spec.variants.iter().map(move |&var| (v, var)))
        .collect();
    Ok(points
        .into_par_iter()
        .map(|(value, variant)| {
            let mut c = base.clone();
            c.variant = variant;
            spec.parameter.apply(&mut c, value);
            let mut row = SweepRow {
                value,
                variant,
                states: 0,
                transitions: 0,
                outcome: Err(String::new()),
            };
            let model = match build_mission_model(&c) {
                Ok(m) => m,
                Err(e) => {
                    row.outcome = Err(e.to_string());
                    return row;
                }
            };
            row.states = model.dtmc.n_states();
            row.transitions = model.dtmc.n_transitions();
            row.outcome = formulas
                .iter()
                .map(|f| {
                    check(&model.dtmc, f)
                        .map(|r| r.value)
                        .map_err(|e| e.to_string())
                })
                .collect();
            row
        })
        .collect())
}

/// Formats a value for CSV and text output; infinity prints as `inf`.
pub fn fmt_value(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".into()
    } else {
        format!("{x}")
    }
}

/// Columns: parameter value, variant, states, transitions, one column per
/// property, error.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    spec: &SweepSpec,
    rows: &[SweepRow],
) -> csv::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        spec.parameter.name().to_string(),
        "variant".into(),
        "states".into(),
        "transitions".into(),
    ];
    header.extend(spec.properties.iter().map(|p| p.name.clone()));
    header.push("error".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            fmt_value(r.value),
            r.variant.name().into(),
            r.states.to_string(),
            r.transitions.to_string(),
        ];
        match &r.outcome {
            Ok(vals) => {
                rec.extend(vals.iter().map(|&v| fmt_value(v)));
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(spec.properties.iter().map(|_| String::new()));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest swept value from which `success` stays at 1 for every larger
/// value; `None` if the last point is below 1.
pub fn min_all_success(rows: &[(f64, f64)]) -> Option<f64> {
    let mut best = None;
    for &(v, p) in rows.iter().rev() {
        if p == 1.0 {
            best = Some(v);
        } else {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_are_clean() {
        let s = SweepSpec {
            parameter: SweepParam::CNew,
            lo: 8.0,
            hi: 16.0,
            step: 0.2,
            variants: vec![BatteryVariant::Advanced],
            properties: Property::mission_defaults(),
        };
        let v = s.values();
        assert_eq!((v.len(), v[3], v[40]), (41, 8.6, 16.0));
    }

    #[test]
    fn property_names() {
        assert_eq!(Property::parse("p=P=? [ F \"a\" ]").name, "p");
        assert_eq!(Property::parse("P=? [ F \"a\" ]").name, "P=? [ F \"a\" ]");
    }

    #[test]
    fn all_success_threshold() {
        let rows = [(8.0, 0.0), (8.2, 1.0), (8.4, 0.9), (8.6, 1.0), (8.8, 1.0)];
        assert_eq!(min_all_success(&rows), Some(8.6));
        assert_eq!(min_all_success(&[(8.0, 1.0), (8.2, 0.5)]), None);
    }
}
