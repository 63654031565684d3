//! Acceptance report: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod support;

use std::time::{Duration, Instant};

use support::*;
use windcheck::cli;
use windcheck::simulate::{expected_reward, reach_probability};
use windcheck::sweep::{fmt_value, min_all_success, run_sweep, Property, SweepParam, SweepSpec};
use windcheck_core::battery::*;
use windcheck_core::mission::*;
use windcheck_core::pctl::{
    expected_reachability_reward, prob_bounded_until, prob_until, CheckOptions,
};
use windcheck_core::sim::DEFAULT_STEP_CAP;
use windcheck_core::{check, parse_formula, Dtmc};

const ORACLE_CHAINS: u64 = 600;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const BOUNDED_HORIZON: u64 = 5;
const FADE_TOL_ULPS: f64 = 2.0;
const COULOMB_TOL: f64 = 1e-12;
const MISSION_BUDGET: Duration = Duration::from_secs(120);
const SWEEP_LO: f64 = 8.0;
const SWEEP_HI: f64 = 16.0;
const SWEEP_STEP: f64 = 0.2;
const RAISED_SAFE_T: f64 = 0.35;
const MC_SAMPLES: u64 = 100_000;
const MC_SEED: u64 = 20_160_901;
const MC_SIGMAS: f64 = 4.0;
const MC_BUDGET: Duration = Duration::from_secs(120);

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn record(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn query(d: &Dtmc, q: &str) -> f64 {
    check(d, &parse_formula(q).unwrap()).unwrap().value
}

fn oracle_agreement(report: &mut Report) {
    let start = Instant::now();
    let (mut worst_until, mut worst_bounded) = (0.0f64, 0.0f64);
    for seed in 0..ORACLE_CHAINS {
        let c = random_chain(seed);
        let got = prob_until(&c.dtmc, &c.lhs, &c.rhs, &CheckOptions::default()).unwrap();
        let want = until_by_elimination(&c.dtmc, &c.lhs, &c.rhs);
        for (g, w) in got.values.iter().zip(&want) {
            worst_until = worst_until.max((g - w).abs());
        }
        for t in 0..=BOUNDED_HORIZON {
            let got = prob_bounded_until(&c.dtmc, &c.lhs, &c.rhs, t);
            for (s, g) in got.iter().enumerate() {
                worst_bounded = worst_bounded
                    .max((g - bounded_until_by_paths(&c.dtmc, &c.lhs, &c.rhs, s, t)).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    report.record(
        "checker-vs-oracle",
        worst_until <= ORACLE_TOL && worst_bounded <= ORACLE_TOL && elapsed <= ORACLE_BUDGET,
        format!(
            "{ORACLE_CHAINS} chains, max |until err| {worst_until:.1e}, max |bounded err| {worst_bounded:.1e} \
             (tol {ORACLE_TOL:.0e}), {:.2}s (limit {}s)",
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    );
}

fn reward_semantics(report: &mut Report) {
    let (mut worst, mut finite, mut infinite, mut mismatched) = (0.0f64, 0, 0, 0);
    for seed in 0..ORACLE_CHAINS {
        let c = random_chain(seed);
        let r = c.dtmc.reward("r").unwrap();
        let got =
            expected_reachability_reward(&c.dtmc, r, &c.rhs, &CheckOptions::default()).unwrap();
        for (g, w) in got
            .values
            .iter()
            .zip(reward_by_elimination(&c.dtmc, &c.rhs))
        {
            if w.is_finite() {
                finite += 1;
                if g.is_finite() {
                    worst = worst.max((g - w).abs() / w.max(1.0));
                } else {
                    mismatched += 1;
                }
            } else {
                infinite += 1;
                mismatched += (*g != f64::INFINITY) as usize;
            }
        }
    }
    let token = fmt_value(f64::INFINITY);
    report.record(
        "reward-semantics",
        worst <= ORACLE_TOL && mismatched == 0 && token == "inf",
        format!(
            "{finite} finite states max rel err {worst:.1e} (tol {ORACLE_TOL:.0e}), \
             {infinite} states below prob 1, {mismatched} mismatches, token `{token}`"
        ),
    );
}

fn battery_suite(report: &mut Report) {
    let p = BatteryParams::default();
    let d = Durations::default();
    let eq = |a, v, power| action_consumption(a, v, power, &p, &d, ConsumptionMode::Equation);
    let hi = eq(ActionKind::InspectTurbine, p.v_high, PowerLevel::Normal);
    let lo = eq(ActionKind::InspectTurbine, p.v_low, PowerLevel::Normal);
    let mut coulomb = 0.0f64;
    for a in ActionKind::ALL {
        for v in [p.v_low, p.v_med, p.v_high] {
            for power in [PowerLevel::Normal, PowerLevel::High] {
                let current = p.e_spec / p.endurance(power) / v;
                let (after, _) = coulomb_step(1.0, current, d.minutes(a) / 60.0, p.c_new);
                coulomb = coulomb.max(((1.0 - after) * p.c_new - eq(a, v, power)).abs());
            }
        }
    }
    let mut fade_ulps = 0.0f64;
    let mut state = BatteryState::new(&p);
    let mut chained = true;
    for n in 0..=200u32 {
        let closed = p.c_new * 0.998f64.powf(n as f64);
        fade_ulps = fade_ulps.max((p.capacity_after(n) - closed).abs() / (f64::EPSILON * closed));
        chained &= state.c_full == p.capacity_after(n);
        state = fade_on_recharge(state, &p, BatteryVariant::Advanced);
    }
    report.record(
        "battery-unit-suite",
        hi == 3.6 && lo == 4.5 && coulomb <= COULOMB_TOL && fade_ulps <= FADE_TOL_ULPS && chained,
        format!(
            "inspect at high/low voltage {hi}/{lo} Ah (want 3.6/4.5 exact), coulomb vs consumption \
             max err {coulomb:.1e} (tol {COULOMB_TOL:.0e}), fade vs c_new*0.998^n over n<=200 \
             max {fade_ulps:.1} ulp (tol {FADE_TOL_ULPS}), recharges follow closed form: {chained}"
        ),
    );
}

struct Row {
    p: f64,
    mt: f64,
    rc: f64,
    states: usize,
    secs: f64,
}

fn table_rows() -> Vec<Row> {
    (1..=4)
        .map(|id| {
            let start = Instant::now();
            let m = build_mission_model(&scenario_preset(id).unwrap()).unwrap();
            let d = &m.dtmc;
            let row = Row {
                p: query(d, SUCCESS_QUERY),
                mt: query(d, TIME_QUERY),
                rc: query(d, RECHARGE_QUERY),
                states: d.n_states(),
                secs: 0.0,
            };
            Row {
                secs: start.elapsed().as_secs_f64(),
                ..row
            }
        })
        .collect()
}

fn table_two(report: &mut Report, rows: &[Row]) {
    let [r1, r2, r3, r4] = rows else {
        unreachable!()
    };
    let a = r1.p == 1.0 && r3.p == 1.0;
    let b = r2.p < 1.0 && r4.p < 1.0 && r4.p <= r2.p;
    let c = r3.mt > r1.mt && r3.rc > r1.rc;
    let dd = r2.mt < r1.mt && r2.rc < r1.rc;
    let fast = rows.iter().all(|r| r.secs <= MISSION_BUDGET.as_secs_f64());
    let summary: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "#{} P={} mt={:.1} rc={:.2} N={} {:.2}s",
                i + 1,
                r.p,
                r.mt,
                r.rc,
                r.states,
                r.secs
            )
        })
        .collect();
    report.record(
        "table-2-qualitative",
        a && b && c && dd && fast,
        format!(
            "(a) {a} (b) {b} (c) {c} (d) {dd} within {}s: {fast}; {}",
            MISSION_BUDGET.as_secs(),
            summary.join("; ")
        ),
    );
}

fn success_curves(base: &MissionConfig, variants: &[BatteryVariant]) -> Vec<Vec<(f64, f64)>> {
    let spec = SweepSpec {
        parameter: SweepParam::CNew,
        lo: SWEEP_LO,
        hi: SWEEP_HI,
        step: SWEEP_STEP,
        variants: variants.to_vec(),
        properties: vec![Property::parse(&format!("success={SUCCESS_QUERY}"))],
    };
    let rows = run_sweep(base, &spec).unwrap();
    variants
        .iter()
        .map(|v| {
            rows.iter()
                .filter(|r| r.variant == *v)
                .map(|r| (r.value, r.get(0).unwrap()))
                .collect()
        })
        .collect()
}

/// Capacities at or after the first success where success falls below one.
fn dips(curve: &[(f64, f64)]) -> Vec<f64> {
    match curve.iter().position(|&(_, p)| p == 1.0) {
        Some(first) => curve[first..]
            .iter()
            .filter(|&&(_, p)| p < 1.0)
            .map(|&(c, _)| c)
            .collect(),
        None => Vec::new(),
    }
}

fn capacity_sweep(report: &mut Report) {
    let base = scenario_preset(1).unwrap();
    let order = [
        BatteryVariant::BasicHigh,
        BatteryVariant::BasicMedium,
        BatteryVariant::BasicLow,
        BatteryVariant::Advanced,
    ];
    let curves = success_curves(&base, &order);
    let [bh, bm, _, adv] = &curves[..] else {
        unreachable!()
    };
    let mins: Vec<Option<f64>> = curves.iter().map(|c| min_all_success(c)).collect();
    let ordered = match (mins[0], mins[1], mins[2]) {
        (Some(h), Some(m), Some(l)) => h < m && m < l,
        _ => false,
    };
    let dip_at = dips(adv);
    let outside: Vec<f64> = adv
        .iter()
        .enumerate()
        .filter(|&(i, &(c, p))| !dip_at.contains(&c) && !(bm[i].1 <= p && p <= bh[i].1))
        .map(|(_, &(c, _))| c)
        .collect();
    let raised = MissionConfig {
        safe_t: RAISED_SAFE_T,
        ..base.clone()
    };
    let raised_adv = &success_curves(&raised, &[BatteryVariant::Advanced])[0];
    let raised_dips = dips(raised_adv);
    let raised_ok = raised_adv.iter().any(|&(_, p)| p == 1.0);
    let fmt = |m: Option<f64>| m.map_or("none".to_string(), |x| format!("{x:.1}"));
    report.record(
        "capacity-sweep",
        ordered && !dip_at.is_empty() && outside.is_empty() && raised_dips.is_empty() && raised_ok,
        format!(
            "min all-success c_new BH {} < BM {} < BL {}: {ordered}; advanced min {}; \
             advanced dips at {:?} Ah; outside envelope elsewhere {:?}; \
             safe_t {} -> {RAISED_SAFE_T} dips {:?}",
            fmt(mins[0]),
            fmt(mins[1]),
            fmt(mins[2]),
            fmt(mins[3]),
            dip_at,
            outside,
            base.safe_t,
            raised_dips
        ),
    );
}

fn monte_carlo(report: &mut Report, rows: &[Row]) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (i, exact) in rows.iter().enumerate() {
        let d = build_mission_model(&scenario_preset(i as u32 + 1).unwrap())
            .unwrap()
            .dtmc;
        let estimates = [
            (
                reach_probability(&d, "success", MC_SAMPLES, MC_SEED, DEFAULT_STEP_CAP).unwrap(),
                exact.p,
            ),
            (
                expected_reward(&d, "mt", "done", MC_SAMPLES, MC_SEED, DEFAULT_STEP_CAP).unwrap(),
                exact.mt,
            ),
            (
                expected_reward(&d, "rc", "done", MC_SAMPLES, MC_SEED, DEFAULT_STEP_CAP).unwrap(),
                exact.rc,
            ),
        ];
        let z: Vec<f64> = estimates
            .iter()
            .map(|(e, x)| {
                let gap = (e.mean - x).abs();
                match e.std_error() {
                    se if se > 0.0 => gap / se,
                    _ if gap <= 1e-9 * x.abs().max(1.0) => 0.0,
                    _ => f64::INFINITY,
                }
            })
            .collect();
        worst = z.iter().fold(worst, |a, &b| a.max(b));
        detail.push(format!("#{} z={:.2}/{:.2}/{:.2}", i + 1, z[0], z[1], z[2]));
    }
    let elapsed = start.elapsed();
    report.record(
        "monte-carlo",
        worst <= MC_SIGMAS && elapsed <= MC_BUDGET,
        format!(
            "n={MC_SAMPLES} seed {MC_SEED}, |est-exact|/se for success/mt/rc: {}; max {worst:.2} \
             (limit {MC_SIGMAS}), {:.1}s (limit {}s)",
            detail.join(" "),
            elapsed.as_secs_f64(),
            MC_BUDGET.as_secs()
        ),
    );
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("windcheck").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, out)
}

fn determinism(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let verify = ["--scenario", "4", "verify"];
    let sweep = [
        "--scenario",
        "2",
        "sweep",
        "--param",
        "c_new",
        "--lo",
        "10",
        "--hi",
        "12",
        "--step",
        "0.5",
    ];
    let v = (run_cli(&verify), run_cli(&verify));
    let s = (run_cli(&sweep), run_cli(&sweep));
    let traces: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .enumerate()
        .map(|(i, threads)| {
            let path = dir.path().join(format!("t{i}.csv"));
            let args = [
                "--scenario",
                "4",
                "--seed",
                "5",
                "--threads",
                threads,
                "simulate",
                "-n",
                "5000",
                "--trace-out",
            ];
            let mut args = args.to_vec();
            args.push(path.to_str().unwrap());
            assert_eq!(run_cli(&args).0, 0);
            std::fs::read(&path).unwrap()
        })
        .collect();
    let verify_same = v.0 .0 == 0 && v.0 == v.1;
    let sweep_same = s.0 .0 == 0 && s.0 == s.1;
    let trace_same = !traces[0].is_empty() && traces[0] == traces[1];
    report.record(
        "determinism",
        verify_same && sweep_same && trace_same,
        format!(
            "verify identical: {verify_same} ({} bytes), sweep identical: {sweep_same} ({} bytes), \
             trace identical across thread counts: {trace_same} ({} bytes)",
            v.0 .1.len(),
            s.0 .1.len(),
            traces[0].len()
        ),
    );
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    oracle_agreement(&mut report);
    reward_semantics(&mut report);
    battery_suite(&mut report);
    let rows = table_rows();
    table_two(&mut report, &rows);
    capacity_sweep(&mut report);
    monte_carlo(&mut report, &rows);
    determinism(&mut report);
    if report.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failed {:?}", report.failed);
        std::process::exit(1);
    }
}
