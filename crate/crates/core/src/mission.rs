//! Wind-farm inspection mission: a drone follows a snake route over the
//! grid cells, inspects the appointed turbines of each cell and returns to
//! the base to recharge whenever its battery policy says so.
//!
//! The mission is emitted as a guarded-command model with four modules:
//!
//! - `drone`: the flight state machine and the battery policy guards,
//! - `grid`: the current cell on the route and the turbines left in it,
//! - `battery`: the quantized state of charge and the recharge count,
//! - `environment`: the wind, which flips with `p_wsp_c` on every action.
//!
//! Drone states: 0 charged at base, 1 airborne at base, 2 at the target
//! cell, 3 after an inspection, 4 back over the base, 5 landed, 6 out of
//! battery, 7 mission complete.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::battery::{
    action_consumption, ActionKind, BatteryParams, BatteryVariant, ConsumptionMode, Durations,
    PowerLevel,
};
use crate::dtmc::Dtmc;
use crate::gcl::{self, BuildError, BuildOptions, GclError};
use crate::rational::Rational;

/// Standard mission queries.
pub const SUCCESS_QUERY: &str = "P=? [ F \"success\" ]";
pub const TIME_QUERY: &str = "R{\"mt\"}=? [ F \"done\" ]";
pub const RECHARGE_QUERY: &str = "R{\"rc\"}=? [ F \"done\" ]";

pub const S_BASE: i32 = 0;
pub const S_AIRBORNE: i32 = 1;
pub const S_AT_TARGET: i32 = 2;
pub const S_INSPECTED: i32 = 3;
pub const S_RETURNING: i32 = 4;
pub const S_LANDED: i32 = 5;
pub const S_FAIL: i32 = 6;
pub const S_SUCCESS: i32 = 7;

/// How turbines on cell corners are assigned to cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppointmentRule {
    /// Corner cells own 1 turbine, edge cells 2, interior cells 4, so shared
    /// turbines are inspected from every adjacent cell.
    Overlapping,
    /// Every turbine belongs to exactly one cell: turbine `(i, j)` goes to
    /// cell `(min(i, w-1), min(j, h-1))`.
    UniqueCover,
}

/// What the drone knows about the wind when it decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindObservation {
    /// The wind for the next action is known when deciding.
    Current,
    /// Decisions use the wind of the previous action; the next action may
    /// meet a freshly changed wind.
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub grid_width: u32,
    pub grid_height: u32,
    pub base_cell: [u32; 2],
    /// SOC fraction of the current capacity that every plan must leave.
    pub safe_t: f64,
    /// Probability that the wind changes before an action.
    pub p_wsp_c: f64,
    pub variant: BatteryVariant,
    pub appointment_rule: AppointmentRule,
    pub consumption_mode: ConsumptionMode,
    pub wind_observation: WindObservation,
    /// Whether the safety check also prices the flight back and landing.
    pub plan_includes_return: bool,
    /// Battery discretization step (Ah).
    pub soc_quantum: f64,
    /// Recharges after which the capacity stops fading.
    pub fade_horizon: u32,
    pub state_cap: usize,
    pub battery: BatteryParams,
    pub durations: Durations,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            grid_width: 5,
            grid_height: 5,
            base_cell: [2, 2],
            safe_t: 0.3,
            p_wsp_c: 0.1,
            variant: BatteryVariant::Advanced,
            appointment_rule: AppointmentRule::Overlapping,
            consumption_mode: ConsumptionMode::TableOverride,
            wind_observation: WindObservation::Current,
            plan_includes_return: false,
            soc_quantum: 0.1,
            fade_horizon: 20,
            state_cap: gcl::DEFAULT_STATE_CAP,
            battery: BatteryParams::default(),
            durations: Durations::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MissionError {
    #[error("invalid mission config: {0}")]
    Config(String),
    #[error("unknown scenario {0}; expected 1 to 4")]
    UnknownScenario(u32),
    #[error("generated model rejected: {0}")]
    Model(#[from] GclError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |msg: &str| Err(MissionError::Config(msg.to_string()));
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad("grid must have at least one cell");
        }
        if self.base_cell[0] >= self.grid_width || self.base_cell[1] >= self.grid_height {
            return bad("base_cell must lie inside the grid");
        }
        if !(0.0..=1.0).contains(&self.p_wsp_c) {
            return bad("p_wsp_c must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.safe_t) {
            return bad("safe_t must be in [0, 1)");
        }
        if !(self.soc_quantum.is_finite() && self.soc_quantum > 0.0) {
            return bad("soc_quantum must be positive");
        }
        if self.battery.c_new / self.soc_quantum > 1e8 {
            return bad("c_new / soc_quantum is too large to enumerate");
        }
        let d = &self.durations;
        if [
            d.take_off,
            d.land,
            d.transit_cell,
            d.inspect,
            d.recharge,
            d.wait,
        ]
        .iter()
        .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return bad("durations must be non-negative");
        }
        for x in [
            self.safe_t,
            self.p_wsp_c,
            self.battery.soc_hi_threshold,
            self.battery.soc_lo_threshold,
        ] {
            exact(x)?;
        }
        self.battery
            .validate()
            .map_err(|e| MissionError::Config(e.to_string()))
    }
}

/// The four published scenarios over (safe_t, p_wsp_c).
pub fn scenario_preset(id: u32) -> Result<MissionConfig, MissionError> {
    let (safe_t, p_wsp_c) = match id {
        1 => (0.3, 0.1),
        2 => (0.25, 0.1),
        3 => (0.3, 0.3),
        4 => (0.25, 0.3),
        _ => return Err(MissionError::UnknownScenario(id)),
    };
    Ok(MissionConfig {
        safe_t,
        p_wsp_c,
        ..MissionConfig::default()
    })
}

/// Boustrophedon order: row 0 left to right, row 1 right to left, and so on.
pub fn snake_route(width: u32, height: u32) -> Vec<[u32; 2]> {
    (0..height)
        .flat_map(|y| {
            let xs: Vec<u32> = if y % 2 == 0 {
                (0..width).collect()
            } else {
                (0..width).rev().collect()
            };
            xs.into_iter().map(move |x| [x, y])
        })
        .collect()
}

/// Turbines inspected from `cell`.
pub fn appointed_turbines(cell: [u32; 2], width: u32, height: u32, rule: AppointmentRule) -> u32 {
    let [x, y] = cell;
    match rule {
        AppointmentRule::Overlapping => {
            let edge_x = x == 0 || x + 1 == width;
            let edge_y = y == 0 || y + 1 == height;
            match (edge_x, edge_y) {
                (true, true) => 1,
                (true, false) | (false, true) => 2,
                (false, false) => 4,
            }
        }
        AppointmentRule::UniqueCover => {
            let cols = if x + 1 == width { 2 } else { 1 };
            let rows = if y + 1 == height { 2 } else { 1 };
            cols * rows
        }
    }
}

/// Manhattan distance in cells.
pub fn travel_cells(from: [u32; 2], to: [u32; 2]) -> u32 {
    from[0].abs_diff(to[0]) + from[1].abs_diff(to[1])
}

/// The route with per-cell turbine counts and distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPlan {
    pub route: Vec<[u32; 2]>,
    pub appointments: Vec<u32>,
    /// Cells between the base and each route cell.
    pub distances: Vec<u32>,
    /// Cells between each route cell and the next one.
    pub hops: Vec<u32>,
}

impl GridPlan {
    pub fn new(config: &MissionConfig) -> Self {
        let (w, h) = (config.grid_width, config.grid_height);
        let route = snake_route(w, h);
        let appointments = route
            .iter()
            .map(|&c| appointed_turbines(c, w, h, config.appointment_rule))
            .collect();
        let distances = route
            .iter()
            .map(|&c| travel_cells(config.base_cell, c))
            .collect();
        let hops = route.windows(2).map(|p| travel_cells(p[0], p[1])).collect();
        GridPlan {
            route,
            appointments,
            distances,
            hops,
        }
    }

    pub fn total_inspections(&self) -> u32 {
        self.appointments.iter().sum()
    }
}

/// A built mission chain with the generated model text.
#[derive(Debug, Clone)]
pub struct MissionModel {
    pub dtmc: Dtmc,
    pub source: String,
}

/// Compiles the mission into a chain with rewards "mt" (minutes) and "rc"
/// (recharges) and labels "success", "fail" and "done".
pub fn build_mission_model(config: &MissionConfig) -> Result<MissionModel, MissionError> {
    let source = emit_model(config)?;
    let symbolic = gcl::parse_model(&source)?;
    let opts = BuildOptions {
        fix_deadlocks: false,
        state_cap: config.state_cap,
    };
    let dtmc = gcl::compose_and_build(&symbolic, &opts)?;
    Ok(MissionModel { dtmc, source })
}

fn exact(x: f64) -> Result<Rational, MissionError> {
    Rational::parse_decimal(&format!("{x}"))
        .ok_or_else(|| MissionError::Config(format!("{x} has no exact decimal form")))
}

/// Consumption in quanta, rounded half up.
fn quanta(ah: f64, quantum: f64) -> i64 {
    libm::floor(ah / quantum + 0.5 + 1e-9) as i64
}

/// Quantized capacity after `n` recharges.
fn capacity_quanta(config: &MissionConfig, n: u32) -> i64 {
    let c = if config.variant.fades() {
        config.battery.capacity_after(n)
    } else {
        config.battery.c_new
    };
    libm::floor(c / config.soc_quantum + 1e-9) as i64
}

/// Emitted expression helpers over the chosen state-of-charge expression.
struct Emitter {
    /// `[voltage level][power]` quanta per action, voltage level 0 = low.
    table: BTreeMap<(u8, usize, usize), i64>,
    hi: Rational,
    lo: Rational,
}

fn action_code(a: ActionKind) -> u8 {
    match a {
        ActionKind::TakeOff => 0,
        ActionKind::Land => 1,
        ActionKind::TransitPerCell => 2,
        ActionKind::InspectTurbine => 3,
    }
}

impl Emitter {
    fn new(config: &MissionConfig) -> Result<Self, MissionError> {
        let p = &config.battery;
        let mut table = BTreeMap::new();
        for a in ActionKind::ALL {
            for (level, v) in [p.v_low, p.v_med, p.v_high].into_iter().enumerate() {
                let v = config.variant.pinned_voltage(p).unwrap_or(v);
                for (w, power) in [PowerLevel::Normal, PowerLevel::High]
                    .into_iter()
                    .enumerate()
                {
                    let c = action_consumption(
                        a,
                        v,
                        power,
                        p,
                        &config.durations,
                        config.consumption_mode,
                    );
                    table.insert((action_code(a), level, w), quanta(c, config.soc_quantum));
                }
            }
        }
        Ok(Emitter {
            table,
            hi: exact(p.soc_hi_threshold)?,
            lo: exact(p.soc_lo_threshold)?,
        })
    }

    /// Cost of `a` when the charge is `x` and the wind variable is `wind`.
    fn cost(&self, a: ActionKind, x: &str, wind: &str) -> String {
        let per_wind = |w: usize| {
            let q = |level: usize| self.table[&(action_code(a), level, w)];
            if q(0) == q(1) && q(1) == q(2) {
                return q(0).to_string();
            }
            // x/cf > hi  <=>  den*x > num*cf, and likewise for lo.
            format!(
                "({}*({x})>{}*cf ? {} : ({}*({x})>={}*cf ? {} : {}))",
                self.hi.denom(),
                self.hi.numer(),
                q(2),
                self.lo.denom(),
                self.lo.numer(),
                q(1),
                q(0)
            )
        };
        let (normal, high) = (per_wind(0), per_wind(1));
        if normal == high {
            normal
        } else {
            format!("({wind}=1 ? {normal} : {high})")
        }
    }
}

/// Nested `?:` lookup of `table[var]`.
fn lookup(var: &str, table: &[u32]) -> String {
    let mut out = table.last().copied().unwrap_or(0).to_string();
    for (i, v) in table.iter().enumerate().rev().skip(1) {
        if v.to_string() == out {
            continue;
        }
        out = format!("({var}={i} ? {v} : {out})");
    }
    out
}

/// Guarded-command source of the mission.
pub fn emit_model(config: &MissionConfig) -> Result<String, MissionError> {
    config.validate()?;
    let plan = GridPlan::new(config);
    let em = Emitter::new(config)?;
    let k_max = plan.route.len() - 1;
    let d_max = *plan.distances.iter().max().unwrap_or(&0) as usize;
    let hop_max = plan.hops.iter().copied().max().unwrap_or(0) as usize;
    let leg_max = d_max.max(hop_max);
    let horizon = if config.variant.fades() && config.battery.fade_rate > 0.0 {
        config.fade_horizon
    } else {
        0
    };
    let caps: Vec<u32> = (0..=horizon)
        .map(|n| capacity_quanta(config, n) as u32)
        .collect();
    let safe = exact(config.safe_t)?;
    let p = exact(config.p_wsp_c)?;
    let d = &config.durations;
    let decide = match config.wind_observation {
        WindObservation::Current => "wsp",
        WindObservation::Lagged => "wobs",
    };

    let mut m = String::new();
    let out = &mut m;
    let _ = writeln!(out, "// Wind-farm inspection mission.");
    let _ = writeln!(
        out,
        "// {}x{} cells, base [{},{}], {} inspections, {} battery, SOC step {} Ah.",
        config.grid_width,
        config.grid_height,
        config.base_cell[0],
        config.base_cell[1],
        plan.total_inspections(),
        config.variant.name(),
        config.soc_quantum
    );
    let _ = writeln!(out, "dtmc\n");
    let _ = writeln!(out, "const double p_wsp_c = {p};");
    let _ = writeln!(out, "const double t_transit = {};", d.transit_cell);
    let _ = writeln!(out);

    let _ = writeln!(out, "// Route tables indexed by position on the snake.");
    let _ = writeln!(out, "formula tk = r=0 ? k+1 : k; // next target cell");
    let _ = writeln!(out, "formula done = k={k_max} & r=0;");
    let _ = writeln!(out, "formula dk = {};", lookup("k", &plan.distances));
    let _ = writeln!(out, "formula dt = {};", lookup("tk", &plan.distances));
    let _ = writeln!(out, "formula hop = {};", lookup("k", &plan.hops));
    let _ = writeln!(out, "formula ap = {};", lookup("tk", &plan.appointments));
    let _ = writeln!(
        out,
        "formula fd = s=1 ? dt : hop; // cells to fly to the target"
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "// Capacity in SOC steps, fading with each recharge.");
    let _ = writeln!(out, "formula cf = {};", lookup("n", &caps));
    let next: Vec<u32> = (0..=horizon)
        .map(|n| caps[(n + 1).min(horizon) as usize])
        .collect();
    let _ = writeln!(out, "formula cf_next = {};", lookup("n", &next));
    let _ = writeln!(out);

    // A leg of up to `leg_max` transits from `start`, priced step by step.
    let leg = |out: &mut String, name: &str, start: &str, wind: &str, cells: &str| {
        let _ = writeln!(out, "formula {name}0 = {start};");
        for j in 1..=leg_max {
            let prev = format!("{name}{}", j - 1);
            let _ = writeln!(
                out,
                "formula {name}{j} = {prev} - {};",
                em.cost(ActionKind::TransitPerCell, &prev, wind)
            );
        }
        let sel: Vec<String> = (0..=leg_max).map(|j| format!("{name}{j}")).collect();
        let mut expr = sel[leg_max].clone();
        for j in (0..leg_max).rev() {
            expr = format!("({cells}={j} ? {} : {expr})", sel[j]);
        }
        let _ = writeln!(out, "formula {name} = {expr};");
    };
    let after = |out: &mut String, name: &str, start: &str, a: ActionKind, wind: &str| {
        let _ = writeln!(
            out,
            "formula {name} = {start} - {};",
            em.cost(a, start, wind)
        );
    };

    let _ = writeln!(out, "// SOC after the action about to be taken.");
    after(out, "x_to", "soc", ActionKind::TakeOff, "wsp");
    after(out, "x_land", "soc", ActionKind::Land, "wsp");
    after(out, "x_ins", "soc", ActionKind::InspectTurbine, "wsp");
    leg(out, "x_fly", "soc", "wsp", "fd");
    leg(out, "x_back", "soc", "wsp", "dk");
    let _ = writeln!(out);

    // Predicted SOC at the end of each plan, all at the decision wind.
    let _ = writeln!(
        out,
        "// Battery policy: predicted SOC at the end of each plan."
    );
    let w = decide;
    let tail = |out: &mut String, name: &str, start: &str, home: &str| -> String {
        after(
            out,
            &format!("{name}_i"),
            start,
            ActionKind::InspectTurbine,
            w,
        );
        if config.plan_includes_return {
            leg(out, &format!("{name}_b"), &format!("{name}_i"), w, home);
            after(
                out,
                &format!("{name}_end"),
                &format!("{name}_b"),
                ActionKind::Land,
                w,
            );
            format!("{name}_end")
        } else {
            format!("{name}_i")
        }
    };
    after(out, "q_to", "soc", ActionKind::TakeOff, w);
    leg(out, "q_to_f", "q_to", w, "dt");
    let end_start = tail(out, "q_to", "q_to_f", "dt");
    leg(out, "q_f", "soc", w, "fd");
    let end_fly = tail(out, "q_f", "q_f", "dt");
    let end_ins = tail(out, "q_s", "soc", "dk");
    let ok = |e: &str| format!("{}*{e} >= {}*cf", safe.denom(), safe.numer());
    let _ = writeln!(out, "formula ok_start = {};", ok(&end_start));
    let _ = writeln!(out, "formula ok_fly = {};", ok(&end_fly));
    let _ = writeln!(out, "formula ok_ins = {};", ok(&end_ins));
    let _ = writeln!(out);

    let fail_or = |x: &str, s: i32| format!("(s'={x}>=0 ? {s} : {S_FAIL})");
    let _ = writeln!(out, "module drone");
    let _ = writeln!(out, "  s : [0..7] init {S_BASE};");
    let _ = writeln!(out, "  [wait] s=0 & {w}=2 -> true;");
    let _ = writeln!(
        out,
        "  [takeoff] s=0 & {w}=1 & ok_start -> {};",
        fail_or("x_to", S_AIRBORNE)
    );
    let _ = writeln!(out, "  [abort] s=0 & {w}=1 & !ok_start -> (s'={S_FAIL});");
    let _ = writeln!(
        out,
        "  [fly] s=1 & ok_fly -> {};",
        fail_or("x_fly", S_AT_TARGET)
    );
    let _ = writeln!(
        out,
        "  [land] s=1 & !ok_fly -> {};",
        fail_or("x_land", S_LANDED)
    );
    let _ = writeln!(
        out,
        "  [inspect] (s=2 | (s=3 & r>0)) & ok_ins -> {};",
        fail_or("x_ins", S_INSPECTED)
    );
    let _ = writeln!(
        out,
        "  [fly] s=3 & r=0 & !done & ok_fly -> {};",
        fail_or("x_fly", S_AT_TARGET)
    );
    let _ = writeln!(
        out,
        "  [back] ((s=2 | (s=3 & r>0)) & !ok_ins) | (s=3 & r=0 & (done | !ok_fly)) -> {};",
        fail_or("x_back", S_RETURNING)
    );
    let _ = writeln!(out, "  [land] s=4 -> {};", fail_or("x_land", S_LANDED));
    let _ = writeln!(out, "  [finish] s=5 & done -> (s'={S_SUCCESS});");
    let _ = writeln!(out, "  [recharge] s=5 & !done -> (s'={S_BASE});");
    let _ = writeln!(out, "  [] s>=6 -> true;");
    let _ = writeln!(out, "endmodule\n");

    let r_max = plan.appointments.iter().copied().max().unwrap_or(1);
    let _ = writeln!(out, "module grid");
    let _ = writeln!(out, "  k : [0..{k_max}] init 0;");
    let _ = writeln!(out, "  r : [0..{r_max}] init {};", plan.appointments[0]);
    let _ = writeln!(out, "  [fly] true -> (k'=tk) & (r'=r=0 ? ap : r);");
    let _ = writeln!(out, "  [inspect] true -> (r'=r-1);");
    let _ = writeln!(out, "endmodule\n");

    let _ = writeln!(out, "module battery");
    let _ = writeln!(out, "  soc : [0..{}] init {};", caps[0], caps[0]);
    let _ = writeln!(out, "  n : [0..{horizon}] init 0;");
    for (a, x) in [
        ("takeoff", "x_to"),
        ("fly", "x_fly"),
        ("inspect", "x_ins"),
        ("back", "x_back"),
        ("land", "x_land"),
    ] {
        let _ = writeln!(out, "  [{a}] true -> (soc'=max(0, {x}));");
    }
    let _ = writeln!(
        out,
        "  [recharge] true -> (soc'=cf_next) & (n'=min(n+1, {horizon}));"
    );
    let _ = writeln!(out, "endmodule\n");

    // The wind changes before every drone action: the flip drawn with
    // action i is the wind that action i+1 meets.
    let _ = writeln!(out, "module environment");
    let _ = writeln!(out, "  wsp : [1..2] init 1;");
    if config.wind_observation == WindObservation::Lagged {
        let _ = writeln!(out, "  wobs : [1..2] init 1;");
    }
    let (stay, flip) = match config.wind_observation {
        WindObservation::Current => ("(wsp'=wsp)", "(wsp'=3-wsp)"),
        WindObservation::Lagged => ("(wobs'=wsp)", "(wobs'=wsp) & (wsp'=3-wsp)"),
    };
    let update = if p == Rational::ZERO {
        stay.to_string()
    } else if p == Rational::ONE {
        flip.to_string()
    } else {
        format!("1-p_wsp_c : {stay} + p_wsp_c : {flip}")
    };
    for a in [
        "wait", "takeoff", "abort", "fly", "inspect", "back", "land", "finish", "recharge",
    ] {
        let _ = writeln!(out, "  [{a}] true -> {update};");
    }
    let _ = writeln!(out, "endmodule\n");

    let _ = writeln!(out, "label \"success\" = s={S_SUCCESS};");
    let _ = writeln!(out, "label \"fail\" = s={S_FAIL};");
    let _ = writeln!(out, "label \"done\" = s>={S_FAIL};\n");

    let _ = writeln!(out, "rewards \"mt\"");
    let _ = writeln!(out, "  [wait] true : {};", d.wait);
    let _ = writeln!(out, "  [takeoff] true : {};", d.take_off);
    let _ = writeln!(out, "  [fly] true : fd*t_transit;");
    let _ = writeln!(out, "  [inspect] true : {};", d.inspect);
    let _ = writeln!(out, "  [back] true : dk*t_transit;");
    let _ = writeln!(out, "  [land] true : {};", d.land);
    let _ = writeln!(out, "  [recharge] true : {};", d.recharge);
    let _ = writeln!(out, "endrewards\n");
    let _ = writeln!(out, "rewards \"rc\"");
    let _ = writeln!(out, "  [recharge] true : 1;");
    let _ = writeln!(out, "endrewards");
    Ok(m)
}
