//! Nonlinear battery model: Coulomb counting, per-action consumption from
//! specified energy, a three-step voltage curve and capacity fade.

use serde::{Deserialize, Serialize};

/// Battery constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryParams {
    /// Capacity of a new battery (Ah).
    pub c_new: f64,
    /// Specified energy (Wh).
    pub e_spec: f64,
    pub v_high: f64,
    pub v_med: f64,
    pub v_low: f64,
    /// SOC fraction above which the voltage is `v_high`.
    pub soc_hi_threshold: f64,
    /// SOC fraction below which the voltage is `v_low`.
    pub soc_lo_threshold: f64,
    /// Capacity lost per recharge, as a fraction.
    pub fade_rate: f64,
    pub fade_law: FadeLaw,
    /// Flight endurance (h) at normal power.
    pub t_normal: f64,
    /// Flight endurance (h) at high power.
    pub t_high: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        BatteryParams {
            c_new: 11.0,
            e_spec: 180.0,
            v_high: 25.0,
            v_med: 22.0,
            v_low: 20.0,
            soc_hi_threshold: 0.75,
            soc_lo_threshold: 0.25,
            fade_rate: 0.002,
            fade_law: FadeLaw::Multiplicative,
            t_normal: 0.5,
            t_high: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadeLaw {
    /// `c_new * (1 - rate)^n`.
    Multiplicative,
    /// `c_new * (1 - rate * n)`, floored at zero.
    Linear,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid battery parameters: {0}")]
pub struct BatteryError(pub &'static str);

impl BatteryParams {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.c_new) || !positive(self.e_spec) {
            return Err(BatteryError("c_new and e_spec must be positive"));
        }
        if !(positive(self.v_low) && self.v_low < self.v_med && self.v_med < self.v_high) {
            return Err(BatteryError(
                "voltages must satisfy 0 < v_low < v_med < v_high",
            ));
        }
        if !(0.0 < self.soc_lo_threshold
            && self.soc_lo_threshold < self.soc_hi_threshold
            && self.soc_hi_threshold < 1.0)
        {
            return Err(BatteryError("thresholds must satisfy 0 < lo < hi < 1"));
        }
        if !(0.0..1.0).contains(&self.fade_rate) {
            return Err(BatteryError("fade_rate must be in [0, 1)"));
        }
        if !(positive(self.t_high) && self.t_high < self.t_normal) {
            return Err(BatteryError("endurance must satisfy 0 < t_high < t_normal"));
        }
        Ok(())
    }

    /// Fully charged capacity after `n` recharges.
    pub fn capacity_after(&self, n: u32) -> f64 {
        match self.fade_law {
            FadeLaw::Multiplicative => self.c_new * libm::pow(1.0 - self.fade_rate, n as f64),
            FadeLaw::Linear => (self.c_new * (1.0 - self.fade_rate * n as f64)).max(0.0),
        }
    }

    pub fn endurance(&self, power: PowerLevel) -> f64 {
        match power {
            PowerLevel::Normal => self.t_normal,
            PowerLevel::High => self.t_high,
        }
    }
}

/// Voltage for a state of charge given as a fraction of full capacity.
/// Both thresholds belong to the middle band.
pub fn voltage_level(soc_fraction: f64, params: &BatteryParams) -> f64 {
    if soc_fraction > params.soc_hi_threshold {
        params.v_high
    } else if soc_fraction >= params.soc_lo_threshold {
        params.v_med
    } else {
        params.v_low
    }
}

/// Power demand, set by the wind speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLevel {
    Normal,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    TakeOff,
    Land,
    TransitPerCell,
    InspectTurbine,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::TakeOff,
        ActionKind::Land,
        ActionKind::TransitPerCell,
        ActionKind::InspectTurbine,
    ];

    /// Published consumption (Ah) at normal power for the low, medium and
    /// high voltage levels.
    pub fn table_values(self) -> [f64; 3] {
        match self {
            ActionKind::TakeOff | ActionKind::Land => [0.3, 0.2, 0.1],
            ActionKind::TransitPerCell => [0.5, 0.4, 0.3],
            ActionKind::InspectTurbine => [4.5, 4.0, 3.6],
        }
    }
}

/// Action durations in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Durations {
    pub take_off: f64,
    pub land: f64,
    pub transit_cell: f64,
    pub inspect: f64,
    pub recharge: f64,
    /// Time spent on the ground waiting for low wind before take-off.
    pub wait: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            take_off: 1.0,
            land: 1.0,
            transit_cell: 50.0 / 60.0,
            inspect: 15.0,
            recharge: 90.0,
            wait: 0.0,
        }
    }
}

impl Durations {
    pub fn minutes(&self, action: ActionKind) -> f64 {
        match action {
            ActionKind::TakeOff => self.take_off,
            ActionKind::Land => self.land,
            ActionKind::TransitPerCell => self.transit_cell,
            ActionKind::InspectTurbine => self.inspect,
        }
    }
}

/// How per-action consumption is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumptionMode {
    /// `C = e_spec * t / (V * T)` from the action duration.
    Equation,
    /// The published table for normal power, scaled by `t_normal / t_high`
    /// at high power.
    TableOverride,
}

/// Charge (Ah) drawn by `action` at the given voltage and power level.
pub fn action_consumption(
    action: ActionKind,
    voltage: f64,
    power: PowerLevel,
    params: &BatteryParams,
    durations: &Durations,
    mode: ConsumptionMode,
) -> f64 {
    match mode {
        ConsumptionMode::Equation => {
            let t = durations.minutes(action) / 60.0;
            params.e_spec * t / (voltage * params.endurance(power))
        }
        ConsumptionMode::TableOverride => {
            let [low, med, high] = action.table_values();
            let base = if voltage >= params.v_high {
                high
            } else if voltage >= params.v_med {
                med
            } else {
                low
            };
            base * params.t_normal / params.endurance(power)
        }
    }
}

/// One Coulomb-counting step: `soc - current * dt / q_max`, as a fraction.
/// Returns the new fraction, clamped at zero, and whether it was clamped.
pub fn coulomb_step(soc: f64, current: f64, dt: f64, q_max: f64) -> (f64, bool) {
    let next = soc - current * dt / q_max;
    if next < 0.0 {
        (0.0, true)
    } else {
        (next, false)
    }
}

/// The battery model variants compared in the capacity sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryVariant {
    /// Voltage follows the SOC and capacity fades with recharges.
    Advanced,
    /// No fade; voltage pinned high.
    BasicHigh,
    /// No fade; voltage pinned medium.
    BasicMedium,
    /// No fade; voltage pinned low.
    BasicLow,
}

impl BatteryVariant {
    pub const ALL: [BatteryVariant; 4] = [
        BatteryVariant::Advanced,
        BatteryVariant::BasicHigh,
        BatteryVariant::BasicMedium,
        BatteryVariant::BasicLow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BatteryVariant::Advanced => "advanced",
            BatteryVariant::BasicHigh => "basic_high",
            BatteryVariant::BasicMedium => "basic_medium",
            BatteryVariant::BasicLow => "basic_low",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BatteryVariant::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn fades(self) -> bool {
        self == BatteryVariant::Advanced
    }

    /// The pinned voltage, if any.
    pub fn pinned_voltage(self, params: &BatteryParams) -> Option<f64> {
        match self {
            BatteryVariant::Advanced => None,
            BatteryVariant::BasicHigh => Some(params.v_high),
            BatteryVariant::BasicMedium => Some(params.v_med),
            BatteryVariant::BasicLow => Some(params.v_low),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    /// Remaining charge (Ah).
    pub soc: f64,
    /// Current fully charged capacity (Ah).
    pub c_full: f64,
    pub recharges: u32,
}

impl BatteryState {
    pub fn new(params: &BatteryParams) -> Self {
        BatteryState {
            soc: params.c_new,
            c_full: params.c_new,
            recharges: 0,
        }
    }
}

/// Everything needed to price a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryModel {
    pub params: BatteryParams,
    pub durations: Durations,
    pub mode: ConsumptionMode,
    pub variant: BatteryVariant,
}

impl BatteryModel {
    pub fn voltage(&self, soc: f64, c_full: f64) -> f64 {
        self.variant
            .pinned_voltage(&self.params)
            .unwrap_or_else(|| voltage_level(soc / c_full, &self.params))
    }

    pub fn consumption(&self, action: ActionKind, voltage: f64, power: PowerLevel) -> f64 {
        action_consumption(
            action,
            voltage,
            power,
            &self.params,
            &self.durations,
            self.mode,
        )
    }

    /// Recharge: count it, fade the capacity (advanced variant only) and
    /// fill up.
    pub fn recharge(&self, state: BatteryState) -> BatteryState {
        let recharges = state.recharges + 1;
        let c_full = if self.variant.fades() {
            self.params.capacity_after(recharges)
        } else {
            self.params.c_new
        };
        BatteryState {
            soc: c_full,
            c_full,
            recharges,
        }
    }

    /// SOC after performing `plan`, choosing the voltage before each step
    /// from the running SOC. May be negative.
    pub fn soc_after_plan(
        &self,
        state: BatteryState,
        plan: &[ActionKind],
        wind: &[PowerLevel],
    ) -> f64 {
        assert_eq!(plan.len(), wind.len(), "one power level per planned action");
        plan.iter().zip(wind).fold(state.soc, |soc, (&a, &w)| {
            soc - self.consumption(a, self.voltage(soc, state.c_full), w)
        })
    }

    /// True iff the plan leaves at least `safe_t` of the current capacity.
    pub fn is_safe(
        &self,
        state: BatteryState,
        plan: &[ActionKind],
        wind: &[PowerLevel],
        safe_t: f64,
    ) -> bool {
        self.soc_after_plan(state, plan, wind) >= safe_t * state.c_full
    }
}

/// Applies one recharge with fade to `state`.
pub fn fade_on_recharge(
    state: BatteryState,
    params: &BatteryParams,
    variant: BatteryVariant,
) -> BatteryState {
    BatteryModel {
        params: *params,
        durations: Durations::default(),
        mode: ConsumptionMode::Equation,
        variant,
    }
    .recharge(state)
}
