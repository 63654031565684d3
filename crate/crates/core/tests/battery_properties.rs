use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use windcheck_core::battery::*;

fn voltages(p: &BatteryParams) -> [f64; 3] {
    [p.v_low, p.v_med, p.v_high]
}

#[test]
fn inspection_matches_published_values() {
    let p = BatteryParams::default();
    let d = Durations::default();
    let inspect = |v| {
        action_consumption(
            ActionKind::InspectTurbine,
            v,
            PowerLevel::Normal,
            &p,
            &d,
            ConsumptionMode::Equation,
        )
    };
    assert_eq!(inspect(p.v_high), 3.6);
    assert_eq!(inspect(p.v_low), 4.5);
}

#[test]
fn table_mode_reproduces_table_literals() {
    let p = BatteryParams::default();
    let d = Durations::default();
    for a in ActionKind::ALL {
        let [low, med, high] = a.table_values();
        for (v, want) in voltages(&p).into_iter().zip([low, med, high]) {
            let got = action_consumption(
                a,
                v,
                PowerLevel::Normal,
                &p,
                &d,
                ConsumptionMode::TableOverride,
            );
            assert_eq!(got, want, "{a:?} at {v} V");
        }
    }
}

#[test]
fn fade_is_a_closed_form_power() {
    let p = BatteryParams::default();
    let mut state = BatteryState::new(&p);
    for n in 0..=200u32 {
        let closed = p.c_new * 0.998f64.powf(n as f64);
        let got = p.capacity_after(n);
        assert!(
            (got - closed).abs() <= 2.0 * f64::EPSILON * closed,
            "n = {n}: {got} vs {closed}"
        );
        assert_eq!(state.c_full, got, "n = {n}");
        state = fade_on_recharge(state, &p, BatteryVariant::Advanced);
    }
    let loss = 1.0 - p.capacity_after(80) / p.c_new;
    assert!((loss - 0.148).abs() < 5e-4, "{loss}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    #[test]
    fn coulomb_counting_agrees_with_consumption(
        a in 0usize..4,
        v in 0usize..3,
        high in any::<bool>(),
    ) {
        let p = BatteryParams::default();
        let d = Durations::default();
        let action = ActionKind::ALL[a];
        let voltage = voltages(&p)[v];
        let power = if high { PowerLevel::High } else { PowerLevel::Normal };
        let watts = p.e_spec / p.endurance(power);
        let hours = d.minutes(action) / 60.0;
        let (after, clamped) = coulomb_step(1.0, watts / voltage, hours, p.c_new);
        prop_assert!(!clamped);
        let drawn = (1.0 - after) * p.c_new;
        let c = action_consumption(action, voltage, power, &p, &d, ConsumptionMode::Equation);
        prop_assert!((drawn - c).abs() <= 1e-12, "{} vs {}", drawn, c);
    }

    #[test]
    fn consumption_falls_with_voltage_and_endurance(
        a in 0usize..4,
        v1 in 15.0f64..30.0,
        dv in 0.1f64..5.0,
        t1 in 0.1f64..1.0,
        dt in 0.01f64..1.0,
    ) {
        let p = BatteryParams::default();
        let d = Durations::default();
        let action = ActionKind::ALL[a];
        let at = |v: f64, t: f64| {
            let q = BatteryParams { t_normal: t, t_high: t / 2.0, ..p };
            action_consumption(action, v, PowerLevel::Normal, &q, &d, ConsumptionMode::Equation)
        };
        prop_assert!(at(v1 + dv, t1) < at(v1, t1));
        prop_assert!(at(v1, t1 + dt) < at(v1, t1));
    }

    #[test]
    fn soc_fraction_maps_to_one_band(frac in 0.0f64..=1.0) {
        let p = BatteryParams::default();
        let v = voltage_level(frac, &p);
        let want = if frac > p.soc_hi_threshold {
            p.v_high
        } else if frac >= p.soc_lo_threshold {
            p.v_med
        } else {
            p.v_low
        };
        prop_assert_eq!(v, want);
    }
}
