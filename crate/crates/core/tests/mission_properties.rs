use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use windcheck_core::battery::{BatteryParams, BatteryVariant};
use windcheck_core::dtmc::validate;
use windcheck_core::mission::*;
use windcheck_core::{check, parse_formula, Dtmc};

fn value(d: &Dtmc, q: &str) -> f64 {
    check(d, &parse_formula(q).unwrap()).unwrap().value
}

fn small(p_wsp_c: f64, c_new: f64, variant: BatteryVariant) -> MissionConfig {
    MissionConfig {
        grid_width: 3,
        grid_height: 3,
        base_cell: [1, 1],
        p_wsp_c,
        variant,
        battery: BatteryParams {
            c_new,
            ..Default::default()
        },
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    #[test]
    fn snake_visits_every_cell_once(w in 1u32..8, h in 1u32..8) {
        let r = snake_route(w, h);
        prop_assert_eq!(r.len() as u32, w * h);
        let mut seen = std::collections::BTreeSet::new();
        for c in &r {
            prop_assert!(c[0] < w && c[1] < h);
            prop_assert!(seen.insert(*c));
        }
        for pair in r.windows(2) {
            prop_assert_eq!(travel_cells(pair[0], pair[1]), 1);
        }
    }

    #[test]
    fn travel_is_symmetric(a in (0u32..20, 0u32..20), b in (0u32..20, 0u32..20)) {
        let (a, b) = ([a.0, a.1], [b.0, b.1]);
        prop_assert_eq!(travel_cells(a, b), travel_cells(b, a));
        prop_assert_eq!(travel_cells(a, a), 0);
    }

    #[test]
    fn appointment_counts_are_one_two_or_four(w in 1u32..8, h in 1u32..8, unique in any::<bool>()) {
        let rule = if unique { AppointmentRule::UniqueCover } else { AppointmentRule::Overlapping };
        for c in snake_route(w, h) {
            prop_assert!([1, 2, 4].contains(&appointed_turbines(c, w, h, rule)));
        }
        if unique {
            let total: u32 = snake_route(w, h).iter().map(|&c| appointed_turbines(c, w, h, rule)).sum();
            prop_assert_eq!(total, (w + 1) * (h + 1));
        }
    }
}

#[test]
fn route_examples() {
    assert_eq!(travel_cells([2, 2], [0, 0]), 4);
    let r = snake_route(5, 5);
    assert_eq!(r[5], [4, 1]);
    assert_eq!(r[9], [0, 1]);
}

#[test]
fn outcomes_partition_the_paths() {
    for id in 1..=4 {
        let m = build_mission_model(&scenario_preset(id).unwrap()).unwrap();
        let d = &m.dtmc;
        assert!(validate(&d.to_parts()).is_valid(), "scenario {id}");
        let (ok, fail) = (d.label("success").unwrap(), d.label("fail").unwrap());
        assert!(ok.intersection(fail).is_empty());
        for s in ok.union(fail).iter() {
            assert!(d.is_absorbing(s));
        }
        for s in 0..d.n_states() {
            assert!(
                d.is_absorbing(s) == (ok.contains(s) || fail.contains(s)),
                "state {s}"
            );
        }
        let total = value(d, SUCCESS_QUERY) + value(d, "P=? [ F \"fail\" ]");
        assert!((total - 1.0).abs() <= 1e-9, "scenario {id}: {total}");
    }
}

#[test]
fn calm_wind_is_deterministic() {
    for c_new in [7.0, 9.0, 11.0] {
        let m = build_mission_model(&small(0.0, c_new, BatteryVariant::Advanced)).unwrap();
        let d = &m.dtmc;
        assert!((0..d.n_states()).all(|s| d.row(s).count() <= 2));
        let p = value(d, SUCCESS_QUERY);
        assert!(p == 0.0 || p == 1.0, "c_new {c_new}: {p}");
    }
}

#[test]
fn basic_variants_improve_with_capacity() {
    for v in [
        BatteryVariant::BasicHigh,
        BatteryVariant::BasicMedium,
        BatteryVariant::BasicLow,
    ] {
        let mut prev = 0.0;
        for i in 0..=20 {
            let c_new = 5.0 + 0.5 * i as f64;
            let m = build_mission_model(&small(0.3, c_new, v)).unwrap();
            let p = value(&m.dtmc, SUCCESS_QUERY);
            assert!(p + 1e-12 >= prev, "{v:?} at {c_new}: {p} < {prev}");
            prev = p;
        }
    }
}

#[test]
fn dynamic_wind_costs_time_and_recharges() {
    let eval = |id| {
        let m = build_mission_model(&scenario_preset(id).unwrap()).unwrap();
        (value(&m.dtmc, TIME_QUERY), value(&m.dtmc, RECHARGE_QUERY))
    };
    let (mt1, rc1) = eval(1);
    let (mt3, rc3) = eval(3);
    assert!(mt3 > mt1 && rc3 > rc1);
}

#[test]
fn huge_battery_on_one_cell() {
    let config = MissionConfig {
        grid_width: 1,
        grid_height: 1,
        base_cell: [0, 0],
        p_wsp_c: 0.0,
        battery: BatteryParams {
            c_new: 10_000.0,
            ..Default::default()
        },
        soc_quantum: 1.0,
        ..Default::default()
    };
    let m = build_mission_model(&config).unwrap();
    assert_eq!(value(&m.dtmc, SUCCESS_QUERY), 1.0);
    assert_eq!(value(&m.dtmc, RECHARGE_QUERY), 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        MissionConfig {
            p_wsp_c: 1.5,
            ..Default::default()
        },
        MissionConfig {
            safe_t: 1.0,
            ..Default::default()
        },
        MissionConfig {
            base_cell: [5, 0],
            ..Default::default()
        },
        MissionConfig {
            grid_width: 0,
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(
            matches!(build_mission_model(&c), Err(MissionError::Config(_))),
            "{c:?}"
        );
    }
}

#[test]
fn state_cap_is_reported() {
    let c = MissionConfig {
        state_cap: 100,
        ..Default::default()
    };
    assert!(build_mission_model(&c).is_err());
}
