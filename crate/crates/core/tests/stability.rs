use d2d_relay::net::{ChannelParams, GridSpec, MobilityParams};
use d2d_relay::policy::PowerLevelSet;
use d2d_relay::stability::{
    check_membership, instance_from_grid, policy_rates, region_sweep, witness_violation,
    Membership, StabilityInstance,
};
use proptest::prelude::*;

const TINY: &str = include_str!("../../../configs/tiny_instance.toml");

fn tiny() -> StabilityInstance {
    StabilityInstance::from_toml_str(TINY).unwrap()
}

fn inside(inst: &StabilityInstance, l: &[f64]) -> bool {
    check_membership(l, inst).unwrap().verdict == Membership::Inside
}

fn assert_witness_exact(inst: &StabilityInstance, l: &[f64]) {
    let r = check_membership(l, inst).unwrap();
    match r.verdict {
        Membership::Inside => {
            let w = r.witness.as_ref().unwrap();
            assert!(r.slack >= -1e-9);
            assert!(witness_violation(inst, l, w) <= 1e-7, "{l:?}");
            if l.iter().all(|&x| x == 0.0) {
                // Silent witness; the margin belongs to the LP optimum.
                return;
            }
            // The reported margin is met by the recovered (w, q).
            let rates = policy_rates(inst, w);
            for i in 0..inst.n_ms {
                assert!(rates.own_service[i] - l[i] >= r.slack - 1e-7);
                assert!(rates.relay_service[i] - rates.relay_inflow[i] >= r.slack - 1e-7);
            }
        }
        Membership::Outside => {
            assert!(r.witness.is_none());
            assert!(r.slack < 0.0);
        }
    }
}

#[test]
fn tiny_instance_corner_points() {
    let inst = tiny();
    assert!(inside(&inst, &[0.0, 0.0]));
    // Each MS alone at full budget: 0.8 of the slots, half near and half far.
    assert!(inside(&inst, &[3.0, 0.0]));
    assert!(!inside(&inst, &[4.0, 4.0]));
    assert!(!inside(&inst, &[6.5, 0.0]));
}

#[test]
fn toml_round_trip_preserves_the_region() {
    let inst = tiny();
    let again = StabilityInstance::from_toml_str(&inst.to_toml_string()).unwrap();
    assert_eq!(inst, again);
}

#[test]
fn grid_built_instance_gives_consistent_witnesses() {
    let grid = GridSpec::new(10.0, 0.0, 10.0, (0.0, 0.0), 1.0).unwrap();
    let channel = ChannelParams {
        slot_duration_s: 0.05,
        ..ChannelParams::default()
    };
    let levels = PowerLevelSet::from_dbm(&[20.0, 23.0]).unwrap();
    let inst = instance_from_grid(
        &grid,
        &MobilityParams::uniform(2),
        &channel,
        &levels,
        2,
        &[150, 150],
    )
    .unwrap();
    inst.validate().unwrap();
    assert!((inst.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let points: Vec<Vec<f64>> = (0..6)
        .flat_map(|a| (0..6).map(move |b| vec![a as f64 * 2.5, b as f64 * 2.5]))
        .collect();
    let results = region_sweep(&inst, &points).unwrap();
    for (p, r) in points.iter().zip(&results) {
        assert_eq!(*r, check_membership(p, &inst).unwrap());
        assert_witness_exact(&inst, p);
    }
    assert!(results.iter().any(|r| r.verdict == Membership::Inside));
    assert!(results.iter().any(|r| r.verdict == Membership::Outside));
}

#[test]
fn wrong_dimension_is_rejected() {
    assert!(check_membership(&[1.0], &tiny()).is_err());
    assert!(check_membership(&[1.0, -0.5], &tiny()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn region_is_monotone(a in 0.0..4.0f64, b in 0.0..4.0f64, sa in 0.0..1.0f64, sb in 0.0..1.0f64) {
        let inst = tiny();
        if inside(&inst, &[a, b]) {
            prop_assert!(inside(&inst, &[a * sa, b * sb]));
        }
    }

    #[test]
    fn region_is_convex(
        a1 in 0.0..4.0f64, b1 in 0.0..4.0f64, a2 in 0.0..4.0f64, b2 in 0.0..4.0f64, t in 0.0..1.0f64,
    ) {
        let inst = tiny();
        if inside(&inst, &[a1, b1]) && inside(&inst, &[a2, b2]) {
            let mid = [t * a1 + (1.0 - t) * a2, t * b1 + (1.0 - t) * b2];
            prop_assert!(inside(&inst, &mid), "{mid:?}");
        }
    }

    #[test]
    fn witnesses_are_exact(a in 0.0..4.0f64, b in 0.0..4.0f64) {
        assert_witness_exact(&tiny(), &[a, b]);
    }
}
