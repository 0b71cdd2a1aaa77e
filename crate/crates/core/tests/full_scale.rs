//! Capacity of the 60-MS, 50-PRB network. Several minutes per mode on one
//! core, so ignored by default: `cargo test --release -- --ignored`.

use d2d_relay::net::{ChannelParams, GridSpec, MobilityParams};
use d2d_relay::policy::{dbm_to_mw, Matcher, PolicyConfig, PolicyMode, PowerLevelSet};
use d2d_relay::queueing::{ArrivalConfig, InflowMode};
use d2d_relay::sim::{search_capacity, SimConfig, StabilityThresholds, TopologyProcess};

fn full(mode: PolicyMode) -> SimConfig {
    let n = 60;
    SimConfig {
        grid: GridSpec::new(2000.0, 2000.0, 10.0, (1000.0, 1000.0), 1.0).unwrap(),
        channel: ChannelParams::default(),
        mobility: MobilityParams::uniform(n),
        arrivals: ArrivalConfig::symmetric(n, 20.0),
        policy: PolicyConfig {
            epoch_len: 1,
            p_bar: vec![dbm_to_mw(28.0).round() as u64; n],
            mode,
            matcher: Matcher::TopRows,
            power_unit_mw: 300,
        },
        levels: PowerLevelSet::paper_default(),
        n_ms: n,
        n_prb: 50,
        horizon: 50_000,
        seed: 1,
        topology: TopologyProcess::RandomWalk,
        inflow: InflowMode::PacketConserving,
        initial_positions: None,
    }
}

fn bracket(mode: PolicyMode) -> (f64, f64) {
    let b = search_capacity(
        &full(mode),
        10.0,
        40.0,
        1.0,
        &[1, 2, 3],
        &StabilityThresholds::for_network(60),
    )
    .unwrap();
    (b.lo, b.hi)
}

#[test]
#[ignore]
fn no_relay_capacity_near_twenty() {
    let (lo, hi) = bracket(PolicyMode::NoRelay);
    assert!(17.0 <= lo && hi <= 21.0, "[{lo}, {hi}]");
}

#[test]
#[ignore]
fn relay_capacity_near_twenty_five() {
    let (lo, hi) = bracket(PolicyMode::Relay);
    assert!(24.0 <= lo && hi <= 29.0, "[{lo}, {hi}]");
}
