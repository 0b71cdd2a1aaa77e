use d2d_relay::net::{ChannelParams, GridPoint, GridSpec, MobilityParams};
use d2d_relay::policy::{Matcher, PolicyConfig, PolicyMode, PowerLevelSet};
use d2d_relay::queueing::{ArrivalConfig, InflowMode};
use d2d_relay::sim::{
    classify_stability, read_trace_csv, run, search_capacity, write_trace_csv, SimConfig,
    StabilityThresholds, TopologyProcess, Verdict,
};
use d2d_relay::Error;

fn small(mode: PolicyMode, rate: f64) -> SimConfig {
    let n = 4;
    SimConfig {
        grid: GridSpec::new(200.0, 200.0, 10.0, (100.0, 100.0), 1.0).unwrap(),
        channel: ChannelParams {
            slot_duration_s: 0.2,
            ..ChannelParams::default()
        },
        mobility: MobilityParams::uniform(n),
        arrivals: ArrivalConfig::symmetric(n, rate),
        policy: PolicyConfig {
            epoch_len: 1,
            p_bar: vec![631; n],
            mode,
            matcher: Matcher::Hungarian,
            power_unit_mw: 300,
        },
        levels: PowerLevelSet::paper_default(),
        n_ms: n,
        n_prb: 2,
        horizon: 20_000,
        seed: 5,
        topology: TopologyProcess::RandomWalk,
        inflow: InflowMode::PacketConserving,
        initial_positions: None,
    }
}

/// One MS frozen next to the BS with a single power level, so the service
/// rate is a known constant `μ`.
fn single_queue(rate: f64) -> (SimConfig, u64) {
    let grid = GridSpec::new(10.0, 0.0, 10.0, (0.0, 0.0), 1.0).unwrap();
    let channel = ChannelParams {
        slot_duration_s: 0.05,
        ..ChannelParams::default()
    };
    let mu = channel.rate_at_distance(10.0, Some(20.0)).unwrap();
    let config = SimConfig {
        grid,
        channel,
        mobility: MobilityParams::frozen(1),
        arrivals: ArrivalConfig::symmetric(1, rate),
        policy: PolicyConfig {
            epoch_len: 1,
            p_bar: vec![1000],
            mode: PolicyMode::NoRelay,
            matcher: Matcher::Hungarian,
            power_unit_mw: 1000,
        },
        levels: PowerLevelSet::from_dbm(&[20.0]).unwrap(),
        n_ms: 1,
        n_prb: 1,
        horizon: 20_000,
        seed: 1,
        topology: TopologyProcess::RandomWalk,
        inflow: InflowMode::PacketConserving,
        initial_positions: Some(vec![GridPoint::new(1, 0)]),
    };
    (config, mu)
}

#[test]
fn no_traffic_keeps_backlogs_empty() {
    for mode in [PolicyMode::Relay, PolicyMode::NoRelay] {
        let trace = run(&small(mode, 0.0)).unwrap();
        assert!(trace.sum_own.iter().all(|&x| x == 0));
        assert!(trace.sum_relay.iter().all(|&y| y == 0));
        assert_eq!(trace.delivered, 0);
        assert_eq!(trace.mean_total_backlog(), 0.0);
    }
}

#[test]
fn identical_seed_identical_trace() {
    let cfg = small(PolicyMode::Relay, 8.0);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let c = run(&cfg.with_seed(6)).unwrap();
    assert_ne!(a.sum_own, c.sum_own);
}

#[test]
fn single_queue_below_service_rate_is_stable() {
    let (cfg, mu) = single_queue(0.0);
    assert!((3..=40).contains(&mu), "service rate {mu}");
    let lambda = 0.7 * mu as f64;
    let trace = run(&cfg.with_symmetric_rate(lambda)).unwrap();
    let v = classify_stability(&trace, &StabilityThresholds::for_network(1)).unwrap();
    assert_eq!(v.verdict, Verdict::Stable);
    // Poisson arrivals against a deterministic server at load 0.7.
    assert!(
        trace.mean_total_backlog() < 5.0 * mu as f64,
        "{}",
        trace.mean_total_backlog()
    );
    assert!((trace.throughput() - lambda).abs() < 0.05 * lambda);
}

#[test]
fn single_queue_capacity_brackets_service_rate() {
    let (cfg, mu) = single_queue(0.0);
    let mu = mu as f64;
    // Endpoints chosen so that no probe lands exactly on μ.
    let b = search_capacity(
        &cfg,
        mu - 3.3,
        mu + 3.7,
        1.0,
        &[1, 2, 3],
        &StabilityThresholds::for_network(1),
    )
    .unwrap();
    assert!(b.lo <= mu && mu <= b.hi, "[{}, {}] misses {mu}", b.lo, b.hi);
    assert!(b.hi - b.lo <= 1.0);
}

#[test]
fn capacity_search_reports_the_failing_endpoint() {
    let (cfg, mu) = single_queue(0.0);
    let err = search_capacity(
        &cfg,
        mu as f64 + 2.0,
        mu as f64 + 5.0,
        1.0,
        &[1, 2, 3],
        &StabilityThresholds::for_network(1),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::CapacityPrecondition {
                expected: "stable",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn topology_processes_agree_on_a_single_point_grid() {
    let grid = GridSpec::new(0.0, 0.0, 10.0, (0.0, 0.0), 1.0).unwrap();
    for mode in [PolicyMode::Relay, PolicyMode::NoRelay] {
        let base = SimConfig {
            grid: grid.clone(),
            mobility: MobilityParams::uniform(4),
            horizon: 3000,
            ..small(mode, 6.0)
        };
        let rw = run(&base).unwrap();
        let iid = run(&SimConfig {
            topology: TopologyProcess::IidStationary,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(rw, iid);
    }
}

#[test]
fn power_constraint_holds_on_every_run() {
    for mode in [PolicyMode::Relay, PolicyMode::NoRelay] {
        for rate in [0.0, 4.0, 12.0, 40.0] {
            for epoch in [1, 7] {
                let mut cfg = small(mode, rate);
                cfg.horizon = 4000;
                cfg.policy.epoch_len = epoch;
                let trace = run(&cfg).unwrap();
                assert!(
                    trace.power_constraint_holds(&cfg.policy.p_bar),
                    "{mode} rate {rate} T {epoch}"
                );
            }
        }
    }
}

#[test]
fn lyapunov_drift_is_negative_at_high_backlog() {
    for mode in [PolicyMode::Relay, PolicyMode::NoRelay] {
        for epoch in [1, 5] {
            let mut negative = 0;
            for seed in [1, 2, 3] {
                let mut cfg = small(mode, 8.0).with_seed(seed);
                cfg.policy.epoch_len = epoch;
                let trace = run(&cfg).unwrap();
                let v = classify_stability(&trace, &StabilityThresholds::for_network(cfg.n_ms))
                    .unwrap();
                assert_eq!(v.verdict, Verdict::Stable, "{mode} T {epoch} seed {seed}");
                if trace.lyapunov_drift_above(0.9).unwrap() < 0.0 {
                    negative += 1;
                }
            }
            assert!(negative >= 2, "{mode} T {epoch}: {negative} of 3");
        }
    }
}

#[test]
fn trace_csv_round_trip() {
    let trace = run(&SimConfig {
        horizon: 500,
        ..small(PolicyMode::Relay, 10.0)
    })
    .unwrap();
    let mut bytes = Vec::new();
    write_trace_csv(&trace, &mut bytes).unwrap();
    let rows = read_trace_csv(bytes.as_slice()).unwrap();
    assert_eq!(rows.len(), trace.len());
    for (n, r) in rows.iter().enumerate() {
        assert_eq!(r.slot, n as u64);
        assert_eq!(r.sum_x, trace.sum_own[n]);
        assert_eq!(r.sum_y, trace.sum_relay[n]);
        assert_eq!(r.sum_u, trace.sum_power_queue[n]);
        assert_eq!(r.power, trace.power[n]);
        assert_eq!(r.lyapunov, trace.lyapunov[n]);
    }
    let header = String::from_utf8(bytes.clone()).unwrap();
    assert!(header.starts_with("slot,sumX,sumY,sumU,power,lyapunov\n"));
}

#[test]
fn malformed_traces_are_rejected() {
    let bad_header = "slot,X,sumY,sumU,power,lyapunov\n0,1,2,3,4,5\n";
    assert!(matches!(
        read_trace_csv(bad_header.as_bytes()),
        Err(Error::MalformedTrace(_))
    ));
    let gap = "slot,sumX,sumY,sumU,power,lyapunov\n0,1,2,3,4,5\n2,1,2,3,4,5\n";
    assert!(matches!(
        read_trace_csv(gap.as_bytes()),
        Err(Error::MalformedTrace(_))
    ));
}

#[test]
fn short_traces_cannot_be_classified() {
    let trace = run(&SimConfig {
        horizon: 100,
        ..small(PolicyMode::Relay, 1.0)
    })
    .unwrap();
    assert!(matches!(
        classify_stability(&trace, &StabilityThresholds::for_network(4)),
        Err(Error::TraceTooShort { .. })
    ));
}
