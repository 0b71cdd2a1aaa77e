//! Per-MS queues and their slot dynamics.
//!
//! Every MS keeps an own queue `X` (exogenous packets), a relay queue `Y`
//! (packets received from other MSs, bound for the BS) and a virtual power
//! queue `U` (milliwatts):
//!
//! ```text
//! X' = max(X − Σ_j μ_ij − μ_i0·I, 0) + A
//! Y' = max(Y − μ_i0·(1 − I), 0) + Σ_j inflow_ji
//! U' = max(U − P̄, 0) + Σ_j ℓ_ij
//! ```
//!
//! `I = 1` when the BS link serves the own queue. Backlogs are exact
//! integers (packets, milliwatts).

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Receiving end of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Receiver {
    Bs,
    Ms(usize),
}

/// Queue a transmission draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueueSelect {
    Own,
    Relay,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueueState {
    /// Own-queue backlog `X` in packets.
    pub own: Vec<u64>,
    /// Relay-queue backlog `Y` in packets.
    pub relay: Vec<u64>,
    /// Virtual power queue `U` in milliwatts.
    pub power: Vec<u64>,
}

impl QueueState {
    pub fn empty(n_ms: usize) -> Self {
        Self {
            own: vec![0; n_ms],
            relay: vec![0; n_ms],
            power: vec![0; n_ms],
        }
    }

    pub fn n_ms(&self) -> usize {
        self.own.len()
    }

    pub fn total_own(&self) -> u64 {
        self.own.iter().sum()
    }

    pub fn total_relay(&self) -> u64 {
        self.relay.iter().sum()
    }

    pub fn total_power(&self) -> u64 {
        self.power.iter().sum()
    }

    /// Packets currently held in own and relay queues.
    pub fn total_packets(&self) -> u64 {
        self.total_own() + self.total_relay()
    }
}

/// Mean arrival rates (packets/slot) and the per-slot arrival cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalConfig {
    pub rates: Vec<f64>,
    pub a_max: u64,
}

impl ArrivalConfig {
    /// Same rate at every MS, cap at three times the rate.
    pub fn symmetric(n_ms: usize, rate: f64) -> Self {
        Self {
            rates: vec![rate; n_ms],
            a_max: default_a_max(&[rate]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &r) in self.rates.iter().enumerate() {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::InvalidArrivals(format!(
                    "MS {i}: rate {r} must be finite and >= 0"
                )));
            }
            if r > self.a_max as f64 {
                return Err(Error::InvalidArrivals(format!(
                    "MS {i}: rate {r} exceeds a_max {}",
                    self.a_max
                )));
            }
        }
        Ok(())
    }
}

/// Default per-slot cap: three times the largest configured rate, rounded up.
pub fn default_a_max(rates: &[f64]) -> u64 {
    let max = rates.iter().copied().fold(0.0, f64::max);
    (3.0 * max).ceil() as u64
}

/// Draws one slot of arrivals: Poisson(λ_i) conditioned on `≤ a_max`.
pub fn draw_arrivals<R: Rng + ?Sized>(cfg: &ArrivalConfig, rng: &mut R) -> Vec<u64> {
    cfg.rates
        .iter()
        .map(|&rate| {
            if rate == 0.0 {
                return 0;
            }
            let dist = Poisson::new(rate).expect("positive finite rate");
            loop {
                let k = dist.sample(rng) as u64;
                if k <= cfg.a_max {
                    break k;
                }
            }
        })
        .collect()
}

/// One active link of an MS in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub receiver: Receiver,
    /// Nominal link rate in packets per slot.
    pub rate: u64,
    pub power_mw: u64,
    /// Queue served; always `Own` for MS receivers.
    pub source: QueueSelect,
}

/// What every MS transmitted in a slot: at most one link per MS.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ServiceSummary {
    pub links: Vec<Option<Transmission>>,
}

impl ServiceSummary {
    pub fn silent(n_ms: usize) -> Self {
        Self {
            links: vec![None; n_ms],
        }
    }

    pub fn total_power(&self) -> u64 {
        self.links.iter().flatten().map(|t| t.power_mw).sum()
    }

    /// True when no MS sends to itself and D2D links drain own queues.
    pub fn is_admissible(&self) -> bool {
        self.links.iter().enumerate().all(|(i, l)| match l {
            None => true,
            Some(t) => match t.receiver {
                Receiver::Bs => true,
                Receiver::Ms(j) => j != i && j < self.links.len() && t.source == QueueSelect::Own,
            },
        })
    }
}

/// How relay queues are credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflowMode {
    /// Credit the full link rate, as the analytical model does.
    EquationFaithful,
    /// Credit only packets the sender actually had.
    #[default]
    PacketConserving,
}

/// Advances the queues by one slot.
pub fn update_queues(
    state: &QueueState,
    service: &ServiceSummary,
    arrivals: &[u64],
    p_bar: &[u64],
    mode: InflowMode,
) -> QueueState {
    let n = state.n_ms();
    debug_assert_eq!(service.links.len(), n);
    debug_assert!(service.is_admissible());
    let mut next = QueueState::empty(n);
    let mut inflow = vec![0u64; n];

    for i in 0..n {
        let mut own_drain = 0;
        let mut relay_drain = 0;
        let mut spent = 0;
        if let Some(t) = service.links[i] {
            spent = t.power_mw;
            match (t.receiver, t.source) {
                (Receiver::Ms(j), _) => {
                    own_drain = t.rate;
                    inflow[j] += match mode {
                        InflowMode::EquationFaithful => t.rate,
                        InflowMode::PacketConserving => t.rate.min(state.own[i]),
                    };
                }
                (Receiver::Bs, QueueSelect::Own) => own_drain = t.rate,
                (Receiver::Bs, QueueSelect::Relay) => relay_drain = t.rate,
            }
        }
        next.own[i] = state.own[i].saturating_sub(own_drain) + arrivals[i];
        next.relay[i] = state.relay[i].saturating_sub(relay_drain);
        next.power[i] = state.power[i].saturating_sub(p_bar[i]) + spent;
    }
    for (y, add) in next.relay.iter_mut().zip(inflow) {
        *y += add;
    }
    next
}

/// Packets that actually reach the BS during the slot.
pub fn delivered_to_bs(state: &QueueState, service: &ServiceSummary) -> u64 {
    service
        .links
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|t| (i, t)))
        .map(|(i, t)| match (t.receiver, t.source) {
            (Receiver::Bs, QueueSelect::Own) => t.rate.min(state.own[i]),
            (Receiver::Bs, QueueSelect::Relay) => t.rate.min(state.relay[i]),
            (Receiver::Ms(_), _) => 0,
        })
        .sum()
}

/// Quadratic Lyapunov function `Σ X² + Y² + U²`.
pub fn lyapunov_value(state: &QueueState) -> u128 {
    state
        .own
        .iter()
        .chain(&state.relay)
        .chain(&state.power)
        .map(|&v| (v as u128) * (v as u128))
        .sum()
}

/// Time-averaged service and power of each MS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunAverages {
    pub slots: u64,
    /// Average transmit power per MS (mW).
    pub power: Vec<f64>,
    /// `link[i][j]` is the average nominal rate on `i -> j`; column 0 is the
    /// BS and column `j + 1` is MS `j`.
    pub link: Vec<Vec<f64>>,
    /// Average BS rate spent on the own queue.
    pub own_to_bs: Vec<f64>,
    /// Average BS rate spent on the relay queue.
    pub relay_to_bs: Vec<f64>,
}

/// Running sums behind [`LongRunAverages`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceAccumulator {
    slots: u64,
    power: Vec<u64>,
    link: Vec<Vec<u64>>,
    own_to_bs: Vec<u64>,
    relay_to_bs: Vec<u64>,
}

impl ServiceAccumulator {
    pub fn new(n_ms: usize) -> Self {
        Self {
            slots: 0,
            power: vec![0; n_ms],
            link: vec![vec![0; n_ms + 1]; n_ms],
            own_to_bs: vec![0; n_ms],
            relay_to_bs: vec![0; n_ms],
        }
    }

    pub fn record(&mut self, service: &ServiceSummary) {
        self.slots += 1;
        for (i, l) in service.links.iter().enumerate() {
            let Some(t) = l else { continue };
            self.power[i] += t.power_mw;
            match t.receiver {
                Receiver::Bs => {
                    self.link[i][0] += t.rate;
                    match t.source {
                        QueueSelect::Own => self.own_to_bs[i] += t.rate,
                        QueueSelect::Relay => self.relay_to_bs[i] += t.rate,
                    }
                }
                Receiver::Ms(j) => self.link[i][j + 1] += t.rate,
            }
        }
    }

    pub fn averages(&self) -> Result<LongRunAverages> {
        if self.slots == 0 {
            return Err(Error::EmptyTrace);
        }
        let t = self.slots as f64;
        let avg = |v: &Vec<u64>| v.iter().map(|&x| x as f64 / t).collect::<Vec<_>>();
        Ok(LongRunAverages {
            slots: self.slots,
            power: avg(&self.power),
            link: self.link.iter().map(avg).collect(),
            own_to_bs: avg(&self.own_to_bs),
            relay_to_bs: avg(&self.relay_to_bs),
        })
    }
}

/// Time averages of power and service over a trace of slot summaries.
pub fn long_run_metrics<'a, I>(trace: I) -> Result<LongRunAverages>
where
    I: IntoIterator<Item = &'a ServiceSummary>,
{
    let mut iter = trace.into_iter().peekable();
    let n = iter.peek().ok_or(Error::EmptyTrace)?.links.len();
    let mut acc = ServiceAccumulator::new(n);
    for s in iter {
        acc.record(s);
    }
    acc.averages()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tx(
        receiver: Receiver,
        rate: u64,
        power_mw: u64,
        source: QueueSelect,
    ) -> Option<Transmission> {
        Some(Transmission {
            receiver,
            rate,
            power_mw,
            source,
        })
    }

    fn single(x: u64, y: u64, u: u64) -> QueueState {
        QueueState {
            own: vec![x],
            relay: vec![y],
            power: vec![u],
        }
    }

    #[test]
    fn own_queue_examples() {
        let s = ServiceSummary {
            links: vec![tx(Receiver::Bs, 3, 0, QueueSelect::Own)],
        };
        let next = update_queues(
            &single(5, 0, 0),
            &s,
            &[2],
            &[0],
            InflowMode::PacketConserving,
        );
        assert_eq!(next.own, vec![4]);
        let s = ServiceSummary {
            links: vec![tx(Receiver::Bs, 5, 0, QueueSelect::Own)],
        };
        let next = update_queues(
            &single(2, 0, 0),
            &s,
            &[0],
            &[0],
            InflowMode::PacketConserving,
        );
        assert_eq!(next.own, vec![0]);
    }

    #[test]
    fn virtual_queue_examples() {
        let silent = ServiceSummary::silent(1);
        assert_eq!(
            update_queues(
                &single(0, 0, 10),
                &silent,
                &[0],
                &[2],
                InflowMode::PacketConserving
            )
            .power,
            vec![8]
        );
        let s = ServiceSummary {
            links: vec![tx(Receiver::Bs, 0, 5, QueueSelect::Own)],
        };
        assert_eq!(
            update_queues(
                &single(0, 0, 0),
                &s,
                &[0],
                &[2],
                InflowMode::PacketConserving
            )
            .power,
            vec![5]
        );
    }

    #[test]
    fn relay_inflow_modes() {
        let state = QueueState {
            own: vec![3, 0],
            relay: vec![0, 4],
            power: vec![0, 0],
        };
        let s = ServiceSummary {
            links: vec![
                tx(Receiver::Ms(1), 10, 100, QueueSelect::Own),
                tx(Receiver::Bs, 1, 100, QueueSelect::Relay),
            ],
        };
        let faithful = update_queues(&state, &s, &[0, 0], &[0, 0], InflowMode::EquationFaithful);
        let conserving = update_queues(&state, &s, &[0, 0], &[0, 0], InflowMode::PacketConserving);
        assert_eq!(faithful.relay, vec![0, 13]);
        assert_eq!(conserving.relay, vec![0, 6]);
        assert_eq!(faithful.own, vec![0, 0]);
        assert_eq!(delivered_to_bs(&state, &s), 1);
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_value(&QueueState::empty(4)), 0);
        assert_eq!(lyapunov_value(&single(3, 4, 0)), 25);
    }

    #[test]
    fn zero_rate_means_no_arrivals() {
        let cfg = ArrivalConfig {
            rates: vec![0.0; 5],
            a_max: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(draw_arrivals(&cfg, &mut rng), vec![0; 5]);
        }
    }

    #[test]
    fn arrivals_never_exceed_cap() {
        let cfg = ArrivalConfig {
            rates: vec![1e6],
            a_max: 1_000_000,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert!(draw_arrivals(&cfg, &mut rng)[0] <= 1_000_000);
        }
        let tight = ArrivalConfig {
            rates: vec![4.0],
            a_max: 4,
        };
        for _ in 0..1000 {
            assert!(draw_arrivals(&tight, &mut rng)[0] <= 4);
        }
    }

    #[test]
    fn arrival_validation() {
        assert!(ArrivalConfig {
            rates: vec![5.0],
            a_max: 4
        }
        .validate()
        .is_err());
        assert!(ArrivalConfig {
            rates: vec![-1.0],
            a_max: 4
        }
        .validate()
        .is_err());
        assert_eq!(ArrivalConfig::symmetric(3, 20.0).a_max, 60);
    }

    #[test]
    fn long_run_constant_power_and_split() {
        let constant: Vec<_> = (0..10)
            .map(|_| ServiceSummary {
                links: vec![tx(Receiver::Bs, 0, 5, QueueSelect::Own)],
            })
            .collect();
        assert_eq!(long_run_metrics(&constant).unwrap().power, vec![5.0]);

        let alternating: Vec<_> = (0..10)
            .map(|n| {
                let src = if n % 2 == 0 {
                    QueueSelect::Own
                } else {
                    QueueSelect::Relay
                };
                ServiceSummary {
                    links: vec![tx(Receiver::Bs, 4, 1, src)],
                }
            })
            .collect();
        let avg = long_run_metrics(&alternating).unwrap();
        assert_eq!(avg.own_to_bs, vec![2.0]);
        assert_eq!(avg.relay_to_bs, vec![2.0]);
        assert_eq!(avg.link[0][0], 4.0);
    }

    #[test]
    fn long_run_rejects_empty_trace() {
        let empty: Vec<ServiceSummary> = Vec::new();
        assert!(matches!(long_run_metrics(&empty), Err(Error::EmptyTrace)));
    }

    fn arb_service(n: usize) -> impl Strategy<Value = ServiceSummary> {
        let link =
            (0..=n + 1, 0u64..40, 0u64..1000, any::<bool>()).prop_map(move |(r, rate, p, own)| {
                // r == 0: silent, r == 1: BS, r >= 2: MS (r - 2)
                match r {
                    0 => None,
                    1 => tx(
                        Receiver::Bs,
                        rate,
                        p,
                        if own {
                            QueueSelect::Own
                        } else {
                            QueueSelect::Relay
                        },
                    ),
                    r => Some(Transmission {
                        receiver: Receiver::Ms(r - 2),
                        rate,
                        power_mw: p,
                        source: QueueSelect::Own,
                    }),
                }
            });
        proptest::collection::vec(link, n).prop_map(|links| {
            let links = links
                .into_iter()
                .enumerate()
                .map(|(i, l)| match l {
                    Some(t) if t.receiver == Receiver::Ms(i) => None,
                    other => other,
                })
                .collect();
            ServiceSummary { links }
        })
    }

    proptest! {
        #[test]
        fn packet_conserving_balance(
            own in proptest::collection::vec(0u64..50, 4),
            relay in proptest::collection::vec(0u64..50, 4),
            service in arb_service(4),
            arrivals in proptest::collection::vec(0u64..10, 4),
        ) {
            let state = QueueState { own, relay, power: vec![0; 4] };
            let next = update_queues(&state, &service, &arrivals, &[1; 4], InflowMode::PacketConserving);
            let arrived: u64 = arrivals.iter().sum();
            prop_assert_eq!(
                next.total_packets() + delivered_to_bs(&state, &service),
                state.total_packets() + arrived
            );
        }
    }
}
