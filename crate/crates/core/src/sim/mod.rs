//! Slot-driven experiment engine.
//!
//! Within a slot the order is fixed: refresh the stale queue snapshot at
//! epoch boundaries, move the MSs, decide, serve, draw arrivals, update the
//! queues. Arrivals therefore cannot be served in the slot they arrive.

mod capacity;
mod classify;
mod instance;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use capacity::{bisect_capacity, search_capacity, CapacityBracket, Probe};
pub use classify::{
    classify_series, classify_stability, StabilityThresholds, StabilityVerdict, Verdict,
    MIN_CLASSIFY_SLOTS,
};
pub use instance::{run_instance, InstancePolicy, InstanceRun};
pub use trace::{read_trace_csv, write_trace_csv, TraceRow, VerdictReport};

use crate::error::{Error, Result};
use crate::net::{
    stationary_closed_form, stationary_distribution, step_mobility, ChannelParams, GridPoint,
    GridSpec, MobilityParams, NetworkTopology, RateTable,
};
use crate::policy::{decide, GridRates, PolicyConfig, PowerLevelSet, StaleSnapshot};
use crate::queueing::{
    delivered_to_bs, draw_arrivals, lyapunov_value, update_queues, ArrivalConfig, InflowMode,
    LongRunAverages, QueueState, ServiceAccumulator, ServiceSummary,
};

/// How MS positions evolve from slot to slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyProcess {
    /// Each MS follows its mobility chain.
    #[default]
    RandomWalk,
    /// Positions are redrawn every slot from the stationary distribution.
    IidStationary,
}

/// Independent random streams derived from the run seed.
pub(crate) mod streams {
    pub const POSITIONS: u64 = 0;
    pub const MOBILITY: u64 = 1;
    pub const ARRIVALS: u64 = 2;
    pub const POLICY: u64 = 3;
}

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Inverse-CDF sampler over a finite distribution.
#[derive(Debug, Clone)]
pub(crate) struct CdfSampler {
    cdf: Vec<f64>,
}

impl CdfSampler {
    pub fn new(probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub channel: ChannelParams,
    pub mobility: MobilityParams,
    pub arrivals: ArrivalConfig,
    pub policy: PolicyConfig,
    pub levels: PowerLevelSet,
    pub n_ms: usize,
    pub n_prb: usize,
    pub horizon: u64,
    pub seed: u64,
    pub topology: TopologyProcess,
    pub inflow: InflowMode,
    /// Starting positions; uniform over the grid when absent.
    pub initial_positions: Option<Vec<GridPoint>>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_ms == 0 {
            return bad("n_ms must be >= 1".into());
        }
        if self.n_prb == 0 {
            return bad("n_prb must be >= 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.mobility.n_ms() != self.n_ms {
            return bad(format!(
                "mobility has {} rules for {} MSs",
                self.mobility.n_ms(),
                self.n_ms
            ));
        }
        if self.arrivals.rates.len() != self.n_ms {
            return bad(format!(
                "{} arrival rates for {} MSs",
                self.arrivals.rates.len(),
                self.n_ms
            ));
        }
        if self.policy.p_bar.len() != self.n_ms {
            return bad(format!(
                "{} power budgets for {} MSs",
                self.policy.p_bar.len(),
                self.n_ms
            ));
        }
        if let Some(p) = &self.initial_positions {
            if p.len() != self.n_ms || !p.iter().all(|&x| self.grid.contains(x)) {
                return bad("initial positions must give one grid point per MS".into());
            }
        }
        self.arrivals.validate()?;
        self.policy.validate()?;
        self.channel.validate()?;
        self.mobility.validate(&self.grid)?;
        Ok(())
    }

    /// Same configuration with every MS at arrival rate `rate`.
    pub fn with_symmetric_rate(&self, rate: f64) -> Self {
        let mut c = self.clone();
        c.arrivals = ArrivalConfig::symmetric(self.n_ms, rate);
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn rate_table(&self) -> RateTable {
        RateTable::new(&self.grid, &self.channel, &self.levels.dbm())
    }
}

/// Per-slot totals and end-of-run per-MS statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTrace {
    pub seed: u64,
    pub n_ms: usize,
    pub epoch_len: u64,
    /// Σ_i X_i after each slot.
    pub sum_own: Vec<u64>,
    /// Σ_i Y_i after each slot.
    pub sum_relay: Vec<u64>,
    /// Σ_i U_i after each slot.
    pub sum_power_queue: Vec<u64>,
    /// Total transmit power spent in each slot, mW.
    pub power: Vec<u64>,
    pub lyapunov: Vec<u128>,
    pub averages: LongRunAverages,
    /// Time-averaged X_i + Y_i.
    pub mean_backlog: Vec<f64>,
    pub max_power_queue: Vec<u64>,
    pub arrived: u64,
    pub delivered: u64,
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.sum_own.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum_own.is_empty()
    }

    /// Σ_i (X_i + Y_i) per slot.
    pub fn backlog(&self) -> Vec<f64> {
        self.sum_own
            .iter()
            .zip(&self.sum_relay)
            .map(|(x, y)| (x + y) as f64)
            .collect()
    }

    /// Time average of Σ_i (X_i + Y_i).
    pub fn mean_total_backlog(&self) -> f64 {
        self.mean_backlog.iter().sum()
    }

    /// Packets delivered to the BS per slot.
    pub fn throughput(&self) -> f64 {
        self.delivered as f64 / self.len().max(1) as f64
    }

    /// Whether every MS's average power stays within `p̄_i + max_n U_i(n)/horizon`.
    pub fn power_constraint_holds(&self, p_bar: &[u64]) -> bool {
        let t = self.len() as f64;
        self.averages
            .power
            .iter()
            .zip(p_bar)
            .zip(&self.max_power_queue)
            .all(|((&avg, &pb), &umax)| avg <= pb as f64 + umax as f64 / t + 1e-9)
    }

    /// Mean change of the Lyapunov function over one epoch, from epoch
    /// starts where Σ(X + Y + U) is at or above the given quantile.
    pub fn lyapunov_drift_above(&self, quantile: f64) -> Option<f64> {
        let t = self.epoch_len.max(1) as usize;
        let starts: Vec<usize> = (0..self.len().saturating_sub(t)).step_by(t).collect();
        if starts.is_empty() {
            return None;
        }
        let total = |n: usize| self.sum_own[n] + self.sum_relay[n] + self.sum_power_queue[n];
        let mut levels: Vec<u64> = starts.iter().map(|&n| total(n)).collect();
        levels.sort_unstable();
        let cut = levels[((levels.len() - 1) as f64 * quantile).round() as usize];
        let drifts: Vec<f64> = starts
            .iter()
            .filter(|&&n| total(n) >= cut)
            .map(|&n| self.lyapunov[n + t] as f64 - self.lyapunov[n] as f64)
            .collect();
        (!drifts.is_empty()).then(|| drifts.iter().sum::<f64>() / drifts.len() as f64)
    }
}

/// Collects the trace while a run advances.
pub(crate) struct Recorder {
    trace_cap: usize,
    sum_own: Vec<u64>,
    sum_relay: Vec<u64>,
    sum_power_queue: Vec<u64>,
    power: Vec<u64>,
    lyapunov: Vec<u128>,
    service: ServiceAccumulator,
    backlog: Vec<u128>,
    max_power_queue: Vec<u64>,
    arrived: u64,
    delivered: u64,
}

impl Recorder {
    pub fn new(n_ms: usize, horizon: u64) -> Self {
        let cap = horizon as usize;
        Self {
            trace_cap: cap,
            sum_own: Vec::with_capacity(cap),
            sum_relay: Vec::with_capacity(cap),
            sum_power_queue: Vec::with_capacity(cap),
            power: Vec::with_capacity(cap),
            lyapunov: Vec::with_capacity(cap),
            service: ServiceAccumulator::new(n_ms),
            backlog: vec![0; n_ms],
            max_power_queue: vec![0; n_ms],
            arrived: 0,
            delivered: 0,
        }
    }

    pub fn record(
        &mut self,
        state: &QueueState,
        service: &ServiceSummary,
        arrivals: &[u64],
        delivered: u64,
    ) {
        debug_assert!(self.sum_own.len() < self.trace_cap);
        self.sum_own.push(state.total_own());
        self.sum_relay.push(state.total_relay());
        self.sum_power_queue.push(state.total_power());
        self.power.push(service.total_power());
        self.lyapunov.push(lyapunov_value(state));
        self.service.record(service);
        for i in 0..state.n_ms() {
            self.backlog[i] += (state.own[i] + state.relay[i]) as u128;
            self.max_power_queue[i] = self.max_power_queue[i].max(state.power[i]);
        }
        self.arrived += arrivals.iter().sum::<u64>();
        self.delivered += delivered;
    }

    pub fn finish(self, seed: u64, epoch_len: u64) -> Result<MetricsTrace> {
        let slots = self.sum_own.len() as f64;
        Ok(MetricsTrace {
            seed,
            n_ms: self.backlog.len(),
            epoch_len,
            averages: self.service.averages()?,
            mean_backlog: self.backlog.iter().map(|&b| b as f64 / slots).collect(),
            sum_own: self.sum_own,
            sum_relay: self.sum_relay,
            sum_power_queue: self.sum_power_queue,
            power: self.power,
            lyapunov: self.lyapunov,
            max_power_queue: self.max_power_queue,
            arrived: self.arrived,
            delivered: self.delivered,
        })
    }
}

/// Runs one simulation on the grid network.
pub fn run(config: &SimConfig) -> Result<MetricsTrace> {
    config.validate()?;
    run_with_table(config, &config.rate_table())
}

/// [`run`] with a precomputed rate table, for repeated runs on one grid.
pub fn run_with_table(config: &SimConfig, table: &RateTable) -> Result<MetricsTrace> {
    config.validate()?;
    if table.n_levels() != config.levels.len() {
        return Err(Error::InvalidConfig(
            "rate table does not match the power levels".into(),
        ));
    }
    let grid = &config.grid;
    let n = config.n_ms;
    let mut pos_rng = stream(config.seed, streams::POSITIONS);
    let mut mob_rng = stream(config.seed, streams::MOBILITY);
    let mut arr_rng = stream(config.seed, streams::ARRIVALS);

    let positions = match &config.initial_positions {
        Some(p) => p.clone(),
        None => (0..n)
            .map(|_| grid.point(pos_rng.random_range(0..grid.n_points())))
            .collect(),
    };
    let samplers = match config.topology {
        TopologyProcess::RandomWalk => Vec::new(),
        TopologyProcess::IidStationary => (0..n)
            .map(|i| {
                let pi = match stationary_closed_form(grid, &config.mobility, i) {
                    Some(pi) => pi,
                    None => stationary_distribution(grid, &config.mobility, i)?,
                };
                Ok(CdfSampler::new(&pi))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let mut topology = NetworkTopology::new(0, positions);
    let mut state = QueueState::empty(n);
    let mut snapshot = StaleSnapshot::new(state.clone(), config.policy.epoch_len);
    let mut rec = Recorder::new(n, config.horizon);

    for slot in 0..config.horizon {
        snapshot.refresh(slot, &state);
        topology = match config.topology {
            TopologyProcess::RandomWalk => {
                step_mobility(&topology, grid, &config.mobility, &mut mob_rng)
            }
            TopologyProcess::IidStationary => NetworkTopology::new(
                topology.slot + 1,
                samplers
                    .iter()
                    .map(|s| grid.point(s.sample(&mut mob_rng)))
                    .collect(),
            ),
        };
        let rates = GridRates {
            table,
            positions: &topology.positions,
            bs: grid.bs(),
        };
        let service = decide(
            &snapshot,
            &rates,
            &config.levels,
            &config.policy,
            config.n_prb,
        )
        .service();
        let arrivals = draw_arrivals(&config.arrivals, &mut arr_rng);
        let delivered = delivered_to_bs(&state, &service);
        state = update_queues(
            &state,
            &service,
            &arrivals,
            &config.policy.p_bar,
            config.inflow,
        );
        rec.record(&state, &service, &arrivals, delivered);
    }
    rec.finish(config.seed, config.policy.epoch_len)
}
