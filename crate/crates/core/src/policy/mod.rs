//! Online back-pressure scheduling with power control.
//!
//! In every slot the scheduler maximizes, over PRB assignments, receivers
//! and power levels,
//!
//! ```text
//! Σ_i [ Σ_j (X_i − Y_j)·μ_ij + max(X_i, Y_i)·μ_i0 ] − Σ_i U_i·Σ_j ℓ_ij
//! ```
//!
//! using queue lengths frozen at the start of the current `T`-slot epoch.
//! Under orthogonal PRBs the weight of an (MS, PRB) edge does not depend on
//! the PRB, so the problem reduces to picking the best link of every MS
//! and then a maximum-weight matching of MSs to PRBs.

mod levels;
pub mod matching;
mod vector;

use serde::{Deserialize, Serialize};

pub use levels::{dbm_to_mw, mw_to_dbm, PowerLevel, PowerLevelSet};
pub use matching::{matching_weight, max_weight_matching, top_rows_matching};
pub use vector::{max_weight_vector, vector_objective, VectorDecision};

use crate::error::{Error, Result};
use crate::net::{GridPoint, RateTable};
use crate::queueing::{QueueSelect, QueueState, Receiver, ServiceSummary, Transmission};

/// Relay-assisted operation, or direct uplink only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    #[default]
    Relay,
    NoRelay,
}

impl std::fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyMode::Relay => "relay",
            PolicyMode::NoRelay => "no-relay",
        })
    }
}

impl std::str::FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relay" => Ok(PolicyMode::Relay),
            "no-relay" => Ok(PolicyMode::NoRelay),
            other => Err(format!(
                "unknown mode `{other}` (expected relay | no-relay)"
            )),
        }
    }
}

/// Solver used for the PRB assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matcher {
    /// Kuhn-Munkres on the full MS x PRB matrix.
    #[default]
    Hungarian,
    /// Top-`#PRB` MS weights; exact when PRB columns are identical.
    TopRows,
}

/// How queue backlogs and power costs combine into a link weight.
///
/// The weight is `coef·μ − (U/unit)·(P/unit)`, evaluated exactly as
/// `unit²·coef·μ − U·P` with `U` and `P` in mW. The unit only rescales the
/// power cost against backlog; `unit = 1000` prices power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Weighting {
    pub mode: PolicyMode,
    pub power_unit_mw: u64,
}

impl Weighting {
    pub fn new(mode: PolicyMode, power_unit_mw: u64) -> Self {
        Self {
            mode,
            power_unit_mw,
        }
    }

    #[inline]
    pub(crate) fn gamma(&self, coef: i64, rate: u64, u: u64, power_mw: u64) -> i64 {
        let unit = self.power_unit_mw as i64;
        coef.saturating_mul(rate as i64).saturating_mul(unit * unit)
            - (u as i64).saturating_mul(power_mw as i64)
    }
}

impl From<PolicyMode> for Weighting {
    fn from(mode: PolicyMode) -> Self {
        Self {
            mode,
            power_unit_mw: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Epoch length `T` in slots.
    pub epoch_len: u64,
    /// Average power budget per MS in mW.
    pub p_bar: Vec<u64>,
    pub mode: PolicyMode,
    pub matcher: Matcher,
    /// Power unit of the weight, see [`Weighting`].
    pub power_unit_mw: u64,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_len == 0 {
            return Err(Error::InvalidConfig("policy.epoch must be >= 1".into()));
        }
        if self.power_unit_mw == 0 || self.power_unit_mw > 1_000_000 {
            return Err(Error::InvalidConfig(
                "policy.power_unit_mw must be in [1, 1000000]".into(),
            ));
        }
        if self.p_bar.contains(&0) {
            return Err(Error::InvalidConfig(
                "policy power budget must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn weighting(&self) -> Weighting {
        Weighting::new(self.mode, self.power_unit_mw)
    }
}

/// Queue lengths frozen at the start of an epoch `[KT, (K+1)T − 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaleSnapshot {
    pub state: QueueState,
    pub epoch: u64,
    pub epoch_len: u64,
}

impl StaleSnapshot {
    pub fn new(state: QueueState, epoch_len: u64) -> Self {
        Self {
            state,
            epoch: 0,
            epoch_len,
        }
    }

    pub fn is_due(&self, slot: u64) -> bool {
        slot.is_multiple_of(self.epoch_len)
    }

    /// Copies `current` when `slot` starts a new epoch. Returns whether it did.
    pub fn refresh(&mut self, slot: u64, current: &QueueState) -> bool {
        if self.is_due(slot) {
            self.state.clone_from(current);
            self.epoch = slot / self.epoch_len;
            true
        } else {
            false
        }
    }
}

/// Per-slot link rates in packets, indexed by power level.
pub trait LinkRates {
    fn n_ms(&self) -> usize;
    fn rate(&self, tx: usize, rx: Receiver, level: usize) -> u64;
}

/// Rates for the current topology, looked up in a precomputed table.
pub struct GridRates<'a> {
    pub table: &'a RateTable,
    pub positions: &'a [GridPoint],
    pub bs: GridPoint,
}

impl LinkRates for GridRates<'_> {
    fn n_ms(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    fn rate(&self, tx: usize, rx: Receiver, level: usize) -> u64 {
        let to = match rx {
            Receiver::Bs => self.bs,
            Receiver::Ms(j) => self.positions[j],
        };
        self.table.rate(self.positions[tx], to, level)
    }
}

/// Explicit rate table `rates[tx][rx][level]`, where `rx = 0` is the BS and
/// `rx = j + 1` is MS `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateMatrix {
    pub rates: Vec<Vec<Vec<u64>>>,
}

impl LinkRates for RateMatrix {
    fn n_ms(&self) -> usize {
        self.rates.len()
    }

    fn rate(&self, tx: usize, rx: Receiver, level: usize) -> u64 {
        let col = match rx {
            Receiver::Bs => 0,
            Receiver::Ms(j) => j + 1,
        };
        self.rates[tx][col][level]
    }
}

/// Best power on one link and its back-pressure weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerChoice {
    /// `None` means stay silent.
    pub level: Option<usize>,
    pub gamma: i64,
    pub rate: u64,
}

impl PowerChoice {
    pub const SILENT: PowerChoice = PowerChoice {
        level: None,
        gamma: 0,
        rate: 0,
    };
}

/// Queue differential multiplying the rate of `tx -> rx`, or `None` when
/// the link is not allowed in this mode.
fn backlog_coefficient(tx: usize, rx: Receiver, q: &QueueState, mode: PolicyMode) -> Option<i64> {
    match (rx, mode) {
        (Receiver::Bs, PolicyMode::Relay) => Some(q.own[tx].max(q.relay[tx]) as i64),
        (Receiver::Bs, PolicyMode::NoRelay) => Some(q.own[tx] as i64),
        (Receiver::Ms(j), PolicyMode::Relay) if j != tx => {
            Some(q.own[tx] as i64 - q.relay[j] as i64)
        }
        (Receiver::Ms(_), _) => None,
    }
}

/// Power level maximizing `coef·μ(P) − U_tx·P` over the level set and
/// silence. Ties go to the lower power, so transmitting needs `γ > 0`.
pub fn opt_pow<L: LinkRates + ?Sized>(
    tx: usize,
    rx: Receiver,
    snapshot: &QueueState,
    rates: &L,
    levels: &PowerLevelSet,
    weighting: Weighting,
) -> PowerChoice {
    let Some(coef) = backlog_coefficient(tx, rx, snapshot, weighting.mode) else {
        return PowerChoice::SILENT;
    };
    if coef <= 0 {
        // Every level then has γ <= 0.
        return PowerChoice::SILENT;
    }
    let u = snapshot.power[tx];
    let mut best = PowerChoice::SILENT;
    for (l, level) in levels.iter().enumerate() {
        let rate = rates.rate(tx, rx, l);
        let gamma = weighting.gamma(coef, rate, u, level.mw);
        if gamma > best.gamma {
            best = PowerChoice {
                level: Some(l),
                gamma,
                rate,
            };
        }
    }
    best
}

/// Best link of one MS across all receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkChoice {
    pub receiver: Receiver,
    pub power: PowerChoice,
}

/// Bipartite MS x PRB graph. Every PRB column of an MS carries the same
/// weight, the `gamma` of its best link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkWeights {
    pub best: Vec<LinkChoice>,
    pub n_prb: usize,
}

impl LinkWeights {
    pub fn weight(&self, ms: usize, _prb: usize) -> i64 {
        self.best[ms].power.gamma
    }

    pub fn row_weights(&self) -> Vec<i64> {
        self.best.iter().map(|c| c.power.gamma).collect()
    }

    pub fn dense(&self) -> Vec<Vec<i64>> {
        self.best
            .iter()
            .map(|c| vec![c.power.gamma; self.n_prb])
            .collect()
    }
}

/// Weights of every (MS, PRB) edge together with the receiver and power
/// achieving them. Receivers are scanned BS first, then MSs by index; the
/// first strict maximum wins.
pub fn build_link_weights<L: LinkRates + ?Sized>(
    snapshot: &QueueState,
    rates: &L,
    levels: &PowerLevelSet,
    weighting: Weighting,
    n_prb: usize,
) -> LinkWeights {
    let n = rates.n_ms();
    let best = (0..n)
        .map(|tx| {
            let mut best = LinkChoice {
                receiver: Receiver::Bs,
                power: opt_pow(tx, Receiver::Bs, snapshot, rates, levels, weighting),
            };
            if weighting.mode == PolicyMode::Relay {
                for j in (0..n).filter(|&j| j != tx) {
                    let c = opt_pow(tx, Receiver::Ms(j), snapshot, rates, levels, weighting);
                    if c.gamma > best.power.gamma {
                        best = LinkChoice {
                            receiver: Receiver::Ms(j),
                            power: c,
                        };
                    }
                }
            }
            best
        })
        .collect();
    LinkWeights { best, n_prb }
}

/// A link granted to one MS for the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledLink {
    pub prb: usize,
    pub receiver: Receiver,
    pub level: usize,
    pub power_mw: u64,
    pub rate: u64,
    pub source: QueueSelect,
    pub gamma: i64,
}

/// PRB assignment and per-transmitter link parameters for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingDecision {
    /// MS holding each PRB.
    pub prb_owner: Vec<Option<usize>>,
    /// Link of each MS, if it transmits.
    pub links: Vec<Option<ScheduledLink>>,
}

impl SchedulingDecision {
    pub fn silent(n_ms: usize, n_prb: usize) -> Self {
        Self {
            prb_owner: vec![None; n_prb],
            links: vec![None; n_ms],
        }
    }

    /// Sum of the back-pressure weights of the scheduled links.
    pub fn objective(&self) -> i64 {
        self.links.iter().flatten().map(|l| l.gamma).sum()
    }

    pub fn service(&self) -> ServiceSummary {
        ServiceSummary {
            links: self
                .links
                .iter()
                .map(|l| {
                    l.map(|l| Transmission {
                        receiver: l.receiver,
                        rate: l.rate,
                        power_mw: l.power_mw,
                        source: l.source,
                    })
                })
                .collect(),
        }
    }

    pub fn total_power(&self) -> u64 {
        self.links.iter().flatten().map(|l| l.power_mw).sum()
    }

    /// One PRB per MS, one MS per PRB, PRB tables consistent.
    pub fn is_consistent(&self) -> bool {
        let owners_ok = self.prb_owner.iter().enumerate().all(|(prb, o)| match o {
            None => true,
            Some(ms) => self
                .links
                .get(*ms)
                .copied()
                .flatten()
                .is_some_and(|l| l.prb == prb),
        });
        let links_ok = self.links.iter().enumerate().all(|(ms, l)| match l {
            None => true,
            Some(l) => {
                self.prb_owner.get(l.prb) == Some(&Some(ms))
                    && l.receiver != Receiver::Ms(ms)
                    && (matches!(l.receiver, Receiver::Bs) || l.source == QueueSelect::Own)
            }
        });
        owners_ok && links_ok
    }
}

/// One slot of the `T`-step back-pressure policy on the given rates.
///
/// With `epoch_len = 1` the snapshot is the current state and this is the
/// per-slot max-weight rule.
pub fn decide<L: LinkRates + ?Sized>(
    snapshot: &StaleSnapshot,
    rates: &L,
    levels: &PowerLevelSet,
    config: &PolicyConfig,
    n_prb: usize,
) -> SchedulingDecision {
    let q = &snapshot.state;
    let weights = build_link_weights(q, rates, levels, config.weighting(), n_prb);
    let assignment = match config.matcher {
        Matcher::Hungarian => max_weight_matching(&weights.dense()),
        Matcher::TopRows => top_rows_matching(&weights.row_weights(), n_prb),
    };
    let mut decision = SchedulingDecision::silent(rates.n_ms(), n_prb);
    for (ms, prb) in assignment.into_iter().enumerate() {
        let Some(prb) = prb else { continue };
        let choice = weights.best[ms];
        let Some(level) = choice.power.level else {
            continue;
        };
        let source = match (choice.receiver, config.mode) {
            (Receiver::Bs, PolicyMode::Relay) if q.relay[ms] > q.own[ms] => QueueSelect::Relay,
            _ => QueueSelect::Own,
        };
        decision.prb_owner[prb] = Some(ms);
        decision.links[ms] = Some(ScheduledLink {
            prb,
            receiver: choice.receiver,
            level,
            power_mw: levels.get(level).mw,
            rate: choice.power.rate,
            source,
            gamma: choice.power.gamma,
        });
    }
    decision
}
