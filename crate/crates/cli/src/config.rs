//! Experiment files.
//!
//! A file is TOML with one table per concern (`[grid]`, `[policy]`, ...).
//! Every key has a default, unknown keys are rejected, and the resolved
//! form written back by [`Experiment::to_toml`] parses to the same
//! experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use d2d_relay::net::{ChannelParams, GridSpec, MobilityParams};
use d2d_relay::policy::{dbm_to_mw, Matcher, PolicyConfig, PolicyMode, PowerLevelSet};
use d2d_relay::queueing::{default_a_max, ArrivalConfig, InflowMode};
use d2d_relay::sim::{SimConfig, StabilityThresholds, TopologyProcess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    #[default]
    Run,
    Sweep,
    Capacity,
    Region,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Run => "run",
            Kind::Sweep => "sweep",
            Kind::Capacity => "capacity",
            Kind::Region => "region",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub kind: Kind,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub network: NetworkSection,
    pub sim: SimSection,
    pub grid: GridSection,
    pub channel: ChannelParams,
    pub mobility: MobilitySection,
    pub traffic: TrafficSection,
    pub policy: PolicySection,
    pub classify: ClassifySection,
    pub sweep: SweepSection,
    pub capacity: CapacitySection,
    pub region: RegionSection,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            kind: Kind::Run,
            seeds: vec![1],
            out: PathBuf::from("out"),
            network: NetworkSection::default(),
            sim: SimSection::default(),
            grid: GridSection::default(),
            channel: ChannelParams::default(),
            mobility: MobilitySection::default(),
            traffic: TrafficSection::default(),
            policy: PolicySection::default(),
            classify: ClassifySection::default(),
            sweep: SweepSection::default(),
            capacity: CapacitySection::default(),
            region: RegionSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub n_ms: usize,
    pub n_prb: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            n_ms: 60,
            n_prb: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub horizon: u64,
    pub topology: TopologyProcess,
    pub inflow: InflowMode,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: 50_000,
            topology: TopologyProcess::RandomWalk,
            inflow: InflowMode::PacketConserving,
        }
    }
}

/// Coordinates in meters. The BS defaults to the grid center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub extent_x: f64,
    pub extent_y: f64,
    pub spacing: f64,
    pub bs_x: Option<f64>,
    pub bs_y: Option<f64>,
    pub same_point_distance: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            extent_x: 2000.0,
            extent_y: 2000.0,
            spacing: 10.0,
            bs_x: None,
            bs_y: None,
            same_point_distance: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityKind {
    #[default]
    Uniform,
    Lazy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilitySection {
    pub kind: MobilityKind,
    /// Stay probability, `lazy` only.
    pub stay: Option<f64>,
}

impl Default for MobilitySection {
    fn default() -> Self {
        Self {
            kind: MobilityKind::Uniform,
            stay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    /// Symmetric mean arrivals per MS per slot.
    pub arrival_rate: f64,
    /// Per-slot cap; three times the largest rate when absent.
    pub a_max: Option<u64>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            arrival_rate: 0.0,
            a_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub mode: PolicyMode,
    /// Epoch length `T` in slots.
    pub epoch: u64,
    pub budget_dbm: f64,
    pub levels_dbm: Vec<f64>,
    pub matcher: Matcher,
    pub power_unit_mw: u64,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Relay,
            epoch: 1,
            budget_dbm: 28.0,
            levels_dbm: PowerLevelSet::paper_default().dbm(),
            matcher: Matcher::Hungarian,
            power_unit_mw: 300,
        }
    }
}

/// Slope thresholds; `0.01·N` and `0.1·N` when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub s_lo: Option<f64>,
    pub s_hi: Option<f64>,
    pub backlog_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub rates: Vec<f64>,
    pub modes: Vec<PolicyMode>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            rates: vec![18.0, 20.0, 25.0, 28.0],
            modes: vec![PolicyMode::NoRelay, PolicyMode::Relay],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
    pub modes: Vec<PolicyMode>,
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self {
            lo: 5.0,
            hi: 40.0,
            resolution: 1.0,
            modes: vec![PolicyMode::NoRelay, PolicyMode::Relay],
        }
    }
}

/// Grid of arrival vectors `λ_i = (a + offset)·lambda_max_i / points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSection {
    /// Instance file, relative to the experiment file.
    pub instance: PathBuf,
    pub points: usize,
    pub offset: f64,
    /// Per-MS upper end; the service ceiling of each MS when absent.
    pub lambda_max: Option<Vec<f64>>,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            instance: PathBuf::from("tiny_instance.toml"),
            points: 20,
            offset: 0.5,
            lambda_max: None,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<PolicyMode>,
    pub slots: Option<u64>,
    pub arrival_rate: Option<f64>,
}

fn require(ok: bool, field: &str, msg: impl std::fmt::Display) -> Result<()> {
    if !ok {
        bail!("{field}: {msg}");
    }
    Ok(())
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl Experiment {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads, resolves and validates an experiment file. A relative region
    /// instance path is taken relative to the file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut exp =
            Self::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if exp.region.instance.is_relative() {
            if let Some(dir) = path.parent() {
                exp.region.instance = dir.join(&exp.region.instance);
            }
        }
        exp.resolve(overrides)
    }

    /// Applies overrides, fills derived defaults and validates.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(k) = o.kind {
            self.kind = k;
        }
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(m) = o.mode {
            self.policy.mode = m;
            self.sweep.modes = vec![m];
            self.capacity.modes = vec![m];
        }
        if let Some(h) = o.slots {
            self.sim.horizon = h;
        }
        if let Some(r) = o.arrival_rate {
            self.traffic.arrival_rate = r;
            self.sweep.rates = vec![r];
        }

        let g = &mut self.grid;
        require(
            g.spacing.is_finite() && g.spacing > 0.0,
            "grid.spacing",
            format!("must be > 0, got {}", g.spacing),
        )?;
        require(
            finite_nonneg(g.extent_x),
            "grid.extent_x",
            format!("must be >= 0, got {}", g.extent_x),
        )?;
        require(
            finite_nonneg(g.extent_y),
            "grid.extent_y",
            format!("must be >= 0, got {}", g.extent_y),
        )?;
        g.bs_x.get_or_insert(g.extent_x / 2.0);
        g.bs_y.get_or_insert(g.extent_y / 2.0);

        let largest = self
            .sweep
            .rates
            .iter()
            .copied()
            .chain([self.traffic.arrival_rate, self.capacity.hi]);
        let largest: Vec<f64> = largest.collect();
        self.traffic
            .a_max
            .get_or_insert_with(|| default_a_max(&largest).max(1));

        let defaults = StabilityThresholds::for_network(self.network.n_ms);
        self.classify.s_lo.get_or_insert(defaults.s_lo);
        self.classify.s_hi.get_or_insert(defaults.s_hi);

        if self.mobility.kind == MobilityKind::Uniform && self.mobility.stay.is_some() {
            bail!("mobility.stay: only allowed with kind = \"lazy\"");
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        require(
            !self.seeds.is_empty(),
            "seeds",
            "at least one seed is required",
        )?;
        require(self.network.n_ms >= 1, "network.n_ms", "must be >= 1")?;
        require(self.network.n_prb >= 1, "network.n_prb", "must be >= 1")?;
        require(self.sim.horizon >= 1, "sim.horizon", "must be >= 1")?;
        require(self.policy.epoch >= 1, "policy.epoch", "must be >= 1")?;
        require(
            self.policy.budget_dbm.is_finite(),
            "policy.budget_dbm",
            "must be finite",
        )?;
        require(
            (1..=1_000_000).contains(&self.policy.power_unit_mw),
            "policy.power_unit_mw",
            "must be in [1, 1000000]",
        )?;
        PowerLevelSet::from_dbm(&self.policy.levels_dbm).context("policy.levels_dbm")?;
        let r = self.traffic.arrival_rate;
        require(
            finite_nonneg(r),
            "traffic.arrival_rate",
            format!("must be >= 0, got {r}"),
        )?;
        if let Some(stay) = self.mobility.stay {
            require(
                stay > 0.0 && stay < 1.0,
                "mobility.stay",
                format!("must be in (0, 1), got {stay}"),
            )?;
        }
        if self.mobility.kind == MobilityKind::Lazy {
            require(
                self.mobility.stay.is_some(),
                "mobility.stay",
                "required with kind = \"lazy\"",
            )?;
        }
        let (lo, hi) = (
            self.classify.s_lo.unwrap_or(0.0),
            self.classify.s_hi.unwrap_or(0.0),
        );
        require(
            finite_nonneg(lo) && lo < hi,
            "classify.s_lo",
            format!("need 0 <= s_lo < s_hi, got {lo} and {hi}"),
        )?;
        if let Some(b) = self.classify.backlog_bound {
            require(
                finite_nonneg(b),
                "classify.backlog_bound",
                format!("must be >= 0, got {b}"),
            )?;
        }
        require(
            self.sweep.rates.iter().all(|&r| finite_nonneg(r)),
            "sweep.rates",
            "rates must be >= 0",
        )?;
        require(
            !self.sweep.modes.is_empty(),
            "sweep.modes",
            "at least one mode is required",
        )?;
        let c = &self.capacity;
        require(
            finite_nonneg(c.lo) && c.lo < c.hi,
            "capacity.lo",
            format!("need 0 <= lo < hi, got {} and {}", c.lo, c.hi),
        )?;
        require(c.resolution > 0.0, "capacity.resolution", "must be > 0")?;
        require(
            !c.modes.is_empty(),
            "capacity.modes",
            "at least one mode is required",
        )?;
        require(self.region.points >= 1, "region.points", "must be >= 1")?;
        require(
            finite_nonneg(self.region.offset),
            "region.offset",
            "must be >= 0",
        )?;
        if self.kind != Kind::Region {
            self.sim_config(self.policy.mode, self.traffic.arrival_rate, self.seeds[0])?;
        }
        Ok(())
    }

    /// Resolved experiment as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }

    pub fn thresholds(&self) -> StabilityThresholds {
        let d = StabilityThresholds::for_network(self.network.n_ms);
        StabilityThresholds {
            s_lo: self.classify.s_lo.unwrap_or(d.s_lo),
            s_hi: self.classify.s_hi.unwrap_or(d.s_hi),
            backlog_bound: self.classify.backlog_bound,
        }
    }

    pub fn p_bar_mw(&self) -> u64 {
        dbm_to_mw(self.policy.budget_dbm).round() as u64
    }

    /// Simulation config for one mode, symmetric rate and seed.
    pub fn sim_config(&self, mode: PolicyMode, rate: f64, seed: u64) -> Result<SimConfig> {
        let g = &self.grid;
        let bs = (
            g.bs_x.unwrap_or(g.extent_x / 2.0),
            g.bs_y.unwrap_or(g.extent_y / 2.0),
        );
        let grid = GridSpec::new(g.extent_x, g.extent_y, g.spacing, bs, g.same_point_distance)
            .context("grid")?;
        let n = self.network.n_ms;
        let mobility = match self.mobility.kind {
            MobilityKind::Uniform => MobilityParams::uniform(n),
            MobilityKind::Lazy => MobilityParams::lazy(n, self.mobility.stay.unwrap_or(0.5)),
        };
        let mut arrivals = ArrivalConfig::symmetric(n, rate);
        if let Some(a_max) = self.traffic.a_max {
            arrivals.a_max = a_max;
        }
        let config = SimConfig {
            grid,
            channel: self.channel.clone(),
            mobility,
            arrivals,
            policy: PolicyConfig {
                epoch_len: self.policy.epoch,
                p_bar: vec![self.p_bar_mw(); n],
                mode,
                matcher: self.policy.matcher,
                power_unit_mw: self.policy.power_unit_mw,
            },
            levels: PowerLevelSet::from_dbm(&self.policy.levels_dbm)
                .context("policy.levels_dbm")?,
            n_ms: n,
            n_prb: self.network.n_prb,
            horizon: self.sim.horizon,
            seed,
            topology: self.sim.topology,
            inflow: self.sim.inflow,
            initial_positions: None,
        };
        config.validate()?;
        Ok(config)
    }
}
