//! Physical-layer mapping from (distance, transmit power) to a per-slot
//! rate in whole packets.
//!
//! ```text
//! PL(d)  = 10·α·log10(d) + β + 10·γ·log10(f_GHz)            [dB]
//! N      = N0 + 10·log10(B) + NF                            [dBm]
//! SNR    = P − PL(d) − N                                    [dB]
//! rate   = floor(B · T_slot · log2(1 + 10^(SNR/10)) / bits_per_packet)
//! ```
//!
//! One PRB per transmitter and no interference between PRBs, so the rate of
//! a link depends only on its own geometry and power.

use serde::{Deserialize, Serialize};

use super::grid::{GridPoint, GridSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Distance exponent (unitless).
    pub abg_alpha: f64,
    /// Offset in dB.
    pub abg_beta: f64,
    /// Frequency exponent (unitless).
    pub abg_gamma: f64,
    pub carrier_freq_ghz: f64,
    pub prb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bits_per_packet: u32,
    pub slot_duration_s: f64,
}

impl Default for ChannelParams {
    /// UMi street-canyon NLOS constants, thermal noise with a 7 dB receiver
    /// noise figure over a 200 kHz PRB (10 MHz split into 50 PRBs), 3.5 GHz
    /// carrier, 25 000-bit packets.
    fn default() -> Self {
        Self {
            abg_alpha: 3.5,
            abg_beta: 24.4,
            abg_gamma: 1.9,
            carrier_freq_ghz: 3.5,
            prb_bandwidth_hz: 200e3,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            bits_per_packet: 25_000,
            slot_duration_s: DEFAULT_SLOT_DURATION_S,
        }
    }
}

/// Default slot length. No value is published for the reference setup;
/// 1.55 s puts the capacity of the 60-MS, 50-PRB, 2 km network near 20
/// packets per slot without relaying and near 25 with it.
pub const DEFAULT_SLOT_DURATION_S: f64 = 1.55;

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("abg_alpha", self.abg_alpha),
            ("abg_gamma", self.abg_gamma),
            ("carrier_freq_ghz", self.carrier_freq_ghz),
            ("prb_bandwidth_hz", self.prb_bandwidth_hz),
            ("slot_duration_s", self.slot_duration_s),
        ];
        for (name, v) in positive {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "channel.{name} must be >= 0, got {v}"
                )));
            }
        }
        if self.prb_bandwidth_hz == 0.0
            || self.slot_duration_s == 0.0
            || self.carrier_freq_ghz == 0.0
        {
            return Err(Error::InvalidConfig(
                "channel bandwidth, slot duration and carrier frequency must be > 0".into(),
            ));
        }
        if self.bits_per_packet == 0 {
            return Err(Error::InvalidConfig(
                "channel.bits_per_packet must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Noise power over one PRB in dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.prb_bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Rate in packets per slot over distance `d` at `power_dbm`, or zero
    /// when the transmitter is silent.
    pub fn rate_at_distance(&self, d: f64, power_dbm: Option<f64>) -> Result<u64> {
        let Some(p) = power_dbm else { return Ok(0) };
        let snr_db = p - path_loss_db(d, self)? - self.noise_dbm();
        let snr = 10f64.powf(snr_db / 10.0);
        let bits = self.prb_bandwidth_hz * self.slot_duration_s * (1.0 + snr).log2();
        Ok((bits / self.bits_per_packet as f64).floor() as u64)
    }
}

/// Alpha-beta-gamma path loss in dB.
pub fn path_loss_db(d: f64, ch: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(10.0 * ch.abg_alpha * d.log10()
        + ch.abg_beta
        + 10.0 * ch.abg_gamma * ch.carrier_freq_ghz.log10())
}

/// Packets per slot on the link `tx -> rx`.
pub fn link_rate(
    tx: GridPoint,
    rx: GridPoint,
    power_dbm: Option<f64>,
    ch: &ChannelParams,
    grid: &GridSpec,
) -> u64 {
    ch.rate_at_distance(grid.distance(tx, rx), power_dbm)
        .expect("grid distances are positive")
}

/// Rates for every grid offset and power level, precomputed once per run.
///
/// Rates depend on the two endpoints only through `(|dx|, |dy|)`.
#[derive(Debug, Clone)]
pub struct RateTable {
    nx: usize,
    ny: usize,
    n_levels: usize,
    rates: Vec<u64>,
}

impl RateTable {
    pub fn new(grid: &GridSpec, ch: &ChannelParams, levels_dbm: &[f64]) -> Self {
        let (nx, ny, n_levels) = (grid.nx() as usize, grid.ny() as usize, levels_dbm.len());
        let mut rates = Vec::with_capacity(nx * ny * n_levels);
        for dx in 0..nx {
            for dy in 0..ny {
                let d = grid.distance_by_offset(dx as u32, dy as u32);
                for &p in levels_dbm {
                    rates.push(ch.rate_at_distance(d, Some(p)).expect("positive distance"));
                }
            }
        }
        Self {
            nx,
            ny,
            n_levels,
            rates,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    #[inline]
    pub fn rate(&self, a: GridPoint, b: GridPoint, level: usize) -> u64 {
        let dx = a.x.abs_diff(b.x) as usize;
        let dy = a.y.abs_diff(b.y) as usize;
        debug_assert!(dx < self.nx && dy < self.ny && level < self.n_levels);
        self.rates[(dx * self.ny + dy) * self.n_levels + level]
    }

    /// Largest rate over all offsets and levels (the same-point link at
    /// full power).
    pub fn max_rate(&self) -> u64 {
        self.rates.iter().copied().max().unwrap_or(0)
    }
}
