use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One allowed transmit power. `mw` is the integer milliwatt value charged
/// to the virtual power queue; `dbm` feeds the channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLevel {
    pub dbm: f64,
    pub mw: u64,
}

/// Strictly increasing, nonempty set of transmit powers. Silence is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLevelSet {
    levels: Vec<PowerLevel>,
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

impl PowerLevelSet {
    pub fn from_dbm(dbm: &[f64]) -> Result<Self> {
        let levels = dbm
            .iter()
            .map(|&d| PowerLevel {
                dbm: d,
                mw: dbm_to_mw(d).round() as u64,
            })
            .collect();
        Self::new(levels)
    }

    pub fn from_mw(mw: &[u64]) -> Result<Self> {
        let levels = mw
            .iter()
            .map(|&m| PowerLevel {
                dbm: mw_to_dbm(m as f64),
                mw: m,
            })
            .collect();
        Self::new(levels)
    }

    fn new(levels: Vec<PowerLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidPowerLevels(
                "at least one level is required".into(),
            ));
        }
        for l in &levels {
            if !l.dbm.is_finite() || l.mw == 0 {
                return Err(Error::InvalidPowerLevels(format!(
                    "level {} dBm rounds to 0 mW",
                    l.dbm
                )));
            }
        }
        if levels
            .windows(2)
            .any(|w| !(w[0].dbm < w[1].dbm) || w[0].mw >= w[1].mw)
        {
            return Err(Error::InvalidPowerLevels(
                "levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    /// The ten levels 100, 200, ..., 1000 mW expressed in dBm.
    pub fn paper_default() -> Self {
        Self::from_dbm(&[
            20.0, 23.01, 24.77, 26.02, 26.99, 27.78, 28.45, 29.03, 29.54, 30.0,
        ])
        .expect("static level set is valid")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get(&self, idx: usize) -> PowerLevel {
        self.levels[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PowerLevel> + '_ {
        self.levels.iter()
    }

    pub fn dbm(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.dbm).collect()
    }

    pub fn max(&self) -> PowerLevel {
        *self.levels.last().expect("nonempty")
    }
}
