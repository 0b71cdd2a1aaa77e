use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{classify_stability, run_with_table, SimConfig, StabilityThresholds, Verdict};

/// Verdicts of one symmetric rate over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rate: f64,
    pub verdicts: Vec<Verdict>,
}

impl Probe {
    /// Strict majority of stable verdicts; inconclusive runs count against.
    pub fn is_stable(&self) -> bool {
        2 * self.count(Verdict::Stable) > self.verdicts.len()
    }

    pub fn is_unstable(&self) -> bool {
        2 * self.count(Verdict::Unstable) > self.verdicts.len()
    }

    fn count(&self, v: Verdict) -> usize {
        self.verdicts.iter().filter(|&&x| x == v).count()
    }

    fn summary(&self) -> String {
        self.verdicts
            .iter()
            .map(Verdict::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Final bracket on the largest stabilizable symmetric rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    pub lo: f64,
    pub hi: f64,
    /// Every probe in evaluation order, endpoints first.
    pub probes: Vec<Probe>,
}

/// Bisection on a probe function. `lo` must probe stable and `hi` unstable.
pub fn bisect_capacity<F>(
    lo: f64,
    hi: f64,
    resolution: f64,
    mut probe: F,
) -> Result<CapacityBracket>
where
    F: FnMut(f64) -> Result<Probe>,
{
    if !(lo < hi) || !(resolution > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need lo < hi and resolution > 0, got [{lo}, {hi}] by {resolution}"
        )));
    }
    let p_lo = probe(lo)?;
    if !p_lo.is_stable() {
        return Err(Error::CapacityPrecondition {
            rate: lo,
            expected: "stable",
            observed: p_lo.summary(),
        });
    }
    let p_hi = probe(hi)?;
    if !p_hi.is_unstable() {
        return Err(Error::CapacityPrecondition {
            rate: hi,
            expected: "unstable",
            observed: p_hi.summary(),
        });
    }
    let mut probes = vec![p_lo, p_hi];
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid)?;
        if p.is_stable() {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(p);
    }
    Ok(CapacityBracket { lo, hi, probes })
}

/// Largest symmetric arrival rate the network stabilizes, to within
/// `resolution`. Seeds of a probe run in parallel.
pub fn search_capacity(
    template: &SimConfig,
    lo: f64,
    hi: f64,
    resolution: f64,
    seeds: &[u64],
    thresholds: &StabilityThresholds,
) -> Result<CapacityBracket> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "capacity search needs at least one seed".into(),
        ));
    }
    template.validate()?;
    let table = template.rate_table();
    bisect_capacity(lo, hi, resolution, |rate| {
        let config = template.with_symmetric_rate(rate);
        let verdicts = seeds
            .par_iter()
            .map(|&seed| {
                let trace = run_with_table(&config.with_seed(seed), &table)?;
                classify_stability(&trace, thresholds).map(|v| v.verdict)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Probe { rate, verdicts })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threshold_probe(threshold: f64) -> impl FnMut(f64) -> Result<Probe> {
        move |rate| {
            let v = if rate < threshold {
                Verdict::Stable
            } else {
                Verdict::Unstable
            };
            Ok(Probe {
                rate,
                verdicts: vec![v; 3],
            })
        }
    }

    #[test]
    fn monotone_predicate_is_bracketed() {
        for threshold in [1.3, 7.77, 9.999] {
            let b = bisect_capacity(0.0, 10.0, 0.01, threshold_probe(threshold)).unwrap();
            assert!(
                b.lo <= threshold && threshold <= b.hi,
                "{threshold}: [{}, {}]",
                b.lo,
                b.hi
            );
            assert!(b.hi - b.lo <= 0.01);
        }
    }

    #[test]
    fn endpoints_are_checked() {
        let err = bisect_capacity(5.0, 10.0, 0.1, threshold_probe(2.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::CapacityPrecondition {
                expected: "stable",
                ..
            }
        ));
        let err = bisect_capacity(0.0, 1.0, 0.1, threshold_probe(2.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::CapacityPrecondition {
                expected: "unstable",
                ..
            }
        ));
    }

    #[test]
    fn inconclusive_counts_as_not_stable() {
        let p = Probe {
            rate: 1.0,
            verdicts: vec![
                Verdict::Stable,
                Verdict::Inconclusive,
                Verdict::Inconclusive,
            ],
        };
        assert!(!p.is_stable() && !p.is_unstable());
        let p = Probe {
            rate: 1.0,
            verdicts: vec![Verdict::Stable, Verdict::Stable, Verdict::Unstable],
        };
        assert!(p.is_stable());
    }
}
