use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::MetricsTrace;

/// Shortest trace the slope test accepts.
pub const MIN_CLASSIFY_SLOTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Slope thresholds in packets per slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityThresholds {
    pub s_lo: f64,
    pub s_hi: f64,
    /// Largest final backlog compatible with a stable verdict; defaults to
    /// `s_hi · horizon`.
    pub backlog_bound: Option<f64>,
}

impl StabilityThresholds {
    /// `s_lo = 0.01·N`, `s_hi = 0.1·N`.
    pub fn for_network(n_ms: usize) -> Self {
        Self {
            s_lo: 0.01 * n_ms as f64,
            s_hi: 0.1 * n_ms as f64,
            backlog_bound: None,
        }
    }

    pub fn bound_for(&self, horizon: usize) -> f64 {
        self.backlog_bound.unwrap_or(self.s_hi * horizon as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    /// Least-squares growth of Σ(X + Y) over the second half of the run.
    pub slope: f64,
    /// Nominal 95% interval of the slope (residuals treated as independent).
    pub ci: (f64, f64),
    pub final_backlog: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub backlog_bound: f64,
}

/// Slope test on a backlog series.
pub fn classify_series(
    series: &[f64],
    thresholds: &StabilityThresholds,
) -> Result<StabilityVerdict> {
    if series.len() < MIN_CLASSIFY_SLOTS {
        return Err(Error::TraceTooShort {
            len: series.len(),
            min: MIN_CLASSIFY_SLOTS,
        });
    }
    let tail = &series[series.len() / 2..];
    let m = tail.len() as f64;
    let x_mean = (m - 1.0) / 2.0;
    let y_mean = tail.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &y) in tail.iter().enumerate() {
        let dx = k as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let rss: f64 = tail
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let r = y - y_mean - slope * (k as f64 - x_mean);
            r * r
        })
        .sum();
    let se = (rss / (m - 2.0) / sxx).sqrt();
    let final_backlog = *series.last().expect("non-empty");
    let bound = thresholds.bound_for(series.len());

    let verdict = if slope <= thresholds.s_lo && final_backlog <= bound {
        Verdict::Stable
    } else if slope >= thresholds.s_hi {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityVerdict {
        verdict,
        slope,
        ci: (slope - 1.96 * se, slope + 1.96 * se),
        final_backlog,
        s_lo: thresholds.s_lo,
        s_hi: thresholds.s_hi,
        backlog_bound: bound,
    })
}

pub fn classify_stability(
    trace: &MetricsTrace,
    thresholds: &StabilityThresholds,
) -> Result<StabilityVerdict> {
    classify_series(&trace.backlog(), thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(n: usize) -> StabilityThresholds {
        StabilityThresholds::for_network(n)
    }

    #[test]
    fn flat_trace_is_stable() {
        let v = classify_series(&vec![100.0; 4000], &th(1)).unwrap();
        assert_eq!(v.verdict, Verdict::Stable);
        assert_eq!(v.slope, 0.0);
    }

    #[test]
    fn linear_growth_is_unstable() {
        let s: Vec<f64> = (0..4000).map(|n| 5.0 * n as f64).collect();
        let v = classify_series(&s, &th(1)).unwrap();
        assert_eq!(v.verdict, Verdict::Unstable);
        assert!((v.slope - 5.0).abs() < 1e-9);
    }

    #[test]
    fn slope_between_thresholds_is_inconclusive() {
        let n_ms = 4;
        let s: Vec<f64> = (0..4000).map(|n| 0.05 * n_ms as f64 * n as f64).collect();
        assert_eq!(
            classify_series(&s, &th(n_ms)).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn flat_but_huge_backlog_is_not_stable() {
        let t = StabilityThresholds {
            backlog_bound: Some(50.0),
            ..th(1)
        };
        assert_eq!(
            classify_series(&vec![100.0; 4000], &t).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn short_trace_is_rejected() {
        assert!(matches!(
            classify_series(&[0.0; 100], &th(1)),
            Err(Error::TraceTooShort { len: 100, .. })
        ));
    }

    #[test]
    fn only_second_half_counts() {
        // Ramp then plateau: the transient is ignored.
        let s: Vec<f64> = (0..4000).map(|n| n.min(1500) as f64 / 10.0).collect();
        let v = classify_series(&s, &th(1)).unwrap();
        assert_eq!(v.slope, 0.0);
        assert_eq!(v.verdict, Verdict::Stable);
    }
}
