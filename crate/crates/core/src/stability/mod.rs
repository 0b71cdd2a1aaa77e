//! Stability region of the network when the topology is drawn IID from its
//! stationary distribution.
//!
//! An arrival-rate vector `λ` is inside the region iff some randomized
//! policy exists: in topology `s` it picks power vector `k` with
//! probability `w_sk` (silence otherwise), and an MS transmitting to the BS
//! serves its own queue with probability `q_isk`, such that for every MS `i`
//!
//! ```text
//! Σ_s Σ_k π_s w_sk [μ_i0 q_isk + Σ_j μ_ij]            >= λ_i        (own queue)
//! Σ_s Σ_k π_s w_sk (1 − q_isk) μ_i0                  >= Σ_s Σ_k Σ_j π_s w_sk μ_ji   (relay queue)
//! Σ_s Σ_k π_s w_sk Σ_j ℓ_ijk                         <= P̄_i        (power)
//! ```
//!
//! Substituting `v_isk = w_sk q_isk` with `0 <= v_isk <= w_sk` makes the
//! system linear. Membership is decided by maximizing a common margin `ε`
//! added to the two rate constraints; `λ` is inside iff the optimum is
//! nonnegative, and `ε` is reported as the slack.

mod bridge;
mod instance;
pub mod lp;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bridge::instance_from_grid;
pub use instance::{PowerVector, StabilityInstance, VectorLink};

use crate::error::{Error, Result};
use crate::policy::PowerLevelSet;
use crate::queueing::{QueueSelect, Receiver};

/// Largest power-vector list [`enumerate_power_vectors`] will build.
pub const MAX_POWER_VECTORS: usize = 1_000_000;

/// Tolerance used for the membership verdict and witness verification.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// All power vectors for `n` MSs in which at most `max_active` MSs transmit,
/// each to one receiver (the BS or another MS) at one of the levels.
/// The all-silent vector comes first.
pub fn enumerate_power_vectors(
    n: usize,
    levels: &PowerLevelSet,
    max_active: usize,
) -> Result<Vec<PowerVector>> {
    let per_ms = |i: usize| {
        let mut opts = vec![None];
        let receivers =
            std::iter::once(Receiver::Bs).chain((0..n).filter(|&j| j != i).map(Receiver::Ms));
        for r in receivers {
            for l in levels.iter() {
                opts.push(Some(VectorLink {
                    receiver: r,
                    power: l.mw,
                }));
            }
        }
        opts
    };
    // Σ_a C(n, a) (n L)^a over a <= max_active.
    let links_per_ms = (n * levels.len()) as f64;
    let mut estimate = 0.0;
    let mut choose = 1.0;
    for a in 0..=max_active.min(n) {
        estimate += choose * links_per_ms.powi(a as i32);
        choose = choose * (n - a) as f64 / (a + 1) as f64;
    }
    if estimate > MAX_POWER_VECTORS as f64 {
        return Err(Error::TooManyVectors {
            estimate,
            cap: MAX_POWER_VECTORS,
        });
    }

    let mut out = vec![PowerVector {
        links: Vec::with_capacity(n),
    }];
    for i in 0..n {
        let opts = per_ms(i);
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for v in &out {
            for o in &opts {
                if o.is_some() && v.n_active() >= max_active {
                    continue;
                }
                let mut links = v.links.clone();
                links.push(*o);
                next.push(PowerVector { links });
            }
        }
        out = next;
    }
    out.sort_by_key(|v| v.n_active());
    Ok(out)
}

/// Constants `(w, q)` of a randomized stationary policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedPolicy {
    /// `w[s][k]`: probability of power vector `k` in topology `s`.
    pub w: Vec<Vec<f64>>,
    /// `q[i][s][k]`: probability that MS `i` serves its own queue on a BS link.
    pub q: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Inside,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipResult {
    pub verdict: Membership,
    /// Feasible policy, present when inside.
    pub witness: Option<RandomizedPolicy>,
    /// Largest common margin `ε` on the rate constraints; negative outside.
    pub slack: f64,
}

/// Long-run rates and power of a randomized policy, per MS.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRates {
    /// Own-queue departures: BS service on the own queue plus D2D sends.
    pub own_service: Vec<f64>,
    pub relay_service: Vec<f64>,
    pub relay_inflow: Vec<f64>,
    pub power: Vec<f64>,
}

/// Evaluates the constraint left-hand sides of a policy on an instance.
pub fn policy_rates(inst: &StabilityInstance, policy: &RandomizedPolicy) -> PolicyRates {
    let n = inst.n_ms;
    let mut r = PolicyRates {
        own_service: vec![0.0; n],
        relay_service: vec![0.0; n],
        relay_inflow: vec![0.0; n],
        power: vec![0.0; n],
    };
    for (s, &pi) in inst.pi.iter().enumerate() {
        for (k, v) in inst.vectors.iter().enumerate() {
            let w = policy.w[s][k];
            if w == 0.0 {
                continue;
            }
            for (i, link) in v.links.iter().enumerate() {
                let Some(link) = link else { continue };
                let mu = inst.rates[s][k][i] as f64;
                r.power[i] += pi * w * link.power as f64;
                match link.receiver {
                    Receiver::Bs => {
                        let q = policy.q[i][s][k];
                        r.own_service[i] += pi * w * q * mu;
                        r.relay_service[i] += pi * w * (1.0 - q) * mu;
                    }
                    Receiver::Ms(j) => {
                        r.own_service[i] += pi * w * mu;
                        r.relay_inflow[j] += pi * w * mu;
                    }
                }
            }
        }
    }
    r
}

/// Largest violation of the feasibility constraints by `policy` at `lambda`
/// (zero when every constraint holds).
pub fn witness_violation(
    inst: &StabilityInstance,
    lambda: &[f64],
    policy: &RandomizedPolicy,
) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &policy.w {
        worst = worst.max(row.iter().sum::<f64>() - 1.0);
        for &w in row {
            worst = worst.max(-w).max(w - 1.0);
        }
    }
    for per_ms in &policy.q {
        for row in per_ms {
            for &q in row {
                worst = worst.max(-q).max(q - 1.0);
            }
        }
    }
    let r = policy_rates(inst, policy);
    for i in 0..inst.n_ms {
        worst = worst
            .max(lambda[i] - r.own_service[i])
            .max(r.relay_inflow[i] - r.relay_service[i])
            .max(r.power[i] - inst.budgets[i] as f64);
    }
    worst
}

/// Decides whether `lambda` lies in the stability region of `inst`.
pub fn check_membership(lambda: &[f64], inst: &StabilityInstance) -> Result<MembershipResult> {
    let n = inst.n_ms;
    if lambda.len() != n {
        return Err(Error::InvalidInstance(format!(
            "rate vector has {} entries for {n} MSs",
            lambda.len()
        )));
    }
    if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInstance(
            "arrival rates must be finite and >= 0".into(),
        ));
    }
    let n_top = inst.pi.len();
    let n_vec = inst.vectors.len();
    let n_w = n_top * n_vec;
    let w_idx = |s: usize, k: usize| s * n_vec + k;
    let v_idx = |i: usize, s: usize, k: usize| n_w + (i * n_top + s) * n_vec + k;
    let e_idx = n_w + n * n_w;
    let n_vars = e_idx + 1;
    // ε = e − shift keeps every right-hand side nonnegative.
    let shift = lambda.iter().copied().fold(0.0, f64::max) + 1.0;

    let mut a = Vec::new();
    let mut b = Vec::new();
    for s in 0..n_top {
        let mut row = vec![0.0; n_vars];
        for k in 0..n_vec {
            row[w_idx(s, k)] = 1.0;
        }
        a.push(row);
        b.push(1.0);
    }
    for i in 0..n {
        for s in 0..n_top {
            for k in 0..n_vec {
                let mut row = vec![0.0; n_vars];
                row[v_idx(i, s, k)] = 1.0;
                row[w_idx(s, k)] = -1.0;
                a.push(row);
                b.push(0.0);
            }
        }
    }
    for i in 0..n {
        let mut own = vec![0.0; n_vars];
        let mut relay = vec![0.0; n_vars];
        let mut power = vec![0.0; n_vars];
        for (s, &pi) in inst.pi.iter().enumerate() {
            for (k, v) in inst.vectors.iter().enumerate() {
                if let Some(link) = v.links[i] {
                    let mu = pi * inst.rates[s][k][i] as f64;
                    power[w_idx(s, k)] += pi * link.power as f64;
                    match link.receiver {
                        Receiver::Bs => {
                            own[v_idx(i, s, k)] -= mu;
                            relay[w_idx(s, k)] -= mu;
                            relay[v_idx(i, s, k)] += mu;
                        }
                        Receiver::Ms(_) => own[w_idx(s, k)] -= mu,
                    }
                }
                // Inflow into MS i's relay queue from senders j.
                for (j, link) in v.links.iter().enumerate() {
                    if let Some(link) = link {
                        if link.receiver == Receiver::Ms(i) {
                            relay[w_idx(s, k)] += pi * inst.rates[s][k][j] as f64;
                        }
                    }
                }
            }
        }
        own[e_idx] = 1.0;
        relay[e_idx] = 1.0;
        a.push(own);
        b.push(shift - lambda[i]);
        a.push(relay);
        b.push(shift);
        a.push(power);
        b.push(inst.budgets[i] as f64);
    }
    let mut c = vec![0.0; n_vars];
    c[e_idx] = 1.0;

    let sol = lp::maximize(&c, &a, &b)?;
    let slack = sol.x[e_idx] - shift;
    if slack < -MEMBERSHIP_TOL {
        return Ok(MembershipResult {
            verdict: Membership::Outside,
            witness: None,
            slack,
        });
    }

    if lambda.iter().all(|&l| l == 0.0) {
        // No traffic: staying silent is always a witness.
        let witness = RandomizedPolicy {
            w: vec![vec![0.0; n_vec]; n_top],
            q: vec![vec![vec![0.0; n_vec]; n_top]; n],
        };
        return Ok(MembershipResult {
            verdict: Membership::Inside,
            witness: Some(witness),
            slack,
        });
    }
    let w: Vec<Vec<f64>> = (0..n_top)
        .map(|s| {
            (0..n_vec)
                .map(|k| sol.x[w_idx(s, k)].clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    let q = (0..n)
        .map(|i| {
            (0..n_top)
                .map(|s| {
                    (0..n_vec)
                        .map(|k| {
                            let wk = sol.x[w_idx(s, k)];
                            if wk > 1e-15 {
                                (sol.x[v_idx(i, s, k)] / wk).clamp(0.0, 1.0)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let witness = RandomizedPolicy { w, q };
    let violation = witness_violation(inst, lambda, &witness);
    if violation > MEMBERSHIP_TOL {
        return Err(Error::Lp(format!(
            "witness violates constraints by {violation:e}"
        )));
    }
    Ok(MembershipResult {
        verdict: Membership::Inside,
        witness: Some(witness),
        slack,
    })
}

/// Membership of many rate vectors, evaluated in parallel; results keep
/// the input order.
pub fn region_sweep(
    inst: &StabilityInstance,
    points: &[Vec<f64>],
) -> Result<Vec<MembershipResult>> {
    points
        .par_iter()
        .map(|l| check_membership(l, inst))
        .collect()
}

/// One draw of a randomized policy in topology `s`: the power vector (or
/// silence) and the queue each MS would serve on a BS link.
pub fn sample_randomized_policy<R: Rng + ?Sized>(
    policy: &RandomizedPolicy,
    s: usize,
    rng: &mut R,
) -> (Option<usize>, Vec<QueueSelect>) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = None;
    for (k, &w) in policy.w[s].iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = Some(k);
            break;
        }
    }
    let sources = policy
        .q
        .iter()
        .map(|per_ms| {
            let q = chosen.map_or(0.0, |k| per_ms[s][k]);
            let u: f64 = rng.random();
            if u < q {
                QueueSelect::Own
            } else {
                QueueSelect::Relay
            }
        })
        .collect();
    (chosen, sources)
}

/// Writes sweep results as CSV with header `lambda_1..lambda_N,verdict,slack`.
pub fn write_region_csv<W: std::io::Write>(
    out: W,
    points: &[Vec<f64>],
    results: &[MembershipResult],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = points.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=n).map(|i| format!("lambda_{i}")).collect();
    header.push("verdict".into());
    header.push("slack".into());
    w.write_record(&header)?;
    for (p, r) in points.iter().zip(results) {
        let mut rec: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        rec.push(match r.verdict {
            Membership::Inside => "inside".into(),
            Membership::Outside => "outside".into(),
        });
        rec.push(r.slack.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn levels(n: usize) -> PowerLevelSet {
        PowerLevelSet::from_mw(&(1..=n as u64).map(|l| l * 100).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn vector_counts() {
        assert_eq!(enumerate_power_vectors(1, &levels(1), 1).unwrap().len(), 2);
        assert_eq!(enumerate_power_vectors(2, &levels(1), 2).unwrap().len(), 9);
        assert_eq!(enumerate_power_vectors(2, &levels(2), 2).unwrap().len(), 25);
        // One PRB: silence plus 2 MSs x 2 receivers x 2 levels.
        assert_eq!(enumerate_power_vectors(2, &levels(2), 1).unwrap().len(), 9);
    }

    #[test]
    fn enumeration_cap() {
        let err = enumerate_power_vectors(8, &levels(10), 8).unwrap_err();
        assert!(matches!(err, Error::TooManyVectors { .. }));
    }

    #[test]
    fn vectors_respect_one_receiver_and_no_self_links() {
        for v in enumerate_power_vectors(3, &levels(2), 3).unwrap() {
            for (i, l) in v.links.iter().enumerate() {
                if let Some(l) = l {
                    assert_ne!(l.receiver, Receiver::Ms(i));
                }
            }
        }
    }

    fn two_ms() -> StabilityInstance {
        StabilityInstance::from_toml_str(include_str!("../../../../configs/tiny_instance.toml"))
            .unwrap()
    }

    #[test]
    fn zero_traffic_is_inside_with_silent_witness() {
        let inst = two_ms();
        let r = check_membership(&[0.0, 0.0], &inst).unwrap();
        assert_eq!(r.verdict, Membership::Inside);
        assert!(r.slack > 0.0);
        let w = r.witness.unwrap();
        assert!(w.w.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(witness_violation(&inst, &[0.0, 0.0], &w), 0.0);
    }

    #[test]
    fn above_service_ceiling_is_outside() {
        let inst = two_ms();
        for i in 0..inst.n_ms {
            let ceiling: f64 = inst
                .pi
                .iter()
                .enumerate()
                .map(|(s, pi)| {
                    pi * (0..inst.vectors.len())
                        .map(|k| inst.rates[s][k][i])
                        .max()
                        .unwrap() as f64
                })
                .sum();
            let mut lambda = vec![0.0; inst.n_ms];
            lambda[i] = ceiling + 0.01;
            assert_eq!(
                check_membership(&lambda, &inst).unwrap().verdict,
                Membership::Outside
            );
        }
    }

    #[test]
    fn witness_satisfies_constraints() {
        let inst = two_ms();
        for lambda in [[0.5, 0.5], [1.0, 2.0], [2.5, 0.3]] {
            let r = check_membership(&lambda, &inst).unwrap();
            if let Some(w) = r.witness {
                assert!(witness_violation(&inst, &lambda, &w) <= MEMBERSHIP_TOL);
            }
        }
    }

    #[test]
    fn sampling_point_mass_and_silence() {
        let p = RandomizedPolicy {
            w: vec![vec![0.0, 1.0, 0.0], vec![0.0; 3]],
            q: vec![vec![vec![1.0; 3]; 2]],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(
                sample_randomized_policy(&p, 0, &mut rng),
                (Some(1), vec![QueueSelect::Own])
            );
            assert_eq!(sample_randomized_policy(&p, 1, &mut rng).0, None);
        }
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        let w = [0.2, 0.45, 0.1];
        let p = RandomizedPolicy {
            w: vec![w.to_vec()],
            q: vec![vec![vec![0.5; 3]]],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            if let (Some(k), _) = sample_randomized_policy(&p, 0, &mut rng) {
                counts[k] += 1;
            }
        }
        for (c, p) in counts.iter().zip(w) {
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (*c as f64 - draws as f64 * p).abs() < 3.0 * sigma,
                "{c} vs {p}"
            );
        }
    }
}
