use crate::queueing::{QueueSelect, QueueState, Receiver};
use crate::stability::PowerVector;

use super::{PolicyMode, Weighting};

/// Max-weight choice over an explicit list of power vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorDecision {
    /// Chosen vector, `None` for silence.
    pub index: Option<usize>,
    /// Queue served on BS links, per MS.
    pub sources: Vec<QueueSelect>,
    pub objective: i64,
}

/// Back-pressure objective of power vector `v` with per-MS link rates `rates`.
pub fn vector_objective(
    q: &QueueState,
    v: &PowerVector,
    rates: &[u64],
    weighting: Weighting,
) -> Option<i64> {
    let mut total = 0i64;
    for (i, link) in v.links.iter().enumerate() {
        let Some(link) = link else { continue };
        let coef = match (link.receiver, weighting.mode) {
            (Receiver::Bs, PolicyMode::Relay) => q.own[i].max(q.relay[i]) as i64,
            (Receiver::Bs, PolicyMode::NoRelay) => q.own[i] as i64,
            (Receiver::Ms(j), PolicyMode::Relay) => q.own[i] as i64 - q.relay[j] as i64,
            (Receiver::Ms(_), PolicyMode::NoRelay) => return None,
        };
        total += weighting.gamma(coef, rates[i], q.power[i], link.power);
    }
    Some(total)
}

/// Picks the vector maximizing the back-pressure objective on snapshot `q`.
///
/// `rates[k][i]` is the rate of MS `i`'s link in vector `k` under the current
/// topology. Silence scores zero and wins ties, then the lowest index.
pub fn max_weight_vector(
    q: &QueueState,
    vectors: &[PowerVector],
    rates: &[Vec<u64>],
    weighting: Weighting,
) -> VectorDecision {
    let mut index = None;
    let mut objective = 0;
    for (k, v) in vectors.iter().enumerate() {
        if let Some(w) = vector_objective(q, v, &rates[k], weighting) {
            if w > objective {
                objective = w;
                index = Some(k);
            }
        }
    }
    let sources = (0..q.n_ms())
        .map(|i| match weighting.mode {
            PolicyMode::Relay if q.relay[i] > q.own[i] => QueueSelect::Relay,
            _ => QueueSelect::Own,
        })
        .collect();
    VectorDecision {
        index,
        sources,
        objective,
    }
}
