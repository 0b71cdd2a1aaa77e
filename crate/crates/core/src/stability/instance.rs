use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::Receiver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VectorLink {
    pub receiver: Receiver,
    /// Transmit power in mW.
    pub power: u64,
}

/// One power vector: the link (if any) each MS uses in a slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PowerVector {
    pub links: Vec<Option<VectorLink>>,
}

impl PowerVector {
    pub fn n_active(&self) -> usize {
        self.links.iter().filter(|l| l.is_some()).count()
    }

    pub fn power_of(&self, i: usize) -> u64 {
        self.links[i].map_or(0, |l| l.power)
    }
}

/// Explicit small network: topologies with stationary probabilities, the
/// power vectors, per-topology link rates and per-MS power budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityInstance {
    pub n_ms: usize,
    pub topology_names: Vec<String>,
    pub pi: Vec<f64>,
    /// Optional Markov transition matrix between topologies with `pi` as
    /// its stationary distribution; used by random-walk simulations.
    pub transition: Option<Vec<Vec<f64>>>,
    pub vectors: Vec<PowerVector>,
    /// `rates[s][k][i]`: packets per slot on MS `i`'s link in vector `k`
    /// under topology `s` (zero when `i` is silent).
    pub rates: Vec<Vec<Vec<u64>>>,
    pub budgets: Vec<u64>,
}

const PROB_TOL: f64 = 1e-9;

impl StabilityInstance {
    pub fn n_topologies(&self) -> usize {
        self.pi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        let n = self.n_ms;
        if n == 0 {
            return bad("no MSs".into());
        }
        if self.pi.is_empty() {
            return bad("no topologies".into());
        }
        if self.pi.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return bad("topology probabilities must be positive".into());
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return bad(format!("topology probabilities sum to {total}"));
        }
        if self.topology_names.len() != self.pi.len() {
            return bad("one name per topology required".into());
        }
        if self.budgets.len() != n {
            return bad(format!("{} budgets for {n} MSs", self.budgets.len()));
        }
        for (k, v) in self.vectors.iter().enumerate() {
            if v.links.len() != n {
                return bad(format!(
                    "vector {k} has {} links for {n} MSs",
                    v.links.len()
                ));
            }
            for (i, l) in v.links.iter().enumerate() {
                if let Some(l) = l {
                    match l.receiver {
                        Receiver::Ms(j) if j == i => {
                            return bad(format!("vector {k}: MS {} sends to itself", i + 1))
                        }
                        Receiver::Ms(j) if j >= n => {
                            return bad(format!("vector {k}: no MS {}", j + 1))
                        }
                        _ => {}
                    }
                }
            }
        }
        if self.rates.len() != self.pi.len() {
            return bad("rate table needs one block per topology".into());
        }
        for (s, block) in self.rates.iter().enumerate() {
            if block.len() != self.vectors.len() || block.iter().any(|r| r.len() != n) {
                return bad(format!("rate block of topology {s} has the wrong shape"));
            }
            for (k, row) in block.iter().enumerate() {
                for (i, &r) in row.iter().enumerate() {
                    if r > 0 && self.vectors[k].links[i].is_none() {
                        return bad(format!(
                            "topology {s}, vector {k}: silent MS {} has a rate",
                            i + 1
                        ));
                    }
                }
            }
        }
        if let Some(p) = &self.transition {
            let m = self.pi.len();
            if p.len() != m || p.iter().any(|r| r.len() != m) {
                return bad("transition matrix has the wrong shape".into());
            }
            for (s, row) in p.iter().enumerate() {
                if row.iter().any(|&x| !(x >= 0.0))
                    || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL
                {
                    return bad(format!("transition row {s} is not a distribution"));
                }
            }
            for t in 0..m {
                let flow: f64 = (0..m).map(|s| self.pi[s] * p[s][t]).sum();
                if (flow - self.pi[t]).abs() > 1e-6 {
                    return bad(format!(
                        "probabilities are not stationary for the transition matrix at {t}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Largest long-run rate MS `i` can push out of its own queue.
    pub fn service_ceiling(&self, i: usize) -> f64 {
        self.pi
            .iter()
            .enumerate()
            .map(|(s, p)| p * self.rates[s].iter().map(|r| r[i]).max().unwrap_or(0) as f64)
            .sum()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: InstanceFile = toml::from_str(text)?;
        file.into_instance()
    }

    pub fn to_toml_string(&self) -> String {
        let file = InstanceFile {
            n_ms: self.n_ms,
            budgets: self.budgets.clone(),
            vectors: self
                .vectors
                .iter()
                .map(|v| v.links.iter().map(|l| format_link(*l)).collect())
                .collect(),
            topology: self
                .pi
                .iter()
                .enumerate()
                .map(|(s, &probability)| TopologyEntry {
                    name: self.topology_names[s].clone(),
                    probability,
                    transition: self.transition.as_ref().map(|p| p[s].clone()),
                    rates: self.rates[s].clone(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("instance serializes")
    }
}

/// On-disk form. Links are written `"bs:<mW>"`, `"ms<j>:<mW>"` (1-based) or
/// `"off"`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n_ms: usize,
    budgets: Vec<u64>,
    vectors: Vec<Vec<String>>,
    topology: Vec<TopologyEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyEntry {
    name: String,
    probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition: Option<Vec<f64>>,
    rates: Vec<Vec<u64>>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<StabilityInstance> {
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                v.iter()
                    .map(|s| parse_link(s))
                    .collect::<Result<Vec<_>>>()
                    .map(|links| PowerVector { links })
            })
            .collect::<Result<Vec<_>>>()?;
        let has_transition = self
            .topology
            .iter()
            .filter(|t| t.transition.is_some())
            .count();
        if has_transition != 0 && has_transition != self.topology.len() {
            return Err(Error::InvalidInstance(
                "transition rows must be given for all topologies or none".into(),
            ));
        }
        let transition = (has_transition > 0).then(|| {
            self.topology
                .iter()
                .map(|t| t.transition.clone().unwrap_or_default())
                .collect()
        });
        let inst = StabilityInstance {
            n_ms: self.n_ms,
            topology_names: self.topology.iter().map(|t| t.name.clone()).collect(),
            pi: self.topology.iter().map(|t| t.probability).collect(),
            transition,
            vectors,
            rates: self.topology.into_iter().map(|t| t.rates).collect(),
            budgets: self.budgets,
        };
        inst.validate()?;
        Ok(inst)
    }
}

fn parse_link(s: &str) -> Result<Option<VectorLink>> {
    let s = s.trim();
    if s == "off" {
        return Ok(None);
    }
    let bad = || {
        Error::InvalidInstance(format!(
            "bad link {s:?}, expected \"off\", \"bs:<mW>\" or \"ms<j>:<mW>\""
        ))
    };
    let (rx, power) = s.split_once(':').ok_or_else(bad)?;
    let power: u64 = power.trim().parse().map_err(|_| bad())?;
    let receiver = if rx == "bs" {
        Receiver::Bs
    } else {
        let j: usize = rx
            .strip_prefix("ms")
            .and_then(|j| j.parse().ok())
            .ok_or_else(bad)?;
        if j == 0 {
            return Err(bad());
        }
        Receiver::Ms(j - 1)
    };
    Ok(Some(VectorLink { receiver, power }))
}

fn format_link(l: Option<VectorLink>) -> String {
    match l {
        None => "off".into(),
        Some(VectorLink {
            receiver: Receiver::Bs,
            power,
        }) => format!("bs:{power}"),
        Some(VectorLink {
            receiver: Receiver::Ms(j),
            power,
        }) => format!("ms{}:{power}", j + 1),
    }
}
