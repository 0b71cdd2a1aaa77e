use crate::error::{Error, Result};
use crate::policy::{max_weight_vector, StaleSnapshot, Weighting};
use crate::queueing::{
    delivered_to_bs, draw_arrivals, update_queues, ArrivalConfig, InflowMode, QueueSelect,
    QueueState, Receiver, ServiceSummary, Transmission,
};
use crate::stability::{sample_randomized_policy, RandomizedPolicy, StabilityInstance};

use super::{stream, streams, CdfSampler, MetricsTrace, Recorder, TopologyProcess};

/// Scheduler used on an explicit instance.
#[derive(Debug, Clone, Copy)]
pub enum InstancePolicy<'a> {
    /// Stationary randomized policy, blind to queue lengths.
    Randomized(&'a RandomizedPolicy),
    /// Back-pressure over the instance's power vectors with epoch length `T`.
    MaxWeight {
        epoch_len: u64,
        weighting: Weighting,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub arrivals: ArrivalConfig,
    pub horizon: u64,
    pub seed: u64,
    /// `RandomWalk` follows the instance's transition matrix.
    pub topology: TopologyProcess,
    pub inflow: InflowMode,
}

/// Simulates an explicit instance. Budgets are the instance's, topologies
/// start from a draw of the stationary distribution.
pub fn run_instance(
    inst: &StabilityInstance,
    policy: &InstancePolicy<'_>,
    run: &InstanceRun,
) -> Result<MetricsTrace> {
    inst.validate()?;
    run.arrivals.validate()?;
    let n = inst.n_ms;
    if run.arrivals.rates.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} arrival rates for {n} MSs",
            run.arrivals.rates.len()
        )));
    }
    if run.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    let epoch_len = match policy {
        InstancePolicy::Randomized(p) => {
            let shape_ok = p.w.len() == inst.n_topologies()
                && p.w.iter().all(|r| r.len() == inst.vectors.len())
                && p.q.len() == n;
            if !shape_ok {
                return Err(Error::InvalidConfig(
                    "randomized policy does not match the instance".into(),
                ));
            }
            1
        }
        InstancePolicy::MaxWeight { epoch_len, .. } if *epoch_len == 0 => {
            return Err(Error::InvalidConfig("policy.epoch must be >= 1".into()))
        }
        InstancePolicy::MaxWeight { epoch_len, .. } => *epoch_len,
    };
    let rows: Vec<CdfSampler> = match (run.topology, &inst.transition) {
        (TopologyProcess::IidStationary, _) => Vec::new(),
        (TopologyProcess::RandomWalk, Some(p)) => p.iter().map(|r| CdfSampler::new(r)).collect(),
        (TopologyProcess::RandomWalk, None) => {
            return Err(Error::InvalidConfig(
                "random-walk topology needs a transition matrix".into(),
            ))
        }
    };
    let stationary = CdfSampler::new(&inst.pi);

    let mut pos_rng = stream(run.seed, streams::POSITIONS);
    let mut mob_rng = stream(run.seed, streams::MOBILITY);
    let mut arr_rng = stream(run.seed, streams::ARRIVALS);
    let mut pol_rng = stream(run.seed, streams::POLICY);

    let mut s = stationary.sample(&mut pos_rng);
    let mut state = QueueState::empty(n);
    let mut snapshot = StaleSnapshot::new(state.clone(), epoch_len);
    let mut rec = Recorder::new(n, run.horizon);

    for slot in 0..run.horizon {
        snapshot.refresh(slot, &state);
        s = match run.topology {
            TopologyProcess::IidStationary => stationary.sample(&mut mob_rng),
            TopologyProcess::RandomWalk => rows[s].sample(&mut mob_rng),
        };
        let (chosen, sources) = match policy {
            InstancePolicy::Randomized(p) => sample_randomized_policy(p, s, &mut pol_rng),
            InstancePolicy::MaxWeight { weighting, .. } => {
                let d =
                    max_weight_vector(&snapshot.state, &inst.vectors, &inst.rates[s], *weighting);
                (d.index, d.sources)
            }
        };
        let mut service = ServiceSummary::silent(n);
        if let Some(k) = chosen {
            for (i, link) in inst.vectors[k].links.iter().enumerate() {
                if let Some(link) = link {
                    let source = match link.receiver {
                        Receiver::Bs => sources[i],
                        Receiver::Ms(_) => QueueSelect::Own,
                    };
                    service.links[i] = Some(Transmission {
                        receiver: link.receiver,
                        rate: inst.rates[s][k][i],
                        power_mw: link.power,
                        source,
                    });
                }
            }
        }
        let arrivals = draw_arrivals(&run.arrivals, &mut arr_rng);
        let delivered = delivered_to_bs(&state, &service);
        state = update_queues(&state, &service, &arrivals, &inst.budgets, run.inflow);
        rec.record(&state, &service, &arrivals, delivered);
    }
    rec.finish(run.seed, epoch_len)
}
