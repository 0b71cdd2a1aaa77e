use crate::error::{Error, Result};
use crate::net::{
    link_rate, stationary_distribution, ChannelParams, GridPoint, GridSpec, MobilityParams, Move,
};
use crate::policy::PowerLevelSet;
use crate::queueing::Receiver;

use super::{enumerate_power_vectors, StabilityInstance};

/// Largest joint topology set the bridge will build.
pub const MAX_TOPOLOGIES: usize = 4096;

/// Builds an explicit instance from a tiny grid: topologies are all joint
/// MS placements, weighted by the product of the per-MS stationary
/// distributions, with the joint random-walk transition matrix attached.
/// Placements of zero stationary probability are dropped.
pub fn instance_from_grid(
    grid: &GridSpec,
    mobility: &MobilityParams,
    channel: &ChannelParams,
    levels: &PowerLevelSet,
    max_active: usize,
    budgets: &[u64],
) -> Result<StabilityInstance> {
    mobility.validate(grid)?;
    channel.validate()?;
    let n = mobility.n_ms();
    let points = grid.n_points();
    let joint = (points as f64).powi(n as i32);
    if joint > MAX_TOPOLOGIES as f64 {
        return Err(Error::InvalidInstance(format!(
            "{joint} joint placements exceed the cap of {MAX_TOPOLOGIES}"
        )));
    }
    let marginals = (0..n)
        .map(|i| stationary_distribution(grid, mobility, i))
        .collect::<Result<Vec<_>>>()?;

    // Mixed-radix decode, MS 0 least significant.
    let decode = |mut idx: usize| -> Vec<GridPoint> {
        (0..n)
            .map(|_| {
                let p = grid.point(idx % points);
                idx /= points;
                p
            })
            .collect()
    };
    let mut placements = Vec::new();
    let mut pi = Vec::new();
    for idx in 0..points.pow(n as u32) {
        let pos = decode(idx);
        let p: f64 = pos
            .iter()
            .enumerate()
            .map(|(i, &x)| marginals[i][grid.index(x)])
            .product();
        if p > 0.0 {
            placements.push(pos);
            pi.push(p);
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);

    let step = |i: usize, from: GridPoint, to: GridPoint| -> f64 {
        let dist = mobility.distribution(i, from, grid);
        Move::ALL
            .iter()
            .zip(dist)
            .filter(|(m, _)| m.apply(from, grid) == Some(to))
            .map(|(_, p)| p)
            .sum()
    };
    let transition = placements
        .iter()
        .map(|a| {
            placements
                .iter()
                .map(|b| (0..n).map(|i| step(i, a[i], b[i])).product())
                .collect()
        })
        .collect();

    let vectors = enumerate_power_vectors(n, levels, max_active)?;
    let dbm_of = |mw: u64| levels.iter().find(|l| l.mw == mw).map(|l| l.dbm);
    let rates = placements
        .iter()
        .map(|pos| {
            vectors
                .iter()
                .map(|v| {
                    v.links
                        .iter()
                        .enumerate()
                        .map(|(i, l)| match l {
                            None => 0,
                            Some(l) => {
                                let rx = match l.receiver {
                                    Receiver::Bs => grid.bs(),
                                    Receiver::Ms(j) => pos[j],
                                };
                                link_rate(pos[i], rx, dbm_of(l.power), channel, grid)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let inst = StabilityInstance {
        n_ms: n,
        topology_names: placements
            .iter()
            .map(|pos| {
                pos.iter()
                    .map(|p| format!("({},{})", p.x, p.y))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect(),
        pi,
        transition: Some(transition),
        vectors,
        rates,
        budgets: budgets.to_vec(),
    };
    inst.validate()?;
    Ok(inst)
}
