//! Reflected random-walk mobility on the grid.
//!
//! Each MS moves independently. In every slot it either stays or moves to
//! one of the four adjacent vertices. Moves that would leave the grid get
//! probability zero and the remaining mass is renormalized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{GridPoint, GridSpec, NetworkTopology};
use crate::error::{Error, Result};

/// Single-slot move of one MS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Stay,
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Stay, Move::Up, Move::Down, Move::Left, Move::Right];

    /// Destination of the move, or `None` when it would leave the grid.
    pub fn apply(self, p: GridPoint, grid: &GridSpec) -> Option<GridPoint> {
        let q = match self {
            Move::Stay => Some(p),
            Move::Up => p.y.checked_add(1).map(|y| GridPoint::new(p.x, y)),
            Move::Down => p.y.checked_sub(1).map(|y| GridPoint::new(p.x, y)),
            Move::Left => p.x.checked_sub(1).map(|x| GridPoint::new(x, p.y)),
            Move::Right => p.x.checked_add(1).map(|x| GridPoint::new(x, p.y)),
        }?;
        grid.contains(q).then_some(q)
    }
}

/// Probability distribution over `[stay, up, down, left, right]`.
pub type MoveDistribution = [f64; 5];

/// How one MS chooses its moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MoveRule {
    /// Stay and every feasible neighbor equally likely.
    Uniform,
    /// Stay with fixed probability; the rest is split over feasible neighbors.
    Lazy { stay: f64 },
    /// Explicit distribution for every grid position (row-major order).
    Table { rows: Vec<MoveDistribution> },
}

/// Per-MS, per-position move distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub rules: Vec<MoveRule>,
}

impl MobilityParams {
    pub fn uniform(n_ms: usize) -> Self {
        Self {
            rules: vec![MoveRule::Uniform; n_ms],
        }
    }

    pub fn lazy(n_ms: usize, stay: f64) -> Self {
        Self {
            rules: vec![MoveRule::Lazy { stay }; n_ms],
        }
    }

    /// Every MS stays put forever.
    pub fn frozen(n_ms: usize) -> Self {
        Self::lazy(n_ms, 1.0)
    }

    pub fn n_ms(&self) -> usize {
        self.rules.len()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for (ms, rule) in self.rules.iter().enumerate() {
            match rule {
                MoveRule::Uniform => {}
                MoveRule::Lazy { stay } => {
                    if !(0.0..=1.0).contains(stay) {
                        return Err(Error::InvalidMobility(format!(
                            "MS {ms}: stay probability {stay} outside [0, 1]"
                        )));
                    }
                }
                MoveRule::Table { rows } => {
                    if rows.len() != grid.n_points() {
                        return Err(Error::InvalidMobility(format!(
                            "MS {ms}: table has {} rows, grid has {} points",
                            rows.len(),
                            grid.n_points()
                        )));
                    }
                    for (idx, row) in rows.iter().enumerate() {
                        let p = grid.point(idx);
                        let sum: f64 = row.iter().sum();
                        if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                            return Err(Error::InvalidMobility(format!(
                                "MS {ms}: distribution at {p:?} is not a probability vector"
                            )));
                        }
                        for (m, &prob) in Move::ALL.iter().zip(row) {
                            if prob > 0.0 && m.apply(p, grid).is_none() {
                                return Err(Error::InvalidMobility(format!(
                                    "MS {ms}: move {m:?} at {p:?} leaves the grid"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Move distribution of MS `ms` at position `p`.
    pub fn distribution(&self, ms: usize, p: GridPoint, grid: &GridSpec) -> MoveDistribution {
        let feasible = Move::ALL.map(|m| m.apply(p, grid).is_some());
        let neighbors = feasible[1..].iter().filter(|&&f| f).count();
        let mut dist = [0.0; 5];
        match &self.rules[ms] {
            MoveRule::Uniform => {
                let share = 1.0 / (neighbors + 1) as f64;
                for (d, f) in dist.iter_mut().zip(feasible) {
                    if f {
                        *d = share;
                    }
                }
            }
            MoveRule::Lazy { stay } => {
                if neighbors == 0 {
                    dist[0] = 1.0;
                } else {
                    dist[0] = *stay;
                    let share = (1.0 - stay) / neighbors as f64;
                    for (d, f) in dist[1..].iter_mut().zip(&feasible[1..]) {
                        if *f {
                            *d = share;
                        }
                    }
                }
            }
            MoveRule::Table { rows } => dist = rows[grid.index(p)],
        }
        dist
    }
}

/// Advances every MS by one slot.
pub fn step_mobility<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    grid: &GridSpec,
    params: &MobilityParams,
    rng: &mut R,
) -> NetworkTopology {
    let positions = topology
        .positions
        .iter()
        .enumerate()
        .map(|(ms, &p)| {
            let dist = params.distribution(ms, p, grid);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = p;
            for (m, prob) in Move::ALL.iter().zip(dist) {
                if prob <= 0.0 {
                    continue;
                }
                acc += prob;
                // Last feasible move absorbs rounding in the cumulative sum.
                chosen = m
                    .apply(p, grid)
                    .expect("positive probability on infeasible move");
                if u < acc {
                    break;
                }
            }
            chosen
        })
        .collect();
    NetworkTopology::new(topology.slot + 1, positions)
}

/// Maximum number of power-iteration sweeps before giving up.
pub const STATIONARY_MAX_ITERATIONS: usize = 2_000_000;
/// L1 change between sweeps at which power iteration stops.
pub const STATIONARY_TOLERANCE: f64 = 1e-12;

/// Stationary distribution of the position chain of MS `ms`, indexed by
/// [`GridSpec::index`].
pub fn stationary_distribution(
    grid: &GridSpec,
    params: &MobilityParams,
    ms: usize,
) -> Result<Vec<f64>> {
    let n = grid.n_points();
    // Sparse transition rows: (destination, probability).
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|idx| {
            let p = grid.point(idx);
            let dist = params.distribution(ms, p, grid);
            Move::ALL
                .iter()
                .zip(dist)
                .filter(|(_, prob)| *prob > 0.0)
                .map(|(m, prob)| (grid.index(m.apply(p, grid).expect("feasible move")), prob))
                .collect()
        })
        .collect();

    let reachable = mutually_reachable(&rows);
    if reachable < n {
        return Err(Error::Reducible {
            ms,
            reachable,
            total: n,
        });
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITERATIONS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (from, row) in rows.iter().enumerate() {
            let mass = pi[from];
            for &(to, prob) in row {
                next[to] += mass * prob;
            }
        }
        let total: f64 = next.iter().sum();
        residual = 0.0;
        for (a, b) in pi.iter_mut().zip(&next) {
            let b = b / total;
            residual += (*a - b).abs();
            *a = b;
        }
        if residual < STATIONARY_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        iterations: STATIONARY_MAX_ITERATIONS,
        residual,
    })
}

/// Stationary distribution of the built-in rules without iterating.
///
/// `Uniform` and `Lazy` (stay < 1) chains are reversible with mass
/// proportional to the number of feasible neighbors, plus one for
/// `Uniform`. Returns `None` for other rules.
pub fn stationary_closed_form(
    grid: &GridSpec,
    params: &MobilityParams,
    ms: usize,
) -> Option<Vec<f64>> {
    let extra = match params.rules[ms] {
        MoveRule::Uniform => 1.0,
        MoveRule::Lazy { stay } if stay < 1.0 => 0.0,
        _ => return None,
    };
    if grid.n_points() == 1 {
        return Some(vec![1.0]);
    }
    let mut pi: Vec<f64> = (0..grid.n_points())
        .map(|idx| {
            let p = grid.point(idx);
            Move::ALL[1..]
                .iter()
                .filter(|m| m.apply(p, grid).is_some())
                .count() as f64
                + extra
        })
        .collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Some(pi)
}

/// Size of the set of states that reach, and are reached from, state 0.
fn mutually_reachable(rows: &[Vec<(usize, f64)>]) -> usize {
    let n = rows.len();
    let mut reverse = vec![Vec::new(); n];
    for (from, row) in rows.iter().enumerate() {
        for &(to, _) in row {
            reverse[to].push(from);
        }
    }
    let search = |adj: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in adj(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let fwd = search(&|v| rows[v].iter().map(|&(w, _)| w).collect());
    let bwd = search(&|v| reverse[v].clone());
    fwd.iter().zip(&bwd).filter(|(a, b)| **a && **b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(m: u32) -> GridSpec {
        let e = (m - 1) as f64 * 10.0;
        GridSpec::new(e, e, 10.0, (0.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn interior_uniform_is_one_fifth() {
        let g = grid(5);
        let d = MobilityParams::uniform(1).distribution(0, GridPoint::new(2, 2), &g);
        assert_eq!(d, [0.2; 5]);
    }

    #[test]
    fn corner_uniform_renormalizes_over_three() {
        let g = grid(5);
        let d = MobilityParams::uniform(1).distribution(0, GridPoint::new(0, 0), &g);
        let third = 1.0 / 3.0;
        assert_eq!(d, [third, third, 0.0, 0.0, third]);
    }

    #[test]
    fn empirical_frequencies_at_corner() {
        let g = grid(5);
        let params = MobilityParams::uniform(1);
        let topo = NetworkTopology::new(0, vec![GridPoint::new(0, 0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = std::collections::HashMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            let next = step_mobility(&topo, &g, &params, &mut rng);
            *counts.entry(next.positions[0]).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        for c in counts.values() {
            let f = *c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn frozen_params_leave_topology_unchanged() {
        let g = grid(5);
        let params = MobilityParams::frozen(3);
        let topo = NetworkTopology::new(
            4,
            vec![
                GridPoint::new(0, 0),
                GridPoint::new(2, 3),
                GridPoint::new(4, 4),
            ],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = step_mobility(&topo, &g, &params, &mut rng);
        assert_eq!(next.positions, topo.positions);
        assert_eq!(next.slot, 5);
    }

    #[test]
    fn stationary_rejects_reducible_chain() {
        let g = grid(3);
        let err = stationary_distribution(&g, &MobilityParams::frozen(1), 0).unwrap_err();
        assert!(matches!(
            err,
            Error::Reducible {
                reachable: 1,
                total: 9,
                ..
            }
        ));
    }

    #[test]
    fn stationary_single_point() {
        let g = grid(1);
        assert_eq!(
            stationary_distribution(&g, &MobilityParams::uniform(1), 0).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn table_validation_rejects_leaving_moves() {
        let g = grid(2);
        let rows = vec![[0.5, 0.0, 0.5, 0.0, 0.0]; 4];
        let params = MobilityParams {
            rules: vec![MoveRule::Table { rows }],
        };
        assert!(params.validate(&g).is_err());
    }

    #[test]
    fn lazy_chain_stationary_is_invariant() {
        let g = grid(4);
        let params = MobilityParams::lazy(1, 0.5);
        let pi = stationary_distribution(&g, &params, 0).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut next = vec![0.0; g.n_points()];
        for idx in 0..g.n_points() {
            let p = g.point(idx);
            for (m, prob) in Move::ALL.iter().zip(params.distribution(0, p, &g)) {
                if let Some(q) = m.apply(p, &g) {
                    next[g.index(q)] += pi[idx] * prob;
                }
            }
        }
        for (a, b) in pi.iter().zip(&next) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_stationary_weights_are_degree_plus_one() {
        let g = grid(4);
        let pi = stationary_distribution(&g, &MobilityParams::uniform(1), 0).unwrap();
        // 4 corners x 3 + 8 edges x 4 + 4 interior x 5 = 64.
        let expect = |p: GridPoint| {
            let edge = |c: u32| c == 0 || c == 3;
            match (edge(p.x), edge(p.y)) {
                (true, true) => 3.0 / 64.0,
                (false, false) => 5.0 / 64.0,
                _ => 4.0 / 64.0,
            }
        };
        for (idx, &v) in pi.iter().enumerate() {
            assert!((v - expect(g.point(idx))).abs() < 1e-10, "{idx}");
        }
    }

    #[test]
    fn closed_form_matches_power_iteration() {
        let g = GridSpec::new(40.0, 20.0, 10.0, (0.0, 0.0), 1.0).unwrap();
        for params in [MobilityParams::uniform(1), MobilityParams::lazy(1, 0.3)] {
            let iterated = stationary_distribution(&g, &params, 0).unwrap();
            let closed = stationary_closed_form(&g, &params, 0).unwrap();
            for (a, b) in iterated.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(stationary_closed_form(&g, &MobilityParams::frozen(1), 0).is_none());
    }
}
