use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex of the square grid, addressed by column/row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: u32,
    pub y: u32,
}

impl GridPoint {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// Rectangular coverage area divided into a uniform square grid, with the
/// base station sitting on one of the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    extent_x: f64,
    extent_y: f64,
    spacing: f64,
    bs: GridPoint,
    same_point_distance: f64,
    nx: u32,
    ny: u32,
}

fn steps(extent: f64, spacing: f64, axis: &str) -> Result<u32> {
    if !(extent >= 0.0) || !extent.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "extent_{axis} must be finite and >= 0, got {extent}"
        )));
    }
    let n = (extent / spacing).round();
    if (n * spacing - extent).abs() > 1e-9 * extent.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "extent_{axis} = {extent} is not a multiple of spacing {spacing}"
        )));
    }
    if n >= u32::MAX as f64 {
        return Err(Error::InvalidGrid(format!(
            "extent_{axis} has too many grid points"
        )));
    }
    Ok(n as u32)
}

impl GridSpec {
    /// Builds a grid covering `[0, extent_x] x [0, extent_y]` meters.
    ///
    /// The base-station coordinates are given in meters and must coincide
    /// with a grid vertex.
    pub fn new(
        extent_x: f64,
        extent_y: f64,
        spacing: f64,
        bs_position: (f64, f64),
        same_point_distance: f64,
    ) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be > 0, got {spacing}"
            )));
        }
        if !(same_point_distance > 0.0) || !same_point_distance.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "same_point_distance must be > 0, got {same_point_distance}"
            )));
        }
        let sx = steps(extent_x, spacing, "x")?;
        let sy = steps(extent_y, spacing, "y")?;
        let mut grid = Self {
            extent_x,
            extent_y,
            spacing,
            bs: GridPoint::new(0, 0),
            same_point_distance,
            nx: sx + 1,
            ny: sy + 1,
        };
        grid.bs = grid.point_at(bs_position.0, bs_position.1).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "base station position ({}, {}) is not a grid point",
                bs_position.0, bs_position.1
            ))
        })?;
        Ok(grid)
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.extent_x, self.extent_y)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn same_point_distance(&self) -> f64 {
        self.same_point_distance
    }

    pub fn bs(&self) -> GridPoint {
        self.bs
    }

    /// Number of vertices along x.
    pub fn nx(&self) -> u32 {
        self.nx
    }

    /// Number of vertices along y.
    pub fn ny(&self) -> u32 {
        self.ny
    }

    pub fn n_points(&self) -> usize {
        self.nx as usize * self.ny as usize
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        p.x < self.nx && p.y < self.ny
    }

    /// Row-major index of a grid point.
    pub fn index(&self, p: GridPoint) -> usize {
        p.y as usize * self.nx as usize + p.x as usize
    }

    pub fn point(&self, index: usize) -> GridPoint {
        let nx = self.nx as usize;
        GridPoint::new((index % nx) as u32, (index / nx) as u32)
    }

    /// Grid vertex at the given coordinates in meters, if there is one.
    pub fn point_at(&self, x: f64, y: f64) -> Option<GridPoint> {
        let to_index = |v: f64, n: u32| {
            let i = (v / self.spacing).round();
            if i < 0.0 || i >= n as f64 || (i * self.spacing - v).abs() > 1e-9 * v.abs().max(1.0) {
                None
            } else {
                Some(i as u32)
            }
        };
        Some(GridPoint::new(to_index(x, self.nx)?, to_index(y, self.ny)?))
    }

    pub fn meters(&self, p: GridPoint) -> (f64, f64) {
        (p.x as f64 * self.spacing, p.y as f64 * self.spacing)
    }

    /// Euclidean distance in meters; co-located points are treated as
    /// `same_point_distance` apart.
    pub fn distance(&self, a: GridPoint, b: GridPoint) -> f64 {
        self.distance_by_offset(a.x.abs_diff(b.x), a.y.abs_diff(b.y))
    }

    pub(crate) fn distance_by_offset(&self, dx: u32, dy: u32) -> f64 {
        if dx == 0 && dy == 0 {
            return self.same_point_distance;
        }
        let dx = dx as f64 * self.spacing;
        let dy = dy as f64 * self.spacing;
        dx.hypot(dy)
    }
}

/// Positions of every MS during one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    pub slot: u64,
    pub positions: Vec<GridPoint>,
}

impl NetworkTopology {
    pub fn new(slot: u64, positions: Vec<GridPoint>) -> Self {
        Self { slot, positions }
    }

    pub fn n_ms(&self) -> usize {
        self.positions.len()
    }

    pub fn is_valid_for(&self, grid: &GridSpec) -> bool {
        self.positions.iter().all(|p| grid.contains(*p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid10() -> GridSpec {
        GridSpec::new(2000.0, 2000.0, 10.0, (1000.0, 1000.0), 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        let g = grid10();
        let o = g.point_at(0.0, 0.0).unwrap();
        assert_eq!(g.distance(o, g.point_at(30.0, 40.0).unwrap()), 50.0);
        assert_eq!(g.distance(o, o), 1.0);
        assert_eq!(g.distance(o, g.point_at(10.0, 0.0).unwrap()), 10.0);
    }

    #[test]
    fn bs_and_dimensions() {
        let g = grid10();
        assert_eq!((g.nx(), g.ny()), (201, 201));
        assert_eq!(g.bs(), GridPoint::new(100, 100));
        assert_eq!(g.point(g.index(GridPoint::new(7, 3))), GridPoint::new(7, 3));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(100.0, 100.0, -1.0, (0.0, 0.0), 1.0).is_err());
        assert!(GridSpec::new(105.0, 100.0, 10.0, (0.0, 0.0), 1.0).is_err());
        assert!(GridSpec::new(100.0, 100.0, 10.0, (55.0, 0.0), 1.0).is_err());
        assert!(GridSpec::new(100.0, 100.0, 10.0, (200.0, 0.0), 1.0).is_err());
        assert!(GridSpec::new(100.0, 100.0, 10.0, (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn single_point_grid() {
        let g = GridSpec::new(0.0, 0.0, 10.0, (0.0, 0.0), 1.0).unwrap();
        assert_eq!(g.n_points(), 1);
    }
}
