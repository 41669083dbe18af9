//! Uniform partitions `0 = t_0 < t_1 < ... < t_n = T`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported cell count; measures are stored densely.
pub const MAX_CELLS: usize = 1 << 12;

/// Largest cell count accepted by streaming path samplers that never build a measure.
pub const MAX_STREAM_CELLS: usize = 1 << 16;

/// Uniform grid on `[0, T]` with `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid<T> {
    n: usize,
    horizon: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(n: usize, horizon: T) -> Result<Self> {
        Self::with_limit(n, horizon, MAX_CELLS)
    }

    /// Like [`Grid::new`] but allowing up to [`MAX_STREAM_CELLS`] cells, for samplers with
    /// a diagonal (independent increment) factor.
    pub fn streaming(n: usize, horizon: T) -> Result<Self> {
        Self::with_limit(n, horizon, MAX_STREAM_CELLS)
    }

    fn with_limit(n: usize, horizon: T, limit: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("grid needs at least one cell"));
        }
        if n > limit {
            return Err(Error::domain(format!("grid with {n} cells exceeds the limit {limit}")));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(Grid { n, horizon })
    }

    /// Builds a grid from explicit points, rejecting anything that is not uniform from 0.
    pub fn from_points(points: &[T]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a grid needs at least two points"));
        }
        if points[0] != T::zero() {
            return Err(Error::domain("grid must start at 0"));
        }
        let n = points.len() - 1;
        let grid = Grid::new(n, points[n])?;
        let tol = T::lit(1e-9) * grid.horizon;
        for (i, &p) in points.iter().enumerate() {
            if (p - grid.point(i)).abs() > tol {
                return Err(Error::domain(format!("non-uniform grid at point {i}")));
            }
        }
        Ok(grid)
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn step(&self) -> T {
        self.horizon / T::of_usize(self.n)
    }

    /// `t_i = i T / n`, with `t_n = T` exactly.
    pub fn point(&self, i: usize) -> T {
        debug_assert!(i <= self.n);
        if i == self.n {
            self.horizon
        } else {
            T::of_usize(i) * self.horizon / T::of_usize(self.n)
        }
    }

    pub fn points(&self) -> Vec<T> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point equal to `t` (relative tolerance `1e-9`).
    pub fn index_of(&self, t: T) -> Result<usize> {
        let x = t / self.step();
        let k = x.round();
        if t < T::zero() || t > self.horizon * (T::one() + T::lit(1e-12)) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        if (x - k).abs() > T::lit(1e-9) * (T::one() + k) {
            return Err(Error::domain(format!("time {t} is not a grid point")));
        }
        Ok(k.to_usize().unwrap_or(0).min(self.n))
    }

    /// Number of whole cells in a span `eps`, which must be a positive multiple of the step.
    pub fn cells_in(&self, eps: T) -> Result<usize> {
        if !(eps > T::zero()) {
            return Err(Error::domain(format!("eps must be positive, got {eps}")));
        }
        let x = eps / self.step();
        let k = x.round();
        if k < T::one() || (x - k).abs() > T::lit(1e-9) * k {
            return Err(Error::domain(format!("eps = {eps} is not a multiple of the grid step")));
        }
        Ok(k.to_usize().unwrap_or(1))
    }

    /// Same partition in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Grid<U> {
        Grid {
            n: self.n,
            horizon: U::lit(self.horizon.as_f64()),
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self.n != other.n || self.horizon != other.horizon {
            return Err(Error::GridMismatch(format!(
                "n={} T={} vs n={} T={}",
                self.n, self.horizon, other.n, other.horizon
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let g = Grid::new(3, 1.0f64).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(3), 1.0);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 1.0f64).is_err());
        assert!(Grid::new(4, -1.0f64).is_err());
        assert!(Grid::new(MAX_CELLS + 1, 1.0f64).is_err());
        assert!(Grid::from_points(&[0.0, 0.3, 1.0f64]).is_err());
        assert!(Grid::from_points(&[0.1, 0.5, 1.0f64]).is_err());
        let g = Grid::from_points(&[0.0, 0.5, 1.0f64]).unwrap();
        assert_eq!(g.cells(), 2);
    }

    #[test]
    fn grid_point_lookup() {
        let g = Grid::new(256, 1.0f64).unwrap();
        assert_eq!(g.index_of(0.5).unwrap(), 128);
        assert_eq!(g.index_of(1.0).unwrap(), 256);
        assert!(g.index_of(0.501).is_err());
        assert!(g.index_of(1.5).is_err());
        assert_eq!(g.cells_in(1.0 / 64.0).unwrap(), 4);
        assert!(g.cells_in(0.003).is_err());
    }
}
