use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Piecewise constant function on the cells `]t_i, t_{i+1}]` of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "{} cell values for a grid of {} cells",
                values.len(),
                grid.cells()
            )));
        }
        Ok(StepFunction { grid, values })
    }

    pub fn zero(grid: Grid<T>) -> Self {
        StepFunction {
            grid,
            values: vec![T::zero(); grid.cells()],
        }
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        StepFunction {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    /// `1_{]a, b]}` for grid points `a <= b`.
    pub fn indicator(grid: Grid<T>, a: T, b: T) -> Result<Self> {
        let (ia, ib) = (grid.index_of(a)?, grid.index_of(b)?);
        if ia > ib {
            return Err(Error::domain(format!("indicator needs a <= b, got ]{a}, {b}]")));
        }
        let values = (0..grid.cells())
            .map(|i| if i >= ia && i < ib { T::one() } else { T::zero() })
            .collect();
        Ok(StepFunction { grid, values })
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> T) -> Self {
        let h = grid.step();
        let values = (0..grid.cells())
            .map(|i| f(grid.point(i) + h * T::lit(0.5)))
            .collect();
        StepFunction { grid, values }
    }

    /// Builds from `(a, b, v)` triples meaning `v · 1_{]a, b]}`; overlaps add up.
    pub fn from_pieces(grid: Grid<T>, pieces: &[(T, T, T)]) -> Result<Self> {
        let mut out = Self::zero(grid);
        for &(a, b, v) in pieces {
            out = out.add(&Self::indicator(grid, a, b)?.scale(v))?;
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> T {
        self.values[cell]
    }

    pub fn scale(&self, c: T) -> Self {
        StepFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(StepFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn abs(&self) -> Self {
        StepFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    /// `φ · 1_{[0, t_k]}`.
    pub fn truncate(&self, k: usize) -> Self {
        StepFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| if i < k { v } else { T::zero() })
                .collect(),
        }
    }
}
