//! The discrete covariance measure: rectangle increments of `R` on the cells of a grid.
//!
//! `mass[i][j] = R(t_{i+1}, t_{j+1}) + R(t_i, t_j) - R(t_i, t_{j+1}) - R(t_{i+1}, t_j)`,
//! which is also the covariance of the increments `X_{t_{i+1}} - X_{t_i}` and
//! `X_{t_{j+1}} - X_{t_j}`. Every integral against the measure is a double sum over cells.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Family, KernelSpec};
use crate::scalar::{compensated_sum, Scalar};

/// Symmetric `n × n` matrix of cell masses on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    grid: Grid<T>,
    mass: Vec<T>,
}

/// Positive and negative parts of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Jordan<T> {
    pub pos: DiscreteMeasure<T>,
    pub neg: DiscreteMeasure<T>,
}

/// One row of a refinement scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow<T> {
    pub cells: usize,
    pub planar_variation: T,
    pub energy: T,
}

/// Planar variation under dyadic refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineScan<T> {
    pub rows: Vec<RefinementRow<T>>,
    /// Planar variation grew by more than 1% from the coarsest to the finest grid.
    pub growing: bool,
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Builds the cell masses of `kernel` on `grid`. Rows are computed in parallel.
    pub fn build(kernel: &KernelSpec<T>, grid: &Grid<T>) -> Result<Self> {
        if grid.horizon() > kernel.horizon() * (T::one() + T::lit(1e-12)) {
            return Err(Error::domain(format!(
                "grid horizon {} exceeds kernel horizon {}",
                grid.horizon(),
                kernel.horizon()
            )));
        }
        kernel.check_lambda_monotone(grid)?;
        let n = grid.cells();
        let pts = grid.points();
        // level values R(t_a, t_b) for a, b = 0..=n, upper triangle filled then mirrored
        let levels: Vec<Vec<T>> = (0..=n)
            .into_par_iter()
            .map(|a| (0..=n).map(|b| kernel.covariance_unchecked(pts[a], pts[b])).collect())
            .collect();
        // independent increments: off-diagonal masses cancel exactly in exact arithmetic
        let diagonal = matches!(kernel.family(), Family::GaussMartingale(_) | Family::Bm);
        let mut mass = vec![T::zero(); n * n];
        let rows: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let end = if diagonal { i + 1 } else { n };
                (i..end)
                    .map(|j| levels[i + 1][j + 1] + levels[i][j] - levels[i][j + 1] - levels[i + 1][j])
                    .collect()
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                mass[i * n + j] = v;
                mass[j * n + i] = v;
            }
        }
        Ok(DiscreteMeasure { grid: *grid, mass })
    }

    /// Wraps an explicit mass matrix (row-major), which must be symmetric.
    pub fn from_masses(grid: Grid<T>, mass: Vec<T>) -> Result<Self> {
        let n = grid.cells();
        if mass.len() != n * n {
            return Err(Error::domain(format!("expected {} masses, got {}", n * n, mass.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if mass[i * n + j] != mass[j * n + i] {
                    return Err(Error::domain(format!("mass matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(DiscreteMeasure { grid, mass })
    }

    pub fn zero(grid: Grid<T>) -> Self {
        let n = grid.cells();
        DiscreteMeasure {
            grid,
            mass: vec![T::zero(); n * n],
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn mass(&self, i: usize, j: usize) -> T {
        self.mass[i * self.cells() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.cells();
        &self.mass[i * n..(i + 1) * n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.mass
    }

    pub fn total(&self) -> T {
        compensated_sum(self.mass.iter().copied())
    }

    /// `Σ |mass[i][j]|`.
    pub fn planar_variation(&self) -> T {
        compensated_sum(self.mass.iter().map(|m| m.abs()))
    }

    pub fn jordan_decompose(&self) -> Jordan<T> {
        let pos = self.mass.iter().map(|&m| m.max(T::zero())).collect();
        let neg = self.mass.iter().map(|&m| (-m).max(T::zero())).collect();
        Jordan {
            pos: DiscreteMeasure { grid: self.grid, mass: pos },
            neg: DiscreteMeasure { grid: self.grid, mass: neg },
        }
    }

    /// Total variation measure `|μ|`.
    pub fn abs(&self) -> Self {
        DiscreteMeasure {
            grid: self.grid,
            mass: self.mass.iter().map(|m| m.abs()).collect(),
        }
    }

    /// `E_n(t_k) = Σ_{i<k} mass[i][i]` for `k = 0..=n`.
    pub fn energy_curve(&self) -> Vec<T> {
        let n = self.cells();
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = T::zero();
        let mut carry = T::zero();
        out.push(T::zero());
        for i in 0..n {
            // Kahan running sum keeps the curve monotone to the last bit for nonnegative diagonals
            let y = self.mass(i, i) - carry;
            let t = acc + y;
            carry = (t - acc) - y;
            acc = t;
            out.push(acc);
        }
        out
    }

    /// Marginal `ν_j = Σ_i |mass[i][j]|`.
    pub fn marginal(&self) -> Vec<T> {
        let n = self.cells();
        (0..n)
            .map(|j| compensated_sum((0..n).map(|i| self.mass(i, j).abs())))
            .collect()
    }

    /// `μ(Δ_{t_k})`: mass of the cells strictly below the diagonal inside `[0, t_k]²`.
    pub fn triangle_mass(&self, t: T) -> Result<T> {
        let k = self.grid.index_of(t)?;
        Ok(self.triangle_curve()[k])
    }

    /// `μ(Δ_{t_k})` for every `k = 0..=n`.
    pub fn triangle_curve(&self) -> Vec<T> {
        let n = self.cells();
        let mut out = Vec::with_capacity(n + 1);
        out.push(T::zero());
        let mut acc = T::zero();
        for j in 0..n {
            // cells (i, j) with i < j enter once t_k passes t_{j+1}
            acc = acc + compensated_sum((0..j).map(|i| self.mass(i, j)));
            out.push(acc);
        }
        out
    }

    /// Masses summed over `[0, t_k]²`, for every `k`; equals `R(t_k, t_k)` by telescoping.
    pub fn square_curve(&self) -> Vec<T> {
        let e = self.energy_curve();
        let tri = self.triangle_curve();
        e.iter().zip(&tri).map(|(&a, &b)| a + T::lit(2.0) * b).collect()
    }

    /// Least-squares slope of `log μ((s, s+δ]²)` against `log δ` for
    /// `δ ∈ {2^{-3}T, ..., 2^{-8}T}`, averaged over `s ∈ {0, T/8, ..., 5T/8}`.
    pub fn rectangle_scaling_exponent(&self) -> Result<T> {
        let n = self.cells();
        if n % 256 != 0 {
            return Err(Error::domain(format!("scaling exponent needs n divisible by 256, got {n}")));
        }
        let prefix = self.prefix_sums();
        let square = |a: usize, b: usize| {
            prefix[b * (n + 1) + b] - prefix[a * (n + 1) + b] - prefix[b * (n + 1) + a] + prefix[a * (n + 1) + a]
        };
        let mut slopes = Vec::new();
        for start in 0..=5 {
            let a = start * n / 8;
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for level in 3..=8 {
                let width = n >> level;
                let m = square(a, a + width);
                if !(m > T::zero()) {
                    return Err(Error::Estimation(format!(
                        "nonpositive square mass {m} at s = {}, δ = 2^-{level} T",
                        self.grid.point(a)
                    )));
                }
                xs.push((self.grid.step() * T::of_usize(width)).ln());
                ys.push(m.ln());
            }
            slopes.push(least_squares_slope(&xs, &ys));
        }
        Ok(compensated_sum(slopes.iter().copied()) / T::of_usize(slopes.len()))
    }

    /// `P[a][b] = Σ_{i<a, j<b} mass[i][j]`, row-major `(n+1) × (n+1)`.
    fn prefix_sums(&self) -> Vec<T> {
        let n = self.cells();
        let w = n + 1;
        let mut p = vec![T::zero(); w * w];
        for a in 1..=n {
            let mut row = T::zero();
            for b in 1..=n {
                row = row + self.mass(a - 1, b - 1);
                p[a * w + b] = p[(a - 1) * w + b] + row;
            }
        }
        p
    }

    /// Writes the nonzero masses as `i,j,mass` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,mass")?;
        let n = self.cells();
        for i in 0..n {
            for j in 0..n {
                let m = self.mass(i, j);
                if m != T::zero() {
                    writeln!(out, "{i},{j},{:.16e}", m.as_f64())?;
                }
            }
        }
        Ok(())
    }
}

fn least_squares_slope<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let k = T::of_usize(xs.len());
    let mx = compensated_sum(xs.iter().copied()) / k;
    let my = compensated_sum(ys.iter().copied()) / k;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|&x| (x - mx) * (x - mx)));
    sxy / sxx
}

/// Diagonal scan of the planar quadratic variation,
/// `(1/ε) ∫_0^{T-ε} (Δ_{]t, t+ε]²} R)² dt`, by the midpoint rule with `cells` panels.
pub fn planar_quadratic_variation<T: Scalar>(kernel: &KernelSpec<T>, eps: T, cells: usize) -> Result<T> {
    let horizon = kernel.horizon();
    if !(eps > T::zero()) || eps >= horizon {
        return Err(Error::domain(format!("eps must lie in (0, T), got {eps}")));
    }
    if cells == 0 {
        return Err(Error::domain("quadrature needs at least one panel"));
    }
    let span = horizon - eps;
    let h = span / T::of_usize(cells);
    let terms = (0..cells).map(|i| {
        let t = (T::of_usize(i) + T::lit(0.5)) * h;
        let u = t + eps;
        let r = |a: T, b: T| kernel.covariance_unchecked(a, b);
        let inc = r(u, u) + r(t, t) - r(t, u) - r(u, t);
        inc * inc
    });
    Ok(compensated_sum(terms) * h / eps)
}

/// Planar variation and energy over dyadic refinements `n ∈ cells`.
pub fn refine_scan<T: Scalar>(kernel: &KernelSpec<T>, cells: &[usize]) -> Result<RefineScan<T>> {
    let mut rows = Vec::with_capacity(cells.len());
    for &n in cells {
        let grid = Grid::new(n, kernel.horizon())?;
        let m = DiscreteMeasure::build(kernel, &grid)?;
        rows.push(RefinementRow {
            cells: n,
            planar_variation: m.planar_variation(),
            energy: *m.energy_curve().last().expect("nonempty"),
        });
    }
    let growing = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b.planar_variation > a.planar_variation * T::lit(1.01),
        _ => false,
    };
    Ok(RefineScan { rows, growing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelSpec, Lambda};
    use approx::assert_relative_eq;

    fn measure(spec: &str, n: usize) -> DiscreteMeasure<f64> {
        let k = KernelSpec::parse(spec, 1.0).unwrap();
        DiscreteMeasure::build(&k, &Grid::new(n, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn martingale_measure_is_diagonal() {
        let m = measure("martingale:lambda=identity", 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.25 } else { 0.0 };
                assert_relative_eq!(m.mass(i, j), expect, epsilon = 1e-15);
            }
        }
        assert_relative_eq!(m.planar_variation(), 1.0, epsilon = 1e-15);
        for v in m.marginal() {
            assert_relative_eq!(v, 0.25, epsilon = 1e-15);
        }
        assert_eq!(m.triangle_mass(1.0).unwrap(), 0.0);
    }

    #[test]
    fn fbm_measure_is_nonnegative_and_telescopes() {
        let m = measure("fbm:H=0.75", 64);
        assert!(m.as_slice().iter().all(|&x| x >= 0.0));
        assert_relative_eq!(m.total(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.planar_variation(), m.total(), max_relative = 1e-14);
        let j = m.jordan_decompose();
        assert!(j.neg.as_slice().iter().all(|&x| x == 0.0));
        let k = KernelSpec::parse("fbm:H=0.75", 2.0).unwrap();
        let m2 = DiscreteMeasure::build(&k, &Grid::new(32, 2.0).unwrap()).unwrap();
        assert_relative_eq!(m2.total(), 2f64.powf(1.5), max_relative = 1e-12);
    }

    #[test]
    fn critical_bifbm_total_and_signs() {
        let m = measure("bifbm:H=0.75,K=2/3", 4);
        assert_relative_eq!(m.total(), 1.0, max_relative = 1e-13);
        let m = measure("bifbm:H=0.75,K=2/3", 64);
        let j = m.jordan_decompose();
        // off-diagonal cells carry only the negative R_1 density
        for i in 0..64 {
            for k in 0..64 {
                if i != k {
                    assert!(m.mass(i, k) <= 0.0, "({i},{k}) = {}", m.mass(i, k));
                    assert_eq!(j.pos.mass(i, k), 0.0);
                } else {
                    assert!(m.mass(i, i) > 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_measure() {
        let m = DiscreteMeasure::zero(Grid::new(5, 1.0f64).unwrap());
        let j = m.jordan_decompose();
        assert_eq!(j.pos, m);
        assert_eq!(j.neg, m);
        assert!(m.marginal().iter().all(|&v| v == 0.0));
        assert_eq!(m.planar_variation(), 0.0);
    }

    #[test]
    fn from_masses_checks_symmetry() {
        let g = Grid::new(2, 1.0f64).unwrap();
        assert!(DiscreteMeasure::from_masses(g, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(DiscreteMeasure::from_masses(g, vec![1.0, 0.5, 0.5, 1.0]).is_ok());
        assert!(DiscreteMeasure::from_masses(g, vec![1.0]).is_err());
    }

    #[test]
    fn fbm_marginal_telescopes_by_column() {
        let k = KernelSpec::parse("fbm:H=0.75", 1.0).unwrap();
        let g = Grid::new(32, 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &g).unwrap();
        for (j, nu) in m.marginal().into_iter().enumerate() {
            let expect = k.eval_covariance(1.0, g.point(j + 1)).unwrap() - k.eval_covariance(1.0, g.point(j)).unwrap();
            assert_relative_eq!(nu, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn martingale_energy_is_lambda() {
        let k = KernelSpec::martingale(Lambda::Power(2.0), 1.0).unwrap();
        let g = Grid::<f64>::new(16, 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &g).unwrap();
        for (i, e) in m.energy_curve().into_iter().enumerate() {
            assert_relative_eq!(e, g.point(i).powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn triangle_mass_needs_grid_point() {
        let m = measure("fbm:H=0.75", 8);
        assert!(m.triangle_mass(0.3).is_err());
        let e = *m.energy_curve().last().unwrap();
        assert_relative_eq!(m.triangle_mass(1.0).unwrap(), (1.0 - e) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn scaling_exponents() {
        let fbm = measure("fbm:H=0.7", 256);
        assert!((fbm.rectangle_scaling_exponent().unwrap() - 1.4).abs() < 0.05);
        let bm = measure("bm", 256);
        assert!((bm.rectangle_scaling_exponent().unwrap() - 1.0).abs() < 0.05);
        let b = measure("bifbm:H=0.75,K=2/3", 256);
        assert!(b.rectangle_scaling_exponent().unwrap() >= 1.0 - 0.05);
        assert!(measure("fbm:H=0.7", 100).rectangle_scaling_exponent().is_err());
        let zero = DiscreteMeasure::zero(Grid::new(256, 1.0f64).unwrap());
        assert!(matches!(zero.rectangle_scaling_exponent(), Err(Error::Estimation(_))));
    }

    #[test]
    fn planar_quadratic_variation_scan() {
        let bm = KernelSpec::parse("bm", 1.0).unwrap();
        let eps = 2f64.powi(-8);
        // Δ_{]t,t+ε]²}(s∧t) = ε, so the integral is ε²/ε over [0, 1-ε]
        let v = planar_quadratic_variation(&bm, eps, 1024).unwrap();
        assert_relative_eq!(v, eps * (1.0 - eps), max_relative = 1e-10);
        let fbm = KernelSpec::parse("fbm:H=0.75", 1.0).unwrap();
        let scan: Vec<f64> = (4..=10)
            .map(|p| planar_quadratic_variation(&fbm, 2f64.powi(-p), 1024).unwrap())
            .collect();
        assert!(scan.windows(2).all(|w| w[1] < w[0]));
        assert!(scan[6] < 1e-3);
        assert!(planar_quadratic_variation(&fbm, 0.0, 16).is_err());
        assert!(planar_quadratic_variation(&fbm, -1.0, 16).is_err());
    }

    #[test]
    fn rough_bifbm_refine_scan_grows() {
        let k = KernelSpec::parse("bifbm:H=0.6,K=0.5", 1.0).unwrap();
        let scan = refine_scan(&k, &[16, 64, 256, 1024]).unwrap();
        assert!(scan.growing);
        let fbm = KernelSpec::parse("fbm:H=0.75", 1.0).unwrap();
        assert!(!refine_scan(&fbm, &[16, 64, 256]).unwrap().growing);
    }

    #[test]
    fn csv_has_header_and_nonzero_entries() {
        let m = measure("bm", 3);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "i,j,mass");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,3.3333333333333"));
    }
}
