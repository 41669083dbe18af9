use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::covmeasure::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelSpec;

/// How the increment covariance is factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    /// Independent increments.
    Diagonal,
    /// Lower-triangular Cholesky factor.
    Dense,
    /// Circulant embedding of a stationary increment sequence.
    Circulant,
}

#[derive(Clone)]
enum Repr {
    Diagonal(Vec<f64>),
    /// Column `j` holds `L[j..n, j]`, packed one after the other.
    Dense { columns: Vec<f64>, offsets: Vec<usize> },
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Square root `L` of the increment Gram matrix, `L Lᵀ = G + jitter·I`.
#[derive(Clone)]
pub struct GramFactor {
    n: usize,
    jitter: f64,
    repr: Repr,
}

impl std::fmt::Debug for GramFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GramFactor")
            .field("n", &self.n)
            .field("kind", &self.kind())
            .field("jitter", &self.jitter)
            .finish()
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(gram: &[f64], n: usize) -> (f64, f64) {
    let m = DMatrix::from_row_slice(n, n, gram);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Row-major lower Cholesky factor of `gram + jitter·I`, tolerating zero pivots.
fn semidefinite_cholesky(gram: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| gram[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let (head, tail) = l.split_at_mut(j * n);
        let row_j = &mut tail[..n];
        let d = gram[j * n + j] + jitter - dot(&row_j[..j], &row_j[..j]);
        if d < -tol {
            return None;
        }
        let _ = head;
        if d <= tol {
            row_j[j] = 0.0;
            for i in j + 1..n {
                let (upper, lower) = l.split_at(i * n);
                let v = gram[i * n + j] - dot(&lower[..j], &upper[j * n..j * n + j]);
                if v.abs() > 1e-8 * scale.sqrt() * scale.sqrt() {
                    return None;
                }
            }
            continue;
        }
        let pivot = d.sqrt();
        row_j[j] = pivot;
        for i in j + 1..n {
            let (upper, lower) = l.split_at_mut(i * n);
            let row_i = &mut lower[..n];
            let row_j = &upper[j * n..j * n + j];
            row_i[j] = (gram[i * n + j] - dot(&row_i[..j], row_j)) / pivot;
        }
    }
    Some(l)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

impl GramFactor {
    /// Chooses a factorization for `kernel` on `grid`: diagonal when increments are
    /// uncorrelated, circulant embedding for stationary increments when the embedding is
    /// nonnegative, dense Cholesky otherwise.
    pub fn for_kernel(kernel: &KernelSpec<f64>, grid: &Grid<f64>) -> Result<Self> {
        let m = DiscreteMeasure::build(kernel, grid)?;
        if is_diagonal(&m) {
            return Self::diagonal(&m);
        }
        if kernel.has_stationary_increments() {
            if let Some(f) = Self::circulant(&m) {
                return Ok(f);
            }
        }
        Self::dense(&m)
    }

    /// Independent increments with variances `mass[i][i]`.
    pub fn diagonal(m: &DiscreteMeasure<f64>) -> Result<Self> {
        let n = m.cells();
        let mut sd = Vec::with_capacity(n);
        for i in 0..n {
            let v = m.mass(i, i);
            if v < 0.0 {
                return Err(Error::NotPsd {
                    min_eigenvalue: v,
                    max_eigenvalue: v,
                    jitter: 0.0,
                });
            }
            sd.push(v.sqrt());
        }
        Ok(GramFactor {
            n,
            jitter: 0.0,
            repr: Repr::Diagonal(sd),
        })
    }

    /// Increments with variances `λ(t_{i+1}) - λ(t_i)`, given as standard deviations.
    pub(crate) fn from_std_devs(sd: Vec<f64>) -> Self {
        GramFactor {
            n: sd.len(),
            jitter: 0.0,
            repr: Repr::Diagonal(sd),
        }
    }

    /// Dense Cholesky factor with the jitter policy
    /// `jitter = min(max(0, -2 λ_min), 1e-10 · trace / n)`, applied only if the plain
    /// factorization fails.
    pub fn dense(m: &DiscreteMeasure<f64>) -> Result<Self> {
        let n = m.cells();
        let gram = m.as_slice();
        let (lower, jitter) = match semidefinite_cholesky(gram, n, 0.0) {
            Some(l) => (l, 0.0),
            None => {
                let (min_eig, max_eig) = eigen_range(gram, n);
                let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
                let cap = 1e-10 * trace / n as f64;
                let jitter = (-2.0 * min_eig).max(0.0).min(cap);
                match semidefinite_cholesky(gram, n, jitter) {
                    Some(l) => (l, jitter),
                    None => {
                        return Err(Error::NotPsd {
                            min_eigenvalue: min_eig,
                            max_eigenvalue: max_eig,
                            jitter,
                        })
                    }
                }
            }
        };
        let mut columns = Vec::with_capacity(n * (n + 1) / 2);
        let mut offsets = Vec::with_capacity(n + 1);
        for j in 0..n {
            offsets.push(columns.len());
            columns.extend((j..n).map(|i| lower[i * n + j]));
        }
        offsets.push(columns.len());
        Ok(GramFactor {
            n,
            jitter,
            repr: Repr::Dense { columns, offsets },
        })
    }

    /// Circulant embedding of the first row of a Toeplitz increment covariance.
    /// `None` when the embedding has a negative eigenvalue.
    pub fn circulant(m: &DiscreteMeasure<f64>) -> Option<Self> {
        let n = m.cells();
        if n < 2 {
            return None;
        }
        let size = 2 * (n - 1);
        let row = m.row(0);
        let mut buf: Vec<Complex<f64>> = (0..size)
            .map(|k| {
                let lag = if k < n { k } else { size - k };
                Complex::new(row[lag], 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut buf);
        let max = buf.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -1e-10 * max.abs() {
            return None;
        }
        let scale = buf.iter().map(|c| (c.re.max(0.0) / size as f64).sqrt()).collect();
        Some(GramFactor {
            n,
            jitter: 0.0,
            repr: Repr::Circulant { scale, fft },
        })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn kind(&self) -> FactorKind {
        match self.repr {
            Repr::Diagonal(_) => FactorKind::Diagonal,
            Repr::Dense { .. } => FactorKind::Dense,
            Repr::Circulant { .. } => FactorKind::Circulant,
        }
    }

    /// Standard normals consumed per path.
    pub fn normals_per_path(&self) -> usize {
        match &self.repr {
            Repr::Circulant { scale, .. } => 2 * scale.len(),
            _ => self.n,
        }
    }

    /// Row-major `n × n` lower factor (diagonal and dense kinds only).
    pub fn lower(&self) -> Option<Vec<f64>> {
        let n = self.n;
        match &self.repr {
            Repr::Diagonal(sd) => {
                let mut l = vec![0.0; n * n];
                for (i, s) in sd.iter().enumerate() {
                    l[i * n + i] = *s;
                }
                Some(l)
            }
            Repr::Dense { columns, offsets } => {
                let mut l = vec![0.0; n * n];
                for j in 0..n {
                    for (k, v) in columns[offsets[j]..offsets[j + 1]].iter().enumerate() {
                        l[(j + k) * n + j] = *v;
                    }
                }
                Some(l)
            }
            Repr::Circulant { .. } => None,
        }
    }

    /// Maps standard normals to correlated increments, one path per normal block.
    /// `normals` holds `paths` blocks of [`normals_per_path`](Self::normals_per_path);
    /// `increments` receives `paths` blocks of `n`.
    pub fn apply(&self, normals: &[f64], increments: &mut [f64]) {
        let n = self.n;
        let per = self.normals_per_path();
        let paths = increments.len() / n;
        debug_assert_eq!(normals.len(), paths * per);
        match &self.repr {
            Repr::Diagonal(sd) => {
                for (inc, z) in increments.chunks_mut(n).zip(normals.chunks(per)) {
                    for i in 0..n {
                        inc[i] = sd[i] * z[i];
                    }
                }
            }
            Repr::Dense { columns, offsets } => {
                increments.iter_mut().for_each(|v| *v = 0.0);
                // column sweep shared by all paths of the tile; per path the order of
                // accumulation is the same regardless of tile size
                for j in 0..n {
                    let col = &columns[offsets[j]..offsets[j + 1]];
                    for (inc, z) in increments.chunks_mut(n).zip(normals.chunks(per)) {
                        let zj = z[j];
                        for (x, c) in inc[j..].iter_mut().zip(col) {
                            *x += zj * c;
                        }
                    }
                }
            }
            Repr::Circulant { scale, fft } => {
                let size = scale.len();
                let mut buf = vec![Complex::new(0.0, 0.0); size];
                for (inc, z) in increments.chunks_mut(n).zip(normals.chunks(per)) {
                    for k in 0..size {
                        buf[k] = Complex::new(scale[k] * z[2 * k], scale[k] * z[2 * k + 1]);
                    }
                    fft.process(&mut buf);
                    for i in 0..n {
                        inc[i] = buf[i].re;
                    }
                }
            }
        }
    }
}

fn is_diagonal(m: &DiscreteMeasure<f64>) -> bool {
    let n = m.cells();
    let scale = (0..n).map(|i| m.mass(i, i).abs()).fold(0.0, f64::max);
    (0..n).all(|i| (0..n).all(|j| i == j || m.mass(i, j).abs() <= 1e-14 * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(spec: &str, n: usize) -> DiscreteMeasure<f64> {
        let k = KernelSpec::parse(spec, 1.0).unwrap();
        DiscreteMeasure::build(&k, &Grid::new(n, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn brownian_factor_is_half_identity() {
        let k = KernelSpec::parse("bm", 1.0).unwrap();
        let f = GramFactor::for_kernel(&k, &Grid::new(4, 1.0).unwrap()).unwrap();
        assert_eq!(f.kind(), FactorKind::Diagonal);
        let l = f.lower().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 0.5 } else { 0.0 };
                assert!((l[i * 4 + j] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dense_factor_reconstructs_gram() {
        let m = measure("fbm:H=0.7", 256);
        let f = GramFactor::dense(&m).unwrap();
        let l = f.lower().unwrap();
        let n = 256;
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
                err += (v - m.mass(i, j)).powi(2);
                norm += m.mass(i, j).powi(2);
            }
        }
        assert!((err / norm).sqrt() < 1e-8);
        assert_eq!(f.jitter(), 0.0);
    }

    #[test]
    fn martingale_factor_is_sqrt_of_increments() {
        let m = measure("martingale:lambda=square", 8);
        let f = GramFactor::diagonal(&m).unwrap();
        let l = f.lower().unwrap();
        for i in 0..8 {
            let expect = ((((i + 1) as f64) / 8.0).powi(2) - ((i as f64) / 8.0).powi(2)).sqrt();
            assert!((l[i * 8 + i] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_lambda_gives_zero_pivots() {
        let k = KernelSpec::martingale(crate::kernels::Lambda::custom("capped", |x: f64| x.min(0.5)), 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &Grid::new(8, 1.0).unwrap()).unwrap();
        let f = GramFactor::dense(&m).unwrap();
        let l = f.lower().unwrap();
        assert_eq!(l[7 * 8 + 7], 0.0);
    }

    #[test]
    fn indefinite_kernel_reports_eigenvalues() {
        let k = KernelSpec::parse("statinc:Q=piecewise,H=0.95", 2.0).unwrap();
        let m = DiscreteMeasure::build(&k, &Grid::new(64, 2.0).unwrap()).unwrap();
        match GramFactor::dense(&m) {
            Err(Error::NotPsd { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn circulant_matches_dense_covariance() {
        // The circulant map is linear: its implied covariance is A Aᵀ for the matrix
        // whose columns are images of unit normal vectors.
        let m = measure("fbm:H=0.7", 16);
        let f = GramFactor::circulant(&m).expect("fbm embedding is nonnegative");
        let per = f.normals_per_path();
        let n = 16;
        let mut a = vec![0.0; n * per];
        for k in 0..per {
            let mut z = vec![0.0; per];
            z[k] = 1.0;
            let mut inc = vec![0.0; n];
            f.apply(&z, &mut inc);
            for i in 0..n {
                a[i * per + k] = inc[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let c: f64 = (0..per).map(|k| a[i * per + k] * a[j * per + k]).sum();
                assert!((c - m.mass(i, j)).abs() < 1e-12, "({i},{j}) {c} vs {}", m.mass(i, j));
            }
        }
    }
}
