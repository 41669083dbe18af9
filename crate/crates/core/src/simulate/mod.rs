//! Exact Gaussian path sampling on a grid.
//!
//! Increments `ΔX_i = X_{t_{i+1}} - X_{t_i}` have covariance `mass[i][j]`, so a path is the
//! cumulative sum of `L z` for a square root `L` of the cell-mass matrix. Path `m` draws its
//! normals from a ChaCha stream keyed by `(seed, m)`, which makes an ensemble independent of
//! how it is split across threads.

mod factor;
mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Family, KernelSpec, Lambda};

pub use factor::{eigen_range, FactorKind, GramFactor};
pub use io::{read_binary, MAGIC};

/// Paths generated together by the dense factor; any tile size gives the same bits.
const TILE: usize = 8;

/// `splitmix64` step, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Metadata attached to every ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleInfo {
    pub kernel: String,
    pub seed: u64,
    pub method: FactorKind,
    pub jitter: f64,
}

/// `M` paths on a grid, stored row-major as `M × (n+1)` with `X_{t_0} = 0`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: Grid<f64>,
    data: Vec<f64>,
    info: EnsembleInfo,
}

impl PathEnsemble {
    /// Wraps raw rows; every row must have `n + 1` entries and start at 0.
    pub fn from_rows(grid: Grid<f64>, data: Vec<f64>, info: EnsembleInfo) -> Result<Self> {
        let width = grid.cells() + 1;
        if data.is_empty() || data.len() % width != 0 {
            return Err(Error::GridMismatch(format!(
                "{} values do not form rows of length {width}",
                data.len()
            )));
        }
        if data.chunks(width).any(|r| r[0] != 0.0) {
            return Err(Error::domain("paths must start at 0"));
        }
        Ok(PathEnsemble { grid, data, info })
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.grid.cells() + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn path(&self, m: usize) -> &[f64] {
        let w = self.grid.cells() + 1;
        &self.data[m * w..(m + 1) * w]
    }

    pub fn paths(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks(self.grid.cells() + 1)
    }

    /// Parallel iterator over paths, in index order.
    pub fn par_paths(&self) -> rayon::slice::Chunks<'_, f64> {
        self.data.par_chunks(self.grid.cells() + 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn info(&self) -> &EnsembleInfo {
        &self.info
    }

    pub fn seed(&self) -> u64 {
        self.info.seed
    }

    /// `X_{t_i}` across paths.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.paths().map(|p| p[i]).collect()
    }

    /// Pointwise sum with an independent ensemble on the same grid.
    pub fn add(&self, other: &PathEnsemble, info: EnsembleInfo) -> Result<PathEnsemble> {
        self.grid.ensure_same(&other.grid)?;
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!("{} vs {} paths", self.len(), other.len())));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(PathEnsemble {
            grid: self.grid,
            data,
            info,
        })
    }

    /// CSV with one row per path: `path,x_0,...,x_n`, header carrying the grid times.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_csv(self, out)
    }

    /// Binary form: 32-byte header then little-endian rows, see [`MAGIC`].
    pub fn write_binary<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_binary(self, out)
    }
}

/// Draws paths from a fixed factor; paths are computed on demand so very long ensembles
/// can be streamed.
#[derive(Debug, Clone)]
pub struct PathSampler {
    grid: Grid<f64>,
    factor: GramFactor,
    info: EnsembleInfo,
}

impl PathSampler {
    pub fn new(kernel: &KernelSpec<f64>, grid: &Grid<f64>, seed: u64) -> Result<Self> {
        let factor = gram_factor(kernel, grid)?;
        Ok(Self::from_factor(factor, *grid, kernel.id(), seed))
    }

    /// Time-changed Brownian sampling for martingales (any streaming grid), the
    /// increment factor of the full kernel otherwise.
    pub fn for_kernel(kernel: &KernelSpec<f64>, grid: &Grid<f64>, seed: u64) -> Result<Self> {
        match kernel.family() {
            Family::GaussMartingale(l) => Self::martingale(l, grid, seed),
            Family::Bm => {
                let mut s = Self::martingale(&Lambda::Identity, grid, seed)?;
                s.info.kernel = kernel.id();
                Ok(s)
            }
            _ => Self::new(kernel, grid, seed),
        }
    }

    pub fn from_factor(factor: GramFactor, grid: Grid<f64>, kernel: String, seed: u64) -> Self {
        let info = EnsembleInfo {
            kernel,
            seed,
            method: factor.kind(),
            jitter: factor.jitter(),
        };
        PathSampler { grid, factor, info }
    }

    /// Time-changed Brownian sampler `W_{λ(t)}`; accepts streaming grids.
    pub fn martingale(lambda: &Lambda<f64>, grid: &Grid<f64>, seed: u64) -> Result<Self> {
        let pts = grid.points();
        let mut sd = Vec::with_capacity(grid.cells());
        for w in pts.windows(2) {
            let d = lambda.eval(w[1]) - lambda.eval(w[0]);
            if d < 0.0 {
                return Err(Error::domain(format!("lambda decreases on [{}, {}]", w[0], w[1])));
            }
            sd.push(d.sqrt());
        }
        if lambda.eval(0.0) != 0.0 {
            return Err(Error::domain("martingale lambda must vanish at 0"));
        }
        let kernel = KernelSpec::martingale(lambda.clone(), grid.horizon())?;
        Ok(Self::from_factor(GramFactor::from_std_devs(sd), *grid, kernel.id(), seed))
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    pub fn info(&self) -> &EnsembleInfo {
        &self.info
    }

    /// Writes path `m` into `buf` (length `n + 1`).
    pub fn path_into(&self, m: usize, buf: &mut [f64]) {
        let mut z = vec![0.0; self.factor.normals_per_path()];
        self.fill_normals(m, &mut z);
        self.factor.apply(&z, &mut buf[1..]);
        cumulate(buf);
    }

    pub fn path(&self, m: usize) -> Vec<f64> {
        let mut buf = vec![0.0; self.grid.cells() + 1];
        self.path_into(m, &mut buf);
        buf
    }

    fn fill_normals(&self, m: usize, z: &mut [f64]) {
        let mut rng = path_rng(self.info.seed, m);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    /// Paths `0..count`, generated in parallel.
    pub fn ensemble(&self, count: usize) -> Result<PathEnsemble> {
        if count == 0 {
            return Err(Error::domain("need at least one path"));
        }
        let n = self.grid.cells();
        let w = n + 1;
        let per = self.factor.normals_per_path();
        let mut data = vec![0.0; count * w];
        data.par_chunks_mut(TILE * w).enumerate().for_each(|(tile, rows)| {
            let paths = rows.len() / w;
            let mut z = vec![0.0; paths * per];
            for (k, zk) in z.chunks_mut(per).enumerate() {
                self.fill_normals(tile * TILE + k, zk);
            }
            let mut inc = vec![0.0; paths * n];
            self.factor.apply(&z, &mut inc);
            for (row, d) in rows.chunks_mut(w).zip(inc.chunks(n)) {
                row[1..].copy_from_slice(d);
                cumulate(row);
            }
        });
        Ok(PathEnsemble {
            grid: self.grid,
            data,
            info: self.info.clone(),
        })
    }
}

fn cumulate(row: &mut [f64]) {
    row[0] = 0.0;
    for i in 1..row.len() {
        row[i] += row[i - 1];
    }
}

/// Square root of the increment Gram matrix of `kernel` on `grid`.
pub fn gram_factor(kernel: &KernelSpec<f64>, grid: &Grid<f64>) -> Result<GramFactor> {
    GramFactor::for_kernel(kernel, grid)
}

/// `count` paths of `kernel`. Mixed fBm is built from independent Brownian and fBm parts.
pub fn sample_paths(kernel: &KernelSpec<f64>, grid: &Grid<f64>, count: usize, seed: u64) -> Result<PathEnsemble> {
    match kernel.family() {
        Family::MixedFbm { hurst } => mixed_fbm_paths(*hurst, grid, count, seed),
        _ => PathSampler::for_kernel(kernel, grid, seed)?.ensemble(count),
    }
}

/// Time-changed Brownian motion with covariance `λ(s ∧ t)`.
pub fn martingale_paths(lambda: &Lambda<f64>, grid: &Grid<f64>, count: usize, seed: u64) -> Result<PathEnsemble> {
    PathSampler::martingale(lambda, grid, seed)?.ensemble(count)
}

/// `W + B^H` with independent components drawn from sub-seeds of `seed`.
pub fn mixed_fbm_paths(hurst: f64, grid: &Grid<f64>, count: usize, seed: u64) -> Result<PathEnsemble> {
    let kernel = KernelSpec::mixed_fbm(hurst, grid.horizon())?;
    let (w, b) = mixed_components(hurst, grid, count, seed)?;
    let info = EnsembleInfo {
        kernel: kernel.id(),
        seed,
        method: b.info().method,
        jitter: b.info().jitter,
    };
    w.add(&b, info)
}

/// The Brownian and fBm parts of [`mixed_fbm_paths`], in that order.
pub fn mixed_components(hurst: f64, grid: &Grid<f64>, count: usize, seed: u64) -> Result<(PathEnsemble, PathEnsemble)> {
    let fbm = KernelSpec::fbm(hurst, grid.horizon())?;
    let w = martingale_paths(&Lambda::Identity, grid, count, derive_seed(seed, 0))?;
    let b = PathSampler::new(&fbm, grid, derive_seed(seed, 1))?.ensemble(count)?;
    Ok((w, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::MonteCarloEstimate;

    #[test]
    fn single_path_is_reproducible() {
        let k = KernelSpec::fbm(0.7, 1.0).unwrap();
        let g = Grid::new(64, 1.0).unwrap();
        let a = sample_paths(&k, &g, 1, 7).unwrap();
        let b = sample_paths(&k, &g, 1, 7).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_eq!(a.path(0)[0], 0.0);
    }

    #[test]
    fn path_depends_only_on_seed_and_index() {
        let k = KernelSpec::bifbm(0.75, 2.0 / 3.0, 1.0).unwrap();
        let g = Grid::new(32, 1.0).unwrap();
        let big = sample_paths(&k, &g, 21, 3).unwrap();
        let small = sample_paths(&k, &g, 5, 3).unwrap();
        for m in 0..5 {
            assert_eq!(big.path(m), small.path(m));
        }
        let s = PathSampler::new(&k, &g, 3).unwrap();
        assert_eq!(s.path(17), big.path(17));
    }

    #[test]
    fn brownian_terminal_variance() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(16, 1.0).unwrap();
        let e = sample_paths(&k, &g, 10_000, 42).unwrap();
        let v = MonteCarloEstimate::variance_of(&e.column(16)).unwrap();
        assert!((v.mean - 1.0).abs() <= 4.0 * (2.0f64 / 10_000.0).sqrt(), "{v:?}");
    }

    #[test]
    fn decreasing_lambda_is_rejected() {
        let l = Lambda::custom("bump", |x: f64| x * (1.0 - x));
        let g = Grid::new(8, 1.0).unwrap();
        assert!(martingale_paths(&l, &g, 4, 1).is_err());
    }

    #[test]
    fn mixed_components_are_uncorrelated() {
        let g = Grid::new(16, 1.0).unwrap();
        let (w, b) = mixed_components(0.8, &g, 10_000, 9).unwrap();
        let prod: Vec<f64> = w.column(16).iter().zip(b.column(16)).map(|(x, y)| x * y).collect();
        let e = MonteCarloEstimate::from_samples(&prod).unwrap();
        assert!(e.agrees_with(0.0, 4.0), "{e:?}");
        let x = mixed_fbm_paths(0.8, &g, 10_000, 9).unwrap();
        let v = MonteCarloEstimate::variance_of(&x.column(16)).unwrap();
        assert!(v.agrees_with(2.0, 4.0), "{v:?}");
    }

    #[test]
    fn circulant_and_dense_agree_in_law() {
        let k = KernelSpec::fbm(0.7, 1.0).unwrap();
        let g = Grid::new(32, 1.0).unwrap();
        let s = PathSampler::new(&k, &g, 5).unwrap();
        assert_eq!(s.factor().kind(), FactorKind::Circulant);
        let m = crate::covmeasure::DiscreteMeasure::build(&k, &g).unwrap();
        let dense = PathSampler::from_factor(GramFactor::dense(&m).unwrap(), g, k.id(), 5);
        for sampler in [s, dense] {
            let e = sampler.ensemble(10_000).unwrap();
            let v = MonteCarloEstimate::variance_of(&e.column(16)).unwrap();
            assert!(v.agrees_with(0.5f64.powf(1.4), 4.0), "{v:?}");
        }
    }
}
