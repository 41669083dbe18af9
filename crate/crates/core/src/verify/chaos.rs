//! Chaos expansion of local time, multiple Wiener integrals of indicators, and the
//! mollified occupation density used as an independent estimate.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::calculus::MonteCarloEstimate;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelSpec;
use crate::quadrature::integrate_graded;
use crate::simulate::{PathEnsemble, PathSampler};

use super::hermite::{hermite_all, multiple_integral_indicator};
use super::report::{Check, Report, Series, Tolerances};

/// Truncation order, evaluation points and occupation width.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosConfig {
    pub order: usize,
    /// `(t, x)` pairs; `t` must be a grid point.
    pub points: Vec<(f64, f64)>,
    /// Occupation width; `None` selects `max(4√h, 0.05 √γ(t))` per point.
    pub width: Option<f64>,
}

impl ChaosConfig {
    pub fn new(order: i64, points: Vec<(f64, f64)>, width: Option<f64>) -> Result<Self> {
        if order < 0 {
            return Err(Error::domain(format!("truncation order must be nonnegative, got {order}")));
        }
        if let Some(w) = width {
            if !(w > 0.0) {
                return Err(Error::domain(format!("occupation width must be positive, got {w}")));
            }
        }
        if points.is_empty() {
            return Err(Error::domain("no evaluation points"));
        }
        Ok(ChaosConfig {
            order: order as usize,
            points,
            width,
        })
    }
}

/// Gaussian density `p_{σ²}(x)`.
pub fn gaussian_density(variance: f64, x: f64) -> f64 {
    (-x * x / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

/// `max(4√h, 0.05 √γ(t))`.
pub fn default_width(step: f64, variance_at_t: f64) -> f64 {
    (4.0 * step.sqrt()).max(0.05 * variance_at_t.sqrt())
}

/// `∫_0^t p_{γ(s)}(x) ds` by graded Gauss–Legendre quadrature.
pub fn zeroth_term(kernel: &KernelSpec<f64>, t: f64, x: f64) -> Result<f64> {
    kernel.variance_curve(t)?;
    Ok(integrate_graded(
        |s| {
            let v = kernel.variance_curve(s).unwrap_or(0.0);
            if v > 0.0 {
                gaussian_density(v, x)
            } else {
                0.0
            }
        },
        t,
        12,
        60,
    ))
}

/// `(1 / 2w) · h · #{t_i ≤ t : |X_{t_i} - x| < w}`.
pub fn occupation_oracle(path: &[f64], grid: &Grid<f64>, t: f64, x: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::domain(format!("occupation width must be positive, got {width}")));
    }
    let k = grid.index_of(t)?;
    let hits = path[..=k].iter().filter(|&&v| (v - x).abs() < width).count();
    Ok(hits as f64 * grid.step() / (2.0 * width))
}

struct PointPlan {
    k: usize,
    x: f64,
    width: f64,
    zeroth: f64,
    /// `weights[(i - 1) * order + (n - 1)]` for grid index `i = 1..=k` and `n = 1..=order`.
    weights: Vec<f64>,
}

/// Precomputed chaos weights for one kernel, grid and configuration.
pub struct LocalTimeChaos {
    grid: Grid<f64>,
    order: usize,
    sd: Vec<f64>,
    plans: Vec<PointPlan>,
}

impl LocalTimeChaos {
    pub fn new(kernel: &KernelSpec<f64>, grid: &Grid<f64>, cfg: &ChaosConfig) -> Result<Self> {
        let order = cfg.order;
        let h = grid.step();
        let gamma: Vec<f64> = (0..=grid.cells())
            .map(|i| kernel.variance_curve(grid.point(i)))
            .collect::<Result<_>>()?;
        let sd: Vec<f64> = gamma.iter().map(|g| g.max(0.0).sqrt()).collect();
        let mut factorial = vec![1.0; order + 1];
        for n in 1..=order {
            factorial[n] = factorial[n - 1] * n as f64;
        }
        let mut plans = Vec::with_capacity(cfg.points.len());
        let mut he = Vec::new();
        for &(t, x) in &cfg.points {
            if !(t > 0.0) {
                return Err(Error::domain("local time needs t > 0"));
            }
            let k = grid.index_of(t)?;
            let mut weights = vec![0.0; k * order];
            for i in 1..=k {
                if gamma[i] <= 0.0 {
                    continue;
                }
                // dual cell of t_i inside (0, t]: full width inside, half at t itself
                let cell = if i == k { 0.5 * h } else { h };
                hermite_all(order, x / sd[i], &mut he);
                let p = gaussian_density(gamma[i], x);
                for n in 1..=order {
                    weights[(i - 1) * order + n - 1] = cell * p * he[n] / factorial[n];
                }
            }
            plans.push(PointPlan {
                k,
                x,
                width: cfg.width.unwrap_or_else(|| default_width(h, gamma[k])),
                zeroth: zeroth_term(kernel, t, x)?,
                weights,
            });
        }
        Ok(LocalTimeChaos {
            grid: *grid,
            order,
            sd,
            plans,
        })
    }

    /// The n = 0 summand at each evaluation point.
    pub fn zeroth_terms(&self) -> Vec<f64> {
        self.plans.iter().map(|p| p.zeroth).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.plans.iter().map(|p| p.width).collect()
    }

    /// Partial sums `L_0, ..., L_N` at each evaluation point of one path.
    pub fn partial_sums(&self, path: &[f64]) -> Vec<Vec<f64>> {
        let order = self.order;
        let kmax = self.plans.iter().map(|p| p.k).max().unwrap_or(0);
        // He_n(X_{t_i} / √γ(t_i)) does not depend on the evaluation point
        let mut he_path = vec![0.0; kmax * order];
        let mut he = Vec::with_capacity(order + 1);
        for i in 1..=kmax {
            if self.sd[i] > 0.0 {
                hermite_all(order, path[i] / self.sd[i], &mut he);
                he_path[(i - 1) * order..i * order].copy_from_slice(&he[1..]);
            }
        }
        self.plans
            .iter()
            .map(|p| {
                let mut terms = vec![0.0; order];
                for (w, e) in p.weights.chunks(order.max(1)).zip(he_path.chunks(order.max(1))).take(p.k) {
                    for n in 0..order {
                        terms[n] += w[n] * e[n];
                    }
                }
                let mut out = Vec::with_capacity(order + 1);
                let mut acc = p.zeroth;
                out.push(acc);
                for t in terms {
                    acc += t;
                    out.push(acc);
                }
                out
            })
            .collect()
    }

    /// `L_N(t, x)` at each evaluation point.
    pub fn eval(&self, path: &[f64]) -> Vec<f64> {
        self.partial_sums(path).into_iter().map(|s| *s.last().unwrap()).collect()
    }

    /// Occupation oracle at each evaluation point.
    pub fn occupation(&self, path: &[f64]) -> Vec<f64> {
        self.plans
            .iter()
            .map(|p| {
                let hits = path[..=p.k].iter().filter(|&&v| (v - p.x).abs() < p.width).count();
                hits as f64 * self.grid.step() / (2.0 * p.width)
            })
            .collect()
    }
}

/// `L_N(t, x)` on one path for each point of `cfg`.
pub fn chaos_local_time(path: &[f64], cfg: &ChaosConfig, kernel: &KernelSpec<f64>, grid: &Grid<f64>) -> Result<Vec<f64>> {
    if path.len() != grid.cells() + 1 {
        return Err(Error::GridMismatch(format!("path has {} points for {} cells", path.len(), grid.cells())));
    }
    Ok(LocalTimeChaos::new(kernel, grid, cfg)?.eval(path))
}

/// Ensemble statistics of the chaos expansion at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimePoint {
    pub t: f64,
    pub x: f64,
    pub width: f64,
    pub zeroth: f64,
    pub chaos: MonteCarloEstimate,
    pub oracle: MonteCarloEstimate,
    /// `sqrt(E (L_{N+2} - L_N)²)` for `N = 0..order-2`.
    pub tail_l2: Vec<f64>,
}

/// Streams `count` paths and collects chaos and occupation statistics.
pub fn local_time_study(
    kernel: &KernelSpec<f64>,
    grid: &Grid<f64>,
    count: usize,
    seed: u64,
    cfg: &ChaosConfig,
) -> Result<Vec<LocalTimePoint>> {
    let sampler = PathSampler::for_kernel(kernel, grid, seed)?;
    let plan = LocalTimeChaos::new(kernel, grid, cfg)?;
    let w = grid.cells() + 1;
    let per_path: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..count)
        .into_par_iter()
        .map_init(
            || vec![0.0; w],
            |buf, m| {
                sampler.path_into(m, buf);
                (plan.partial_sums(buf), plan.occupation(buf))
            },
        )
        .collect();
    let order = cfg.order;
    let widths = plan.widths();
    let zeroth = plan.zeroth_terms();
    cfg.points
        .iter()
        .enumerate()
        .map(|(j, &(t, x))| {
            let chaos: Vec<f64> = per_path.iter().map(|(s, _)| s[j][order]).collect();
            let occ: Vec<f64> = per_path.iter().map(|(_, o)| o[j]).collect();
            let tail_l2 = (0..order.saturating_sub(1))
                .map(|n| {
                    let sq: Vec<f64> = per_path.iter().map(|(s, _)| (s[j][n + 2] - s[j][n]).powi(2)).collect();
                    (crate::calculus::pairwise_sum(&sq) / count as f64).sqrt()
                })
                .collect();
            Ok(LocalTimePoint {
                t,
                x,
                width: widths[j],
                zeroth: zeroth[j],
                chaos: MonteCarloEstimate::from_samples(&chaos)?,
                oracle: MonteCarloEstimate::from_samples(&occ)?,
                tail_l2,
            })
        })
        .collect()
}

/// `E[I_n(s) I_m(t)]` against `n! R(s,t)^n δ_{nm}` for all orders and probe pairs.
pub fn isometry_checks(
    paths: &PathEnsemble,
    kernel: &KernelSpec<f64>,
    orders: &[usize],
    probes: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Check>> {
    let grid = paths.grid();
    let idx: Vec<usize> = probes.iter().map(|&t| grid.index_of(t)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for &n in orders {
        for &m in orders {
            if m < n {
                continue;
            }
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    if n == m && b < a {
                        continue;
                    }
                    let (s, t) = (probes[a], probes[b]);
                    let (rs, rt) = (kernel.variance_curve(s)?, kernel.variance_curve(t)?);
                    let prod: Vec<f64> = paths
                        .paths()
                        .map(|p| multiple_integral_indicator(n, p[i], rs) * multiple_integral_indicator(m, p[j], rt))
                        .collect();
                    let est = MonteCarloEstimate::from_samples(&prod)?;
                    let reference = if n == m {
                        let fact: f64 = (1..=n).map(|k| k as f64).product();
                        fact * kernel.eval_covariance(s, t)?.powi(n as i32)
                    } else {
                        0.0
                    };
                    let (name, identity) = if n == m {
                        (format!("E[I_{n}({s}) I_{n}({t})]"), "chaos-isometry")
                    } else {
                        (format!("E[I_{n}({s}) I_{m}({t})]"), "chaos-orthogonality")
                    };
                    checks.push(Check::monte_carlo(name, identity, &est, reference, tol.mc_sigmas));
                }
            }
        }
    }
    Ok(checks)
}

/// The `chaos` suite: isometry and orthogonality on the stored ensemble, then the
/// truncated expansion against the occupation oracle on streamed paths.
pub fn chaos_report(
    kernel: &KernelSpec<f64>,
    grid: &Grid<f64>,
    count: usize,
    seed: u64,
    cfg: &ChaosConfig,
    tol: &Tolerances,
) -> Result<Report> {
    let horizon = grid.horizon();
    let mut report = Report::new("chaos", kernel.id())
        .param("n", grid.cells())
        .param("T", horizon)
        .param("M", count)
        .param("seed", seed)
        .param("N", cfg.order);
    let probes = [0.25 * horizon, 0.5 * horizon, horizon];
    if grid.cells() % 4 == 0 && grid.cells() <= crate::grid::MAX_CELLS {
        let paths = crate::simulate::sample_paths(kernel, grid, count, seed)?;
        for c in isometry_checks(&paths, kernel, &[1, 2, 3], &probes, tol)? {
            report.push(c);
        }
    } else {
        report.notes.push("isometry skipped: needs n divisible by 4 and a stored ensemble".into());
    }
    let study = local_time_study(kernel, grid, count, seed, cfg)?;
    let mut tails = Series::new("tail_l2", &["t", "x", "N", "l2"]);
    for p in &study {
        let at = format!("L_{}({}, {})", cfg.order, p.t, p.x);
        report.push(Check::monte_carlo_pair(
            format!("{at} vs occupation (width {:.4})", p.width),
            "local-time-chaos",
            &p.chaos,
            &p.oracle,
            tol.mc_sigmas,
        ));
        if matches!(kernel.family(), crate::kernels::Family::Bm) && p.x == 0.0 {
            report.push(Check::exact(
                format!("n=0 summand at ({}, 0)", p.t),
                "gaussian-occupation",
                p.zeroth,
                (2.0 * p.t / PI).sqrt(),
                1e-3,
            ));
        }
        let decreasing = p.tail_l2.windows(2).all(|w| w[1] <= w[0]);
        report.push(Check::holds(format!("{at} partial sums stabilise"), "chaos-tail", decreasing).informational());
        for (n, v) in p.tail_l2.iter().enumerate() {
            tails.push(vec![p.t, p.x, n as f64, *v]);
        }
    }
    report.series.push(tails);
    Ok(report)
}
