use serde::Serialize;

use crate::calculus::{pairwise_sum, skorohod_via_trace, Profile};
use crate::covmeasure::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::KernelSpec;
use crate::simulate::sample_paths;

use super::report::{Check, Report, Series};

/// Readable name for the test functions used by the Itô suite.
pub fn profile_name(f: &Profile) -> String {
    match f {
        Profile::Poly(c) if c.as_slice() == [0.0, 0.0, 0.5] => "x^2/2".into(),
        Profile::Cos(w) if *w == 1.0 => "cos(x)".into(),
        Profile::Sin(w) if *w == 1.0 => "sin(x)".into(),
        other => format!("{other:?}"),
    }
}

/// Residuals of `f(X_t) = f(0) + ∫_0^t f'(X) δX + ½ ∫_0^t f''(X) dγ` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoReport {
    pub kernel: String,
    pub f: String,
    pub probes: Vec<f64>,
    pub residual_mean: Vec<f64>,
    /// Root mean square over paths, per probe.
    pub residual_l2: Vec<f64>,
    /// Root mean square of `residual_l2` over the probes.
    pub rms: f64,
    pub n: usize,
    #[serde(rename = "M")]
    pub paths: usize,
    pub eps_policy: String,
}

/// `T/4, T/2, 3T/4, T`.
pub fn default_probes(horizon: f64) -> Vec<f64> {
    vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon]
}

/// Per path and probe `t`: `f(X_t) - f(0) - δ(f'(X) 1_{[0,t]}) - ½ Σ_i f''(X_{t_i}) (γ(t_{i+1}) - γ(t_i))`,
/// with the Skorohod integral from the trace-corrected forward sum at `ε = h`.
pub fn ito_residual(
    kernel: &KernelSpec<f64>,
    f: &Profile,
    grid: &Grid<f64>,
    count: usize,
    seed: u64,
    probes: &[f64],
) -> Result<ItoReport> {
    if !f.has_bounded_second_derivative() {
        return Err(Error::domain(format!("{} has an unbounded second derivative", profile_name(f))));
    }
    let m = DiscreteMeasure::build(kernel, grid)?;
    let x = sample_paths(kernel, grid, count, seed)?;
    let gamma: Vec<f64> = grid.points().iter().map(|&t| kernel.variance_curve(t)).collect::<Result<_>>()?;
    let fp = |v: f64| f.derivative(1, v);
    let fpp = |v: f64| f.derivative(2, v);
    let f0 = f.value(0.0);
    let mut residual_mean = Vec::new();
    let mut residual_l2 = Vec::new();
    for &t in probes {
        let k = grid.index_of(t)?;
        let delta = skorohod_via_trace(&fp, &fpp, &x, &m, t)?;
        let res: Vec<f64> = x
            .paths()
            .zip(&delta)
            .map(|(p, d)| {
                let drift: f64 = (0..k).map(|i| fpp(p[i]) * (gamma[i + 1] - gamma[i])).sum();
                f.value(p[k]) - f0 - d - 0.5 * drift
            })
            .collect();
        let sq: Vec<f64> = res.iter().map(|r| r * r).collect();
        residual_mean.push(pairwise_sum(&res) / count as f64);
        residual_l2.push((pairwise_sum(&sq) / count as f64).sqrt());
    }
    let rms = (residual_l2.iter().map(|r| r * r).sum::<f64>() / residual_l2.len() as f64).sqrt();
    Ok(ItoReport {
        kernel: kernel.id(),
        f: profile_name(f),
        probes: probes.to_vec(),
        residual_mean,
        residual_l2,
        rms,
        n: grid.cells(),
        paths: count,
        eps_policy: "forward sum at eps = h".into(),
    })
}

/// [`ito_residual`] on each grid size in `cells`.
pub fn ito_scan(
    kernel: &KernelSpec<f64>,
    f: &Profile,
    cells: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<ItoReport>> {
    let horizon = kernel.horizon();
    cells
        .iter()
        .map(|&n| ito_residual(kernel, f, &Grid::new(n, horizon)?, count, seed, &default_probes(horizon)))
        .collect()
}

/// The `ito` suite: for `x²/2` and `cos`, the probe-averaged residual must decrease from
/// the coarsest to the finest grid.
pub fn ito_suite(kernel: &KernelSpec<f64>, cells: &[usize], count: usize, seed: u64) -> Result<Report> {
    let mut report = Report::new("ito", kernel.id())
        .param("T", kernel.horizon())
        .param("M", count)
        .param("seed", seed)
        .param("grid_scan", cells.iter().map(|&n| n as f64).collect::<Vec<_>>());
    let mut series = Series::new("residual", &["f", "n", "rms"]);
    for (fi, f) in [Profile::Poly(vec![0.0, 0.0, 0.5]), Profile::Cos(1.0)].iter().enumerate() {
        let scan = ito_scan(kernel, f, cells, count, seed)?;
        for r in &scan {
            series.push(vec![fi as f64, r.n as f64, r.rms]);
            report.push(Check::at_most(format!("{} residual_l2 n={}", r.f, r.n), "ito-formula", r.rms, f64::INFINITY).informational());
        }
        if let (Some(first), Some(last)) = (scan.first(), scan.last()) {
            if scan.len() > 1 {
                report.push(Check::at_most(
                    format!("{} residual_l2 decreases n={} -> n={}", first.f, first.n, last.n),
                    "ito-formula",
                    last.rms,
                    first.rms,
                ));
            }
        }
    }
    report.series.push(series);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_square_residual_is_quadratic_variation_gap() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(64, 1.0).unwrap();
        let f = Profile::Poly(vec![0.0, 0.0, 0.5]);
        let r = ito_residual(&k, &f, &g, 4000, 3, &[1.0]).unwrap();
        // residual = ½ (Σ ΔX² - t): L² norm ½ √(2 n h²) = √(1/(2n))
        let expect = (1.0f64 / 128.0).sqrt();
        assert!((r.residual_l2[0] - expect).abs() < 0.1 * expect, "{r:?}");
    }

    #[test]
    fn unbounded_curvature_is_rejected() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(8, 1.0).unwrap();
        let f = Profile::Poly(vec![0.0, 0.0, 0.0, 1.0]);
        assert!(ito_residual(&k, &f, &g, 4, 1, &[1.0]).is_err());
    }
}
