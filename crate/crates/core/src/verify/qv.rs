use crate::calculus::{covariation, MonteCarloEstimate};
use crate::covmeasure::DiscreteMeasure;
use crate::error::Result;
use crate::grid::Grid;
use crate::kernels::KernelSpec;
use crate::simulate::{sample_paths, PathEnsemble};

use super::report::{Check, Report, Series, Tolerances};

/// Exact mean of the covariation sum `C_ε(X, X, t_up)` at lag `k` cells, from the kernel.
pub fn covariation_expectation(kernel: &KernelSpec<f64>, grid: &Grid<f64>, k: usize, up: usize) -> Result<f64> {
    let n = grid.cells();
    let mut acc = 0.0;
    for i in 0..up {
        let (a, b) = (grid.point(i), grid.point((i + k).min(n)));
        acc += kernel.eval_covariance(a, a)? + kernel.eval_covariance(b, b)? - 2.0 * kernel.eval_covariance(a, b)?;
    }
    Ok(acc / k as f64)
}

/// `ε ∈ {2^{-4} T, ..., 2^{-8} T}` restricted to positive multiples of `h`.
pub fn default_eps(grid: &Grid<f64>) -> Vec<f64> {
    (4..=8)
        .map(|p| grid.horizon() / f64::from(1u32 << p))
        .filter(|&e| grid.cells_in(e).is_ok())
        .collect()
}

/// Energy reference at `T`: the closed form when known, else the discrete `E_n(T)`.
fn energy_reference(kernel: &KernelSpec<f64>, grid: &Grid<f64>) -> Result<(f64, &'static str)> {
    match kernel.energy_closed_form(grid.horizon())? {
        Some(e) => Ok((e, "qv-closed-form")),
        None => {
            let m = DiscreteMeasure::build(kernel, grid)?;
            Ok((*m.energy_curve().last().unwrap(), "qv-grid-energy"))
        }
    }
}

/// The `qv` suite on a sampled ensemble.
pub fn qv_report_on(
    kernel: &KernelSpec<f64>,
    paths: &PathEnsemble,
    eps: &[f64],
    tol: &Tolerances,
) -> Result<Report> {
    let grid = *paths.grid();
    let horizon = grid.horizon();
    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let (reference, identity) = energy_reference(kernel, &grid)?;
    let mut report = Report::new("qv", kernel.id())
        .param("n", grid.cells())
        .param("T", horizon)
        .param("M", paths.len())
        .param("seed", paths.seed())
        .param("eps", eps.clone());
    let mut series = Series::new("covariation", &["eps", "mean", "std_error", "expected", "limit"]);
    for (j, &e) in eps.iter().enumerate() {
        let k = grid.cells_in(e)?;
        let c = covariation(paths, paths, e, horizon)?;
        let est = MonteCarloEstimate::from_samples(&c)?;
        let expected = covariation_expectation(kernel, &grid, k, grid.cells())?;
        series.push(vec![e, est.mean, est.std_error, expected, reference]);
        let smallest = j + 1 == eps.len();
        let limit = Check::monte_carlo(format!("C_eps(X,X,T) eps={e}"), identity, &est, reference, tol.mc_sigmas);
        report.push(if smallest { limit } else { limit.informational() });
        report.push(
            Check::monte_carlo(
                format!("C_eps(X,X,T) eps={e} vs its exact mean"),
                "qv-estimator-mean",
                &est,
                expected,
                tol.mc_sigmas,
            )
            .informational(),
        );
    }
    report.series.push(series);
    Ok(report)
}

/// Samples `count` paths and runs [`qv_report_on`].
pub fn qv_report(
    kernel: &KernelSpec<f64>,
    grid: &Grid<f64>,
    count: usize,
    seed: u64,
    eps: &[f64],
    tol: &Tolerances,
) -> Result<Report> {
    let paths = sample_paths(kernel, grid, count, seed)?;
    qv_report_on(kernel, &paths, eps, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_expectation_is_exact_time() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(64, 1.0).unwrap();
        assert!((covariation_expectation(&k, &g, 1, 64).unwrap() - 1.0).abs() < 1e-12);
        // held constant after T: the last k-1 increments are partial
        let e = covariation_expectation(&k, &g, 4, 64).unwrap();
        assert!((e - (1.0 - 1.5 / 64.0 * 4.0 / 4.0)).abs() < 1e-12, "{e}");
    }

    #[test]
    fn martingale_report_passes() {
        let k = KernelSpec::parse("martingale:lambda=square", 1.0).unwrap();
        let g = Grid::new(256, 1.0).unwrap();
        let r = qv_report(&k, &g, 2000, 1, &default_eps(&g), &Tolerances::default()).unwrap();
        assert_eq!(r.checks.len(), 10);
        assert!(r.passed(), "{:#?}", r.checks);
    }
}
