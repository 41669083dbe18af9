use crate::covmeasure::DiscreteMeasure;
use crate::error::Result;
use crate::grid::Grid;
use crate::kernels::KernelSpec;

use super::report::{Check, Report, Series, Tolerances};

/// `γ(t_k) = E_n(t_k) + 2 μ(Δ_{t_k})` on every grid point.
pub fn gamma_decomposition_report(kernel: &KernelSpec<f64>, grid: &Grid<f64>, tol: &Tolerances) -> Result<Report> {
    let m = DiscreteMeasure::build(kernel, grid)?;
    let energy = m.energy_curve();
    let triangle = m.triangle_curve();
    let mut series = Series::new("decomposition", &["t", "gamma", "energy", "triangle", "gap"]);
    let mut worst: f64 = 0.0;
    for k in 0..=grid.cells() {
        let t = grid.point(k);
        let gamma = kernel.variance_curve(t)?;
        let gap = gamma - (energy[k] + 2.0 * triangle[k]);
        worst = worst.max(gap.abs());
        series.push(vec![t, gamma, energy[k], triangle[k], gap]);
    }
    let mut report = Report::new("gamma", kernel.id())
        .param("n", grid.cells())
        .param("T", grid.horizon());
    report.push(Check::at_most("max |gamma - E - 2 triangle|", "gamma-decomposition", worst, tol.exact));
    if let Some(e) = kernel.energy_closed_form(grid.horizon())? {
        report.push(
            Check::exact("E_n(T) vs limit energy", "energy-limit", energy[grid.cells()], e, 1e-2).informational(),
        );
    }
    report.series.push(series);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holds_for_martingale_and_bifbm() {
        for spec in ["martingale:lambda=identity", "bifbm:H=0.75,K=2/3", "fbm:H=0.3"] {
            let k = KernelSpec::parse(spec, 1.0).unwrap();
            let r = gamma_decomposition_report(&k, &Grid::new(64, 1.0).unwrap(), &Tolerances::default()).unwrap();
            assert!(r.passed(), "{spec}: {:?}", r.checks);
        }
    }
}
