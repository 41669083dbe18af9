use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{Family, KernelSpec};

use super::report::{Check, Report};

/// Largest number of offending pairs listed in a report.
const LISTED: usize = 10;

/// `2^{-K} |t-s|^{2HK} ≤ d²(s,t) ≤ 2^{1-K} |t-s|^{2HK}` on all grid pairs, with
/// `d²(s,t) = R(s,s) + R(t,t) - 2R(s,t)`.
pub fn quasi_helix_report(kernel: &KernelSpec<f64>, grid: &Grid<f64>) -> Result<Report> {
    let Family::Bifbm { hurst, k } = *kernel.family() else {
        return Err(Error::Unsupported(format!("quasi-helix bounds need a bifractional kernel, got {}", kernel.id())));
    };
    let a = 2.0 * hurst * k;
    let (lo_c, hi_c) = (2f64.powf(-k), 2f64.powf(1.0 - k));
    let pts = grid.points();
    let var: Vec<f64> = pts.iter().map(|&t| kernel.variance_curve(t)).collect::<Result<_>>()?;
    let mut report = Report::new("quasihelix", kernel.id())
        .param("n", grid.cells())
        .param("T", grid.horizon());
    let (mut below, mut above) = (0usize, 0usize);
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, 0.0f64);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d2 = var[i] + var[j] - 2.0 * kernel.eval_covariance(pts[i], pts[j])?;
            let base = (pts[j] - pts[i]).powf(a);
            let slack = 1e-12 * base;
            let ratio = d2 / base;
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
            let bad = if d2 < lo_c * base - slack {
                below += 1;
                true
            } else if d2 > hi_c * base + slack {
                above += 1;
                true
            } else {
                false
            };
            if bad && report.notes.len() < LISTED {
                report.notes.push(format!("violation at (s, t) = ({}, {}): d2 = {d2:e}", pts[i], pts[j]));
            }
        }
    }
    report.push(Check::at_most("lower bound violations", "quasi-helix", below as f64, 0.0));
    report.push(Check::at_most("upper bound violations", "quasi-helix", above as f64, 0.0));
    report.push(Check::exact("min d2 / |t-s|^{2HK}", "quasi-helix", min_ratio, lo_c, f64::INFINITY).informational());
    report.push(Check::exact("max d2 / |t-s|^{2HK}", "quasi-helix", max_ratio, hi_c, f64::INFINITY).informational());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_hold_and_fbm_is_rejected() {
        let g = Grid::new(32, 1.0).unwrap();
        for (h, k) in [(0.75, 2.0 / 3.0), (0.6, 0.9), (0.5, 1.0)] {
            let r = quasi_helix_report(&KernelSpec::bifbm(h, k, 1.0).unwrap(), &g).unwrap();
            assert!(r.passed(), "{h} {k}: {:?}", r.checks);
        }
        assert!(quasi_helix_report(&KernelSpec::fbm(0.7, 1.0).unwrap(), &g).is_err());
    }
}
