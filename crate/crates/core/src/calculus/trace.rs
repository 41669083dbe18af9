use crate::covmeasure::DiscreteMeasure;
use crate::error::Result;
use crate::simulate::PathEnsemble;

use super::regularization::{forward_integral, Integrand};

/// Column sums `a_j = Σ_{i<j} mass[i][j]` of the strictly lower triangle.
pub fn trace_weights(m: &DiscreteMeasure<f64>) -> Vec<f64> {
    let n = m.cells();
    (0..n).map(|j| (0..j).map(|i| m.mass(i, j)).sum()).collect()
}

/// Skorohod integral `∫_0^{upto} f'(X) δX` as the forward sum at `ε = h` minus the trace
/// term `Σ_{i<j<k} f''(X_{t_j}) mass[i][j]`, `t_k = upto`.
pub fn skorohod_via_trace(
    fprime: &(dyn Fn(f64) -> f64 + Sync),
    fsecond: &(dyn Fn(f64) -> f64 + Sync),
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
    upto: f64,
) -> Result<Vec<f64>> {
    x.grid().ensure_same(m.grid())?;
    let k = x.grid().index_of(upto)?;
    let weights = trace_weights(m);
    let mut out = forward_integral(Integrand::OfPath(fprime), x, x.grid().step(), upto)?;
    for (v, p) in out.iter_mut().zip(x.paths()) {
        *v -= (1..k).map(|j| fsecond(p[j]) * weights[j]).sum::<f64>();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::KernelSpec;
    use crate::simulate::sample_paths;

    #[test]
    fn brownian_trace_vanishes() {
        let k = KernelSpec::bm(1.0).unwrap();
        let g = Grid::new(32, 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &g).unwrap();
        assert!(trace_weights(&m).iter().all(|w| w.abs() < 1e-15));
        let x = sample_paths(&k, &g, 5, 2).unwrap();
        let d = skorohod_via_trace(&|v| v, &|_| 1.0, &x, &m, 1.0).unwrap();
        for (mm, p) in x.paths().enumerate() {
            let ito: f64 = (0..32).map(|i| p[i] * (p[i + 1] - p[i])).sum();
            assert!((d[mm] - ito).abs() < 1e-12);
        }
    }

    #[test]
    fn fbm_trace_term_tends_to_half_variance() {
        // with f'' = 1 the trace term is the strict triangle mass, t^{2H}/2 in the limit
        let k = KernelSpec::fbm(0.7, 1.0).unwrap();
        let g = Grid::new(512, 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &g).unwrap();
        let total: f64 = trace_weights(&m).iter().sum();
        let energy = 512f64.powf(1.0 - 1.4);
        assert!((total - 0.5 * (1.0 - energy)).abs() < 1e-10);
    }
}
