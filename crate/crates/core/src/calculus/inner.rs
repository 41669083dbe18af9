use crate::covmeasure::DiscreteMeasure;
use crate::error::Result;
use crate::scalar::{compensated_sum, Scalar};

use super::step::StepFunction;

fn bilinear<T: Scalar>(m: &DiscreteMeasure<T>, a: &[T], b: &[T], f: impl Fn(T) -> T) -> T {
    let n = m.cells();
    compensated_sum((0..n).map(|i| {
        let row = m.row(i);
        a[i] * compensated_sum((0..n).map(|j| f(row[j]) * b[j]))
    }))
}

/// `⟨φ, ψ⟩_H = Σ_{i,j} φ_i ψ_j mass[i][j]`.
pub fn h_inner<T: Scalar>(m: &DiscreteMeasure<T>, phi: &StepFunction<T>, psi: &StepFunction<T>) -> Result<T> {
    m.grid().ensure_same(phi.grid())?;
    m.grid().ensure_same(psi.grid())?;
    Ok(bilinear(m, phi.values(), psi.values(), |x| x))
}

/// `‖φ‖_{|H|} = (Σ |φ_i| |φ_j| |mass[i][j]|)^{1/2}`.
pub fn h_abs_norm<T: Scalar>(m: &DiscreteMeasure<T>, phi: &StepFunction<T>) -> Result<T> {
    m.grid().ensure_same(phi.grid())?;
    let a = phi.abs();
    Ok(bilinear(m, a.values(), a.values(), |x| x.abs()).sqrt())
}

/// `‖φ‖_{L²(ν)}` with the marginal `ν_j = Σ_i |mass[i][j]|`.
pub fn l2_nu_norm<T: Scalar>(m: &DiscreteMeasure<T>, phi: &StepFunction<T>) -> Result<T> {
    m.grid().ensure_same(phi.grid())?;
    let nu = m.marginal();
    Ok(compensated_sum(phi.values().iter().zip(&nu).map(|(&v, &w)| v * v * w)).sqrt())
}

/// `‖φ‖_{L²([0,T])}`.
pub fn l2_lebesgue_norm<T: Scalar>(phi: &StepFunction<T>) -> T {
    (compensated_sum(phi.values().iter().map(|&v| v * v)) * phi.grid().step()).sqrt()
}

/// Largest `‖φ‖²_{|H|} / ‖φ‖²_{L²}` over the probes (a finiteness diagnostic).
pub fn lebesgue_ratio_scan<T: Scalar>(m: &DiscreteMeasure<T>, probes: &[StepFunction<T>]) -> Result<T> {
    let mut best = T::zero();
    for phi in probes {
        let l2 = l2_lebesgue_norm(phi);
        if l2 > T::zero() {
            let r = h_abs_norm(m, phi)?;
            best = best.max(r * r / (l2 * l2));
        }
    }
    Ok(best)
}

/// Splits `⟨φ, φ⟩_H` into its diagonal part plus twice the strictly lower triangle.
/// Returns `(⟨φ,φ⟩_H, Σ φ_i² mass[i][i] + 2 Σ_{i>j} φ_i φ_j mass[i][j])`.
pub fn variance_split_check<T: Scalar>(m: &DiscreteMeasure<T>, phi: &StepFunction<T>) -> Result<(T, T)> {
    let lhs = h_inner(m, phi, phi)?;
    let v = phi.values();
    let n = m.cells();
    let diag = compensated_sum((0..n).map(|i| v[i] * v[i] * m.mass(i, i)));
    let lower = compensated_sum((0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| v[i] * v[j] * m.mass(i, j)));
    Ok((lhs, diag + T::lit(2.0) * lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;

    fn setup(spec: &str, n: usize) -> (KernelSpec<f64>, Grid<f64>, DiscreteMeasure<f64>) {
        let k = KernelSpec::parse(spec, 1.0).unwrap();
        let g = Grid::new(n, 1.0).unwrap();
        let m = DiscreteMeasure::build(&k, &g).unwrap();
        (k, g, m)
    }

    #[test]
    fn indicators_reproduce_covariance() {
        let (k, g, m) = setup("bifbm:H=0.6,K=0.9", 16);
        for a in [0usize, 3, 8, 16] {
            for b in [1usize, 5, 16] {
                let p = StepFunction::indicator(g, 0.0, g.point(a)).unwrap();
                let q = StepFunction::indicator(g, 0.0, g.point(b)).unwrap();
                assert_relative_eq!(
                    h_inner(&m, &p, &q).unwrap(),
                    k.eval_covariance(g.point(a), g.point(b)).unwrap(),
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn unit_indicator_on_fbm() {
        let (_, g, m) = setup("fbm:H=0.75", 32);
        let one = StepFunction::constant(g, 1.0);
        assert_relative_eq!(h_inner(&m, &one, &one).unwrap(), 1.0, epsilon = 1e-13);
        let z = StepFunction::zero(g);
        assert_eq!(h_inner(&m, &z, &z).unwrap(), 0.0);
        // nonnegative measure: |H| norm is the H norm of |φ|
        let phi = StepFunction::from_fn(g, |t| (7.0 * t).sin());
        let a = phi.abs();
        assert_relative_eq!(
            h_abs_norm(&m, &phi).unwrap(),
            h_inner(&m, &a, &a).unwrap().sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let (_, _, m) = setup("bm", 8);
        let other = StepFunction::constant(Grid::new(4, 1.0).unwrap(), 1.0);
        assert!(h_inner(&m, &other, &other).is_err());
        assert!(h_abs_norm(&m, &other).is_err());
    }

    #[test]
    fn martingale_split() {
        let (_, g, m) = setup("martingale:lambda=square", 16);
        let one = StepFunction::constant(g, 1.0);
        let (lhs, rhs) = variance_split_check(&m, &one).unwrap();
        assert_relative_eq!(lhs, 1.0, epsilon = 1e-14);
        assert_relative_eq!(rhs, 1.0, epsilon = 1e-14);
    }
}
