//! Gauss–Legendre rules and a graded rule for integrable endpoint singularities.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_a^b f` with an `order`-point Gauss–Legendre rule on each of `pieces` equal subintervals.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, order: usize, pieces: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * width;
            let mid = lo + 0.5 * width;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(mid + 0.5 * width * xi))
                .sum::<f64>()
                * 0.5
                * width
        })
        .sum()
}

/// `∫_0^t f` for `f` with an integrable singularity at 0, using dyadic grading
/// `[t 2^{-k-1}, t 2^{-k}]` for `k < levels`; the remaining `[0, t 2^{-levels}]` is dropped.
pub fn integrate_graded(f: impl Fn(f64) -> f64, t: f64, order: usize, levels: u32) -> f64 {
    let mut total = 0.0;
    for k in (0..levels).rev() {
        let hi = t * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        total += integrate(&f, lo, hi, order, 1);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 9 is integrated exactly by 5 points
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m - 2.0 / 9.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!(x1, vec![0.0]);
        assert!((w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn graded_rule_handles_inverse_sqrt() {
        let v = integrate_graded(|s| 1.0 / s.sqrt(), 1.0, 12, 60);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }
}
