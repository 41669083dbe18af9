use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulate::PathEnsemble;

use super::step::StepFunction;

/// Integrand `Y` of a regularization integral, read at grid points of each path.
///
/// For cell `]t_i, t_{i+1}]` the forward sum uses the value at the left end and the
/// backward sum the value at the right end. A step function has one value per cell.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    Step(&'a StepFunction<f64>),
    /// Another process sampled on the same grid, path by path.
    Process(&'a PathEnsemble),
    /// `Y_s = f(X_s)`.
    OfPath(&'a (dyn Fn(f64) -> f64 + Sync)),
}

impl Integrand<'_> {
    fn check(&self, x: &PathEnsemble) -> Result<()> {
        match self {
            Integrand::Step(s) => x.grid().ensure_same(s.grid()),
            Integrand::Process(y) => {
                x.grid().ensure_same(y.grid())?;
                if y.len() != x.len() {
                    return Err(Error::GridMismatch(format!("{} integrand paths for {} paths", y.len(), x.len())));
                }
                Ok(())
            }
            Integrand::OfPath(_) => Ok(()),
        }
    }

    fn left(&self, m: usize, path: &[f64], i: usize) -> f64 {
        match self {
            Integrand::Step(s) => s.values()[i],
            Integrand::Process(y) => y.path(m)[i],
            Integrand::OfPath(f) => f(path[i]),
        }
    }

    fn right(&self, m: usize, path: &[f64], i: usize) -> f64 {
        match self {
            Integrand::Step(s) => s.values()[i],
            Integrand::Process(y) => y.path(m)[i + 1],
            Integrand::OfPath(f) => f(path[i + 1]),
        }
    }
}

fn per_path(x: &PathEnsemble, f: impl Fn(usize, &[f64]) -> f64 + Sync) -> Vec<f64> {
    x.par_paths().enumerate().map(|(m, p)| f(m, p)).collect()
}

/// Cells up to `upto` and lag `k = ε / h`.
fn cells(x: &PathEnsemble, eps: f64, upto: f64) -> Result<(usize, usize)> {
    let g = x.grid();
    Ok((g.index_of(upto)?, g.cells_in(eps)?))
}

/// `∫_0^{upto} φ dX = Σ_i φ_i (X_{t_{i+1} ∧ upto} - X_{t_i ∧ upto})`.
pub fn wiener_integral(x: &PathEnsemble, phi: &StepFunction<f64>, upto: f64) -> Result<Vec<f64>> {
    x.grid().ensure_same(phi.grid())?;
    let up = x.grid().index_of(upto)?;
    let v = phi.values();
    Ok(per_path(x, |_, p| (0..up).map(|i| v[i] * (p[i + 1] - p[i])).sum()))
}

/// `h/ε Σ_{t_i < upto} Y_{t_i} (X_{t_i + ε} - X_{t_i})`, with `X` held at `X_T` beyond `T`.
pub fn forward_integral(y: Integrand<'_>, x: &PathEnsemble, eps: f64, upto: f64) -> Result<Vec<f64>> {
    y.check(x)?;
    let (up, k) = cells(x, eps, upto)?;
    let n = x.grid().cells();
    let scale = 1.0 / k as f64;
    Ok(per_path(x, |m, p| {
        scale * (0..up).map(|i| y.left(m, p, i) * (p[(i + k).min(n)] - p[i])).sum::<f64>()
    }))
}

/// `h/ε Σ_{0 < t_i ≤ upto} Y_{t_i} (X_{t_i} - X_{t_i - ε})`, with `X` held at 0 before 0.
pub fn backward_integral(y: Integrand<'_>, x: &PathEnsemble, eps: f64, upto: f64) -> Result<Vec<f64>> {
    y.check(x)?;
    let (up, k) = cells(x, eps, upto)?;
    let scale = 1.0 / k as f64;
    Ok(per_path(x, |m, p| {
        scale * (0..up).map(|i| y.right(m, p, i) * (p[i + 1] - p[(i + 1).saturating_sub(k)])).sum::<f64>()
    }))
}

/// Average of the forward and backward sums.
pub fn symmetric_integral(y: Integrand<'_>, x: &PathEnsemble, eps: f64, upto: f64) -> Result<Vec<f64>> {
    let f = forward_integral(y, x, eps, upto)?;
    let b = backward_integral(y, x, eps, upto)?;
    Ok(f.iter().zip(&b).map(|(a, c)| 0.5 * (a + c)).collect())
}

/// `C_ε(X, Y, upto) = h/ε Σ_{t_i < upto} (X_{t_i+ε} - X_{t_i})(Y_{t_i+ε} - Y_{t_i})`.
pub fn covariation(x: &PathEnsemble, y: &PathEnsemble, eps: f64, upto: f64) -> Result<Vec<f64>> {
    x.grid().ensure_same(y.grid())?;
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("{} vs {} paths", x.len(), y.len())));
    }
    let (up, k) = cells(x, eps, upto)?;
    let n = x.grid().cells();
    let scale = 1.0 / k as f64;
    Ok(per_path(x, |m, p| {
        let q = y.path(m);
        scale
            * (0..up)
                .map(|i| {
                    let j = (i + k).min(n);
                    (p[j] - p[i]) * (q[j] - q[i])
                })
                .sum::<f64>()
    }))
}
