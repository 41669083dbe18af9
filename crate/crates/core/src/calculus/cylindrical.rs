//! Cylindrical functionals `F = f(∫φ_1 dX, ..., ∫φ_k dX)`, elementary processes
//! `u = Σ_ℓ ψ_ℓ G_ℓ`, their Malliavin derivatives and Skorohod integrals.

use rayon::prelude::*;
use serde::Serialize;

use crate::covmeasure::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::simulate::PathEnsemble;

use super::montecarlo::MonteCarloEstimate;
use super::smooth::SmoothFn;
use super::step::StepFunction;

/// `F = f(∫φ_1 dX, ..., ∫φ_k dX)` over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalFunctional {
    phis: Vec<StepFunction<f64>>,
    f: SmoothFn,
}

impl CylindricalFunctional {
    pub fn new(phis: Vec<StepFunction<f64>>, f: SmoothFn) -> Result<Self> {
        let Some(first) = phis.first() else {
            return Err(Error::domain("a cylindrical functional needs at least one integrand"));
        };
        for p in &phis[1..] {
            first.grid().ensure_same(p.grid())?;
        }
        f.check_arity(phis.len())?;
        Ok(CylindricalFunctional { phis, f })
    }

    /// The constant `c`.
    pub fn constant(grid: Grid<f64>, c: f64) -> Self {
        CylindricalFunctional {
            phis: vec![StepFunction::zero(grid)],
            f: SmoothFn::Const(c),
        }
    }

    /// `∫φ dX` itself.
    pub fn wiener(phi: StepFunction<f64>) -> Self {
        CylindricalFunctional {
            phis: vec![phi],
            f: SmoothFn::coordinate(0, 1),
        }
    }

    pub fn grid(&self) -> &Grid<f64> {
        self.phis[0].grid()
    }

    pub fn integrands(&self) -> &[StepFunction<f64>] {
        &self.phis
    }

    pub fn function(&self) -> &SmoothFn {
        &self.f
    }

    /// `(∫φ_1 dX, ..., ∫φ_k dX)` on one path.
    pub fn arguments(&self, path: &[f64]) -> Vec<f64> {
        self.phis.iter().map(|p| wiener_on_path(p, path)).collect()
    }

    pub fn value(&self, path: &[f64]) -> f64 {
        self.f.value(&self.arguments(path))
    }

    /// `DF = Σ_i ∂_i f(...) φ_i` on one path.
    pub fn derivative(&self, path: &[f64]) -> StepFunction<f64> {
        let grad = self.f.gradient(&self.arguments(path));
        combine(self.grid(), self.phis.iter().zip(grad))
    }

    /// The product `F·G`, again cylindrical over the concatenated integrands.
    pub fn mul(&self, other: &CylindricalFunctional) -> Result<Self> {
        self.grid().ensure_same(other.grid())?;
        let k = self.phis.len();
        let total = k + other.phis.len();
        let mut phis = self.phis.clone();
        phis.extend(other.phis.iter().cloned());
        let f = SmoothFn::product(self.f.embed(0, total), other.f.embed(k, total));
        Ok(CylindricalFunctional { phis, f })
    }
}

fn wiener_on_path(phi: &StepFunction<f64>, path: &[f64]) -> f64 {
    phi.values().iter().enumerate().map(|(i, v)| v * (path[i + 1] - path[i])).sum()
}

fn combine<'a>(grid: &Grid<f64>, parts: impl Iterator<Item = (&'a StepFunction<f64>, f64)>) -> StepFunction<f64> {
    let mut out = vec![0.0; grid.cells()];
    for (phi, c) in parts {
        for (o, v) in out.iter_mut().zip(phi.values()) {
            *o += c * v;
        }
    }
    StepFunction::new(*grid, out).expect("length matches grid")
}

/// `u_t = Σ_ℓ ψ_ℓ(t) G_ℓ` with cylindrical `G_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryProcess {
    grid: Grid<f64>,
    terms: Vec<(StepFunction<f64>, CylindricalFunctional)>,
}

impl ElementaryProcess {
    /// The zero process.
    pub fn new(grid: Grid<f64>) -> Self {
        ElementaryProcess { grid, terms: Vec::new() }
    }

    /// `u = ψ` with `G ≡ 1`.
    pub fn deterministic(psi: StepFunction<f64>) -> Self {
        let grid = *psi.grid();
        let mut u = Self::new(grid);
        u.terms.push((psi, CylindricalFunctional::constant(grid, 1.0)));
        u
    }

    pub fn push(&mut self, psi: StepFunction<f64>, g: CylindricalFunctional) -> Result<()> {
        self.grid.ensure_same(psi.grid())?;
        self.grid.ensure_same(g.grid())?;
        self.terms.push((psi, g));
        Ok(())
    }

    pub fn with_term(mut self, psi: StepFunction<f64>, g: CylindricalFunctional) -> Result<Self> {
        self.push(psi, g)?;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.grid
    }

    pub fn terms(&self) -> &[(StepFunction<f64>, CylindricalFunctional)] {
        &self.terms
    }

    /// `u` on cell `i` of one path.
    pub fn value(&self, path: &[f64], i: usize) -> f64 {
        self.terms.iter().map(|(psi, g)| psi.value(i) * g.value(path)).sum()
    }

    /// `F·u`.
    pub fn times(&self, f: &CylindricalFunctional) -> Result<Self> {
        let mut out = Self::new(self.grid);
        for (psi, g) in &self.terms {
            out.push(psi.clone(), f.mul(g)?)?;
        }
        Ok(out)
    }

    /// `Σ_x w_x u_x`.
    pub fn combination(grid: Grid<f64>, family: &[(f64, ElementaryProcess)]) -> Result<Self> {
        let mut out = Self::new(grid);
        for (w, u) in family {
            for (psi, g) in &u.terms {
                out.push(psi.scale(*w), g.clone())?;
            }
        }
        Ok(out)
    }
}

/// `mass · ψ` as a vector, so that `⟨φ, ψ⟩_H = φ · (mass ψ)`.
fn mass_apply(m: &DiscreteMeasure<f64>, psi: &StepFunction<f64>) -> Vec<f64> {
    let v = psi.values();
    (0..m.cells())
        .map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Inner products that do not depend on the path, for one elementary process.
struct Prepared<'a> {
    u: &'a ElementaryProcess,
    /// `mass · ψ_ℓ`.
    mpsi: Vec<Vec<f64>>,
    /// `c[ℓ][j] = ⟨φ_{ℓj}, ψ_ℓ⟩_H`.
    c: Vec<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    fn new(u: &'a ElementaryProcess, x: &PathEnsemble, m: &DiscreteMeasure<f64>) -> Result<Self> {
        x.grid().ensure_same(m.grid())?;
        x.grid().ensure_same(u.grid())?;
        let mpsi: Vec<Vec<f64>> = u.terms.iter().map(|(psi, _)| mass_apply(m, psi)).collect();
        let c = u
            .terms
            .iter()
            .zip(&mpsi)
            .map(|((_, g), mp)| g.phis.iter().map(|phi| dot(phi.values(), mp)).collect())
            .collect();
        Ok(Prepared { u, mpsi, c })
    }

    /// `δ(u) = Σ_ℓ [G_ℓ ∫ψ_ℓ dX - Σ_j ∂_j g_ℓ ⟨φ_{ℓj}, ψ_ℓ⟩_H]` on one path.
    fn delta(&self, path: &[f64]) -> f64 {
        self.u
            .terms
            .iter()
            .zip(&self.c)
            .map(|((psi, g), c)| {
                let y = g.arguments(path);
                g.f.value(&y) * wiener_on_path(psi, path) - dot(&g.f.gradient(&y), c)
            })
            .sum()
    }
}

fn per_path<T: Send>(x: &PathEnsemble, f: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
    x.par_paths().map(|p| f(p)).collect()
}

/// `DF` on every path.
pub fn malliavin_derivative(f: &CylindricalFunctional, x: &PathEnsemble) -> Result<Vec<StepFunction<f64>>> {
    x.grid().ensure_same(f.grid())?;
    Ok(per_path(x, |p| f.derivative(p)))
}

/// Skorohod integral of an elementary process on every path, from the explicit
/// cylindrical formula.
pub fn skorohod_cylindrical(u: &ElementaryProcess, x: &PathEnsemble, m: &DiscreteMeasure<f64>) -> Result<Vec<f64>> {
    let prep = Prepared::new(u, x, m)?;
    Ok(per_path(x, |p| prep.delta(p)))
}

/// Two Monte Carlo means of the same quantity and their paired difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub lhs: MonteCarloEstimate,
    pub rhs: MonteCarloEstimate,
    /// Per-path `lhs - rhs`.
    pub gap: MonteCarloEstimate,
}

impl DualityReport {
    fn from_pairs(lhs: &[f64], rhs: &[f64]) -> Result<Self> {
        let gap: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
        Ok(DualityReport {
            lhs: MonteCarloEstimate::from_samples(lhs)?,
            rhs: MonteCarloEstimate::from_samples(rhs)?,
            gap: MonteCarloEstimate::from_samples(&gap)?,
        })
    }

    /// `|mean gap| ≤ k · s.e.(gap)`.
    pub fn passes(&self, k: f64) -> bool {
        self.gap.agrees_with(0.0, k)
    }
}

/// `⟨DF, u⟩_H` on one path, with `d[i][ℓ] = ⟨φ_i, ψ_ℓ⟩_H` precomputed.
fn derivative_pairing(f: &CylindricalFunctional, u: &ElementaryProcess, d: &[Vec<f64>], path: &[f64]) -> f64 {
    let grad = f.f.gradient(&f.arguments(path));
    let gl: Vec<f64> = u.terms.iter().map(|(_, g)| g.value(path)).collect();
    grad.iter().zip(d).map(|(gi, di)| gi * dot(di, &gl)).sum()
}

fn pairing_table(f: &CylindricalFunctional, prep: &Prepared<'_>) -> Vec<Vec<f64>> {
    f.phis
        .iter()
        .map(|phi| prep.mpsi.iter().map(|mp| dot(phi.values(), mp)).collect())
        .collect()
}

/// `E[F δ(u)]` against `E⟨DF, u⟩_H`.
pub fn duality_check(
    f: &CylindricalFunctional,
    u: &ElementaryProcess,
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
) -> Result<DualityReport> {
    x.grid().ensure_same(f.grid())?;
    let prep = Prepared::new(u, x, m)?;
    let d = pairing_table(f, &prep);
    let pairs: Vec<(f64, f64)> = per_path(x, |p| (f.value(p) * prep.delta(p), derivative_pairing(f, u, &d, p)));
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    DualityReport::from_pairs(&lhs, &rhs)
}

/// `E[F ∫h dX]` against `E⟨DF, h⟩_H` for deterministic `h`.
pub fn integration_by_parts_check(
    f: &CylindricalFunctional,
    h: &StepFunction<f64>,
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
) -> Result<DualityReport> {
    duality_check(f, &ElementaryProcess::deterministic(h.clone()), x, m)
}

/// Largest per-path gap in `δ(F u) = F δ(u) - ⟨DF, u⟩_H`.
pub fn product_rule_gap(
    f: &CylindricalFunctional,
    u: &ElementaryProcess,
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
) -> Result<f64> {
    x.grid().ensure_same(f.grid())?;
    let fu = u.times(f)?;
    let prep = Prepared::new(u, x, m)?;
    let prep_fu = Prepared::new(&fu, x, m)?;
    let d = pairing_table(f, &prep);
    let gaps = per_path(x, |p| {
        let rhs = f.value(p) * prep.delta(p) - derivative_pairing(f, u, &d, p);
        (prep_fu.delta(p) - rhs).abs()
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Largest per-path gap in `δ(Σ_x w_x u_x) = Σ_x w_x δ(u_x)`.
pub fn fubini_check(family: &[(f64, ElementaryProcess)], x: &PathEnsemble, m: &DiscreteMeasure<f64>) -> Result<f64> {
    let combined = ElementaryProcess::combination(*x.grid(), family)?;
    let whole = skorohod_cylindrical(&combined, x, m)?;
    let mut sum = vec![0.0; x.len()];
    for (w, u) in family {
        for (s, d) in sum.iter_mut().zip(skorohod_cylindrical(u, x, m)?) {
            *s += w * d;
        }
    }
    Ok(whole.iter().zip(&sum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Largest gap in `D_t δ(u) = u_t + δ(D_t u)` over paths and probe cells `t`.
///
/// The left side differentiates the explicit Skorohod formula (Hessian of each `g_ℓ`);
/// the right side forms the elementary process `s ↦ D_t u_s` and integrates it.
pub fn commutation_check(
    u: &ElementaryProcess,
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
    probes: &[usize],
) -> Result<f64> {
    let prep = Prepared::new(u, x, m)?;
    let n = x.grid().cells();
    if let Some(&bad) = probes.iter().find(|&&t| t >= n) {
        return Err(Error::domain(format!("probe cell {bad} outside 0..{n}")));
    }
    let gaps = per_path(x, |p| {
        let parts: Vec<_> = u
            .terms
            .iter()
            .map(|(psi, g)| {
                let y = g.arguments(p);
                (g.f.value(&y), g.f.gradient(&y), g.f.hessian(&y), wiener_on_path(psi, p))
            })
            .collect();
        let mut worst = 0.0f64;
        for &t in probes {
            let mut lhs = 0.0;
            let mut u_t = 0.0;
            let mut delta_dtu = 0.0;
            for (((psi, g), c), (val, grad, hess, w)) in u.terms.iter().zip(&prep.c).zip(&parts) {
                let k = g.phis.len();
                let phi_t: Vec<f64> = g.phis.iter().map(|phi| phi.value(t)).collect();
                // D_t of G W(ψ) - Σ_j ∂_j g c_j
                let dg = dot(grad, &phi_t);
                let mut dcorr = 0.0;
                for j in 0..k {
                    for i in 0..k {
                        dcorr += hess[i * k + j] * phi_t[i] * c[j];
                    }
                }
                lhs += dg * w + val * psi.value(t) - dcorr;
                // D_t u = Σ_ℓ ψ_ℓ H_ℓ with H_ℓ = Σ_i φ_{ℓi}(t) ∂_i g_ℓ, integrated term by term
                u_t += psi.value(t) * val;
                let h_val = dg;
                let h_grad: Vec<f64> = (0..k).map(|j| (0..k).map(|i| phi_t[i] * hess[i * k + j]).sum()).collect();
                delta_dtu += h_val * w - dot(&h_grad, c);
            }
            worst = worst.max((lhs - (u_t + delta_dtu)).abs());
        }
        worst
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Sample second moment of `δ(u)` next to the Monte Carlo mean of
/// `Σ_{ℓℓ'} G_ℓ G_ℓ' ⟨ψ_ℓ, ψ_ℓ'⟩_H + Σ_{ℓℓ'} ⟨DG_ℓ', ψ_ℓ⟩_H ⟨DG_ℓ, ψ_ℓ'⟩_H`.
pub fn skorohod_variance_check(
    u: &ElementaryProcess,
    x: &PathEnsemble,
    m: &DiscreteMeasure<f64>,
) -> Result<(MonteCarloEstimate, MonteCarloEstimate)> {
    let prep = Prepared::new(u, x, m)?;
    let terms = &u.terms;
    let l = terms.len();
    let psi_gram: Vec<f64> = (0..l)
        .flat_map(|a| (0..l).map(move |b| (a, b)))
        .map(|(a, b)| dot(terms[a].0.values(), &prep.mpsi[b]))
        .collect();
    // p[ℓ'][i][ℓ] = ⟨φ_{ℓ'i}, ψ_ℓ⟩_H
    let p: Vec<Vec<Vec<f64>>> = terms
        .iter()
        .map(|(_, g)| {
            g.phis
                .iter()
                .map(|phi| prep.mpsi.iter().map(|mp| dot(phi.values(), mp)).collect())
                .collect()
        })
        .collect();
    let pairs: Vec<(f64, f64)> = per_path(x, |path| {
        let d = prep.delta(path);
        let mut vals = Vec::with_capacity(l);
        // pair[ℓ'][ℓ] = ⟨DG_ℓ', ψ_ℓ⟩_H
        let mut pair = vec![0.0; l * l];
        for (lp, (_, g)) in terms.iter().enumerate() {
            let y = g.arguments(path);
            vals.push(g.f.value(&y));
            let grad = g.f.gradient(&y);
            for (gi, row) in grad.iter().zip(&p[lp]) {
                for (ll, v) in row.iter().enumerate() {
                    pair[lp * l + ll] += gi * v;
                }
            }
        }
        let mut first = 0.0;
        let mut second = 0.0;
        for a in 0..l {
            for b in 0..l {
                first += vals[a] * vals[b] * psi_gram[a * l + b];
                second += pair[b * l + a] * pair[a * l + b];
            }
        }
        (d * d, first + second)
    });
    let (mc, formula): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((MonteCarloEstimate::from_samples(&mc)?, MonteCarloEstimate::from_samples(&formula)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::smooth::Profile;
    use crate::kernels::KernelSpec;
    use crate::simulate::sample_paths;

    fn setup(spec: &str, n: usize, count: usize) -> (PathEnsemble, DiscreteMeasure<f64>) {
        let k = KernelSpec::parse(spec, 1.0).unwrap();
        let g = Grid::new(n, 1.0).unwrap();
        (sample_paths(&k, &g, count, 5).unwrap(), DiscreteMeasure::build(&k, &g).unwrap())
    }

    #[test]
    fn derivative_of_wiener_integral_is_integrand() {
        let (x, _) = setup("fbm:H=0.7", 16, 4);
        let phi = StepFunction::from_fn(*x.grid(), |t| t * t - 0.3);
        let f = CylindricalFunctional::wiener(phi.clone());
        for d in malliavin_derivative(&f, &x).unwrap() {
            assert_eq!(d, phi);
        }
        let c = CylindricalFunctional::constant(*x.grid(), 3.0);
        for d in malliavin_derivative(&c, &x).unwrap() {
            assert!(d.values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn deterministic_skorohod_is_wiener() {
        let (x, m) = setup("bifbm:H=0.75,K=0.6", 16, 6);
        let psi = StepFunction::from_fn(*x.grid(), |t| (3.0 * t).cos());
        let d = skorohod_cylindrical(&ElementaryProcess::deterministic(psi.clone()), &x, &m).unwrap();
        for (v, p) in d.iter().zip(x.paths()) {
            assert!((v - wiener_on_path(&psi, p)).abs() < 1e-14);
        }
    }

    #[test]
    fn second_chaos_example() {
        // δ(X_t 1_{[0,t]}) = X_t² - R(t,t)
        let (x, m) = setup("fbm:H=0.7", 16, 6);
        let g = *x.grid();
        let ind = StepFunction::indicator(g, 0.0, 0.5).unwrap();
        let u = ElementaryProcess::new(g)
            .with_term(ind.clone(), CylindricalFunctional::wiener(ind))
            .unwrap();
        let d = skorohod_cylindrical(&u, &x, &m).unwrap();
        for (v, p) in d.iter().zip(x.paths()) {
            assert!((v - (p[8] * p[8] - 0.5f64.powf(1.4))).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_and_commutation_hold() {
        let (x, m) = setup("fbm:H=0.7", 8, 20);
        let g = *x.grid();
        let phi = StepFunction::from_fn(g, |t| 1.0 - t);
        let f = CylindricalFunctional::new(vec![phi.clone()], SmoothFn::ridge(Profile::Sin(1.3), vec![1.0])).unwrap();
        let gg = CylindricalFunctional::new(
            vec![phi, StepFunction::indicator(g, 0.25, 0.75).unwrap()],
            SmoothFn::ridge(Profile::Tanh(0.7), vec![0.5, -1.0]),
        )
        .unwrap();
        let u = ElementaryProcess::new(g)
            .with_term(StepFunction::from_fn(g, |t| t), gg)
            .unwrap();
        assert!(product_rule_gap(&f, &u, &x, &m).unwrap() < 1e-12);
        assert!(commutation_check(&u, &x, &m, &[0, 3, 7]).unwrap() < 1e-12);
        assert!(commutation_check(&u, &x, &m, &[8]).is_err());
        let zero = ElementaryProcess::new(g);
        assert_eq!(skorohod_cylindrical(&zero, &x, &m).unwrap(), vec![0.0; 20]);
    }
}
