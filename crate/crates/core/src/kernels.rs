//! Covariance kernels of the centred Gaussian processes handled by the crate.
//!
//! Every family vanishes on the axes (`R(s,0) = R(0,t) = 0`), so the rectangle increments
//! of `R` telescope to `R(t,t)` and define a covariance measure on grids.
//!
//! Kernels are addressed by a canonical string, e.g. `fbm:H=0.7`, `bifbm:H=0.75,K=2/3`,
//! `martingale:lambda=identity`, `mixedfbm:H=0.8`, `statinc:Q=piecewise,H=0.8`, `bm`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Shared real function, used for user supplied `λ` and `Q`.
pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// `|2HK - 1|` below this is treated as the critical bifractional case.
pub const CRITICAL_TOLERANCE: f64 = 1e-4;

/// Quadratic variation `λ` of a Gaussian martingale: nondecreasing with `λ(0) = 0`.
#[derive(Clone)]
pub enum Lambda<T> {
    Identity,
    /// `λ(x) = x^p`, `p > 0`.
    Power(T),
    Custom { name: String, f: RealFn<T> },
}

impl<T: Scalar> Lambda<T> {
    pub fn eval(&self, x: T) -> T {
        match self {
            Lambda::Identity => x,
            Lambda::Power(p) => x.pow_nonneg(*p),
            Lambda::Custom { f, .. } => f(x),
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Lambda::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    fn name(&self) -> String {
        match self {
            Lambda::Identity => "identity".into(),
            Lambda::Power(p) if *p == T::lit(2.0) => "square".into(),
            Lambda::Power(p) => format!("power,p={p}"),
            Lambda::Custom { name, .. } => name.clone(),
        }
    }
}

/// Decomposition of the measure `Q''` into atoms and an absolutely continuous density.
#[derive(Clone)]
pub struct QDecomposition<T> {
    /// `(location, weight)` pairs.
    pub atoms: Vec<(T, T)>,
    /// Density of the absolutely continuous part, as a function of the lag.
    pub density: RealFn<T>,
}

impl<T: Scalar> QDecomposition<T> {
    pub fn atom_at_zero(&self) -> T {
        self.atoms
            .iter()
            .filter(|(x, _)| *x == T::zero())
            .map(|&(_, w)| w)
            .fold(T::zero(), |a, b| a + b)
    }

    fn has_offdiagonal_atoms(&self) -> bool {
        self.atoms.iter().any(|&(x, w)| x != T::zero() && w != T::zero())
    }
}

impl<T: Scalar> fmt::Debug for QDecomposition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QDecomposition").field("atoms", &self.atoms).finish_non_exhaustive()
    }
}

/// Variogram `Q(t) = E(X_{s+t} - X_s)^2` of a process with stationary increments.
#[derive(Clone)]
pub enum Variogram<T> {
    /// `Q(t) = |t|`.
    Brownian,
    /// `Q(t) = |t|^{2H}`.
    Power { hurst: T },
    /// `Q(t) = |t| + |t|^{2H}`.
    Mixed { hurst: T },
    /// `|t|` on `|t| <= 1/2`, `2^{2H-1}|t|^{2H}` beyond.
    Piecewise { hurst: T },
    Custom {
        name: String,
        q: RealFn<T>,
        decomposition: Option<QDecomposition<T>>,
    },
}

impl<T: Scalar> Variogram<T> {
    /// `Q(|t|)`.
    pub fn eval(&self, t: T) -> T {
        let a = t.abs();
        match self {
            Variogram::Brownian => a,
            Variogram::Power { hurst } => a.pow_nonneg(T::lit(2.0) * *hurst),
            Variogram::Mixed { hurst } => a + a.pow_nonneg(T::lit(2.0) * *hurst),
            Variogram::Piecewise { hurst } => {
                if a <= T::lit(0.5) {
                    a
                } else {
                    T::lit(2.0).pow_nonneg(T::lit(2.0) * *hurst - T::one()) * a.pow_nonneg(T::lit(2.0) * *hurst)
                }
            }
            Variogram::Custom { q, .. } => q(a),
        }
    }

    /// Atoms and absolutely continuous density of `Q''`, where known.
    pub fn decomposition(&self) -> Option<QDecomposition<T>> {
        let two = T::lit(2.0);
        match self {
            Variogram::Brownian => Some(QDecomposition {
                atoms: vec![(T::zero(), two)],
                density: Arc::new(|_| T::zero()),
            }),
            Variogram::Power { hurst } => {
                let h = *hurst;
                if h > T::lit(0.5) {
                    Some(QDecomposition {
                        atoms: vec![],
                        density: Arc::new(move |t: T| {
                            two * h * (two * h - T::one()) * t.abs().pow_nonneg(two * h - two)
                        }),
                    })
                } else if h == T::lit(0.5) {
                    Variogram::Brownian.decomposition()
                } else {
                    None
                }
            }
            Variogram::Mixed { hurst } => {
                let h = *hurst;
                Some(QDecomposition {
                    atoms: vec![(T::zero(), two)],
                    density: Arc::new(move |t: T| two * h * (two * h - T::one()) * t.abs().pow_nonneg(two * h - two)),
                })
            }
            Variogram::Piecewise { hurst } => {
                let h = *hurst;
                let half = T::lit(0.5);
                let jump = two * h - T::one();
                Some(QDecomposition {
                    atoms: vec![(T::zero(), two), (half, jump), (-half, jump)],
                    density: Arc::new(move |t: T| {
                        let a = t.abs();
                        if a > half {
                            two.pow_nonneg(two * h) * h * (two * h - T::one()) * a.pow_nonneg(two * h - two)
                        } else {
                            T::zero()
                        }
                    }),
                })
            }
            Variogram::Custom { decomposition, .. } => decomposition.clone(),
        }
    }

    fn name(&self) -> String {
        match self {
            Variogram::Brownian => "Q=brownian".into(),
            Variogram::Power { hurst } => format!("Q=fbm,H={hurst}"),
            Variogram::Mixed { hurst } => format!("Q=mixed,H={hurst}"),
            Variogram::Piecewise { hurst } => format!("Q=piecewise,H={hurst}"),
            Variogram::Custom { name, .. } => format!("Q={name}"),
        }
    }
}

/// Kernel families.
#[derive(Clone)]
pub enum Family<T> {
    /// Fractional Brownian motion, `0 < H < 1`.
    Fbm { hurst: T },
    /// Bifractional Brownian motion, `0 < H < 1`, `0 < K <= 1`.
    Bifbm { hurst: T, k: T },
    GaussMartingale(Lambda<T>),
    /// `W + B^H` with independent components, `1/2 < H < 1`.
    MixedFbm { hurst: T },
    StationaryInc(Variogram<T>),
    Bm,
}

/// Position of `2HK` relative to 1 for the bifractional family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifbmRegime {
    /// `2HK < 1`: quadratic variation does not exist.
    Rough,
    /// `2HK = 1`: quadratic variation `2^{1-K} t`.
    Critical,
    /// `2HK > 1`: zero quadratic variation.
    Smooth,
}

/// A kernel family on the horizon `[0, T]`. Immutable once built.
#[derive(Clone)]
pub struct KernelSpec<T> {
    family: Family<T>,
    horizon: T,
}

impl<T: Scalar> fmt::Debug for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KernelSpec({}, T={})", self.id(), self.horizon)
    }
}

impl<T: Scalar> fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn in_open_unit<T: Scalar>(x: T) -> bool {
    x > T::zero() && x < T::one()
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(family: Family<T>, horizon: T) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let half = T::lit(0.5);
        match &family {
            Family::Fbm { hurst } if !in_open_unit(*hurst) => {
                return Err(Error::domain(format!("fbm needs 0 < H < 1, got {hurst}")))
            }
            Family::Bifbm { hurst, k } => {
                if !in_open_unit(*hurst) || !(*k > T::zero() && *k <= T::one()) {
                    return Err(Error::domain(format!("bifbm needs 0 < H < 1 and 0 < K <= 1, got H={hurst}, K={k}")));
                }
            }
            Family::MixedFbm { hurst } if !(*hurst > half && *hurst < T::one()) => {
                return Err(Error::domain(format!("mixed fbm needs 1/2 < H < 1, got {hurst}")))
            }
            Family::GaussMartingale(lambda) => {
                if lambda.eval(T::zero()) != T::zero() {
                    return Err(Error::domain("martingale lambda must vanish at 0"));
                }
                if let Lambda::Power(p) = lambda {
                    if !(*p > T::zero()) {
                        return Err(Error::domain(format!("lambda power must be positive, got {p}")));
                    }
                }
            }
            Family::StationaryInc(q) => match q {
                Variogram::Power { hurst } | Variogram::Piecewise { hurst } if !in_open_unit(*hurst) => {
                    return Err(Error::domain(format!("variogram needs 0 < H < 1, got {hurst}")))
                }
                Variogram::Mixed { hurst } if !(*hurst > half && *hurst < T::one()) => {
                    return Err(Error::domain(format!("mixed variogram needs 1/2 < H < 1, got {hurst}")))
                }
                Variogram::Custom { q, .. } if q(T::zero()) != T::zero() => {
                    return Err(Error::domain("variogram must vanish at 0"))
                }
                _ => {}
            },
            _ => {}
        }
        Ok(KernelSpec { family, horizon })
    }

    pub fn fbm(hurst: T, horizon: T) -> Result<Self> {
        Self::new(Family::Fbm { hurst }, horizon)
    }

    pub fn bifbm(hurst: T, k: T, horizon: T) -> Result<Self> {
        Self::new(Family::Bifbm { hurst, k }, horizon)
    }

    pub fn martingale(lambda: Lambda<T>, horizon: T) -> Result<Self> {
        Self::new(Family::GaussMartingale(lambda), horizon)
    }

    pub fn mixed_fbm(hurst: T, horizon: T) -> Result<Self> {
        Self::new(Family::MixedFbm { hurst }, horizon)
    }

    pub fn stationary(q: Variogram<T>, horizon: T) -> Result<Self> {
        Self::new(Family::StationaryInc(q), horizon)
    }

    pub fn bm(horizon: T) -> Result<Self> {
        Self::new(Family::Bm, horizon)
    }

    /// Parses the canonical string form, see the module docs.
    pub fn parse(spec: &str, horizon: T) -> Result<Self> {
        let family = parse_family(spec)?;
        Self::new(family, horizon)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Same family on another horizon.
    pub fn with_horizon(&self, horizon: T) -> Result<Self> {
        Self::new(self.family.clone(), horizon)
    }

    /// Canonical string id.
    pub fn id(&self) -> String {
        match &self.family {
            Family::Fbm { hurst } => format!("fbm:H={hurst}"),
            Family::Bifbm { hurst, k } => format!("bifbm:H={hurst},K={k}"),
            Family::GaussMartingale(l) => format!("martingale:lambda={}", l.name()),
            Family::MixedFbm { hurst } => format!("mixedfbm:H={hurst}"),
            Family::StationaryInc(q) => format!("statinc:{}", q.name()),
            Family::Bm => "bm".into(),
        }
    }

    pub fn bifbm_regime(&self) -> Option<BifbmRegime> {
        match self.family {
            Family::Bifbm { hurst, k } => {
                let e = T::lit(2.0) * hurst * k - T::one();
                Some(if e.abs() <= T::lit(CRITICAL_TOLERANCE) {
                    BifbmRegime::Critical
                } else if e > T::zero() {
                    BifbmRegime::Smooth
                } else {
                    BifbmRegime::Rough
                })
            }
            _ => None,
        }
    }

    /// Whether `R(s+h, t+h) - ...` increments are stationary.
    pub fn has_stationary_increments(&self) -> bool {
        matches!(
            self.family,
            Family::Fbm { .. } | Family::MixedFbm { .. } | Family::StationaryInc(_) | Family::Bm
        )
    }

    fn check_time(&self, t: T) -> Result<()> {
        let slack = self.horizon * T::lit(1e-12);
        if !(t >= T::zero()) || t > self.horizon + slack {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// `R(s, t)`.
    pub fn eval_covariance(&self, s: T, t: T) -> Result<T> {
        self.check_time(s)?;
        self.check_time(t)?;
        Ok(self.covariance_unchecked(s, t))
    }

    /// `R(s, t)` without range checks, for callers iterating over a validated grid.
    pub(crate) fn covariance_unchecked(&self, s: T, t: T) -> T {
        if s == T::zero() || t == T::zero() {
            return T::zero();
        }
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        match &self.family {
            Family::Fbm { hurst } => {
                let p = two * *hurst;
                half * (s.pow_nonneg(p) + t.pow_nonneg(p) - (t - s).abs().pow_nonneg(p))
            }
            Family::Bifbm { hurst, k } => {
                let p = two * *hurst;
                let base = (s.pow_nonneg(p) + t.pow_nonneg(p)).pow_nonneg(*k);
                two.pow_nonneg(-*k) * (base - (t - s).abs().pow_nonneg(p * *k))
            }
            Family::GaussMartingale(l) => l.eval(s.min(t)),
            Family::MixedFbm { hurst } => {
                let p = two * *hurst;
                s.min(t) + half * (s.pow_nonneg(p) + t.pow_nonneg(p) - (t - s).abs().pow_nonneg(p))
            }
            Family::StationaryInc(q) => half * (q.eval(s) + q.eval(t) - q.eval((s - t).abs())),
            Family::Bm => s.min(t),
        }
    }

    /// The two components `(R_1, R_2)` of the bifractional covariance, `R = R_1 + R_2`.
    pub fn bifbm_parts(&self, s: T, t: T) -> Result<(T, T)> {
        let Family::Bifbm { hurst, k } = self.family else {
            return Err(Error::Unsupported(format!("{} is not bifractional", self.id())));
        };
        self.check_time(s)?;
        self.check_time(t)?;
        let two = T::lit(2.0);
        let p = two * hurst;
        let scale = two.pow_nonneg(-k);
        let r1 = scale * ((s.pow_nonneg(p) + t.pow_nonneg(p)).pow_nonneg(k) - (s.pow_nonneg(p * k) + t.pow_nonneg(p * k)));
        let r2 = scale * (s.pow_nonneg(p * k) + t.pow_nonneg(p * k) - (t - s).abs().pow_nonneg(p * k));
        Ok((r1, r2))
    }

    /// `γ(t) = R(t, t)`.
    pub fn variance_curve(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        Ok(self.covariance_unchecked(t, t))
    }

    /// Closed-form off-diagonal density `∂²R/∂s∂t` of the covariance measure.
    ///
    /// `None` when the off-diagonal part of the measure has no absolutely continuous
    /// closed form (rough regimes, or variograms with atoms away from the origin).
    pub fn offdiag_density(&self, s: T, t: T) -> Result<Option<T>> {
        if s == t {
            return Err(Error::domain("the density is not defined on the diagonal"));
        }
        for x in [s, t] {
            self.check_time(x)?;
            if x == T::zero() {
                return Err(Error::domain("the density is evaluated on (0, T]"));
            }
        }
        let two = T::lit(2.0);
        let lag = (t - s).abs();
        let density = match &self.family {
            Family::Fbm { hurst } => {
                let h = *hurst;
                if h > T::lit(0.5) {
                    Some(h * (two * h - T::one()) * lag.pow_nonneg(two * h - two))
                } else if h == T::lit(0.5) {
                    Some(T::zero())
                } else {
                    None
                }
            }
            Family::Bifbm { hurst, k } => {
                let (h, k) = (*hurst, *k);
                let scale = two.pow_nonneg(-k);
                let r1 = scale
                    * T::lit(4.0)
                    * h
                    * h
                    * k
                    * (k - T::one())
                    * (s.pow_nonneg(two * h) + t.pow_nonneg(two * h)).powf(k - two)
                    * s.pow_nonneg(two * h - T::one())
                    * t.pow_nonneg(two * h - T::one());
                match self.bifbm_regime() {
                    Some(BifbmRegime::Critical) => Some(r1),
                    Some(BifbmRegime::Smooth) => {
                        let a = two * h * k;
                        Some(r1 + scale * a * (a - T::one()) * lag.pow_nonneg(a - two))
                    }
                    _ => None,
                }
            }
            Family::GaussMartingale(_) | Family::Bm => Some(T::zero()),
            Family::MixedFbm { hurst } => {
                let h = *hurst;
                Some(h * (two * h - T::one()) * lag.pow_nonneg(two * h - two))
            }
            Family::StationaryInc(q) => match q.decomposition() {
                Some(d) if !d.has_offdiagonal_atoms() => Some(T::lit(0.5) * (d.density)(lag)),
                _ => None,
            },
        };
        Ok(density)
    }

    /// Closed form of the energy `E(t) = μ(D_t)`, where one is known.
    pub fn energy_closed_form(&self, t: T) -> Result<Option<T>> {
        self.check_time(t)?;
        let half = T::lit(0.5);
        let e = match &self.family {
            Family::Fbm { hurst } => {
                if *hurst > half {
                    Some(T::zero())
                } else if *hurst == half {
                    Some(t)
                } else {
                    None
                }
            }
            Family::Bifbm { k, .. } => match self.bifbm_regime() {
                Some(BifbmRegime::Critical) => Some(T::lit(2.0).pow_nonneg(T::one() - *k) * t),
                Some(BifbmRegime::Smooth) => Some(T::zero()),
                _ => None,
            },
            Family::GaussMartingale(l) => Some(l.eval(t)),
            Family::MixedFbm { .. } | Family::Bm => Some(t),
            Family::StationaryInc(q) => q.decomposition().map(|d| d.atom_at_zero() * t * half),
        };
        Ok(e)
    }

    /// Atoms and absolutely continuous density of `Q''` for stationary-increment kernels.
    pub fn q_decomposition(&self) -> Result<QDecomposition<T>> {
        let q = match &self.family {
            Family::StationaryInc(q) => q.clone(),
            Family::MixedFbm { hurst } => Variogram::Mixed { hurst: *hurst },
            Family::Bm => Variogram::Brownian,
            Family::Fbm { hurst } => Variogram::Power { hurst: *hurst },
            _ => return Err(Error::Unsupported(format!("{} has no variogram", self.id()))),
        };
        q.decomposition()
            .ok_or_else(|| Error::Unsupported(format!("no known Q'' decomposition for {}", self.id())))
    }

    /// Spot-checks that a martingale's `λ` is nondecreasing on the grid points.
    pub fn check_lambda_monotone(&self, grid: &Grid<T>) -> Result<()> {
        if let Family::GaussMartingale(l) = &self.family {
            let mut prev = l.eval(T::zero());
            for i in 1..=grid.cells() {
                let t = grid.point(i);
                let v = l.eval(t);
                if v < prev {
                    return Err(Error::domain(format!("lambda decreases at t = {t}")));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

fn parse_error(input: &str, reason: impl Into<String>) -> Error {
    Error::KernelParse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

/// Parses a decimal or a rational `a/b`.
fn parse_number(input: &str, raw: &str) -> Result<f64> {
    let value = match raw.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| parse_error(input, format!("bad number `{raw}`")))?;
            let b: f64 = b.trim().parse().map_err(|_| parse_error(input, format!("bad number `{raw}`")))?;
            a / b
        }
        None => raw.trim().parse().map_err(|_| parse_error(input, format!("bad number `{raw}`")))?,
    };
    if !value.is_finite() {
        return Err(parse_error(input, format!("non-finite number `{raw}`")));
    }
    Ok(value)
}

struct Params<'a> {
    input: &'a str,
    pairs: Vec<(String, String)>,
}

impl Params<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn number<T: Scalar>(&mut self, key: &str) -> Result<T> {
        let raw = self
            .take(key)
            .ok_or_else(|| parse_error(self.input, format!("missing key `{key}`")))?;
        Ok(T::lit(parse_number(self.input, &raw)?))
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(parse_error(self.input, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Parses the family part of a canonical kernel string. Case-insensitive.
pub fn parse_family<T: Scalar>(input: &str) -> Result<Family<T>> {
    let lower = input.trim().to_ascii_lowercase();
    let (name, rest) = match lower.split_once(':') {
        Some((n, r)) => (n.trim().to_string(), r.trim().to_string()),
        None => (lower.clone(), String::new()),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    if !rest.is_empty() {
        for item in rest.split(',') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_error(input, format!("expected key=value, got `{item}`")))?;
            let k = k.trim().to_string();
            if pairs.iter().any(|(existing, _)| *existing == k) {
                return Err(parse_error(input, format!("duplicate key `{k}`")));
            }
            pairs.push((k, v.trim().to_string()));
        }
    }
    let mut params = Params { input, pairs };
    let family = match name.as_str() {
        "fbm" => Family::Fbm { hurst: params.number("h")? },
        "bifbm" => Family::Bifbm {
            hurst: params.number("h")?,
            k: params.number("k")?,
        },
        "mixedfbm" => Family::MixedFbm { hurst: params.number("h")? },
        "bm" => Family::Bm,
        "martingale" => {
            let lambda = params
                .take("lambda")
                .ok_or_else(|| parse_error(input, "missing key `lambda`"))?;
            let lambda = match lambda.as_str() {
                "identity" => Lambda::Identity,
                "square" => Lambda::Power(T::lit(2.0)),
                "power" => Lambda::Power(params.number("p")?),
                other => return Err(parse_error(input, format!("unknown lambda `{other}`"))),
            };
            Family::GaussMartingale(lambda)
        }
        "statinc" => {
            let q = params.take("q").ok_or_else(|| parse_error(input, "missing key `Q`"))?;
            let q = match q.as_str() {
                "piecewise" | "paper_piecewise" => Variogram::Piecewise { hurst: params.number("h")? },
                "brownian" => Variogram::Brownian,
                "fbm" | "power" => Variogram::Power { hurst: params.number("h")? },
                "mixed" => Variogram::Mixed { hurst: params.number("h")? },
                other => return Err(parse_error(input, format!("unknown variogram `{other}`"))),
            };
            Family::StationaryInc(q)
        }
        other => return Err(parse_error(input, format!("unknown kernel family `{other}`"))),
    };
    params.finish()?;
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(s: &str) -> KernelSpec<f64> {
        KernelSpec::parse(s, 1.0).unwrap()
    }

    #[test]
    fn brownian_fbm_is_min() {
        let fbm = KernelSpec::fbm(0.5, 2.0).unwrap();
        assert_relative_eq!(fbm.eval_covariance(1.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bifbm_with_k_one_is_fbm() {
        let b = KernelSpec::bifbm(0.7, 1.0, 1.0).unwrap();
        let f = KernelSpec::fbm(0.7, 1.0).unwrap();
        for &(s, t) in &[(0.1, 0.9), (0.5, 0.5), (0.33, 0.34), (1.0, 0.2)] {
            assert_relative_eq!(
                b.eval_covariance(s, t).unwrap(),
                f.eval_covariance(s, t).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn martingale_identity_is_min() {
        let m = k("martingale:lambda=identity");
        assert_eq!(m.eval_covariance(0.3, 0.7).unwrap(), 0.3);
    }

    #[test]
    fn piecewise_variogram() {
        let q = k("statinc:Q=piecewise,H=0.8");
        assert_relative_eq!(q.eval_covariance(0.25, 0.25).unwrap(), 0.25, epsilon = 1e-15);
        // continuity of Q at 1/2
        let Family::StationaryInc(v) = q.family() else { panic!() };
        assert_relative_eq!(v.eval(0.5), v.eval(0.5 + 1e-12), epsilon = 1e-11);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let f = k("fbm:H=0.7");
        assert!(matches!(f.eval_covariance(1.5, 0.2), Err(Error::Domain(_))));
        assert!(matches!(f.eval_covariance(-0.1, 0.2), Err(Error::Domain(_))));
        assert!(KernelSpec::fbm(1.0, 1.0).is_err());
        assert!(KernelSpec::bifbm(0.5, 1.2, 1.0).is_err());
        assert!(KernelSpec::mixed_fbm(0.4, 1.0).is_err());
    }

    #[test]
    fn fbm_density_is_exact_mixed_partial() {
        let f = k("fbm:H=0.75");
        let d = f.offdiag_density(0.2, 0.6).unwrap().unwrap();
        // H(2H-1)|t-s|^{2H-2} = 0.75 * 0.5 * 0.4^{-0.5}
        assert_relative_eq!(d, 0.75 * 0.5 / 0.4f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d, 0.592_927_061_281_571, max_relative = 1e-12);
        // finite-difference oracle of the mixed partial
        let (s, t, e) = (0.2, 0.6, 1e-4);
        let r = |a: f64, b: f64| f.eval_covariance(a, b).unwrap();
        let fd = (r(s + e, t + e) - r(s + e, t - e) - r(s - e, t + e) + r(s - e, t - e)) / (4.0 * e * e);
        assert_relative_eq!(d, fd, max_relative = 1e-5);
    }

    #[test]
    fn density_zero_for_martingale_and_error_on_diagonal() {
        let m = k("martingale:lambda=identity");
        assert_eq!(m.offdiag_density(0.2, 0.5).unwrap(), Some(0.0));
        assert!(m.offdiag_density(0.4, 0.4).is_err());
        assert_eq!(k("fbm:H=0.3").offdiag_density(0.2, 0.5).unwrap(), None);
    }

    #[test]
    fn critical_bifbm_density_is_r1_only() {
        let b = k("bifbm:H=0.75,K=2/3");
        assert_eq!(b.bifbm_regime(), Some(BifbmRegime::Critical));
        let (s, t) = (0.3, 0.8);
        let d = b.offdiag_density(s, t).unwrap().unwrap();
        assert!(d < 0.0);
        // finite-difference oracle on R_1 alone
        let e = 1e-4;
        let r1 = |a: f64, c: f64| b.bifbm_parts(a, c).unwrap().0;
        let fd = (r1(s + e, t + e) - r1(s + e, t - e) - r1(s - e, t + e) + r1(s - e, t - e)) / (4.0 * e * e);
        assert_relative_eq!(d, fd, max_relative = 1e-5);
        // R_2 is 2^{-K}(s + t - |s - t|) in the critical case
        let r2 = b.bifbm_parts(s, t).unwrap().1;
        assert_relative_eq!(r2, 2f64.powf(-2.0 / 3.0) * (s + t - (s - t).abs()), max_relative = 1e-12);
    }

    #[test]
    fn energy_closed_forms() {
        assert_relative_eq!(
            k("bifbm:H=0.75,K=2/3").energy_closed_form(1.0).unwrap().unwrap(),
            2f64.powf(1.0 / 3.0),
            max_relative = 1e-14
        );
        assert_eq!(k("mixedfbm:H=0.8").energy_closed_form(0.5).unwrap(), Some(0.5));
        assert_eq!(k("fbm:H=0.7").energy_closed_form(1.0).unwrap(), Some(0.0));
        assert_eq!(k("fbm:H=0.3").energy_closed_form(1.0).unwrap(), None);
        assert_eq!(k("bifbm:H=0.6,K=0.5").energy_closed_form(1.0).unwrap(), None);
        assert_eq!(k("statinc:Q=piecewise,H=0.8").energy_closed_form(0.5).unwrap(), Some(0.5));
        let sq = k("martingale:lambda=square");
        assert_eq!(sq.energy_closed_form(0.5).unwrap(), Some(0.25));
    }

    #[test]
    fn variance_curves() {
        assert_relative_eq!(k("fbm:H=0.7").variance_curve(1.0).unwrap(), 1.0);
        let b = k("bifbm:H=0.6,K=0.9");
        assert_relative_eq!(b.variance_curve(0.4).unwrap(), 0.4f64.powf(2.0 * 0.6 * 0.9), max_relative = 1e-13);
        let m = KernelSpec::parse("mixedfbm:H=0.8", 2.0).unwrap();
        assert_relative_eq!(m.variance_curve(2.0).unwrap(), 2.0 + 2f64.powf(1.6), max_relative = 1e-14);
        assert_eq!(m.variance_curve(0.0).unwrap(), 0.0);
    }

    #[test]
    fn q_decompositions() {
        let d = k("mixedfbm:H=0.8").q_decomposition().unwrap();
        assert_eq!(d.atoms, vec![(0.0, 2.0)]);
        assert_relative_eq!((d.density)(0.5), 1.6 * 0.6 * 0.5f64.powf(-0.4), max_relative = 1e-14);

        let d = k("statinc:Q=piecewise,H=0.8").q_decomposition().unwrap();
        assert_eq!(d.atoms.len(), 3);
        assert_eq!(d.atoms[0], (0.0, 2.0));
        assert_relative_eq!(d.atoms[1].0, 0.5);
        assert_relative_eq!(d.atoms[1].1, 0.6, max_relative = 1e-14);
        assert_relative_eq!(d.atoms[2].0, -0.5);
        assert_eq!((d.density)(0.3), 0.0);

        let d = k("bm").q_decomposition().unwrap();
        assert_eq!(d.atoms, vec![(0.0, 2.0)]);
        assert_eq!((d.density)(0.7), 0.0);

        assert!(matches!(
            k("bifbm:H=0.75,K=2/3").q_decomposition(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn piecewise_atoms_match_jump_of_q_prime() {
        let kern = k("statinc:Q=piecewise,H=0.8");
        let Family::StationaryInc(q) = kern.family() else { panic!() };
        let e = 1e-6;
        let left = (q.eval(0.5) - q.eval(0.5 - e)) / e;
        let right = (q.eval(0.5 + e) - q.eval(0.5)) / e;
        assert_relative_eq!(right - left, 2.0 * 0.8 - 1.0, epsilon = 1e-4);
    }

    #[test]
    fn canonical_strings_round_trip() {
        for s in [
            "fbm:H=0.7",
            "bifbm:H=0.75,K=0.6667",
            "martingale:lambda=identity",
            "martingale:lambda=square",
            "mixedfbm:H=0.8",
            "statinc:Q=piecewise,H=0.8",
            "bm",
        ] {
            let kern = k(s);
            assert_eq!(kern.id().to_ascii_lowercase(), s.to_ascii_lowercase());
            assert_eq!(k(&kern.id()).id(), kern.id());
        }
        assert_eq!(k("FBM:h=0.7").id(), "fbm:H=0.7");
    }

    #[test]
    fn parser_rejects_unknown_keys() {
        for bad in ["fbm:Z=1", "fbm", "fbm:H=0.7,H=0.6", "foo:H=1", "bifbm:H=0.7", "martingale:lambda=wat", "fbm:H=abc"] {
            assert!(
                matches!(KernelSpec::<f64>::parse(bad, 1.0), Err(Error::KernelParse { .. })),
                "{bad}"
            );
        }
        assert!(KernelSpec::<f64>::parse("fbm:H=1.5", 1.0).is_err());
    }

    #[test]
    fn lambda_monotonicity_spot_check() {
        let g = Grid::new(8, 1.0).unwrap();
        let bad = KernelSpec::martingale(Lambda::custom("wiggle", |x: f64| (6.0 * x).sin().abs() * x), 1.0).unwrap();
        assert!(bad.check_lambda_monotone(&g).is_err());
        assert!(k("martingale:lambda=square").check_lambda_monotone(&g).is_ok());
    }

    #[test]
    fn generic_over_f32() {
        let f = KernelSpec::<f32>::parse("fbm:H=0.75", 1.0).unwrap();
        let r = f.eval_covariance(0.5, 1.0).unwrap();
        let r64 = KernelSpec::<f64>::parse("fbm:H=0.75", 1.0).unwrap().eval_covariance(0.5, 1.0).unwrap();
        assert!((r as f64 - r64).abs() < 1e-6);
    }
}
