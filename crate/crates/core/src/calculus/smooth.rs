use rand::Rng;

use crate::error::{Error, Result};

/// One-variable profile `g` with closed-form first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Identity,
    /// `Σ c_k x^k`.
    Poly(Vec<f64>),
    /// `sin(ω x)`.
    Sin(f64),
    /// `cos(ω x)`.
    Cos(f64),
    /// `tanh(a x)`.
    Tanh(f64),
    /// `exp(-x² / (2 w²))`.
    GaussTaper(f64),
}

impl Profile {
    /// `g^{(order)}(x)` for `order ≤ 2`.
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        match (self, order) {
            (Profile::Identity, 0) => x,
            (Profile::Identity, 1) => 1.0,
            (Profile::Identity, _) => 0.0,
            (Profile::Poly(c), _) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(order).rev() {
                    let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
                    acc = acc * x + ck * falling;
                }
                acc
            }
            (Profile::Sin(w), 0) => (w * x).sin(),
            (Profile::Sin(w), 1) => w * (w * x).cos(),
            (Profile::Sin(w), _) => -w * w * (w * x).sin(),
            (Profile::Cos(w), 0) => (w * x).cos(),
            (Profile::Cos(w), 1) => -w * (w * x).sin(),
            (Profile::Cos(w), _) => -w * w * (w * x).cos(),
            (Profile::Tanh(a), 0) => (a * x).tanh(),
            (Profile::Tanh(a), 1) => {
                let t = (a * x).tanh();
                a * (1.0 - t * t)
            }
            (Profile::Tanh(a), _) => {
                let t = (a * x).tanh();
                -2.0 * a * a * t * (1.0 - t * t)
            }
            (Profile::GaussTaper(w), _) => {
                let e = (-x * x / (2.0 * w * w)).exp();
                match order {
                    0 => e,
                    1 => -x / (w * w) * e,
                    _ => (x * x / (w * w) - 1.0) / (w * w) * e,
                }
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// Whether `g''` is bounded on the real line.
    pub fn has_bounded_second_derivative(&self) -> bool {
        match self {
            Profile::Poly(c) => c.len() <= 3,
            _ => true,
        }
    }
}

/// Smooth function of `k` variables built from ridge profiles `g(a·x)`, sums and products.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothFn {
    Const(f64),
    Ridge { profile: Profile, weights: Vec<f64> },
    Sum(Box<SmoothFn>, Box<SmoothFn>),
    Product(Box<SmoothFn>, Box<SmoothFn>),
}

impl SmoothFn {
    pub fn ridge(profile: Profile, weights: Vec<f64>) -> Self {
        SmoothFn::Ridge { profile, weights }
    }

    /// `x_i` as a function of `k` variables.
    pub fn coordinate(i: usize, k: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        SmoothFn::ridge(Profile::Identity, w)
    }

    pub fn sum(a: SmoothFn, b: SmoothFn) -> Self {
        SmoothFn::Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: SmoothFn, b: SmoothFn) -> Self {
        SmoothFn::Product(Box::new(a), Box::new(b))
    }

    /// Number of variables, `None` for constants.
    pub fn arity(&self) -> Option<usize> {
        match self {
            SmoothFn::Const(_) => None,
            SmoothFn::Ridge { weights, .. } => Some(weights.len()),
            SmoothFn::Sum(a, b) | SmoothFn::Product(a, b) => a.arity().or(b.arity()),
        }
    }

    pub(crate) fn check_arity(&self, k: usize) -> Result<()> {
        match self {
            SmoothFn::Const(_) => Ok(()),
            SmoothFn::Ridge { weights, .. } if weights.len() == k => Ok(()),
            SmoothFn::Ridge { weights, .. } => Err(Error::domain(format!(
                "smooth function takes {} variables, given {k}",
                weights.len()
            ))),
            SmoothFn::Sum(a, b) | SmoothFn::Product(a, b) => {
                a.check_arity(k)?;
                b.check_arity(k)
            }
        }
    }

    /// The same function of variables `offset..offset+k` out of `total`.
    pub fn embed(&self, offset: usize, total: usize) -> SmoothFn {
        match self {
            SmoothFn::Const(c) => SmoothFn::Const(*c),
            SmoothFn::Ridge { profile, weights } => {
                let mut w = vec![0.0; total];
                w[offset..offset + weights.len()].copy_from_slice(weights);
                SmoothFn::ridge(profile.clone(), w)
            }
            SmoothFn::Sum(a, b) => SmoothFn::sum(a.embed(offset, total), b.embed(offset, total)),
            SmoothFn::Product(a, b) => SmoothFn::product(a.embed(offset, total), b.embed(offset, total)),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFn::Const(c) => *c,
            SmoothFn::Ridge { profile, weights } => profile.value(dot(weights, x)),
            SmoothFn::Sum(a, b) => a.value(x) + b.value(x),
            SmoothFn::Product(a, b) => a.value(x) * b.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        match self {
            SmoothFn::Const(_) => vec![0.0; k],
            SmoothFn::Ridge { profile, weights } => {
                let d = profile.derivative(1, dot(weights, x));
                weights.iter().map(|w| d * w).collect()
            }
            SmoothFn::Sum(a, b) => a.gradient(x).iter().zip(b.gradient(x)).map(|(p, q)| p + q).collect(),
            SmoothFn::Product(a, b) => {
                let (va, vb) = (a.value(x), b.value(x));
                a.gradient(x).iter().zip(b.gradient(x)).map(|(ga, gb)| ga * vb + va * gb).collect()
            }
        }
    }

    /// Row-major `k × k` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        match self {
            SmoothFn::Const(_) => vec![0.0; k * k],
            SmoothFn::Ridge { profile, weights } => {
                let d = profile.derivative(2, dot(weights, x));
                let mut h = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        h[i * k + j] = d * weights[i] * weights[j];
                    }
                }
                h
            }
            SmoothFn::Sum(a, b) => a.hessian(x).iter().zip(b.hessian(x)).map(|(p, q)| p + q).collect(),
            SmoothFn::Product(a, b) => {
                let (va, vb) = (a.value(x), b.value(x));
                let (ga, gb) = (a.gradient(x), b.gradient(x));
                let (ha, hb) = (a.hessian(x), b.hessian(x));
                let mut h = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        h[i * k + j] = ha[i * k + j] * vb + va * hb[i * k + j] + ga[i] * gb[j] + gb[i] * ga[j];
                    }
                }
                h
            }
        }
    }

    /// A random member of the bounded test library on `k` variables:
    /// a taper-weighted polynomial, a trigonometric ridge, or a product with `tanh`.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> SmoothFn {
        let weights = |rng: &mut R| -> Vec<f64> { (0..k).map(|_| rng.random_range(-1.0..1.0)).collect() };
        match rng.random_range(0..4) {
            0 => {
                let c = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)];
                let w = weights(rng);
                SmoothFn::product(
                    SmoothFn::ridge(Profile::Poly(c), w.clone()),
                    SmoothFn::ridge(Profile::GaussTaper(rng.random_range(1.0..3.0)), w),
                )
            }
            1 => SmoothFn::ridge(Profile::Sin(rng.random_range(0.5..2.0)), weights(rng)),
            2 => SmoothFn::sum(
                SmoothFn::ridge(Profile::Cos(rng.random_range(0.5..2.0)), weights(rng)),
                SmoothFn::Const(rng.random_range(-1.0..1.0)),
            ),
            _ => SmoothFn::product(
                SmoothFn::ridge(Profile::Tanh(rng.random_range(0.5..2.0)), weights(rng)),
                SmoothFn::ridge(Profile::Cos(rng.random_range(0.5..1.5)), weights(rng)),
            ),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}
