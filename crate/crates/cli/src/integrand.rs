//! Integrand expressions for `covcalc integrate`.
//!
//! * `indicator:a,b` is `1_{]a,b]}`
//! * `step:[(a,b,v),...]` is `Σ v 1_{]a,b]}`
//! * `fprime:poly:c0,c1,...` is `Y = f'(X)` with `f'(x) = Σ c_k x^k`

use covcalc::calculus::{Profile, StepFunction};
use covcalc::Grid;

use crate::config::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrandExpr {
    Step(StepFunction<f64>),
    /// Coefficients of `f'`.
    FPrime(Vec<f64>),
}

impl IntegrandExpr {
    pub fn parse(text: &str, grid: Grid) -> Result<Self, ConfigError> {
        let err = |why: &str| ConfigError(format!("key `integrand`: cannot parse `{text}`: {why}"));
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("indicator:") {
            let v = numbers(rest).ok_or_else(|| err("expected two numbers"))?;
            let [a, b] = v[..] else {
                return Err(err("expected two numbers"));
            };
            let s = StepFunction::indicator(grid, a, b).map_err(|e| err(&e.to_string()))?;
            return Ok(IntegrandExpr::Step(s));
        }
        if let Some(rest) = t.strip_prefix("step:") {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| err("expected [(a,b,v),...]"))?;
            let mut pieces = Vec::new();
            for chunk in inner.split(')') {
                let chunk = chunk.trim().trim_start_matches(',').trim();
                if chunk.is_empty() {
                    continue;
                }
                let body = chunk.strip_prefix('(').ok_or_else(|| err("expected `(` before a piece"))?;
                let v = numbers(body).ok_or_else(|| err("bad number in a piece"))?;
                let [a, b, c] = v[..] else {
                    return Err(err("each piece needs (a,b,v)"));
                };
                pieces.push((a, b, c));
            }
            let s = StepFunction::from_pieces(grid, &pieces).map_err(|e| err(&e.to_string()))?;
            return Ok(IntegrandExpr::Step(s));
        }
        if let Some(rest) = t.strip_prefix("fprime:poly:") {
            let c = numbers(rest).ok_or_else(|| err("bad coefficient"))?;
            if c.is_empty() {
                return Err(err("no coefficients"));
            }
            return Ok(IntegrandExpr::FPrime(c));
        }
        Err(err("expected indicator:, step: or fprime:poly:"))
    }

    /// `f'` and `f''` as profiles.
    pub fn derivatives(coeffs: &[f64]) -> (Profile, Profile) {
        let second: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        (Profile::Poly(coeffs.to_vec()), Profile::Poly(second))
    }
}

fn numbers(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim())
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}
