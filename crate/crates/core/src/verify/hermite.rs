/// Monic probabilists' Hermite polynomial `He_n(x)`, `E[He_n(Z) He_m(Z)] = n! δ_{nm}`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x), ..., He_n(x)`.
pub fn hermite_all(n: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
}

/// `I_n(1_{[0,s]}^{⊗n}) = R^{n/2} He_n(X_s / √R)` with `R = R(s,s)` and `x_s = X_s`.
/// Zero for `n ≥ 1` when `R = 0`.
pub fn multiple_integral_indicator(n: usize, x_s: f64, variance: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if variance <= 0.0 {
        return 0.0;
    }
    let sd = variance.sqrt();
    sd.powi(n as i32) * hermite(n, x_s / sd)
}
