//! Independent reference computations for integration tests.
//!
//! Everything here works from closed forms or exhaustive enumeration over
//! integers; nothing calls into the crate's numerical routines.

#![allow(dead_code)]

/// `C(n, k)` as a float, exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `−x log x` with `0 log 0 = 0`.
pub fn eta(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Entropy per spin at magnetization length `m`.
pub fn binary_entropy(m: f64) -> f64 {
    eta((1.0 + m) / 2.0) + eta((1.0 - m) / 2.0)
}

/// Rational window test `lo ≤ (N − 2k)/N < hi` with `lo = lo_num/den`, `hi = hi_num/den`,
/// evaluated on integers.
pub fn in_rational_window(n: usize, down: usize, lo_num: i64, hi_num: i64, den: i64) -> bool {
    let v = (n as i64 - 2 * down as i64) * den;
    v >= lo_num * n as i64 && v < hi_num * n as i64
}

/// Number of `n`-spin basis states whose `X_3` eigenvalue lies in `[lo, hi)`.
pub fn count_in_window(n: usize, lo_num: i64, hi_num: i64, den: i64) -> f64 {
    (0..=n)
        .filter(|&k| in_rational_window(n, k, lo_num, hi_num, den))
        .map(|k| binomial(n, k))
        .sum()
}

/// Product-state mass of `X_3` outside `[lo, hi)` when each spin is up with
/// probability `p`.
pub fn binomial_tail(n: usize, p: f64, lo_num: i64, hi_num: i64, den: i64) -> f64 {
    (0..=n)
        .filter(|&k| !in_rational_window(n, k, lo_num, hi_num, den))
        .map(|k| binomial(n, k) * p.powi((n - k) as i32) * (1.0 - p).powi(k as i32))
        .sum()
}

/// Ordinary least-squares slope.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
