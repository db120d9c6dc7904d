//! Gauss–Legendre quadrature nodes.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0))
        .collect()
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`,
/// nodes ascending. Roots of `P_n` by Newton iteration from the Chebyshev
/// guesses.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre_unit(32);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // ∫_0^1 x^k dx = 1/(k+1) for k < 64.
        for k in [1, 7, 30, 63] {
            let v: f64 = rule.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn small_rules() {
        let r = gauss_legendre(2);
        let a = 1.0 / 3f64.sqrt();
        assert!((r[0].0 + a).abs() < 1e-15 && (r[1].0 - a).abs() < 1e-15);
        assert!((r[0].1 - 1.0).abs() < 1e-14);
        let r = gauss_legendre(3);
        assert!(r[1].0.abs() < 1e-15);
        assert!((r[1].1 - 8.0 / 9.0).abs() < 1e-14);
    }
}
