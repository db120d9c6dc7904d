mod common;

use macroq_core::macrostate::{
    concentration_diagnostic, h_function, joint_window_projection, magnetization_window, microcanonical_expectation,
    pair_product_check, window_projection, window_projection_from, window_rank, MacroObservableSet, MacroValue,
    WindowSpec,
};
use macroq_core::{average_observable, eigh, embed_site_operator, pauli, HermitianOperator, LocalOperator, C64};
use proptest::prelude::*;

fn local_hermitian(a: f64, b: f64, c: f64, d: f64) -> LocalOperator {
    LocalOperator::new(C64::new(a, 0.0), C64::new(b, c), C64::new(b, -c), C64::new(d, 0.0))
}

/// Average of a random single-site Hermitian matrix over `n` spins.
fn observable() -> impl Strategy<Value = (usize, HermitianOperator)> {
    (2usize..=6, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(n, a, b, c, d)| (n, average_observable(&local_hermitian(a, b, c, d), n).unwrap()))
}

fn nearest_neighbour_zz(n: usize) -> HermitianOperator {
    let mut acc = HermitianOperator::zeros(1 << n);
    for i in 1..=n {
        let j = i % n + 1;
        let zi = embed_site_operator(&pauli::z(), i, n).unwrap();
        let zj = embed_site_operator(&pauli::z(), j, n).unwrap();
        acc = acc.add(&zi.mul(&zj).unwrap()).unwrap();
    }
    acc.scale(1.0 / n as f64)
}

/// `(X_3, ZZ)` eigenvalues of a computational basis state, counted from the bits.
fn basis_values(n: usize, bits: usize) -> (f64, f64) {
    let spin = |i: usize| if bits >> (n - 1 - i) & 1 == 0 { 1.0 } else { -1.0 };
    let z: f64 = (0..n).map(spin).sum::<f64>() / n as f64;
    let zz: f64 = (0..n).map(|i| spin(i) * spin((i + 1) % n)).sum::<f64>() / n as f64;
    (z, zz)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn window_projections_are_idempotent((_, x) in observable(), c in -1.5f64..1.5, d in 0.01f64..1.0) {
        let p = window_projection(&x, &WindowSpec::new(c, d).unwrap()).unwrap();
        prop_assert!(p.idempotence_defect() <= 1e-9);
        prop_assert!(p.op().is_hermitian());
    }

    #[test]
    fn ranks_over_a_partition_sum_to_dimension((_, x) in observable(), offset in 0.0f64..1.0, d in 0.02f64..0.5) {
        let s = eigh(&x).unwrap();
        let start = s.min() - 1.0 - offset * 2.0 * d;
        let mut total = 0;
        let mut lo = start;
        while lo < s.max() + 1.0 {
            total += window_rank(&s, &WindowSpec::interval(lo, lo + 2.0 * d).unwrap());
            lo += 2.0 * d;
        }
        prop_assert_eq!(total, x.dim());
    }

    #[test]
    fn rank_and_h_grow_with_width((n, x) in observable(), c in -1.0f64..1.0, d in 0.01f64..0.5, extra in 0.0f64..0.5) {
        let s = eigh(&x).unwrap();
        let narrow = window_projection_from(&s, &WindowSpec::new(c, d).unwrap());
        let wide = window_projection_from(&s, &WindowSpec::new(c, d + extra).unwrap());
        prop_assert!(narrow.rank() <= wide.rank());
        if !narrow.is_empty() {
            prop_assert!(h_function(&narrow, n) <= h_function(&wide, n));
        }
    }

    #[test]
    fn microcanonical_expectation_stays_in_window((_, x) in observable(), c in -1.0f64..1.0, d in 0.05f64..0.8) {
        let w = WindowSpec::new(c, d).unwrap();
        let p = window_projection(&x, &w).unwrap();
        prop_assume!(!p.is_empty());
        let e = microcanonical_expectation(&x, &p).unwrap();
        prop_assert!(e >= w.lower() - 1e-9 && e < w.upper(), "{e} outside [{}, {})", w.lower(), w.upper());
    }

    #[test]
    fn pair_products_respect_the_cauchy_schwarz_bound(
        n in 2usize..=6,
        m1 in -0.6f64..0.6,
        m2 in -0.6f64..0.6,
        m3 in -0.6f64..0.6,
        d in 0.1f64..0.8,
        j in 0usize..3,
        k in 0usize..3,
    ) {
        let m = [m1, m2, m3];
        let p = magnetization_window(n, m, d).unwrap();
        prop_assume!(!p.is_empty());
        let xs = MacroObservableSet::magnetization(n).unwrap();
        let x = MacroValue(m.to_vec());
        let check = pair_product_check(&p, &xs, &x, j, k).unwrap();

        // Dense recomputation of both sides.
        let proj = p.op();
        let r = p.rank() as f64;
        let xj = xs.op(j).unwrap();
        let xk = xs.op(k).unwrap();
        let prod = xj.mul(xk).unwrap().mul(proj).unwrap().trace() / r;
        let mean_j = xj.mul(proj).unwrap().trace().re / r;
        let shifted = xk.shift(m[k]);
        let var_k = shifted.mul(&shifted).unwrap().mul(proj).unwrap().trace().re / r;
        prop_assert!((prod - check.product).norm() <= 1e-10);
        // ‖X_j‖ = 1 for the magnetizations.
        let bound = var_k.max(0.0).sqrt() + xs.radius(k) * (mean_j - m[j]).abs();
        let lhs = (prod - C64::new(m[j] * m[k], 0.0)).norm();
        let diag = concentration_diagnostic(&p, &xs, &x).unwrap();
        prop_assert!((diag[k].variance - var_k).abs() <= 1e-10);
        prop_assert!(check.covariance <= check.covariance_bound + 1e-12);
        prop_assert!(lhs <= bound + 1e-10, "{lhs} > {bound}");
        prop_assert!(check.deviation <= check.bound + 1e-12);
    }

    #[test]
    fn joint_rank_matches_enumeration(
        n in 2usize..=6,
        c1 in -1.0f64..1.0,
        d1 in 0.05f64..0.8,
        c2 in -1.0f64..1.0,
        d2 in 0.05f64..0.8,
    ) {
        let z = average_observable(&pauli::z(), n).unwrap();
        let zz = nearest_neighbour_zz(n);
        let w1 = WindowSpec::new(c1, d1).unwrap();
        let w2 = WindowSpec::new(c2, d2).unwrap();
        let p = joint_window_projection(&[z, zz], &[w1, w2]).unwrap();
        let brute = (0..1usize << n)
            .filter(|&b| {
                let (a, bb) = basis_values(n, b);
                w1.contains(a) && w2.contains(bb)
            })
            .count();
        prop_assert_eq!(p.rank(), brute);
    }
}

#[test]
fn spin_window_rank_matches_counting() {
    for n in 2..=10 {
        let x = average_observable(&pauli::z(), n).unwrap();
        // [0.3, 0.7)
        let p = window_projection(&x, &WindowSpec::interval(0.3, 0.7).unwrap()).unwrap();
        assert_eq!(p.rank() as f64, common::count_in_window(n, 3, 7, 10), "N = {n}");
        if !p.is_empty() {
            let expected = common::count_in_window(n, 3, 7, 10).ln() / n as f64;
            assert!((h_function(&p, n) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn boundary_eigenvalues_follow_half_open_convention() {
    // Eigenvalues of X_3 at N = 4 are -1, -0.5, 0, 0.5, 1.
    let x = average_observable(&pauli::z(), 4).unwrap();
    let lower_hit = window_projection(&x, &WindowSpec::interval(0.5, 0.75).unwrap()).unwrap();
    assert_eq!(lower_hit.rank() as f64, common::binomial(4, 1));
    let upper_hit = window_projection(&x, &WindowSpec::interval(0.25, 0.5).unwrap()).unwrap();
    assert!(upper_hit.is_empty());
}

#[test]
fn noncommuting_joint_windows_are_rejected() {
    let n = 3;
    let x = average_observable(&pauli::x(), n).unwrap();
    let z = average_observable(&pauli::z(), n).unwrap();
    let w = WindowSpec::new(0.0, 0.5).unwrap();
    assert!(joint_window_projection(&[x, z], &[w, w]).is_err());
}

#[test]
fn magnetization_window_concentrates() {
    let m = [0.0, 0.0, 0.5];
    let x = MacroValue(m.to_vec());
    let mut transverse = Vec::new();
    for n in 4..=10 {
        let xs = MacroObservableSet::magnetization(n).unwrap();
        let v = concentration_diagnostic(&magnetization_window(n, m, 0.3).unwrap(), &xs, &x).unwrap();
        assert!(v[2].variance <= 0.3 * 0.3);
        assert!((v[0].variance - v[1].variance).abs() < 1e-12);
        transverse.push(v[0].variance);
    }
    assert!(transverse.windows(2).all(|w| w[1] < w[0]), "{transverse:?}");
}
