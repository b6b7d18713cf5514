use krylov_qfi::lanczos::{fn_series, run_lanczos, LanczosOptions};
use krylov_qfi::models::{random_density_matrix, random_hermitian};
use krylov_qfi::operator_space::{CMatrix, HermitianOperator, LiouvilleVector, WeightedSpace};
use krylov_qfi::qfi::{analyze_unitary, exact_qfi, exact_sld, krylov_coefficients, krylov_sld, projected_coefficients};
use krylov_qfi::spectral::{gauss_quadrature, measure_inverse_square, moment_inverse_square, moments, seed_measure};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn complex_matrix(n: usize, seed: u64) -> CMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    })
}

struct Case {
    space: WeightedSpace,
    h: HermitianOperator,
    n: usize,
}

fn case(n: usize, seed: u64) -> Case {
    Case {
        space: WeightedSpace::new(random_density_matrix(n, seed).unwrap()),
        h: random_hermitian(n, seed.wrapping_add(0x5eed)),
        n,
    }
}

fn full_run(c: &Case) -> krylov_qfi::KrylovResult {
    let (seed, _) = c.space.unitary_seed(&c.h).unwrap();
    let opts = LanczosOptions {
        store_basis: true,
        ..LanczosOptions::default()
    };
    run_lanczos(&c.space, &seed, c.n * c.n, opts).unwrap()
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn inner_product_matches_trace_form(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let (a_lab, b_lab) = (complex_matrix(n, seed ^ 1), complex_matrix(n, seed ^ 2));
        let a = c.space.to_liouville(&a_lab).unwrap();
        let b = c.space.to_liouville(&b_lab).unwrap();
        let rho = c.space.rho().matrix();
        let trace_form = (rho * (a_lab.adjoint() * &b_lab + &b_lab * a_lab.adjoint())).trace() * 0.5;
        let weighted = c.space.inner_product(&a, &b).unwrap();
        prop_assert!((weighted - trace_form).norm() <= 1e-12 * trace_form.norm().max(1.0));
    }

    #[test]
    fn k_is_self_adjoint_and_positive(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let a = c.space.to_liouville(&complex_matrix(n, seed ^ 3)).unwrap();
        let b = c.space.to_liouville(&complex_matrix(n, seed ^ 4)).unwrap();
        let lhs = c.space.inner_product(&a, &c.space.apply_k(&b).unwrap()).unwrap();
        let rhs = c.space.inner_product(&c.space.apply_k(&a).unwrap(), &b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));

        let kaa = c.space.inner_product(&a, &c.space.apply_k(&a).unwrap()).unwrap();
        let aa = c.space.inner_product(&a, &a).unwrap().re;
        let (rho_min, _) = c.space.spectrum_bounds();
        prop_assert!(kaa.re >= rho_min * aa * (1.0 - 1e-12));
        prop_assert!(kaa.im.abs() <= 1e-12 * kaa.re);
    }

    #[test]
    fn k_preserves_hermiticity(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let m = complex_matrix(n, seed ^ 5);
        let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let ka = c.space.to_lab(&c.space.apply_k(&c.space.to_liouville(&herm).unwrap()).unwrap());
        prop_assert!(frobenius(&(&ka - ka.adjoint())) <= 1e-12 * frobenius(&ka));
        // Lab-frame definition ½{ρ, A}.
        let rho = c.space.rho().matrix();
        let direct = (rho * &herm + &herm * rho) * Complex64::new(0.5, 0.0);
        prop_assert!(frobenius(&(&ka - &direct)) <= 1e-12 * frobenius(&direct));
    }

    #[test]
    fn seed_is_invariant_under_energy_shift(n in 2usize..7, seed in any::<u64>(), shift in -10.0f64..10.0) {
        let c = case(n, seed);
        let shifted = HermitianOperator::new(
            &(c.h.matrix() + CMatrix::identity(n, n) * Complex64::new(shift, 0.0)),
        ).unwrap();
        let s0 = c.space.commutator_seed(&c.h).unwrap();
        let s1 = c.space.commutator_seed(&shifted).unwrap();
        prop_assert!(frobenius(&(s0.matrix() - s1.matrix())) <= 1e-12 * (1.0 + shift.abs()) * frobenius(s0.matrix()));
    }

    #[test]
    fn lanczos_invariants(n in 2usize..9, seed in any::<u64>()) {
        let c = case(n, seed);
        let k = full_run(&c);
        let d0 = k.d0.unwrap();
        prop_assert!(d0 <= n * (n - 1) / 2);

        let basis = k.basis.as_ref().unwrap();
        let t = k.tridiag.to_dense();
        for i in 0..d0 {
            let kv = c.space.apply_k(&basis[i]).unwrap();
            for j in 0..d0 {
                let vkv = c.space.inner_product(&basis[j], &kv).unwrap();
                prop_assert!((vkv - Complex64::new(t[(j, i)], 0.0)).norm() <= 1e-10);
            }
            // K V = V T at breakdown.
            let mut residual = kv.matrix().clone();
            for j in 0..d0 {
                residual -= basis[j].matrix() * Complex64::new(t[(j, i)], 0.0);
            }
            prop_assert!(residual.iter().all(|z| z.norm() <= 1e-10));
        }

        let (lo, hi) = c.space.spectrum_bounds();
        for m in 1..=d0 {
            let (vals, _) = k.tridiag.leading(m).eigen();
            prop_assert!(vals.iter().all(|&x| x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn truncated_qfi_is_monotone_lower_bound(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let f = exact_qfi(&c.space, &c.h).unwrap();
        let k = full_run(&c);
        let series = fn_series(&k.tridiag, k.seed_norm).unwrap();
        for w in series.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        prop_assert!(series.iter().all(|&x| x <= f + 1e-12 * f.max(1.0)));
        prop_assert!(rel(*series.last().unwrap(), f) <= 1e-9);
    }

    #[test]
    fn report_invariants(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let r = analyze_unitary(&c.space, &c.h, n * n, LanczosOptions::default()).unwrap().report;
        prop_assert!((r.p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(r.p.iter().all(|&x| x >= 0.0));
        prop_assert!(r.depth >= 0.0 && r.depth <= (r.levels() - 1) as f64 + 1e-12);
        for w in r.rel_error.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(r.rel_error.iter().all(|&e| (-1e-12..=1.0 + 1e-12).contains(&e)));
        prop_assert!(r.bound_margin.iter().all(|&m| m >= -1e-10));
        for n in 1..=r.levels() {
            let tail: f64 = r.p[n..].iter().sum();
            prop_assert!((r.rel_error[n - 1] - tail).abs() <= 1e-9);
        }
    }

    #[test]
    fn oracle_triangle_and_sld_residual(n in 2usize..7, seed in any::<u64>()) {
        let c = case(n, seed);
        let f = exact_qfi(&c.space, &c.h).unwrap();
        let l = exact_sld(&c.space, &c.h).unwrap();
        let ll = c.space.inner_product(&l, &l).unwrap().re;
        let (m, norm) = seed_measure(&c.space, &c.space.commutator_seed(&c.h).unwrap()).unwrap();
        let atomic = norm * norm * m.inverse_moment(2);
        let k = full_run(&c);
        let f_d0 = *fn_series(&k.tridiag, k.seed_norm).unwrap().last().unwrap();
        prop_assert!(rel(ll, f) <= 1e-9);
        prop_assert!(rel(atomic, f) <= 1e-9);
        prop_assert!(rel(f_d0, f) <= 1e-9);

        let ell = krylov_coefficients(&k).unwrap();
        let projected = projected_coefficients(&c.space, &k, &l).unwrap();
        for (x, y) in ell.iter().zip(&projected) {
            prop_assert!((x - y).abs() <= 1e-9 * f.sqrt().max(1.0));
        }
        let l_lab = c.space.to_lab(&krylov_sld(&k, &ell).unwrap());
        let rho = c.space.rho().matrix();
        let lhs = (rho * &l_lab + &l_lab * rho) * Complex64::new(0.5, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let rhs = (rho * c.h.matrix() - c.h.matrix() * rho) * i;
        prop_assert!(frobenius(&(lhs - &rhs)) <= 1e-9 * frobenius(&rhs));
    }

    #[test]
    fn measure_moments_and_quadrature(n in 2usize..6, seed in any::<u64>()) {
        let c = case(n, seed);
        let (seed_op, norm) = c.space.unitary_seed(&c.h).unwrap();
        let (m, _) = seed_measure(&c.space, &seed_op).unwrap();
        let v0 = seed_op.scaled(Complex64::new(1.0 / norm, 0.0));
        let mu = moments(&m, 8);
        let mut kv: LiouvilleVector = v0.clone();
        for &mk in &mu {
            let direct = c.space.inner_product(&v0, &kv).unwrap().re;
            prop_assert!(rel(mk, direct) <= 1e-10);
            kv = c.space.apply_k(&kv).unwrap();
        }
        let (lo, hi) = c.space.spectrum_bounds();
        prop_assert!(m.atoms().iter().all(|a| a.lambda >= lo * (1.0 - 1e-12) && a.lambda <= hi * (1.0 + 1e-12)));

        let k = full_run(&c);
        prop_assert_eq!(k.d0.unwrap(), m.len());
        let series = fn_series(&k.tridiag, 1.0).unwrap();
        let all_mu = moments(&m, 2 * k.levels());
        for order in 1..=k.levels() {
            let rule = gauss_quadrature(&k.tridiag.leading(order));
            for deg in 0..2 * order as i32 {
                prop_assert!(rel(rule.integrate(|x| x.powi(deg)), m.moment(deg)) <= 1e-11);
            }
            if order <= 8 {
                let standardized = measure_inverse_square(&m, order).unwrap();
                let raw = moment_inverse_square(&all_mu, order).unwrap();
                prop_assert!(rel(standardized, series[order - 1]) <= 1e-7);
                if order <= 5 {
                    prop_assert!(rel(raw, series[order - 1]) <= 1e-9);
                }
            }
        }
    }
}
