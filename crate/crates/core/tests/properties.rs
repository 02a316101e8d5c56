use proptest::prelude::*;
use qsgain::cli::{run_from_args, EXIT_NEGATIVE, EXIT_OK};
use qsgain::fockcheck::{check_mu_identity, random_structured_hermitian, random_structured_p};
use qsgain::linalg::{c, identity, lyapunov, max_abs, spectral_abscissa, CMatrix, C64};
use qsgain::moments::{build_closed_loop, default_step, integrate_moments, steady_state_moments};
use qsgain::opa::{build_opa_model, closed_form_quantities, OpaParams};
use qsgain::smallgain::{compute_c_bound, compute_f, compute_mu, Verdict};
use qsgain::model::sigma_conjugate;
use qsgain::uncertainty::LinearUncertainty;
use qsgain::{certify, qsiqc_params, CertifyOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opa_params() -> impl Strategy<Value = OpaParams> {
    (
        -3.0f64..0.3,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.3f64..0.7,
        -1.3f64..0.7,
        0.0..std::f64::consts::TAU,
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(chi, ka, kb, am, bm, ap, bp)| OpaParams {
            chi: 10f64.powf(chi),
            kappa_a: 10f64.powf(ka),
            kappa_b: 10f64.powf(kb),
            abar: C64::from_polar(10f64.powf(am), ap),
            bbar: C64::from_polar(10f64.powf(bm), bp),
        })
}

fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| c(re, im))))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lyapunov_residual(a in (1usize..6).prop_flat_map(matrix), q in matrix(6)) {
        let n = a.nrows();
        let abscissa = spectral_abscissa(&a).unwrap();
        let a = a - identity(n) * c(abscissa + 0.5, 0.0);
        let q = q.view((0, 0), (n, n)).into_owned();
        let q = &q * q.adjoint();
        let x = lyapunov(&a, &q).unwrap();
        let res = &a * &x + &x * a.adjoint() + &q;
        prop_assert!(max_abs(&res) <= 1e-10 * max_abs(&x).max(1.0));
        prop_assert_eq!(&x, &x.adjoint());
    }

    #[test]
    fn verdict_monotone_in_gamma(p in opa_params(), lo in 0.01f64..10.0, ratio in 1.0f64..100.0) {
        let sys = build_opa_model(&p).unwrap();
        let opts = CertifyOptions::default();
        let at = |g: f64| certify(&sys.model, g, 0.0, 0.0, &opts).unwrap().verdict;
        if at(lo) == Verdict::Certified {
            prop_assert_eq!(at(lo * ratio), Verdict::Certified);
        }
    }

    #[test]
    fn certificate_structure(p in opa_params()) {
        let sys = build_opa_model(&p).unwrap();
        let q = qsiqc_params(&sys.uncertainty, 1e-10).unwrap();
        let report = certify(&sys.model, q.gamma, q.delta1, q.delta2, &CertifyOptions::default()).unwrap();
        if let Some(cert) = report.p {
            let f = compute_f(&sys.model).f;
            let scale = max_abs(&cert.p);
            prop_assert!(cert.hermitian_residual <= 1e-10 * scale);
            prop_assert!(cert.structure_residual <= 1e-10 * scale);
            prop_assert!(max_abs(&(sigma_conjugate(&cert.p) - &cert.p)) <= 1e-10 * scale);
            prop_assert!(cert.min_eig > 0.0);
            prop_assert!(cert.qmi_max_eig < 0.0);
            prop_assert!(cert.are_residual <= 1e-8 * max_abs(&f).max(1.0));
            let c_bound = report.c_bound.unwrap();
            prop_assert!(c_bound.is_finite() && c_bound > 0.0);
        }
    }

    #[test]
    fn hinf_is_dc_gain_for_opa(p in opa_params()) {
        let closed = closed_form_quantities(&p);
        let sys = build_opa_model(&p).unwrap();
        let report = certify(&sys.model, f64::INFINITY, 0.0, 0.0, &CertifyOptions::default()).unwrap();
        prop_assert_eq!(report.hurwitz.hurwitz, closed.hurwitz);
        if let (Some(h), Some(h0)) = (report.hinf, closed.h0_mag) {
            prop_assert!(rel(h, h0) <= 1e-8, "{} vs {}", h, h0);
        }
    }

    #[test]
    fn bilinear_uncertainty_closed_form(g_mag in 1e-3f64..10.0, phase in 0.0..std::f64::consts::TAU, kappa_b in 0.05f64..20.0) {
        let g = C64::from_polar(g_mag, phase);
        let u = LinearUncertainty::from_bilinear_coupling(g, kappa_b).unwrap();
        let q = qsiqc_params(&u, 1e-12).unwrap();
        prop_assert!(q.delta1 >= 0.0);
        prop_assert!(rel(q.delta1, g_mag * g_mag) <= 1e-10);
        prop_assert!(rel(q.gamma, kappa_b / (2.0 * g_mag * g_mag)) <= 1e-8);
        prop_assert_eq!(q.delta2, 0.0);
    }

    #[test]
    fn mu_matches_fock(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_structured_p(&mut rng, 1);
        let e = random_structured_hermitian(&mut rng, 1).rows(0, 1).into_owned();
        let check = check_mu_identity(&p, &e, 12).unwrap();
        prop_assert!(check.residual <= 1e-8 * check.scale.max(1.0));
        prop_assert!(check.off_scalar_residual <= 1e-8 * check.scale.max(1.0));
        prop_assert!((compute_mu(&p, &e).unwrap() - check.scalar_from_formula).norm() == 0.0);
        // larger truncations agree on the retained subblock
        let wider = check_mu_identity(&p, &e, 20).unwrap();
        prop_assert!((wider.scalar_from_fock - check.scalar_from_fock).norm() <= 1e-12 * check.scale.max(1.0));
    }

    #[test]
    fn c_bound_grows_with_delta(lambda in 0.0f64..10.0, mu_re in -5.0f64..5.0, d0 in 1e-3f64..1.0, d1 in 0.0f64..10.0, extra in 0.0f64..10.0) {
        let mu = c(mu_re, 0.0);
        let base = compute_c_bound(lambda, mu, d0, d1, 0.0).unwrap();
        let more = compute_c_bound(lambda, mu, d0, d1 + extra, 0.0).unwrap();
        prop_assert!(more >= base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn time_average_approaches_steady_state(p in opa_params()) {
        let sys = build_opa_model(&p).unwrap();
        let cl = build_closed_loop(&sys.model, &[sys.coupling]).unwrap();
        let abscissa = cl.spectral_abscissa().unwrap();
        prop_assume!(abscissa < -0.05);
        let steady = steady_state_moments(&cl).unwrap().ms_value;
        let dt = default_step(&cl).unwrap();
        let horizon = |t: f64| {
            let traj = integrate_moments(&cl, t, dt).unwrap();
            (traj.time_average() - steady).abs()
        };
        let t = 20.0 / abscissa.abs();
        let (short, long) = (horizon(t), horizon(4.0 * t));
        prop_assert!(long <= short + 1e-9 * steady.max(1.0));
        let final_x = integrate_moments(&cl, t, dt).unwrap().final_x;
        prop_assert!(max_abs(&(&final_x - final_x.adjoint())) <= 1e-9 * max_abs(&final_x));
    }

    #[test]
    fn exit_code_contract(p in opa_params()) {
        let fmt = |z: C64| format!("{},{}", z.re, z.im);
        let out = run_from_args([
            "qsgain".to_string(), "opa".into(),
            "--chi".into(), p.chi.to_string(),
            "--kappa-a".into(), p.kappa_a.to_string(),
            "--kappa-b".into(), p.kappa_b.to_string(),
            "--abar".into(), fmt(p.abar),
            "--bbar".into(), fmt(p.bbar),
        ]);
        let closed = closed_form_quantities(&p);
        let ka2 = p.kappa_a * p.kappa_a;
        prop_assume!((closed.lhs - ka2).abs() > 1e-6 * ka2);
        let expected = if closed.certified { EXIT_OK } else { EXIT_NEGATIVE };
        prop_assert_eq!(out.code, expected, "{}", out.stderr);
    }
}
