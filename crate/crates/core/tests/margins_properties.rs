use copair::margins::*;
use copair::stats::{ks_pvalue, ks_statistic};
use copair::Exec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn any_params() -> impl Strategy<Value = MarginalParams> {
    prop_oneof![
        (-5.0f64..5.0, 0.05f64..5.0).prop_map(|(m, s)| MarginalParams::gaussian(m, s).unwrap()),
        (0.5f64..60.0, -5.0f64..5.0, 0.05f64..5.0).prop_map(|(n, l, s)| MarginalParams::student_t(n, l, s).unwrap()),
        (-5.0f64..5.0, 0.05f64..5.0).prop_map(|(x, g)| MarginalParams::cauchy(x, g).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_inverts_quantile(p in any_params()) {
        for i in 1..=99 {
            let q = i as f64 / 100.0;
            let x = p.quantile(q).unwrap();
            prop_assert!((p.cdf(x) - q).abs() < 1e-9, "{:?} at {}", p, q);
        }
    }

    #[test]
    fn pdf_is_cdf_derivative(p in any_params()) {
        let h = 1e-6;
        let (loc, scale) = (p.location(), p.scale());
        for i in -20..=20 {
            let x = loc + scale * i as f64 / 5.0;
            let fd = (p.cdf(x + h) - p.cdf(x - h)) / (2.0 * h);
            prop_assert!((p.pdf(x) - fd).abs() < 1e-5, "{:?} at {}", p, x);
        }
    }

    #[test]
    fn cdf_monotone_with_limits(p in any_params()) {
        let mut prev = 0.0;
        for i in -200..=200 {
            let c = p.cdf(p.location() + p.scale() * i as f64 / 10.0);
            prop_assert!(c >= prev);
            prev = c;
        }
        prop_assert!(p.cdf(-1e300) < 1e-12);
        prop_assert!(p.cdf(1e300) > 1.0 - 1e-12);
    }
}

fn perturb(p: MarginalParams, rng: &mut ChaCha8Rng) -> MarginalParams {
    let mut f = || 1.0 + 0.01 * if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random::<f64>().max(0.1);
    match p {
        MarginalParams::Gaussian { mu, sigma } => {
            MarginalParams::gaussian(mu + 0.01 * sigma * (f() - 1.0) * 100.0, sigma * f()).unwrap()
        }
        MarginalParams::StudentT { nu, loc, scale } => {
            MarginalParams::student_t(nu * f(), loc + 0.01 * scale * (f() - 1.0) * 100.0, scale * f()).unwrap()
        }
        MarginalParams::Cauchy { x0, gamma } => {
            MarginalParams::cauchy(x0 + 0.01 * gamma * (f() - 1.0) * 100.0, gamma * f()).unwrap()
        }
    }
}

#[test]
fn fits_are_local_maxima() {
    let data = [
        MarginalParams::gaussian(0.3, 2.0).unwrap().sample(2_000, 1),
        MarginalParams::student_t(4.0, -1.0, 0.5).unwrap().sample(2_000, 2),
        MarginalParams::cauchy(1.0, 0.2).unwrap().sample(2_000, 3),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for xs in &data {
        for family in MarginalFamily::ALL {
            let fit = fit_mle(xs, family).unwrap();
            for _ in 0..100 {
                let q = perturb(fit.params, &mut rng);
                assert!(
                    fit.loglik >= q.loglik(xs),
                    "{family}: {:?} beaten by {:?}",
                    fit.params,
                    q
                );
            }
        }
    }
}

#[test]
fn pit_of_own_samples_is_uniform() {
    for p in [
        MarginalParams::gaussian(1.0, 3.0).unwrap(),
        MarginalParams::student_t(3.0, 0.0, 1.0).unwrap(),
        MarginalParams::cauchy(-2.0, 0.5).unwrap(),
    ] {
        let xs = p.sample(10_000, 17);
        let d = ks_statistic(&xs, |x| p.cdf(x));
        assert!(ks_pvalue(d, xs.len()) > 0.01, "{p:?}");
    }
}

#[test]
fn student_t_nests_gaussian() {
    let t = MarginalParams::student_t(100.0, 0.5, 2.0).unwrap();
    let g = MarginalParams::gaussian(0.5, 2.0).unwrap();
    for i in -40..=40 {
        let x = i as f64 / 10.0;
        assert!((t.pdf(x) - g.pdf(x)).abs() < 1e-3);
    }
}

#[test]
fn selection_on_gaussian_and_cauchy_data() {
    let g = MarginalParams::gaussian(0.0, 1.0).unwrap().sample(10_000, 5);
    assert_eq!(
        select_marginal(&g, &MarginalFamily::ALL).unwrap().family(),
        MarginalFamily::Gaussian
    );

    let c = MarginalParams::cauchy(0.0, 1.0).unwrap().sample(10_000, 6);
    let m = select_marginal(&c, &MarginalFamily::ALL).unwrap();
    match m.params {
        MarginalParams::Cauchy { .. } => {}
        MarginalParams::StudentT { nu, .. } => assert!(nu < 2.0),
        other => panic!("selected {other:?}"),
    }
}

#[test]
fn selection_is_execution_independent() {
    let xs = MarginalParams::student_t(5.0, 0.0, 1.0).unwrap().sample(3_000, 8);
    let a = select_marginal_with(&xs, &MarginalFamily::ALL, Exec::Sequential).unwrap();
    let b = select_marginal_with(&xs, &MarginalFamily::ALL, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}
