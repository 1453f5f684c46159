use copair::copula::{sample_copula, Copula, CopulaFamily};
use copair::margins::MarginalParams;
use copair::pairs::*;
use copair::signal::*;
use proptest::prelude::*;

fn sample_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

proptest! {
    #[test]
    fn pearson_symmetric_and_affine_invariant((x, y) in sample_pair(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let r = pearson_correlation(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((r - pearson_correlation(&y, &x).unwrap()).abs() < 1e-12);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((r - pearson_correlation(&ax, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pearson_of_affine_image_is_sign((x, _) in sample_pair(), a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0], b in -5.0f64..5.0) {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson_correlation(&x, &y).unwrap() - a.signum()).abs() < 1e-12);
    }

    #[test]
    fn divergence_antisymmetric((x, y) in sample_pair()) {
        let d1 = divergence_metric(&x, &y, 1.0, 0.0).unwrap();
        let d2 = divergence_metric(&y, &x, 1.0, 0.0).unwrap();
        for (p, q) in d1.iter().zip(&d2) {
            prop_assert_eq!(*p, -*q);
        }
    }

    #[test]
    fn eg_statistic_scale_free(seed in 0u64..1_000, c in 0.01f64..100.0) {
        let steps = MarginalParams::gaussian(0.0, 1.0).unwrap().sample(200, seed);
        let x: Vec<f64> = steps.iter().scan(0.0, |s, v| { *s += v; Some(*s) }).collect();
        let e = MarginalParams::gaussian(0.0, 1.0).unwrap().sample(200, seed + 10_000);
        let y: Vec<f64> = x.iter().zip(&e).map(|(a, b)| 0.5 * a + b).collect();
        let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
        let s1 = engle_granger(&x, &y, 1, EG_CRITICAL_5PCT).unwrap().statistic;
        let s2 = engle_granger(&x, &cy, 1, EG_CRITICAL_5PCT).unwrap().statistic;
        prop_assert!((s1 - s2).abs() < 1e-8 * s1.abs().max(1.0));
    }

    #[test]
    fn verdicts_match_rule(h12 in 0.0f64..=1.0, h21 in 0.0f64..=1.0, eps in 1e-6f64..0.4999) {
        let v = evaluate_signal(h12, h21, eps).unwrap();
        let one = h12 < eps && h21 > 1.0 - eps;
        let two = h12 > 1.0 - eps && h21 < eps;
        prop_assert!(!(one && two));
        prop_assert_eq!(v == Verdict::Asset1Underpriced, one);
        prop_assert_eq!(v == Verdict::Asset2Underpriced, two);
    }

    #[test]
    fn lowering_h12_keeps_asset1(h12 in 0.0f64..0.05, drop in 0.0f64..1.0, h21 in 0.951f64..=1.0) {
        let eps = 0.05;
        prop_assert_eq!(evaluate_signal(h12, h21, eps).unwrap(), Verdict::Asset1Underpriced);
        prop_assert_eq!(evaluate_signal(h12 * drop, h21, eps).unwrap(), Verdict::Asset1Underpriced);
    }
}

fn asset1_rate(family: CopulaFamily, theta: f64, eps: f64) -> f64 {
    let c = Copula::new(family, theta).unwrap();
    let uv = sample_copula(family, theta, 10_000, 77).unwrap();
    let hits = uv
        .iter()
        .filter(|&&(u, v)| {
            let (h12, h21) = (c.h_u_given_v(u, v).unwrap(), c.h_v_given_u(u, v).unwrap());
            evaluate_signal(h12, h21, eps).unwrap() == Verdict::Asset1Underpriced
        })
        .count();
    hits as f64 / uv.len() as f64
}

// Under independence h12 = u and h21 = v, so the asset-1 rate is eps^2.
// Positive dependence couples the two conditions and pushes the rate up
// towards the eps ceiling; negative dependence pushes it below eps^2.
#[test]
fn null_signal_rate_is_bounded() {
    let eps = 0.05;
    let n = 10_000.0f64;
    let band = 3.0 * (eps * (1.0 - eps) / n).sqrt();
    let ind_band = 3.0 * (eps * eps * (1.0 - eps * eps) / n).sqrt();
    let independent = asset1_rate(CopulaFamily::Independent, 0.0, eps);
    assert!((independent - eps * eps).abs() <= ind_band, "{independent}");
    for (f, t) in [
        (CopulaFamily::Clayton, 2.0),
        (CopulaFamily::Clayton, 10.0),
        (CopulaFamily::Gumbel, 2.0),
        (CopulaFamily::Efgm, 0.5),
    ] {
        let r = asset1_rate(f, t, eps);
        assert!(r <= eps + band, "{f}: {r}");
        assert!(r >= independent, "{f}: {r} below independence rate {independent}");
    }
    let negative = asset1_rate(CopulaFamily::Efgm, -0.5, eps);
    assert!(negative <= independent, "{negative}");
}

#[test]
fn vanishing_epsilon_gives_no_signals() {
    let c = Copula::new(CopulaFamily::Clayton, 5.0).unwrap();
    for (u, v) in sample_copula(CopulaFamily::Clayton, 5.0, 2_000, 4).unwrap() {
        let (h12, h21) = (c.h_u_given_v(u, v).unwrap(), c.h_v_given_u(u, v).unwrap());
        if h12 > 1e-9 && h21 < 1.0 - 1e-9 && h21 > 1e-9 && h12 < 1.0 - 1e-9 {
            assert_eq!(evaluate_signal(h12, h21, 1e-9).unwrap(), Verdict::NoSignal);
        }
    }
}
