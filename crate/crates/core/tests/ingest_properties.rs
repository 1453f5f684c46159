use copair::ingest::*;
use copair::stats::covariance;
use proptest::prelude::*;

fn prices() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..200.0, 3..60)
}

fn price_series(sym: &str, ts: &[i64], p: &[f64]) -> PriceSeries {
    PriceSeries::new(sym, ts.iter().copied().zip(p.iter().copied()).collect()).unwrap()
}

proptest! {
    #[test]
    fn returns_round_trip(p in prices()) {
        let ts: Vec<i64> = (0..p.len() as i64).map(|i| 1_000 + 60 * i).collect();
        let r = compute_returns(&price_series("X", &ts, &p)).unwrap();
        let mut acc = p[0];
        for (i, &(t, x)) in r.observations().iter().enumerate() {
            acc *= x.exp();
            prop_assert_eq!(t, ts[i + 1]);
            prop_assert!(((acc - p[i + 1]) / p[i + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_spread_is_orthogonal_to_asset(a in prop::collection::vec(-0.1f64..0.1, 5..80), noise in prop::collection::vec(-0.05f64..0.05, 80), slope in -3.0f64..3.0) {
        let n = a.len();
        let ts: Vec<i64> = (0..n as i64).collect();
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| 0.001 + slope * x + e).collect();
        let base = ReturnSeries::new("B", ts.iter().copied().zip(b).collect()).unwrap();
        let asset = ReturnSeries::new("A", ts.iter().copied().zip(a.iter().copied()).collect()).unwrap();
        prop_assume!(copair::stats::variance(&a) > 1e-8);
        let beta = ols_beta(&base, &asset).unwrap();
        let s = build_spread(&base, &asset, beta).unwrap().values();
        let scale = (copair::stats::variance(&s) * copair::stats::variance(&a)).sqrt().max(1e-300);
        prop_assert!((covariance(&s, &a) / scale).abs() < 1e-10);
    }

    #[test]
    fn alignment_is_symmetric(ta in prop::collection::btree_set(0i64..200, 1..60), tb in prop::collection::btree_set(0i64..200, 1..60)) {
        let a = ReturnSeries::new("A", ta.iter().map(|&t| (t, t as f64 * 1e-3)).collect()).unwrap();
        let b = ReturnSeries::new("B", tb.iter().map(|&t| (t, -(t as f64) * 2e-3)).collect()).unwrap();
        let common = ta.intersection(&tb).count();
        match (build_spread(&a, &b, 0.7), build_spread(&b, &a, 0.7)) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x.timestamps(), y.timestamps());
                prop_assert_eq!(x.len(), common);
            }
            (Err(_), Err(_)) => prop_assert_eq!(common, 0),
            _ => prop_assert!(false, "asymmetric result"),
        }
    }
}
