use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use copair::margins::MarginalParams;
use copair::simulate::SimSpec;
use serde_json::Value;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("copair").chain(args.iter().copied());
    let code = copair_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn simulated(dir: &Path, args: &[&str]) -> PathBuf {
    let mut all = vec!["simulate"];
    all.extend_from_slice(args);
    let r = run(&all);
    assert_eq!(r.code, 0, "{}", r.err);
    write(dir, "sim.csv", &r.out)
}

/// Base plus three assets; A and B share a factor, C is independent.
fn factor_csv(dir: &Path) -> PathBuf {
    let g = MarginalParams::gaussian(0.0, 0.01).unwrap();
    let (f, ea, eb, ec, eb0) = (
        g.sample(300, 1),
        g.sample(300, 2),
        g.sample(300, 3),
        g.sample(300, 4),
        g.sample(300, 5),
    );
    let mut body = String::from("timestamp,symbol,close\n");
    let mut lp = [0.0f64; 4];
    for t in 0..300 {
        let r = [eb0[t], f[t] + 0.5 * ea[t], f[t] + 0.5 * eb[t], ec[t]];
        for (i, sym) in ["BASE", "A", "B", "C"].iter().enumerate() {
            lp[i] += r[i];
            writeln!(body, "{},{sym},{}", 1_000 + 60 * t, 100.0 * lp[i].exp()).unwrap();
        }
    }
    write(dir, "factor.csv", &body)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["bogus"]).code, 2);
    assert_eq!(run(&["fit", "A1"]).code, 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), &["--n", "100"]);
    let d = data.to_str().unwrap();
    assert_eq!(run(&["fit", "--base", "BASE", "A1", "A2"]).code, 2, "missing data path");
    assert_eq!(run(&["fit", "--data", d, "A1", "A2"]).code, 2, "missing base");
    assert_eq!(
        run(&["fit", "--data", d, "--base", "BASE", "--epsilon", "0.5", "A1", "A2"]).code,
        2
    );
    assert_eq!(
        run(&[
            "fit",
            "--data",
            d,
            "--base",
            "BASE",
            "--method",
            "full-mle",
            "--pit",
            "empirical",
            "A1",
            "A2"
        ])
        .code,
        2
    );
    assert_eq!(
        run(&["fit", "--data", d, "--base", "BASE", "--copulas", "frank", "A1", "A2"]).code,
        2
    );
    assert_eq!(run(&["fit", "--data", d, "--base", "BASE", "A1", "A1"]).code, 2);
    assert_eq!(run(&["fit", "--config", "/nonexistent/cfg", "A1", "A2"]).code, 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), &["--n", "100"]);
    let d = data.to_str().unwrap();
    let r = run(&["fit", "--data", d, "--base", "BASE", "A1", "ZZZ"]);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("ZZZ"));
    assert_eq!(
        run(&["fit", "--data", "/nonexistent.csv", "--base", "BASE", "A1", "A2"]).code,
        3
    );
    let bad = write(dir.path(), "bad.csv", "timestamp,symbol,close\n1,A,1\n2,A,-5\n");
    assert_eq!(
        run(&["select-pairs", "--data", bad.to_str().unwrap(), "--base", "A"]).code,
        3
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), &["--n", "200", "--copula", "clayton", "--theta", "3"]);
    let cfg = write(
        dir.path(),
        "run.cfg",
        &format!(
            "data_path = {}\nbase_symbol = BASE\ncopula_families = independent\n",
            data.display()
        ),
    );
    let c = cfg.to_str().unwrap();
    let r = run(&["fit", "--config", c, "A1", "A2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["copula"]["family"], "independent");
    assert_eq!(v["copula"]["loglik"], 0.0);

    let r = run(&["fit", "--config", c, "--copulas", "clayton", "A1", "A2"]);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["copula"]["family"], "clayton");
}

#[test]
fn config_file_round_trips() {
    let text = "seed=3\n# note\nbase_symbol =  BTCUSDT\ncopula_families = gumbel, clayton\n";
    let cfg = copair_cli::RunConfig::parse(text).unwrap();
    let normalized = cfg.to_file_string();
    assert_eq!(
        copair_cli::RunConfig::parse(&normalized).unwrap().to_file_string(),
        normalized
    );
    assert!(normalized.contains("copula_families = gumbel,clayton\n"));
}

#[test]
fn select_pairs_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let f = factor_csv(dir.path());
    let fs = f.to_str().unwrap();
    let a = run(&["select-pairs", "--data", fs, "--base", "BASE"]);
    assert_eq!(a.code, 0, "{}", a.err);
    let v: Value = serde_json::from_str(&a.out).unwrap();
    assert_eq!(
        (v[0]["symbol_a"].as_str(), v[0]["symbol_b"].as_str()),
        (Some("A"), Some("B"))
    );
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(a.out, run(&["select-pairs", "--data", fs, "--base", "BASE"]).out);

    // identical pair
    let twin = "timestamp,symbol,close\n".to_string()
        + &(0..40)
            .flat_map(|t| {
                let p = 100.0 + ((t * 7919) % 13) as f64;
                let q = 50.0 + ((t * 104_729) % 11) as f64;
                [
                    format!("{t},BASE,{q}\n"),
                    format!("{t},X,{p}\n"),
                    format!("{t},Y,{p}\n"),
                    format!("{t},Z,{}\n", q + (t % 3) as f64),
                ]
            })
            .collect::<String>();
    let tw = write(dir.path(), "twin.csv", &twin);
    let r = run(&["select-pairs", "--data", tw.to_str().unwrap(), "--base", "BASE"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(
        (v[0]["symbol_a"].as_str(), v[0]["symbol_b"].as_str()),
        (Some("X"), Some("Y"))
    );
    assert!((v[0]["correlation"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let one = write(
        dir.path(),
        "one.csv",
        "timestamp,symbol,close\n1,BASE,1\n2,BASE,2\n3,BASE,3\n1,A,1\n2,A,2\n3,A,2\n",
    );
    let r = run(&["select-pairs", "--data", one.to_str().unwrap(), "--base", "BASE"]);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("need at least 2 non-base symbols"), "{}", r.err);
}

#[test]
fn fit_recovers_clayton() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(
        dir.path(),
        &["--n", "3000", "--copula", "clayton", "--theta", "5", "--seed", "3"],
    );
    let r = run(&["fit", "--data", data.to_str().unwrap(), "--base", "BASE", "A1", "A2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["copula"]["family"], "clayton");
    let theta = v["copula"]["theta"].as_f64().unwrap();
    assert!((theta - 5.0).abs() < 0.5, "{theta}");
    assert!((v["legs"][0]["beta"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["legs"][1]["beta"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(v["legs"][0]["marginal"]["aic"].is_number());
    assert_eq!(v["fit_method"], "ifm");
}

#[test]
fn simulate_round_trip_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["simulate", "--n", "1000", "--seed", "5"]);
    let b = run(&["simulate", "--n", "1000", "--seed", "5"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.out, b.out);
    assert_eq!(run(&["simulate", "--n", "0"]).code, 2);
    assert_eq!(run(&["simulate", "--copula", "gumbel", "--theta", "0.2"]).code, 2);
    assert_eq!(run(&["simulate", "--margin1", "gaussian:0"]).code, 2);

    let data = write(dir.path(), "ind.csv", &a.out);
    let r = run(&["fit", "--data", data.to_str().unwrap(), "--base", "BASE", "A1", "A2"]);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    match v["copula"]["family"].as_str().unwrap() {
        "independent" => {}
        "efgm" => assert!(v["copula"]["theta"].as_f64().unwrap().abs() < 0.15),
        "clayton" => assert!(v["copula"]["theta"].as_f64().unwrap() < 0.15),
        "gumbel" => assert!(v["copula"]["theta"].as_f64().unwrap() < 1.1),
        other => panic!("{other}"),
    }
}

fn parse_lines(out: &str) -> Vec<Value> {
    out.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn signals_threshold_construction() {
    let dir = tempfile::tempdir().unwrap();
    let g = MarginalParams::gaussian(0.0, 0.01).unwrap();
    let (mut s1, mut s2) = (g.sample(400, 21), g.sample(400, 22));
    let k = 200;
    s1[k] = g.quantile(0.001).unwrap();
    s2[k] = g.quantile(0.999).unwrap();
    let spec = SimSpec::default();
    let data = spec.dataset_from_spreads(&s1, &s2).unwrap();
    let path = write(dir.path(), "eng.csv", &data.to_csv());
    let p = path.to_str().unwrap();
    let args = [
        "signals",
        "--data",
        p,
        "--base",
        "BASE",
        "--copulas",
        "independent",
        "--epsilon",
        "0.4999",
        "A1",
        "A2",
    ];
    let r = run(&args);
    assert_eq!(r.code, 0, "{}", r.err);
    let lines = parse_lines(&r.out);
    assert_eq!(lines.len(), 400);
    let row = &lines[k];
    assert_eq!(row["ts"].as_i64().unwrap(), data.timestamps[k + 1]);
    assert!(row["u"].as_f64().unwrap() < 0.01 && row["v"].as_f64().unwrap() > 0.99);
    assert_eq!(row["verdict"], "asset1_underpriced");
    assert_eq!(r.out, run(&args).out);
}

#[test]
fn signal_counts_match_recount() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(
        dir.path(),
        &["--n", "1500", "--copula", "gumbel", "--theta", "2.5", "--seed", "9"],
    );
    let r = run(&[
        "signals",
        "--data",
        data.to_str().unwrap(),
        "--base",
        "BASE",
        "--epsilon",
        "0.1",
        "A1",
        "A2",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let (mut one, mut two, mut none) = (0, 0, 0);
    for row in parse_lines(&r.out) {
        let (h12, h21) = (row["h12"].as_f64().unwrap(), row["h21"].as_f64().unwrap());
        let expected = if h12 < 0.1 && h21 > 0.9 {
            one += 1;
            "asset1_underpriced"
        } else if h12 > 0.9 && h21 < 0.1 {
            two += 1;
            "asset2_underpriced"
        } else {
            none += 1;
            "no_signal"
        };
        assert_eq!(row["verdict"], expected);
        for key in ["ts", "u", "v", "h12", "h21", "verdict"] {
            assert!(row.get(key).is_some());
        }
    }
    assert!(
        r.err.contains(&format!(
            "asset1_underpriced={one} asset2_underpriced={two} no_signal={none}"
        )),
        "{}",
        r.err
    );
}

#[test]
fn cumulative_spreads_and_empirical_pit() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), &["--n", "300", "--copula", "clayton", "--theta", "2"]);
    let d = data.to_str().unwrap();
    let r = run(&[
        "fit",
        "--data",
        d,
        "--base",
        "BASE",
        "--spread-on",
        "cumulative",
        "A1",
        "A2",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["spread_on"], "cumulative");
    let r = run(&[
        "signals",
        "--data",
        d,
        "--base",
        "BASE",
        "--pit",
        "empirical",
        "A1",
        "A2",
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(parse_lines(&r.out).len(), 300);
}

#[test]
fn full_mle_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), &["--n", "400", "--copula", "gumbel", "--theta", "1.8"]);
    let d = data.to_str().unwrap();
    let ifm: Value = serde_json::from_str(&run(&["fit", "--data", d, "--base", "BASE", "A1", "A2"]).out).unwrap();
    let r = run(&["fit", "--data", d, "--base", "BASE", "--method", "full-mle", "A1", "A2"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let full: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(full["fit_method"], "full_mle");
    assert!(full["total_loglik"].as_f64().unwrap() >= ifm["total_loglik"].as_f64().unwrap() - 1e-6);
}

#[test]
fn demo_pitfall_csv() {
    let r = run(&["demo-pitfall", "--seed", "3"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.lines().next(), Some("model,x,y"));
    assert_eq!(r.out.lines().count(), 2001);
    assert_eq!(r.out, run(&["demo-pitfall", "--seed", "3"]).out);
}
