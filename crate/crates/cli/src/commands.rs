use std::collections::BTreeMap;
use std::io::Write;

use copair::copula::{fit_joint_with, CopulaFamily, CopulaModel, JointConfig, JointFit};
use copair::exec::Exec;
use copair::ingest::{align, build_spread, compute_returns, load_all_prices, ols_beta, ReturnSeries, SpreadSeries};
use copair::margins::{MarginalFamily, MarginalModel, MarginalParams};
use copair::pairs::{rank_pairs, RankOptions};
use copair::pitfall::{joint_lower_tail_count, pitfall_demo, PitfallConfig};
use copair::signal::{signal_series_with, verdict_counts, Verdict};
use copair::simulate::SimSpec;
use copair::Error;
use serde::Serialize;

use crate::{CliError, Command, PairArgs, RunConfig, SimArgs};

pub fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::SelectPairs(c) => cmd_select_pairs(&c.resolve()?, out, err),
        Command::Fit(a) => {
            let (cfg, s1, s2) = pair_args(a)?;
            cmd_fit(&cfg, s1, s2, out, err)
        }
        Command::Signals(a) => {
            let (cfg, s1, s2) = pair_args(a)?;
            cmd_signals(&cfg, s1, s2, out, err)
        }
        Command::Simulate(a) => {
            let cfg = a.common.resolve()?;
            cmd_simulate(&cfg, &sim_spec(&cfg, a)?, out, err)
        }
        Command::DemoPitfall(c) => cmd_demo_pitfall(&c.resolve()?, out, err),
    }
}

fn pair_args(a: &PairArgs) -> Result<(RunConfig, &str, &str), CliError> {
    let cfg = a.common.resolve()?;
    let (s1, s2) = (a.symbols[0].as_str(), a.symbols[1].as_str());
    if s1 == s2 {
        return Err(CliError::config("the two symbols must differ"));
    }
    if Some(s1) == cfg.base_symbol.as_deref() || Some(s2) == cfg.base_symbol.as_deref() {
        return Err(CliError::config("a trading symbol cannot be the base symbol"));
    }
    Ok((cfg, s1, s2))
}

fn load_returns(cfg: &RunConfig) -> Result<BTreeMap<String, ReturnSeries>, CliError> {
    let path = cfg.data_path()?;
    let prices = load_all_prices(path).map_err(|e| {
        let mut e = CliError::from(e);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })?;
    let mut out = BTreeMap::new();
    for (sym, p) in prices {
        out.insert(sym, compute_returns(&p)?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: crate::EXIT_NUMERIC,
        message: format!("cannot serialize report: {e}"),
    })?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn cmd_select_pairs(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let base = cfg.base_symbol()?;
    let returns = load_returns(cfg)?;
    let opts = RankOptions {
        top_k: cfg.top_k,
        eg_lags: cfg.eg_lags,
        critical_value: cfg.eg_critical_value,
        coint_on: cfg.coint_on,
        exec: Exec::default(),
    };
    let ranked = rank_pairs(&returns, base, &opts)?;
    write_json(out, &ranked)?;
    writeln!(
        err,
        "{} pairs ranked; cointegration tested on the top {}",
        ranked.len(),
        cfg.top_k.min(ranked.len())
    )?;
    for p in ranked.iter().take(cfg.top_k) {
        let eg = p.eg_statistic.map_or("n/a".to_string(), |s| format!("{s:.3}"));
        writeln!(
            err,
            "  {}-{}: corr {:.4}, EG {eg}{}",
            p.symbol_a,
            p.symbol_b,
            p.correlation,
            if p.cointegrated { " (cointegrated)" } else { "" }
        )?;
    }
    Ok(())
}

/// Spreads of both legs against the base, on the configured series kind.
pub struct PairSpreads {
    pub spread_1: SpreadSeries,
    pub spread_2: SpreadSeries,
}

impl PairSpreads {
    pub fn build(cfg: &RunConfig, sym1: &str, sym2: &str) -> Result<Self, CliError> {
        let base_sym = cfg.base_symbol()?;
        let returns = load_returns(cfg)?;
        let get = |s: &str| {
            returns
                .get(s)
                .map(|r| cfg.spread_on.apply(r))
                .ok_or_else(|| Error::MissingSymbol(s.to_string()))
        };
        let base = get(base_sym)?;
        let leg = |s: &str| -> Result<SpreadSeries, CliError> {
            let asset = get(s)?;
            let beta = ols_beta(&base, &asset)?;
            Ok(build_spread(&base, &asset, beta)?)
        };
        Ok(Self {
            spread_1: leg(sym1)?,
            spread_2: leg(sym2)?,
        })
    }

    fn aligned(&self) -> (Vec<f64>, Vec<f64>) {
        align(self.spread_1.observations(), self.spread_2.observations())
            .into_iter()
            .map(|(_, a, b)| (a, b))
            .unzip()
    }

    pub fn fit(&self, cfg: &RunConfig) -> Result<JointFit, CliError> {
        let (x, y) = self.aligned();
        let joint = JointConfig {
            marginal_families: cfg.marginal_families.clone(),
            copula_families: cfg.copula_families.clone(),
            method: cfg.fit_method,
            pit: cfg.pit,
            exec: Exec::default(),
        };
        Ok(fit_joint_with(&x, &y, &joint)?)
    }
}

#[derive(Serialize)]
struct LegReport<'a> {
    symbol: &'a str,
    beta: f64,
    marginal: &'a MarginalModel,
}

#[derive(Serialize)]
struct FitReport<'a> {
    base_symbol: &'a str,
    spread_on: String,
    fit_method: String,
    pit: String,
    n: usize,
    legs: [LegReport<'a>; 2],
    copula: &'a CopulaModel,
    total_loglik: f64,
    copula_candidates: &'a [CopulaModel],
}

pub fn cmd_fit(
    cfg: &RunConfig,
    sym1: &str,
    sym2: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let spreads = PairSpreads::build(cfg, sym1, sym2)?;
    let fit = spreads.fit(cfg)?;
    let report = FitReport {
        base_symbol: cfg.base_symbol()?,
        spread_on: cfg.spread_on.to_string(),
        fit_method: fit.method.to_string(),
        pit: fit.pit.to_string(),
        n: fit.copula.n,
        legs: [
            LegReport {
                symbol: sym1,
                beta: spreads.spread_1.beta,
                marginal: &fit.marginal1,
            },
            LegReport {
                symbol: sym2,
                beta: spreads.spread_2.beta,
                marginal: &fit.marginal2,
            },
        ],
        copula: &fit.copula,
        total_loglik: fit.total_loglik,
        copula_candidates: &fit.candidates,
    };
    write_json(out, &report)?;
    writeln!(err, "{} observations, method {}", fit.copula.n, fit.method)?;
    for (sym, beta, m) in [
        (sym1, spreads.spread_1.beta, &fit.marginal1),
        (sym2, spreads.spread_2.beta, &fit.marginal2),
    ] {
        writeln!(err, "  {sym}: beta {beta:.6}, {} margin, AIC {:.3}", m.family(), m.aic)?;
    }
    let theta = fit.copula.theta.map_or("-".to_string(), |t| format!("{t:.6}"));
    writeln!(
        err,
        "  copula {} theta {theta}, loglik {:.3}",
        fit.copula.family, fit.copula.loglik
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SignalLine {
    ts: i64,
    u: f64,
    v: f64,
    h12: f64,
    h21: f64,
    verdict: Verdict,
}

pub fn cmd_signals(
    cfg: &RunConfig,
    sym1: &str,
    sym2: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let spreads = PairSpreads::build(cfg, sym1, sym2)?;
    let fit = spreads.fit(cfg)?;
    let signals = signal_series_with(&spreads.spread_1, &spreads.spread_2, &fit, cfg.epsilon, Exec::default())?;
    for s in &signals {
        let line = SignalLine {
            ts: s.timestamp,
            u: s.u,
            v: s.v,
            h12: s.h12,
            h21: s.h21,
            verdict: s.verdict,
        };
        let text = serde_json::to_string(&line).map_err(|e| CliError {
            code: crate::EXIT_NUMERIC,
            message: e.to_string(),
        })?;
        writeln!(out, "{text}")?;
    }
    let counts: Vec<String> = verdict_counts(&signals)
        .iter()
        .map(|(v, n)| format!("{v}={n}"))
        .collect();
    writeln!(
        err,
        "{} signals ({} copula, epsilon {}): {}",
        signals.len(),
        fit.copula.family,
        cfg.epsilon,
        counts.join(" ")
    )?;
    Ok(())
}

/// Parses `FAMILY:P1,P2[,P3]`.
pub fn parse_margin(spec: &str) -> Result<MarginalParams, CliError> {
    let bad = || CliError::config(format!("bad margin spec `{spec}` (expected e.g. gaussian:0,0.01)"));
    let (family, params) = spec.split_once(':').ok_or_else(bad)?;
    let family: MarginalFamily = family.parse().map_err(|e: Error| CliError::config(e.to_string()))?;
    let p: Vec<f64> = params
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if p.len() != family.n_params() {
        return Err(bad());
    }
    let params = match family {
        MarginalFamily::Gaussian => MarginalParams::gaussian(p[0], p[1]),
        MarginalFamily::StudentT => MarginalParams::student_t(p[0], p[1], p[2]),
        MarginalFamily::Cauchy => MarginalParams::cauchy(p[0], p[1]),
    };
    params.map_err(|e| CliError::config(e.to_string()))
}

fn num<T: std::str::FromStr>(name: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::config(format!("--{name}: cannot parse `{v}`")))
}

pub fn sim_spec(cfg: &RunConfig, a: &SimArgs) -> Result<SimSpec, CliError> {
    let copula: CopulaFamily = a.copula.parse().map_err(|e: Error| CliError::config(e.to_string()))?;
    let (s1, s2) = a
        .assets
        .split_once(',')
        .ok_or_else(|| CliError::config("--assets expects two comma-separated names"))?;
    let defaults = SimSpec::default();
    Ok(SimSpec {
        n: num("n", &a.n)?,
        copula,
        theta: num("theta", &a.theta)?,
        marginal1: parse_margin(&a.margin1)?,
        marginal2: parse_margin(&a.margin2)?,
        beta1: num("beta1", &a.beta1)?,
        beta2: num("beta2", &a.beta2)?,
        noise_sd: num("noise-sd", &a.noise_sd)?,
        seed: cfg.seed,
        base_symbol: cfg.base_symbol.clone().unwrap_or(defaults.base_symbol),
        symbol_1: s1.trim().to_string(),
        symbol_2: s2.trim().to_string(),
        start: num("start", &a.start)?,
        step: num("step", &a.step)?,
        initial_price: defaults.initial_price,
    })
}

pub fn cmd_simulate(
    _cfg: &RunConfig,
    spec: &SimSpec,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    spec.validate().map_err(|e| CliError::config(e.to_string()))?;
    let data = spec.generate()?;
    out.write_all(data.to_csv().as_bytes())?;
    writeln!(
        err,
        "simulated {} returns: {} copula theta {}, symbols {},{},{}, seed {}",
        spec.n, spec.copula, spec.theta, spec.base_symbol, spec.symbol_1, spec.symbol_2, spec.seed
    )?;
    Ok(())
}

pub fn cmd_demo_pitfall(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let pc = PitfallConfig {
        seed: cfg.seed,
        ..Default::default()
    };
    let demo = pitfall_demo(&pc).map_err(|e| CliError {
        code: crate::EXIT_NUMERIC,
        message: format!("correlation calibration failed: {e}"),
    })?;
    out.write_all(demo.to_csv().as_bytes())?;
    for s in [&demo.clayton, &demo.gumbel] {
        writeln!(
            err,
            "{}: theta {:.4}, correlation {:.4}, both in lowest decile: {}",
            s.family,
            s.theta,
            s.correlation,
            joint_lower_tail_count(&s.points, 0.1)
        )?;
    }
    Ok(())
}
