//! Pair screening: correlation, divergence metric and Engle–Granger
//! cointegration.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::{align, ReturnSeries, SeriesKind};
use crate::stats;

/// Large-sample 5% critical value of the two-variable Engle–Granger test.
pub const EG_CRITICAL_5PCT: f64 = -3.34;
/// Minimum series length is this plus the ADF lag order.
pub const EG_MIN_LEN: usize = 30;

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: x.len(),
        });
    }
    if stats::variance(x) <= 0.0 || stats::variance(y) <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(stats::pearson_unchecked(x, y))
}

/// `D_t = beta (r_i - r_f) - (r_j - r_f)`.
pub fn divergence_metric(r_i: &[f64], r_j: &[f64], beta: f64, r_f: f64) -> Result<Vec<f64>> {
    if r_i.len() != r_j.len() {
        return Err(Error::LengthMismatch {
            left: r_i.len(),
            right: r_j.len(),
        });
    }
    Ok(r_i.iter().zip(r_j).map(|(a, b)| beta * (a - r_f) - (b - r_f)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngleGranger {
    /// ADF t-statistic of the lagged residual level.
    pub statistic: f64,
    pub cointegrated: bool,
    /// Cointegrating regression `y = intercept + slope x`.
    pub intercept: f64,
    pub slope: f64,
}

/// Two-step Engle–Granger test: OLS residuals of `y` on `x`, then an ADF
/// regression without deterministic terms and `lags` lagged differences.
pub fn engle_granger(x: &[f64], y: &[f64], lags: usize, critical_value: f64) -> Result<EngleGranger> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let needed = EG_MIN_LEN + lags;
    if x.len() < needed {
        return Err(Error::TooShort { needed, got: x.len() });
    }
    let rows: Vec<Vec<f64>> = x.iter().map(|&a| vec![1.0, a]).collect();
    let (coef, _, _) = stats::least_squares(&rows, y).ok_or(Error::DegenerateRegressor)?;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - coef[0] - coef[1] * a).collect();

    let diff: Vec<f64> = resid.windows(2).map(|w| w[1] - w[0]).collect();
    // diff[t - 1] = e_t - e_{t-1}
    let mut rows = Vec::with_capacity(resid.len());
    let mut target = Vec::with_capacity(resid.len());
    for t in (lags + 1)..resid.len() {
        let mut row = Vec::with_capacity(lags + 1);
        row.push(resid[t - 1]);
        row.extend((1..=lags).map(|j| diff[t - 1 - j]));
        rows.push(row);
        target.push(diff[t - 1]);
    }
    let (gamma, se, _) = stats::least_squares(&rows, &target).ok_or(Error::DegenerateRegressor)?;
    let statistic = gamma[0] / se[0];
    if !statistic.is_finite() {
        return Err(Error::DegenerateRegressor);
    }
    Ok(EngleGranger {
        statistic,
        cointegrated: statistic < critical_value,
        intercept: coef[0],
        slope: coef[1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub symbol_a: String,
    pub symbol_b: String,
    pub correlation: f64,
    /// `None` outside the top-K or when the cointegrating regression is
    /// degenerate (e.g. identical series).
    pub eg_statistic: Option<f64>,
    pub cointegrated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    pub top_k: usize,
    pub eg_lags: usize,
    pub critical_value: f64,
    pub coint_on: SeriesKind,
    pub exec: Exec,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            top_k: 10,
            eg_lags: 1,
            critical_value: EG_CRITICAL_5PCT,
            coint_on: SeriesKind::Cumulative,
            exec: Exec::default(),
        }
    }
}

fn aligned_values(a: &ReturnSeries, b: &ReturnSeries) -> (Vec<f64>, Vec<f64>) {
    align(a.observations(), b.observations())
        .into_iter()
        .map(|(_, x, y)| (x, y))
        .unzip()
}

/// Scores every pair of non-base symbols by return correlation (descending)
/// and runs the cointegration test on the first `top_k`.
pub fn rank_pairs(
    returns: &BTreeMap<String, ReturnSeries>,
    base_symbol: &str,
    opts: &RankOptions,
) -> Result<Vec<PairScore>> {
    let symbols: Vec<&String> = returns.keys().filter(|s| s.as_str() != base_symbol).collect();
    if symbols.len() < 2 {
        return Err(Error::NotEnoughSymbols(symbols.len()));
    }
    let mut pairs = Vec::new();
    for (i, a) in symbols.iter().enumerate() {
        for b in &symbols[i + 1..] {
            pairs.push((*a, *b));
        }
    }
    let exec = opts.exec;
    let scored = exec.map(&pairs, |&(a, b)| {
        let (x, y) = aligned_values(&returns[a], &returns[b]);
        pearson_correlation(&x, &y).map(|c| PairScore {
            symbol_a: a.clone(),
            symbol_b: b.clone(),
            correlation: c,
            eg_statistic: None,
            cointegrated: false,
        })
    });
    let mut scores = scored.into_iter().collect::<Result<Vec<_>>>()?;
    scores.sort_by(|p, q| {
        q.correlation
            .total_cmp(&p.correlation)
            .then_with(|| p.symbol_a.cmp(&q.symbol_a))
            .then_with(|| p.symbol_b.cmp(&q.symbol_b))
    });

    let k = opts.top_k.min(scores.len());
    let tests = exec.map(&scores[..k], |p| {
        let a = opts.coint_on.apply(&returns[&p.symbol_a]);
        let b = opts.coint_on.apply(&returns[&p.symbol_b]);
        let (x, y) = aligned_values(&a, &b);
        match engle_granger(&x, &y, opts.eg_lags, opts.critical_value) {
            Ok(eg) => Ok(Some(eg)),
            Err(Error::DegenerateRegressor) => Ok(None),
            Err(e) => Err(e),
        }
    });
    for (score, eg) in scores.iter_mut().zip(tests) {
        if let Some(eg) = eg? {
            score.eg_statistic = Some(eg.statistic);
            score.cointegrated = eg.cointegrated;
        }
    }
    Ok(scores)
}
