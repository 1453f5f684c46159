//! Synthetic price data whose two spreads follow a chosen joint model.
//!
//! Spreads `s1, s2` are drawn from the copula and pushed through the marginal
//! quantiles. The base return is `b = z + a1 s1 + a2 s2` with `z` noise made
//! orthogonal to `(1, s1, s2)` in-sample and `a1, a2` chosen so that
//! `cov(b, s_i) = var(s_i)`. Asset returns are `(b - s_i) / beta_i`; under
//! that covariance condition the OLS hedge ratio of `b` on asset `i` is exactly
//! `beta_i`, so the pipeline recovers `s_i` as the spread.

use std::fmt::Write;

use serde::Serialize;

use crate::copula::{sample_copula, CopulaFamily, MIN_PAIRS};
use crate::error::{Error, Result};
use crate::ingest::Timestamp;
use crate::margins::MarginalParams;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSpec {
    /// Number of returns; each series has `n + 1` prices.
    pub n: usize,
    pub copula: CopulaFamily,
    pub theta: f64,
    pub marginal1: MarginalParams,
    pub marginal2: MarginalParams,
    pub beta1: f64,
    pub beta2: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub base_symbol: String,
    pub symbol_1: String,
    pub symbol_2: String,
    pub start: Timestamp,
    pub step: Timestamp,
    pub initial_price: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        let g = MarginalParams::gaussian(0.0, 0.01).expect("valid");
        Self {
            n: 1_000,
            copula: CopulaFamily::Independent,
            theta: 0.0,
            marginal1: g,
            marginal2: g,
            beta1: 1.0,
            beta2: 0.5,
            noise_sd: 0.02,
            seed: 42,
            base_symbol: "BASE".into(),
            symbol_1: "A1".into(),
            symbol_2: "A2".into(),
            start: 1_600_000_000,
            step: 86_400,
            initial_price: 100.0,
        }
    }
}

/// Generated prices plus the spreads they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub base_symbol: String,
    pub symbol_1: String,
    pub symbol_2: String,
    pub timestamps: Vec<Timestamp>,
    pub base_prices: Vec<f64>,
    pub prices_1: Vec<f64>,
    pub prices_2: Vec<f64>,
    pub spread_1: Vec<f64>,
    pub spread_2: Vec<f64>,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_PAIRS {
            return Err(Error::InvalidArgument(format!(
                "n must be at least {MIN_PAIRS}, got {}",
                self.n
            )));
        }
        crate::copula::Copula::new(self.copula, self.theta)?;
        for (what, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if b == 0.0 || !b.is_finite() {
                return Err(Error::OutOfRange { what, value: b });
            }
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::OutOfRange {
                what: "noise_sd",
                value: self.noise_sd,
            });
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return Err(Error::OutOfRange {
                what: "initial_price",
                value: self.initial_price,
            });
        }
        if self.step <= 0 {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        let names = [&self.base_symbol, &self.symbol_1, &self.symbol_2];
        if names.iter().any(|s| s.is_empty() || s.contains(','))
            || names[0] == names[1]
            || names[0] == names[2]
            || names[1] == names[2]
        {
            return Err(Error::InvalidArgument(
                "symbols must be distinct, non-empty and comma-free".into(),
            ));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SimDataset> {
        self.validate()?;
        let uv = sample_copula(self.copula, self.theta, self.n, self.seed)?;
        let mut s1 = Vec::with_capacity(self.n);
        let mut s2 = Vec::with_capacity(self.n);
        for (u, v) in uv {
            s1.push(self.marginal1.quantile(u)?);
            s2.push(self.marginal2.quantile(v)?);
        }
        self.dataset_from_spreads(&s1, &s2)
    }

    /// Prices reproducing the given spread pair exactly (up to rounding).
    pub fn dataset_from_spreads(&self, s1: &[f64], s2: &[f64]) -> Result<SimDataset> {
        if s1.len() != s2.len() {
            return Err(Error::LengthMismatch {
                left: s1.len(),
                right: s2.len(),
            });
        }
        let n = s1.len();
        if n < 4 {
            return Err(Error::TooFewSamples { needed: 4, got: n });
        }
        let (v1, v2, c12) = (stats::variance(s1), stats::variance(s2), stats::covariance(s1, s2));
        let det = v1 * v2 - c12 * c12;
        if det.is_nan() || det <= 1e-12 * v1 * v2 {
            return Err(Error::DegenerateSample);
        }
        let a1 = (v1 * v2 - c12 * v2) / det;
        let a2 = (v1 * v2 - c12 * v1) / det;

        let noise_seed = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        let z0 = MarginalParams::gaussian(0.0, self.noise_sd)?.sample(n, noise_seed);
        let rows: Vec<Vec<f64>> = s1.iter().zip(s2).map(|(&x, &y)| vec![1.0, x, y]).collect();
        let (coef, _, _) = stats::least_squares(&rows, &z0).ok_or(Error::DegenerateSample)?;
        let base: Vec<f64> = (0..n)
            .map(|i| {
                let z = z0[i] - coef[0] - coef[1] * s1[i] - coef[2] * s2[i];
                z + a1 * s1[i] + a2 * s2[i]
            })
            .collect();
        let r1: Vec<f64> = base.iter().zip(s1).map(|(b, s)| (b - s) / self.beta1).collect();
        let r2: Vec<f64> = base.iter().zip(s2).map(|(b, s)| (b - s) / self.beta2).collect();

        let integrate = |r: &[f64]| -> Result<Vec<f64>> {
            let mut ln_p = self.initial_price.ln();
            let mut out = Vec::with_capacity(r.len() + 1);
            out.push(self.initial_price);
            for x in r {
                ln_p += x;
                let p = ln_p.exp();
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::OutOfRange {
                        what: "simulated price",
                        value: p,
                    });
                }
                out.push(p);
            }
            Ok(out)
        };
        Ok(SimDataset {
            base_symbol: self.base_symbol.clone(),
            symbol_1: self.symbol_1.clone(),
            symbol_2: self.symbol_2.clone(),
            timestamps: (0..=n as i64).map(|i| self.start + i * self.step).collect(),
            base_prices: integrate(&base)?,
            prices_1: integrate(&r1)?,
            prices_2: integrate(&r2)?,
            spread_1: s1.to_vec(),
            spread_2: s2.to_vec(),
        })
    }
}

impl SimDataset {
    /// Long-format CSV (`timestamp,symbol,close`), ordered by timestamp.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,symbol,close\n");
        for (i, t) in self.timestamps.iter().enumerate() {
            for (sym, p) in [
                (&self.base_symbol, self.base_prices[i]),
                (&self.symbol_1, self.prices_1[i]),
                (&self.symbol_2, self.prices_2[i]),
            ] {
                writeln!(out, "{t},{sym},{p}").expect("write to string");
            }
        }
        out
    }
}
