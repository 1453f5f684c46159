//! Mispricing signals from conditional copula probabilities.
//!
//! With `h12 = P(U <= u | V = v)` and `h21 = P(V <= v | U = u)`:
//! asset 1 is underpriced when `h12 < eps` and `h21 > 1 - eps`, asset 2 when
//! `h12 > 1 - eps` and `h21 < eps`. Equality at a threshold is no signal.

use std::fmt;

use serde::Serialize;

use crate::copula::{clamp_pit, empirical_pit, JointFit, PitMethod};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ingest::{align, SpreadSeries, Timestamp};
use crate::margins::MarginalModel;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Asset1Underpriced,
    Asset2Underpriced,
    NoSignal,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [
        Verdict::Asset1Underpriced,
        Verdict::Asset2Underpriced,
        Verdict::NoSignal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Asset1Underpriced => "asset1_underpriced",
            Verdict::Asset2Underpriced => "asset2_underpriced",
            Verdict::NoSignal => "no_signal",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signal {
    pub timestamp: Timestamp,
    pub symbol_1: String,
    pub symbol_2: String,
    pub u: f64,
    pub v: f64,
    pub h12: f64,
    pub h21: f64,
    pub epsilon: f64,
    pub verdict: Verdict,
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon))
    }
}

pub fn evaluate_signal(h12: f64, h21: f64, epsilon: f64) -> Result<Verdict> {
    check_epsilon(epsilon)?;
    for (what, h) in [("h12", h12), ("h21", h21)] {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::OutOfRange { what, value: h });
        }
    }
    Ok(if h12 < epsilon && h21 > 1.0 - epsilon {
        Verdict::Asset1Underpriced
    } else if h12 > 1.0 - epsilon && h21 < epsilon {
        Verdict::Asset2Underpriced
    } else {
        Verdict::NoSignal
    })
}

/// `u_t = F(S_t)`, clamped to the open unit interval.
pub fn pit_transform(spread: &SpreadSeries, model: &MarginalModel) -> Result<Vec<(Timestamp, f64)>> {
    if spread.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    Ok(spread
        .observations()
        .iter()
        .map(|&(t, s)| (t, clamp_pit(model.cdf(s))))
        .collect())
}

pub fn signal_series(
    spread1: &SpreadSeries,
    spread2: &SpreadSeries,
    fit: &JointFit,
    epsilon: f64,
) -> Result<Vec<Signal>> {
    signal_series_with(spread1, spread2, fit, epsilon, Exec::default())
}

/// One signal per common timestamp, in timestamp order. Fits made on
/// rank-based pseudo-observations use the ranks of the aligned spreads here as
/// well.
pub fn signal_series_with(
    spread1: &SpreadSeries,
    spread2: &SpreadSeries,
    fit: &JointFit,
    epsilon: f64,
    exec: Exec,
) -> Result<Vec<Signal>> {
    check_epsilon(epsilon)?;
    let joined = align(spread1.observations(), spread2.observations());
    if joined.is_empty() {
        return Err(Error::InsufficientOverlap { common: 0 });
    }
    let uv: Vec<(f64, f64)> = match fit.pit {
        PitMethod::Parametric => joined
            .iter()
            .map(|&(_, a, b)| (clamp_pit(fit.marginal1.cdf(a)), clamp_pit(fit.marginal2.cdf(b))))
            .collect(),
        PitMethod::Empirical => {
            let (a, b): (Vec<f64>, Vec<f64>) = joined.iter().map(|&(_, a, b)| (a, b)).unzip();
            empirical_pit(&a).into_iter().zip(empirical_pit(&b)).collect()
        }
    };
    let copula = fit.copula.copula();
    let hs = exec.map(&uv, |&(u, v)| copula.h_pair_clamped(u, v));
    joined
        .iter()
        .zip(uv)
        .zip(hs)
        .map(|((&(timestamp, _, _), (u, v)), (h12, h21))| {
            Ok(Signal {
                timestamp,
                symbol_1: spread1.asset_symbol.clone(),
                symbol_2: spread2.asset_symbol.clone(),
                u,
                v,
                h12,
                h21,
                epsilon,
                verdict: evaluate_signal(h12, h21, epsilon)?,
            })
        })
        .collect()
}

/// Number of signals per verdict, in [`Verdict::ALL`] order.
pub fn verdict_counts(signals: &[Signal]) -> [(Verdict, usize); 3] {
    Verdict::ALL.map(|v| (v, signals.iter().filter(|s| s.verdict == v).count()))
}
