//! Two joint models with the same Gaussian margins and the same correlation
//! but different tails: Clayton (lower-tail dependent) and Gumbel
//! (upper-tail dependent).
//!
//! Each θ is found by bisection so that the Pearson correlation of the emitted
//! normal scores hits the target. The draws are fixed per seed, so the
//! correlation is a deterministic function of θ.

use std::fmt::Write;

use serde::Serialize;

use crate::copula::{Copula, CopulaFamily};
use crate::error::{Error, Result};
use crate::margins::normal_quantile;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitfallConfig {
    pub n: usize,
    pub target_correlation: f64,
    pub seed: u64,
    /// Largest accepted |r - target| after calibration.
    pub tolerance: f64,
}

impl Default for PitfallConfig {
    fn default() -> Self {
        Self {
            n: 1_000,
            target_correlation: 0.5,
            seed: 42,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitfallSample {
    pub family: CopulaFamily,
    pub theta: f64,
    pub correlation: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitfallDemo {
    pub clayton: PitfallSample,
    pub gumbel: PitfallSample,
}

fn normal_scores(copula: &Copula, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    Ok(copula
        .sample(n, seed)?
        .into_iter()
        .map(|(u, v)| (normal_quantile(u), normal_quantile(v)))
        .collect())
}

fn correlation(points: &[(f64, f64)]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    stats::pearson_unchecked(&x, &y)
}

fn calibrate(family: CopulaFamily, cfg: &PitfallConfig, seed: u64) -> Result<PitfallSample> {
    let (lo, hi) = match family {
        CopulaFamily::Clayton => (1e-3f64.ln(), 50f64.ln()),
        CopulaFamily::Gumbel => (0.0, 50f64.ln()),
        _ => return Err(Error::InvalidArgument(format!("cannot calibrate {family}"))),
    };
    let r_at = |c: f64| -> Result<f64> {
        let copula = Copula::new(
            family,
            c.exp().max(if family == CopulaFamily::Gumbel { 1.0 } else { 0.0 }),
        )?;
        Ok(correlation(&normal_scores(&copula, cfg.n, seed)?))
    };
    let failure = |c: f64| Error::NonConvergence {
        iterations: 0,
        best: vec![c.exp()],
    };
    if r_at(lo)? > cfg.target_correlation {
        return Err(failure(lo));
    }
    if r_at(hi)? < cfg.target_correlation {
        return Err(failure(hi));
    }
    let c = crate::optim::bisect_increasing(
        |c| r_at(c).map_or(f64::NAN, |r| r - cfg.target_correlation),
        lo,
        hi,
        1e-12,
    );
    let theta = match family {
        CopulaFamily::Gumbel => c.exp().max(1.0),
        _ => c.exp(),
    };
    let copula = Copula::new(family, theta)?;
    let points = normal_scores(&copula, cfg.n, seed)?;
    let r = correlation(&points);
    if (r - cfg.target_correlation).abs() > cfg.tolerance {
        return Err(failure(c));
    }
    Ok(PitfallSample {
        family,
        theta,
        correlation: r,
        points,
    })
}

pub fn pitfall_demo(cfg: &PitfallConfig) -> Result<PitfallDemo> {
    if cfg.n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: cfg.n });
    }
    if !(cfg.target_correlation > 0.0 && cfg.target_correlation < 1.0) {
        return Err(Error::OutOfRange {
            what: "target_correlation",
            value: cfg.target_correlation,
        });
    }
    Ok(PitfallDemo {
        clayton: calibrate(CopulaFamily::Clayton, cfg, cfg.seed)?,
        gumbel: calibrate(CopulaFamily::Gumbel, cfg, cfg.seed.wrapping_add(1))?,
    })
}

/// Number of points with both coordinates below the `q`-quantile of N(0, 1).
pub fn joint_lower_tail_count(points: &[(f64, f64)], q: f64) -> usize {
    let z = normal_quantile(q);
    points.iter().filter(|(x, y)| *x < z && *y < z).count()
}

impl PitfallDemo {
    /// CSV with columns `model,x,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,x,y\n");
        for s in [&self.clayton, &self.gumbel] {
            for (x, y) in &s.points {
                writeln!(out, "{},{x},{y}", s.family).expect("write to string");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_correlations_match() {
        let demo = pitfall_demo(&PitfallConfig::default()).unwrap();
        assert!((demo.clayton.correlation - 0.5).abs() < 1e-3);
        assert!((demo.gumbel.correlation - 0.5).abs() < 1e-3);
        assert!(demo.gumbel.theta > 1.0);
    }

    #[test]
    fn csv_has_both_models() {
        let cfg = PitfallConfig {
            n: 50,
            ..Default::default()
        };
        let csv = pitfall_demo(&cfg).unwrap().to_csv();
        assert_eq!(csv.lines().count(), 101);
        assert!(csv.lines().nth(1).unwrap().starts_with("clayton,"));
        assert!(csv.lines().last().unwrap().starts_with("gumbel,"));
    }
}
