//! Univariate location-scale families used for the spread marginals:
//! Gaussian, Student-t (continuous degrees of freedom) and Cauchy.
//!
//! Fitting is by maximum likelihood. The Gaussian uses its closed form; the
//! other two run Nelder–Mead on unconstrained coordinates (logs of the positive
//! parameters) after standardizing the sample by its median and half
//! interquartile range, so the optimizer always sees unit-scale data.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::{beta::beta_reg, erf, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::optim::{nelder_mead, newton_polish, NelderMeadOptions};
use crate::stats;

/// Minimum sample size accepted by [`fit_mle`].
pub const MIN_SAMPLES: usize = 8;
/// Degrees of freedom are kept inside this range during fitting.
pub const NU_MIN: f64 = 0.1;
pub const NU_MAX: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalFamily {
    Gaussian,
    StudentT,
    Cauchy,
}

impl MarginalFamily {
    pub const ALL: [MarginalFamily; 3] = [
        MarginalFamily::Gaussian,
        MarginalFamily::StudentT,
        MarginalFamily::Cauchy,
    ];

    /// Number of free parameters, as counted by AIC.
    pub fn n_params(self) -> usize {
        match self {
            MarginalFamily::Gaussian | MarginalFamily::Cauchy => 2,
            MarginalFamily::StudentT => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarginalFamily::Gaussian => "gaussian",
            MarginalFamily::StudentT => "student_t",
            MarginalFamily::Cauchy => "cauchy",
        }
    }
}

impl fmt::Display for MarginalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginalFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => Ok(MarginalFamily::Gaussian),
            "student_t" | "studentt" | "t" => Ok(MarginalFamily::StudentT),
            "cauchy" => Ok(MarginalFamily::Cauchy),
            other => Err(Error::InvalidArgument(format!("unknown marginal family `{other}`"))),
        }
    }
}

/// Parameters of a fitted or user-specified marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum MarginalParams {
    Gaussian { mu: f64, sigma: f64 },
    StudentT { nu: f64, loc: f64, scale: f64 },
    Cauchy { x0: f64, gamma: f64 },
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

fn finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

impl MarginalParams {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(MarginalParams::Gaussian { mu, sigma })
    }

    pub fn student_t(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        positive("nu", nu)?;
        finite("loc", loc)?;
        positive("scale", scale)?;
        Ok(MarginalParams::StudentT { nu, loc, scale })
    }

    pub fn cauchy(x0: f64, gamma: f64) -> Result<Self> {
        finite("x0", x0)?;
        positive("gamma", gamma)?;
        Ok(MarginalParams::Cauchy { x0, gamma })
    }

    pub fn family(&self) -> MarginalFamily {
        match self {
            MarginalParams::Gaussian { .. } => MarginalFamily::Gaussian,
            MarginalParams::StudentT { .. } => MarginalFamily::StudentT,
            MarginalParams::Cauchy { .. } => MarginalFamily::Cauchy,
        }
    }

    /// Center of symmetry (the median) of the distribution.
    pub fn location(&self) -> f64 {
        match *self {
            MarginalParams::Gaussian { mu, .. } => mu,
            MarginalParams::StudentT { loc, .. } => loc,
            MarginalParams::Cauchy { x0, .. } => x0,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            MarginalParams::Gaussian { sigma, .. } => sigma,
            MarginalParams::StudentT { scale, .. } => scale,
            MarginalParams::Cauchy { gamma, .. } => gamma,
        }
    }

    fn standardize(&self, x: f64) -> f64 {
        (x - self.location()) / self.scale()
    }

    /// Log-density as a closure with the normalizing constant precomputed.
    pub fn log_density(&self) -> impl Fn(f64) -> f64 + Sync + Send + '_ {
        let ln_scale = self.scale().ln();
        let constant = match *self {
            MarginalParams::Gaussian { .. } => -0.5 * (2.0 * PI).ln() - ln_scale,
            MarginalParams::StudentT { nu, .. } => {
                ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - ln_scale
            }
            MarginalParams::Cauchy { .. } => -PI.ln() - ln_scale,
        };
        move |x: f64| {
            let z = self.standardize(x);
            match *self {
                MarginalParams::Gaussian { .. } => constant - 0.5 * z * z,
                MarginalParams::StudentT { nu, .. } => constant - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p(),
                MarginalParams::Cauchy { .. } => constant - (z * z).ln_1p(),
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.log_density())(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let z = self.standardize(x);
        match *self {
            MarginalParams::Gaussian { .. } => normal_cdf(z),
            MarginalParams::StudentT { nu, .. } => student_t_cdf(z, nu),
            MarginalParams::Cauchy { .. } => 0.5 + z.atan() / PI,
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutOfRange {
                what: "probability",
                value: p,
            });
        }
        let z = match *self {
            MarginalParams::Gaussian { .. } => normal_quantile(p),
            MarginalParams::StudentT { nu, .. } => student_t_quantile(p, nu),
            MarginalParams::Cauchy { .. } => (PI * (p - 0.5)).tan(),
        };
        Ok(self.location() + self.scale() * z)
    }

    /// `n` draws by inverse-transform sampling, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p: f64 = rng.sample(Open01);
                self.quantile(p).expect("open-interval draw")
            })
            .collect()
    }

    pub fn loglik(&self, samples: &[f64]) -> f64 {
        self.loglik_with(samples, Exec::default())
    }

    pub fn loglik_with(&self, samples: &[f64], exec: Exec) -> f64 {
        let ld = self.log_density();
        exec.sum(samples, |&x| ld(x))
    }

    /// Unconstrained optimizer coordinates.
    pub(crate) fn to_unconstrained(self) -> Vec<f64> {
        match self {
            MarginalParams::Gaussian { mu, sigma } => vec![mu, sigma.ln()],
            MarginalParams::StudentT { nu, loc, scale } => vec![nu.ln(), loc, scale.ln()],
            MarginalParams::Cauchy { x0, gamma } => vec![x0, gamma.ln()],
        }
    }

    pub(crate) fn from_unconstrained(family: MarginalFamily, c: &[f64]) -> MarginalParams {
        match family {
            MarginalFamily::Gaussian => MarginalParams::Gaussian {
                mu: c[0],
                sigma: c[1].exp(),
            },
            MarginalFamily::StudentT => MarginalParams::StudentT {
                nu: c[0].exp().clamp(NU_MIN, NU_MAX),
                loc: c[1],
                scale: c[2].exp(),
            },
            MarginalFamily::Cauchy => MarginalParams::Cauchy {
                x0: c[0],
                gamma: c[1].exp(),
            },
        }
    }

    /// Maps parameters fitted on `(x - center) / spread` back to the raw scale.
    fn unstandardize(self, center: f64, spread: f64) -> MarginalParams {
        match self {
            MarginalParams::Gaussian { mu, sigma } => MarginalParams::Gaussian {
                mu: center + spread * mu,
                sigma: spread * sigma,
            },
            MarginalParams::StudentT { nu, loc, scale } => MarginalParams::StudentT {
                nu,
                loc: center + spread * loc,
                scale: spread * scale,
            },
            MarginalParams::Cauchy { x0, gamma } => MarginalParams::Cauchy {
                x0: center + spread * x0,
                gamma: spread * gamma,
            },
        }
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    let mut z = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Newton polish against our own CDF
    let d = normal_pdf(z);
    if d > 0.0 {
        z -= (normal_cdf(z) - p) / d;
    }
    z
}

/// CDF of the standard Student-t with `nu` degrees of freedom.
pub fn student_t_cdf(t: f64, nu: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let t2 = t * t;
    if t2 < nu {
        // near the centre: the complementary incomplete beta is better conditioned
        let central = 0.5 * beta_reg(0.5, 0.5 * nu, t2 / (nu + t2));
        return 0.5 + central.copysign(t);
    }
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t2));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn student_t_quantile(p: f64, nu: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let ln_c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
    let pdf = |t: f64| (ln_c - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp();
    let g = |t: f64| student_t_cdf(t, nu) - p;

    let (mut lo, mut hi) = if p < 0.5 { (-1.0, 0.0) } else { (0.0, 1.0) };
    while g(lo) > 0.0 {
        hi = lo;
        lo *= 2.0;
    }
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gt = g(t);
        if gt.abs() <= 1e-15 {
            break;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - gt / pdf(t);
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// Akaike information criterion `2k - 2 ln L`.
pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// A marginal distribution fitted by maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalModel {
    #[serde(flatten)]
    pub params: MarginalParams,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
}

impl MarginalModel {
    /// Wraps `params` with the log-likelihood and AIC it attains on `samples`.
    pub fn evaluate(params: MarginalParams, samples: &[f64], exec: Exec) -> Self {
        let loglik = params.loglik_with(samples, exec);
        Self {
            params,
            loglik,
            aic: aic(loglik, params.family().n_params()),
            n: samples.len(),
        }
    }

    pub fn family(&self) -> MarginalFamily {
        self.params.family()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.params.pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.params.cdf(x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.params.quantile(p)
    }
}

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::OutOfRange {
            what: "sample",
            value: bad,
        });
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(Error::DegenerateSample);
    }
    Ok(())
}

/// Robust center and spread: median and half interquartile range, falling
/// back to the standard deviation when more than half the sample is tied.
fn robust_center_spread(samples: &[f64]) -> (f64, f64) {
    let center = stats::median(samples);
    let half_iqr = 0.5 * (stats::empirical_quantile(samples, 0.75) - stats::empirical_quantile(samples, 0.25));
    let spread = if half_iqr > 0.0 {
        half_iqr
    } else {
        stats::variance(samples).sqrt()
    };
    (center, spread)
}

/// Maximum-likelihood fit of `family` to `samples`.
pub fn fit_mle(samples: &[f64], family: MarginalFamily) -> Result<MarginalModel> {
    fit_mle_with(samples, family, Exec::default())
}

pub fn fit_mle_with(samples: &[f64], family: MarginalFamily, exec: Exec) -> Result<MarginalModel> {
    validate_samples(samples)?;
    if family == MarginalFamily::Gaussian {
        let mu = stats::mean(samples);
        let var = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / samples.len() as f64;
        let params = MarginalParams::gaussian(mu, var.sqrt())?;
        return Ok(MarginalModel::evaluate(params, samples, exec));
    }
    fit_mle_numerical(samples, family, exec)
}

/// Nelder–Mead maximum likelihood for any family, Gaussian included (used to
/// cross-check the Gaussian closed form).
pub fn fit_mle_numerical(samples: &[f64], family: MarginalFamily, exec: Exec) -> Result<MarginalModel> {
    validate_samples(samples)?;
    let (center, spread) = robust_center_spread(samples);
    let z: Vec<f64> = samples.iter().map(|x| (x - center) / spread).collect();

    let start = match family {
        MarginalFamily::Gaussian => {
            let sd = (stats::variance(&z) * (z.len() - 1) as f64 / z.len() as f64).sqrt();
            MarginalParams::Gaussian {
                mu: stats::mean(&z),
                sigma: sd,
            }
        }
        MarginalFamily::StudentT => MarginalParams::StudentT {
            nu: 5.0,
            loc: 0.0,
            scale: 1.0,
        },
        MarginalFamily::Cauchy => MarginalParams::Cauchy { x0: 0.0, gamma: 1.0 },
    };
    let n = z.len() as f64;
    let objective = |c: &[f64]| {
        let p = MarginalParams::from_unconstrained(family, c);
        -p.loglik_with(&z, exec) / n
    };
    let result = nelder_mead(objective, &start.to_unconstrained(), NelderMeadOptions::default());
    if !result.converged {
        let best = MarginalParams::from_unconstrained(family, &result.x).unstandardize(center, spread);
        return Err(Error::NonConvergence {
            iterations: result.iterations,
            best: best.to_unconstrained(),
        });
    }
    let polished = newton_polish(objective, &result.x, 3);
    let fitted = MarginalParams::from_unconstrained(family, &polished).unstandardize(center, spread);
    Ok(MarginalModel::evaluate(fitted, samples, exec))
}

/// Fits every family and returns the one with minimal AIC. Ties go to the
/// family with fewer parameters, then to the order Gaussian, StudentT, Cauchy.
pub fn select_marginal(samples: &[f64], families: &[MarginalFamily]) -> Result<MarginalModel> {
    select_marginal_with(samples, families, Exec::default())
}

pub fn select_marginal_with(samples: &[f64], families: &[MarginalFamily], exec: Exec) -> Result<MarginalModel> {
    if families.is_empty() {
        return Err(Error::InvalidArgument("no marginal families to select from".into()));
    }
    validate_samples(samples)?;
    let fits = exec.map(families, |&f| (f, fit_mle_with(samples, f, exec)));
    let mut failures = Vec::new();
    let mut best: Option<MarginalModel> = None;
    for (family, fit) in fits {
        match fit {
            Ok(model) => {
                let better = match &best {
                    None => true,
                    Some(b) => selection_key(&model) < selection_key(b),
                };
                if better {
                    best = Some(model);
                }
            }
            Err(e @ Error::NonConvergence { .. }) => failures.push((family.to_string(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::AllFitsFailed(failures))
}

fn selection_key(m: &MarginalModel) -> (ordered::Total, usize, MarginalFamily) {
    (ordered::Total(m.aic), m.family().n_params(), m.family())
}

pub(crate) mod ordered {
    /// `f64` ordered by `total_cmp`, for use in sort keys.
    #[derive(Debug, Clone, Copy)]
    pub struct Total(pub f64);

    impl PartialEq for Total {
        fn eq(&self, other: &Self) -> bool {
            self.0.total_cmp(&other.0).is_eq()
        }
    }
    impl Eq for Total {}
    impl PartialOrd for Total {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Total {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}
