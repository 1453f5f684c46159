//! Bivariate copulas: Independent, Clayton, Gumbel and
//! Eyraud–Farlie–Gumbel–Morgenstern (EFGM).
//!
//! All four families are exchangeable, so both h-functions are one
//! conditional CDF with its arguments swapped:
//!
//! * `h_v_given_u(u, v) = ∂C/∂u = P(V <= v | U = u)`
//! * `h_u_given_v(u, v) = ∂C/∂v = P(U <= u | V = v)`
//!
//! Clayton and Gumbel are evaluated in log space so that parameters up to the
//! fitting bounds stay finite for inputs as small as the fitting clamp.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::margins::ordered::Total;
use crate::margins::{select_marginal_with, MarginalFamily, MarginalModel, MarginalParams};
use crate::optim::{bisect_increasing, golden_section_max, nelder_mead, NelderMeadOptions};
use crate::stats;

/// PIT outputs are clamped to `[PIT_CLAMP, 1 - PIT_CLAMP]` before any
/// likelihood or h-function evaluation inside the pipeline.
pub const PIT_CLAMP: f64 = 1e-10;
/// Minimum number of pairs accepted by [`fit_copula_ifm`].
pub const MIN_PAIRS: usize = 16;

const CLAYTON_BOUNDS: (f64, f64) = (1e-4, 100.0);
const GUMBEL_MAX: f64 = 100.0;
const GOLDEN_TOL: f64 = 1e-10;
const SAMPLE_BISECT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Independent,
    Clayton,
    Gumbel,
    Efgm,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 4] = [
        CopulaFamily::Independent,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Efgm,
    ];

    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independent => 0,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independent => "independent",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Efgm => "efgm",
        }
    }

    pub fn contains(self, theta: f64) -> bool {
        match self {
            CopulaFamily::Independent => true,
            CopulaFamily::Clayton => theta > 0.0 && theta.is_finite(),
            CopulaFamily::Gumbel => theta >= 1.0 && theta.is_finite(),
            CopulaFamily::Efgm => (-1.0..=1.0).contains(&theta),
        }
    }

    /// Search interval for the fitting coordinate (see [`Self::theta_from_coord`]).
    fn coord_bounds(self) -> (f64, f64) {
        match self {
            CopulaFamily::Independent => (0.0, 0.0),
            CopulaFamily::Clayton => (CLAYTON_BOUNDS.0.ln(), CLAYTON_BOUNDS.1.ln()),
            CopulaFamily::Gumbel => (0.0, GUMBEL_MAX.ln()),
            CopulaFamily::Efgm => (-1.0, 1.0),
        }
    }

    /// Fitting coordinate to θ: `exp` for Clayton and Gumbel, identity for
    /// EFGM, clipped to the fitting bounds.
    fn theta_from_coord(self, c: f64) -> f64 {
        match self {
            CopulaFamily::Independent => 0.0,
            CopulaFamily::Clayton => c.exp().clamp(CLAYTON_BOUNDS.0, CLAYTON_BOUNDS.1),
            CopulaFamily::Gumbel => c.exp().clamp(1.0, GUMBEL_MAX),
            CopulaFamily::Efgm => c.clamp(-1.0, 1.0),
        }
    }

    fn coord_from_theta(self, theta: f64) -> f64 {
        match self {
            CopulaFamily::Independent => 0.0,
            CopulaFamily::Clayton | CopulaFamily::Gumbel => theta.ln(),
            CopulaFamily::Efgm => theta,
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independent" | "independence" => Ok(CopulaFamily::Independent),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            "efgm" | "fgm" => Ok(CopulaFamily::Efgm),
            other => Err(Error::InvalidArgument(format!("unknown copula family `{other}`"))),
        }
    }
}

/// A copula family with a parameter inside its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Copula {
    family: CopulaFamily,
    theta: f64,
}

fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value: x })
    }
}

fn interior(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// `ln(u^-θ + v^-θ - 1)` from `a = -θ ln u`, `b = -θ ln v` (both >= 0).
fn clayton_ln_a(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m < 1.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl Copula {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        if !family.contains(theta) {
            return Err(Error::ThetaOutOfDomain {
                family: family.name(),
                theta,
            });
        }
        let theta = if family == CopulaFamily::Independent {
            0.0
        } else {
            theta
        };
        Ok(Self { family, theta })
    }

    pub fn independent() -> Self {
        Self {
            family: CopulaFamily::Independent,
            theta: 0.0,
        }
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    /// Dependence parameter; `None` for the independence copula.
    pub fn theta(&self) -> Option<f64> {
        (self.family != CopulaFamily::Independent).then_some(self.theta)
    }

    fn is_independent(&self) -> bool {
        self.family == CopulaFamily::Independent
            || (self.family == CopulaFamily::Gumbel && self.theta == 1.0)
            || (self.family == CopulaFamily::Efgm && self.theta == 0.0)
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        check_unit("u", u)?;
        check_unit("v", v)?;
        Ok(self.cdf_unchecked(u, v))
    }

    pub(crate) fn cdf_unchecked(&self, u: f64, v: f64) -> f64 {
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        if self.is_independent() {
            return u * v;
        }
        let t = self.theta;
        match self.family {
            CopulaFamily::Clayton => {
                let ln_a = clayton_ln_a(-t * u.ln(), -t * v.ln());
                (-ln_a / t).exp()
            }
            CopulaFamily::Gumbel => {
                let s = (-u.ln()).powf(t) + (-v.ln()).powf(t);
                (-s.powf(1.0 / t)).exp()
            }
            CopulaFamily::Efgm => u * v * (1.0 + t * (1.0 - u) * (1.0 - v)),
            CopulaFamily::Independent => unreachable!(),
        }
    }

    /// Copula density `∂²C/∂u∂v` on the open unit square.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        if !interior(u) || !interior(v) {
            return Err(Error::BoundaryInput { u, v });
        }
        Ok(self.ln_density_unchecked(u, v).exp())
    }

    pub(crate) fn ln_density_unchecked(&self, u: f64, v: f64) -> f64 {
        if self.is_independent() {
            return 0.0;
        }
        let t = self.theta;
        match self.family {
            CopulaFamily::Clayton => {
                let (lu, lv) = (u.ln(), v.ln());
                let ln_a = clayton_ln_a(-t * lu, -t * lv);
                t.ln_1p() - (t + 1.0) * (lu + lv) - (1.0 / t + 2.0) * ln_a
            }
            CopulaFamily::Gumbel => {
                let (lu, lv) = (u.ln(), v.ln());
                let (a, b) = (-lu, -lv);
                let (la, lb) = (a.ln(), b.ln());
                // s = a^t + b^t in log space
                let (pa, pb) = (t * la, t * lb);
                let m = pa.max(pb);
                let ln_s = m + ((pa - m).exp() + (pb - m).exp()).ln();
                let s_root = (ln_s / t).exp();
                -s_root - lu - lv + (t - 1.0) * (la + lb) + (2.0 / t - 2.0) * ln_s + ((t - 1.0) / s_root).ln_1p()
            }
            CopulaFamily::Efgm => (t * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)).ln_1p(),
            CopulaFamily::Independent => 0.0,
        }
    }

    /// `P(Y <= y | X = x) = ∂C(x, y)/∂x` for interior `x`.
    fn cond_cdf(&self, x: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        if self.is_independent() {
            return y;
        }
        let t = self.theta;
        let h = match self.family {
            CopulaFamily::Clayton => {
                let lx = x.ln();
                let ln_a = clayton_ln_a(-t * lx, -t * y.ln());
                (-(t + 1.0) * lx - (1.0 / t + 1.0) * ln_a).exp()
            }
            CopulaFamily::Gumbel => {
                let lx = x.ln();
                let (a, b) = (-lx, -y.ln());
                let (pa, pb) = (t * a.ln(), t * b.ln());
                let m = pa.max(pb);
                let ln_s = m + ((pa - m).exp() + (pb - m).exp()).ln();
                (-(ln_s / t).exp() + (1.0 / t - 1.0) * ln_s + (t - 1.0) * a.ln() - lx).exp()
            }
            CopulaFamily::Efgm => y + t * y * (1.0 - y) * (1.0 - 2.0 * x),
            CopulaFamily::Independent => y,
        };
        h.clamp(0.0, 1.0)
    }

    /// `h^{2|1}`: `P(V <= v | U = u) = ∂C/∂u`.
    pub fn h_v_given_u(&self, u: f64, v: f64) -> Result<f64> {
        if !interior(u) {
            return Err(Error::BoundaryInput { u, v });
        }
        check_unit("v", v)?;
        Ok(self.cond_cdf(u, v))
    }

    /// `h^{1|2}`: `P(U <= u | V = v) = ∂C/∂v`.
    pub fn h_u_given_v(&self, u: f64, v: f64) -> Result<f64> {
        if !interior(v) {
            return Err(Error::BoundaryInput { u, v });
        }
        check_unit("u", u)?;
        Ok(self.cond_cdf(v, u))
    }

    /// Both h-functions at a clamped interior point: `(h^{1|2}, h^{2|1})`.
    pub(crate) fn h_pair_clamped(&self, u: f64, v: f64) -> (f64, f64) {
        let u = clamp_pit(u);
        let v = clamp_pit(v);
        (self.cond_cdf(v, u), self.cond_cdf(u, v))
    }

    /// Solves `P(Y <= y | X = x) = w` for `y`.
    pub fn inverse_conditional(&self, x: f64, w: f64) -> f64 {
        if self.is_independent() {
            return w;
        }
        let t = self.theta;
        match self.family {
            CopulaFamily::Clayton => {
                // y^-θ = 1 + x^-θ (w^{-θ/(1+θ)} - 1)
                let k = (-t / (1.0 + t) * w.ln()).exp_m1();
                let ln_y_neg = softplus(-t * x.ln() + k.ln());
                (-ln_y_neg / t).exp()
            }
            _ => bisect_increasing(|y| self.cond_cdf(x, y) - w, 0.0, 1.0, SAMPLE_BISECT_TOL),
        }
    }

    /// `n` pairs by conditional inversion; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<(f64, f64)> = (0..n).map(|_| (rng.sample(Open01), rng.sample(Open01))).collect();
        Ok(draws
            .into_iter()
            .map(|(u, w)| (u, self.inverse_conditional(u, w)))
            .collect())
    }
}

pub fn copula_cdf(family: CopulaFamily, theta: f64, u: f64, v: f64) -> Result<f64> {
    Copula::new(family, theta)?.cdf(u, v)
}

pub fn copula_density(family: CopulaFamily, theta: f64, u: f64, v: f64) -> Result<f64> {
    Copula::new(family, theta)?.density(u, v)
}

pub fn h_u_given_v(family: CopulaFamily, theta: f64, u: f64, v: f64) -> Result<f64> {
    Copula::new(family, theta)?.h_u_given_v(u, v)
}

pub fn h_v_given_u(family: CopulaFamily, theta: f64, u: f64, v: f64) -> Result<f64> {
    Copula::new(family, theta)?.h_v_given_u(u, v)
}

pub fn sample_copula(family: CopulaFamily, theta: f64, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    Copula::new(family, theta)?.sample(n, seed)
}

pub fn clamp_pit(u: f64) -> f64 {
    u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)
}

/// Rank-based pseudo-observations `rank(x_i) / (n + 1)`.
pub fn empirical_pit(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    stats::ranks(xs).into_iter().map(|r| r / (n + 1.0)).collect()
}

/// How the copula input is obtained from the raw series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PitMethod {
    /// Through the fitted marginal CDF.
    Parametric,
    /// Through normalized ranks.
    Empirical,
}

impl FromStr for PitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parametric" => Ok(PitMethod::Parametric),
            "empirical" => Ok(PitMethod::Empirical),
            other => Err(Error::InvalidArgument(format!("unknown PIT method `{other}`"))),
        }
    }
}

impl fmt::Display for PitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PitMethod::Parametric => "parametric",
            PitMethod::Empirical => "empirical",
        })
    }
}

/// A copula fitted by maximum likelihood on pseudo-observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopulaModel {
    pub family: CopulaFamily,
    pub theta: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n: usize,
}

impl CopulaModel {
    pub fn copula(&self) -> Copula {
        match self.theta {
            Some(t) => Copula {
                family: self.family,
                theta: t,
            },
            None => Copula::independent(),
        }
    }

    fn from_copula(copula: Copula, loglik: f64, n: usize) -> Self {
        let k = copula.family.n_params();
        Self {
            family: copula.family,
            theta: copula.theta(),
            loglik,
            aic: crate::margins::aic(loglik, k),
            n,
        }
    }
}

/// `Σ ln c(u_i, v_i)` with inputs clamped away from the boundary.
pub fn copula_loglik(copula: &Copula, uv: &[(f64, f64)], exec: Exec) -> f64 {
    exec.sum(uv, |&(u, v)| copula.ln_density_unchecked(clamp_pit(u), clamp_pit(v)))
}

/// Maximum-likelihood θ for one family (second IFM step).
pub fn fit_copula_ifm(uv: &[(f64, f64)], family: CopulaFamily) -> Result<CopulaModel> {
    fit_copula_ifm_with(uv, family, Exec::default())
}

pub fn fit_copula_ifm_with(uv: &[(f64, f64)], family: CopulaFamily, exec: Exec) -> Result<CopulaModel> {
    if uv.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples {
            needed: MIN_PAIRS,
            got: uv.len(),
        });
    }
    if let Some(&(u, v)) = uv.iter().find(|(u, v)| !interior(*u) || !interior(*v)) {
        return Err(Error::BoundaryInput { u, v });
    }
    let n = uv.len();
    if family == CopulaFamily::Independent {
        return Ok(CopulaModel::from_copula(Copula::independent(), 0.0, n));
    }
    let uv: Vec<(f64, f64)> = uv.iter().map(|&(u, v)| (clamp_pit(u), clamp_pit(v))).collect();
    let loglik_at = |theta: f64| {
        let c = Copula { family, theta };
        exec.sum(&uv, |&(u, v)| c.ln_density_unchecked(u, v))
    };
    let (lo, hi) = family.coord_bounds();
    let (coord, ll) = golden_section_max(|c| loglik_at(family.theta_from_coord(c)), lo, hi, GOLDEN_TOL);
    let mut theta = family.theta_from_coord(coord);
    let mut best = ll;

    // one Newton polish step in θ
    let h = 1e-5 * theta.abs().max(1.0);
    if family.contains(theta - h) && family.contains(theta + h) {
        let (lp, lm) = (loglik_at(theta + h), loglik_at(theta - h));
        let grad = (lp - lm) / (2.0 * h);
        let curv = (lp - 2.0 * best + lm) / (h * h);
        if curv < 0.0 && grad.is_finite() && curv.is_finite() {
            let cand = theta - grad / curv;
            if family.contains(cand) && (cand - theta).abs() < 10.0 * h {
                let lc = loglik_at(cand);
                if lc >= best {
                    theta = cand;
                    best = lc;
                }
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            best: vec![theta],
        });
    }
    Ok(CopulaModel::from_copula(Copula { family, theta }, best, n))
}

/// Fits every family and keeps the lowest AIC (ties: fewer parameters, then
/// the order Independent, Clayton, Gumbel, EFGM). Returns the winner and all
/// successful candidate fits.
pub fn select_copula(
    uv: &[(f64, f64)],
    families: &[CopulaFamily],
    exec: Exec,
) -> Result<(CopulaModel, Vec<CopulaModel>)> {
    if families.is_empty() {
        return Err(Error::InvalidArgument("no copula families to select from".into()));
    }
    let fits = exec.map(families, |&f| (f, fit_copula_ifm_with(uv, f, exec)));
    let mut failures = Vec::new();
    let mut candidates = Vec::new();
    for (family, fit) in fits {
        match fit {
            Ok(m) => candidates.push(m),
            Err(e @ Error::NonConvergence { .. }) => failures.push((family.to_string(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let best = candidates
        .iter()
        .min_by_key(|m| (Total(m.aic), m.family.n_params(), m.family))
        .copied()
        .ok_or(Error::AllFitsFailed(failures))?;
    Ok((best, candidates))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Inference for the margins: marginals first, then θ on their PIT.
    Ifm,
    /// Joint maximization over marginal and copula parameters.
    FullMle,
}

impl FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ifm" => Ok(FitMethod::Ifm),
            "full_mle" | "fullmle" | "mle" => Ok(FitMethod::FullMle),
            other => Err(Error::InvalidArgument(format!("unknown fit method `{other}`"))),
        }
    }
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::Ifm => "ifm",
            FitMethod::FullMle => "full_mle",
        })
    }
}

#[derive(Debug, Clone)]
pub struct JointConfig {
    pub marginal_families: Vec<MarginalFamily>,
    pub copula_families: Vec<CopulaFamily>,
    pub method: FitMethod,
    pub pit: PitMethod,
    pub exec: Exec,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            marginal_families: MarginalFamily::ALL.to_vec(),
            copula_families: CopulaFamily::ALL.to_vec(),
            method: FitMethod::Ifm,
            pit: PitMethod::Parametric,
            exec: Exec::default(),
        }
    }
}

/// Marginals plus copula for one pair of series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointFit {
    pub marginal1: MarginalModel,
    pub marginal2: MarginalModel,
    pub copula: CopulaModel,
    pub method: FitMethod,
    pub pit: PitMethod,
    /// `Σ ln c(F1(x), F2(y)) + ln f1(x) + ln f2(y)` at the fitted parameters.
    pub total_loglik: f64,
    /// Every copula family that was fitted, in configuration order.
    pub candidates: Vec<CopulaModel>,
}

/// Full log-likelihood of the joint model on raw data.
pub fn joint_loglik(
    x: &[f64],
    y: &[f64],
    m1: &MarginalParams,
    m2: &MarginalParams,
    copula: &Copula,
    exec: Exec,
) -> f64 {
    let idx: Vec<usize> = (0..x.len()).collect();
    let (ld1, ld2) = (m1.log_density(), m2.log_density());
    exec.sum(&idx, |&i| {
        let u = clamp_pit(m1.cdf(x[i]));
        let v = clamp_pit(m2.cdf(y[i]));
        copula.ln_density_unchecked(u, v) + ld1(x[i]) + ld2(y[i])
    })
}

pub fn fit_joint(
    x: &[f64],
    y: &[f64],
    marginal_families: &[MarginalFamily],
    copula_families: &[CopulaFamily],
    method: FitMethod,
) -> Result<JointFit> {
    let cfg = JointConfig {
        marginal_families: marginal_families.to_vec(),
        copula_families: copula_families.to_vec(),
        method,
        ..Default::default()
    };
    fit_joint_with(x, y, &cfg)
}

pub fn fit_joint_with(x: &[f64], y: &[f64], cfg: &JointConfig) -> Result<JointFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples {
            needed: MIN_PAIRS,
            got: x.len(),
        });
    }
    if cfg.method == FitMethod::FullMle && cfg.pit == PitMethod::Empirical {
        return Err(Error::InvalidArgument(
            "full maximum likelihood requires parametric PIT".into(),
        ));
    }
    let exec = cfg.exec;
    let margins = exec.map(&[x, y], |s| select_marginal_with(s, &cfg.marginal_families, exec));
    let mut margins = margins.into_iter();
    let m1 = margins.next().expect("two margins")?;
    let m2 = margins.next().expect("two margins")?;

    let uv: Vec<(f64, f64)> = match cfg.pit {
        PitMethod::Parametric => x
            .iter()
            .zip(y)
            .map(|(&a, &b)| (clamp_pit(m1.cdf(a)), clamp_pit(m2.cdf(b))))
            .collect(),
        PitMethod::Empirical => empirical_pit(x).into_iter().zip(empirical_pit(y)).collect(),
    };
    let (copula, candidates) = select_copula(&uv, &cfg.copula_families, exec)?;
    let total = joint_loglik(x, y, &m1.params, &m2.params, &copula.copula(), exec);
    let ifm = JointFit {
        marginal1: m1,
        marginal2: m2,
        copula,
        method: FitMethod::Ifm,
        pit: cfg.pit,
        total_loglik: total,
        candidates,
    };
    match cfg.method {
        FitMethod::Ifm => Ok(ifm),
        FitMethod::FullMle => refine_full_mle(x, y, ifm, exec),
    }
}

struct Standardizer {
    center: f64,
    spread: f64,
}

impl Standardizer {
    fn new(xs: &[f64]) -> Self {
        let center = stats::median(xs);
        let spread = stats::variance(xs).sqrt();
        Self { center, spread }
    }

    fn params_to_std(&self, p: MarginalParams) -> MarginalParams {
        let (c, s) = (self.center, self.spread);
        match p {
            MarginalParams::Gaussian { mu, sigma } => MarginalParams::Gaussian {
                mu: (mu - c) / s,
                sigma: sigma / s,
            },
            MarginalParams::StudentT { nu, loc, scale } => MarginalParams::StudentT {
                nu,
                loc: (loc - c) / s,
                scale: scale / s,
            },
            MarginalParams::Cauchy { x0, gamma } => MarginalParams::Cauchy {
                x0: (x0 - c) / s,
                gamma: gamma / s,
            },
        }
    }

    fn params_from_std(&self, p: MarginalParams) -> MarginalParams {
        let (c, s) = (self.center, self.spread);
        match p {
            MarginalParams::Gaussian { mu, sigma } => MarginalParams::Gaussian {
                mu: c + s * mu,
                sigma: s * sigma,
            },
            MarginalParams::StudentT { nu, loc, scale } => MarginalParams::StudentT {
                nu,
                loc: c + s * loc,
                scale: s * scale,
            },
            MarginalParams::Cauchy { x0, gamma } => MarginalParams::Cauchy {
                x0: c + s * x0,
                gamma: s * gamma,
            },
        }
    }
}

/// Joint Nelder–Mead over both marginal parameter vectors and θ, started at
/// the IFM solution with the IFM-selected families.
fn refine_full_mle(x: &[f64], y: &[f64], ifm: JointFit, exec: Exec) -> Result<JointFit> {
    let (f1, f2, fc) = (ifm.marginal1.family(), ifm.marginal2.family(), ifm.copula.family);
    let (sx, sy) = (Standardizer::new(x), Standardizer::new(y));
    let zx: Vec<f64> = x.iter().map(|a| (a - sx.center) / sx.spread).collect();
    let zy: Vec<f64> = y.iter().map(|b| (b - sy.center) / sy.spread).collect();

    let c1 = sx.params_to_std(ifm.marginal1.params).to_unconstrained();
    let c2 = sy.params_to_std(ifm.marginal2.params).to_unconstrained();
    let (d1, d2) = (c1.len(), c2.len());
    let mut start = c1;
    start.extend(c2);
    if let Some(theta) = ifm.copula.theta {
        start.push(fc.coord_from_theta(theta));
    }

    let decode = |c: &[f64]| {
        let p1 = MarginalParams::from_unconstrained(f1, &c[..d1]);
        let p2 = MarginalParams::from_unconstrained(f2, &c[d1..d1 + d2]);
        let copula = match fc {
            CopulaFamily::Independent => Copula::independent(),
            _ => Copula {
                family: fc,
                theta: fc.theta_from_coord(c[d1 + d2]),
            },
        };
        (p1, p2, copula)
    };
    let n = x.len() as f64;
    let objective = |c: &[f64]| {
        let (p1, p2, copula) = decode(c);
        -joint_loglik(&zx, &zy, &p1, &p2, &copula, exec) / n
    };
    let opts = NelderMeadOptions {
        max_iterations: 1_000 * start.len(),
        ..Default::default()
    };
    let result = nelder_mead(objective, &start, opts);
    let (p1, p2, copula) = decode(&result.x);
    let (p1, p2) = (sx.params_from_std(p1), sy.params_from_std(p2));
    if !result.converged {
        return Err(Error::NonConvergence {
            iterations: result.iterations,
            best: result.x,
        });
    }

    let m1 = MarginalModel::evaluate(p1, x, exec);
    let m2 = MarginalModel::evaluate(p2, y, exec);
    let uv: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (clamp_pit(p1.cdf(a)), clamp_pit(p2.cdf(b))))
        .collect();
    let cop = CopulaModel::from_copula(copula, copula_loglik(&copula, &uv, exec), x.len());
    let total = joint_loglik(x, y, &p1, &p2, &copula, exec);
    Ok(JointFit {
        marginal1: m1,
        marginal2: m2,
        copula: cop,
        method: FitMethod::FullMle,
        pit: PitMethod::Parametric,
        total_loglik: total,
        candidates: ifm.candidates,
    })
}
