//! Run configuration: a flat `key = value` file, overridden by flags.

use std::fmt::Write;
use std::path::PathBuf;
use std::str::FromStr;

use copair::copula::{CopulaFamily, FitMethod, PitMethod};
use copair::ingest::SeriesKind;
use copair::margins::MarginalFamily;
use copair::pairs::EG_CRITICAL_5PCT;
use copair::signal::{check_epsilon, DEFAULT_EPSILON};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub base_symbol: Option<String>,
    pub epsilon: f64,
    pub marginal_families: Vec<MarginalFamily>,
    pub copula_families: Vec<CopulaFamily>,
    pub fit_method: FitMethod,
    pub spread_on: SeriesKind,
    pub pit: PitMethod,
    pub eg_lags: usize,
    pub top_k: usize,
    pub seed: u64,
    pub eg_critical_value: f64,
    pub coint_on: SeriesKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            base_symbol: None,
            epsilon: DEFAULT_EPSILON,
            marginal_families: MarginalFamily::ALL.to_vec(),
            copula_families: CopulaFamily::ALL.to_vec(),
            fit_method: FitMethod::Ifm,
            spread_on: SeriesKind::Returns,
            pit: PitMethod::Parametric,
            eg_lags: 1,
            top_k: 10,
            seed: 42,
            eg_critical_value: EG_CRITICAL_5PCT,
            coint_on: SeriesKind::Cumulative,
        }
    }
}

/// Keys in the order used by [`RunConfig::to_file_string`].
pub const KEYS: [&str; 13] = [
    "data_path",
    "base_symbol",
    "epsilon",
    "marginal_families",
    "copula_families",
    "fit_method",
    "spread_on",
    "pit",
    "eg_lags",
    "top_k",
    "seed",
    "eg_critical_value",
    "coint_on",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::config(format!("{key}: {e}")))
}

fn parse_list<T: FromStr + PartialEq>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: T = parse_value(key, item)?;
        if out.contains(&v) {
            return Err(CliError::config(format!("{key}: `{item}` listed twice")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::config(format!("{key}: list must not be empty")));
    }
    Ok(out)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "data_path" => self.data_path = Some(PathBuf::from(value)),
            "base_symbol" => self.base_symbol = Some(value.to_string()),
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "marginal_families" => self.marginal_families = parse_list(key, value)?,
            "copula_families" => self.copula_families = parse_list(key, value)?,
            "fit_method" => self.fit_method = parse_value(key, value)?,
            "spread_on" => self.spread_on = parse_value(key, value)?,
            "pit" => self.pit = parse_value(key, value)?,
            "eg_lags" => self.eg_lags = parse_value(key, value)?,
            "top_k" => self.top_k = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "eg_critical_value" => self.eg_critical_value = parse_value(key, value)?,
            "coint_on" => self.coint_on = parse_value(key, value)?,
            other => return Err(CliError::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a config file on top of the defaults. Blank lines and lines
    /// starting with `#` are ignored; each key may appear once.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::config(format!(
                    "config line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
            cfg.set(key, value)?;
            seen.push(key);
        }
        Ok(cfg)
    }

    /// Normalized file form: every set key, one per line, in [`KEYS`] order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        if let Some(p) = &self.data_path {
            line("data_path", p.display().to_string());
        }
        if let Some(b) = &self.base_symbol {
            line("base_symbol", b.clone());
        }
        line("epsilon", self.epsilon.to_string());
        line("marginal_families", join(&self.marginal_families));
        line("copula_families", join(&self.copula_families));
        line("fit_method", self.fit_method.to_string());
        line("spread_on", self.spread_on.to_string());
        line("pit", self.pit.to_string());
        line("eg_lags", self.eg_lags.to_string());
        line("top_k", self.top_k.to_string());
        line("seed", self.seed.to_string());
        line("eg_critical_value", self.eg_critical_value.to_string());
        line("coint_on", self.coint_on.to_string());
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_epsilon(self.epsilon).map_err(|e| CliError::config(e.to_string()))?;
        if self.top_k == 0 {
            return Err(CliError::config("top_k must be at least 1"));
        }
        if !self.eg_critical_value.is_finite() {
            return Err(CliError::config("eg_critical_value must be finite"));
        }
        if self.fit_method == FitMethod::FullMle && self.pit == PitMethod::Empirical {
            return Err(CliError::config("fit_method = full_mle requires pit = parametric"));
        }
        if self.base_symbol.as_deref() == Some("") {
            return Err(CliError::config("base_symbol must not be empty"));
        }
        Ok(())
    }

    pub fn data_path(&self) -> Result<&PathBuf, CliError> {
        self.data_path
            .as_ref()
            .ok_or_else(|| CliError::config("data_path is required (config key or --data)"))
    }

    pub fn base_symbol(&self) -> Result<&str, CliError> {
        self.base_symbol
            .as_deref()
            .ok_or_else(|| CliError::config("base_symbol is required (config key or --base)"))
    }
}
