//! Price loading, log returns, hedge ratio and spread construction.
//!
//! Input is a long-format CSV with header `timestamp,symbol,close`, one row
//! per (timestamp, symbol). Timestamps are integer epoch seconds.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Timestamp = i64;

/// Which transform of the log returns feeds a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Returns,
    /// Running sum of log returns.
    Cumulative,
}

impl SeriesKind {
    pub fn apply(self, series: &ReturnSeries) -> ReturnSeries {
        match self {
            SeriesKind::Returns => series.clone(),
            SeriesKind::Cumulative => series.cumulative(),
        }
    }
}

impl std::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriesKind::Returns => "returns",
            SeriesKind::Cumulative => "cumulative",
        })
    }
}

impl std::str::FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "returns" => Ok(SeriesKind::Returns),
            "cumulative" => Ok(SeriesKind::Cumulative),
            other => Err(Error::InvalidArgument(format!("unknown series kind `{other}`"))),
        }
    }
}

/// Closing prices of one asset, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    symbol: String,
    observations: Vec<(Timestamp, f64)>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, observations: Vec<(Timestamp, f64)>) -> Result<Self> {
        let symbol = symbol.into();
        if observations.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: observations.len(),
            });
        }
        for (row, &(_, price)) in observations.iter().enumerate() {
            if price.is_nan() || price <= 0.0 || price.is_infinite() {
                return Err(Error::NonPositivePrice { row: row + 1, price });
            }
        }
        check_increasing(&symbol, &observations)?;
        Ok(Self { symbol, observations })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn observations(&self) -> &[(Timestamp, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Log returns of one asset; each return is stamped with the later price's time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    symbol: String,
    observations: Vec<(Timestamp, f64)>,
}

impl ReturnSeries {
    pub fn new(symbol: impl Into<String>, observations: Vec<(Timestamp, f64)>) -> Result<Self> {
        let symbol = symbol.into();
        check_increasing(&symbol, &observations)?;
        Ok(Self { symbol, observations })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn observations(&self) -> &[(Timestamp, f64)] {
        &self.observations
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|&(_, r)| r).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Running sum of the log returns (cumulative log return at each timestamp).
    pub fn cumulative(&self) -> ReturnSeries {
        let mut acc = 0.0;
        let observations = self
            .observations
            .iter()
            .map(|&(t, r)| {
                acc += r;
                (t, acc)
            })
            .collect();
        ReturnSeries {
            symbol: self.symbol.clone(),
            observations,
        }
    }
}

/// `S_t = base_t - beta * asset_t` on the common timestamps of both legs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadSeries {
    pub base_symbol: String,
    pub asset_symbol: String,
    pub beta: f64,
    observations: Vec<(Timestamp, f64)>,
}

impl SpreadSeries {
    pub fn observations(&self) -> &[(Timestamp, f64)] {
        &self.observations
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|&(_, s)| s).collect()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.observations.iter().map(|&(t, _)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

fn check_increasing(symbol: &str, obs: &[(Timestamp, f64)]) -> Result<()> {
    for w in obs.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::DuplicateTimestamp {
                symbol: symbol.to_string(),
                timestamp: w[0].0,
            });
        }
        if w[1].0 < w[0].0 {
            return Err(Error::InvalidArgument(format!(
                "timestamps for `{symbol}` are not increasing at {}",
                w[1].0
            )));
        }
    }
    Ok(())
}

/// Parses every symbol in a long-format price CSV.
pub fn load_all_prices(path: impl AsRef<Path>) -> Result<BTreeMap<String, PriceSeries>> {
    let file = std::fs::File::open(path.as_ref())?;
    let raw = read_rows(file)?;
    let mut out = BTreeMap::new();
    for (symbol, rows) in raw {
        out.insert(symbol.clone(), finish_series(symbol, rows)?);
    }
    Ok(out)
}

/// Loads the rows for `symbol`, ignoring every other symbol.
pub fn load_prices(path: impl AsRef<Path>, symbol: &str) -> Result<PriceSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut raw = read_rows(file)?;
    let rows = raw
        .remove(symbol)
        .ok_or_else(|| Error::MissingSymbol(symbol.to_string()))?;
    finish_series(symbol.to_string(), rows)
}

/// (timestamp, price, csv line) rows grouped by symbol, in file order.
type RawRows = BTreeMap<String, Vec<(Timestamp, f64, usize)>>;

fn read_rows<R: std::io::Read>(reader: R) -> Result<RawRows> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let expected = ["timestamp", "symbol", "close"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::MalformedRow {
            row: 1,
            reason: format!(
                "expected header `timestamp,symbol,close`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut out: RawRows = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            row: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let ts: Timestamp = record[0].parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("bad timestamp `{}`", &record[0]),
        })?;
        let symbol = record[1].to_string();
        if symbol.is_empty() {
            return Err(Error::MalformedRow {
                row,
                reason: "empty symbol".into(),
            });
        }
        let price: f64 = record[2].parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("bad price `{}`", &record[2]),
        })?;
        if !price.is_finite() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("non-finite price `{}`", &record[2]),
            });
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice { row, price });
        }
        out.entry(symbol).or_default().push((ts, price, row));
    }
    Ok(out)
}

fn finish_series(symbol: String, mut rows: Vec<(Timestamp, f64, usize)>) -> Result<PriceSeries> {
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp {
            symbol,
            timestamp: w[0].0,
        });
    }
    PriceSeries::new(symbol, rows.into_iter().map(|(t, p, _)| (t, p)).collect())
}

/// `r_k = ln(p_{k+1} / p_k)`, stamped at the time of `p_{k+1}`.
pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let obs = prices.observations();
    if obs.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: obs.len(),
        });
    }
    let observations = obs.windows(2).map(|w| (w[1].0, (w[1].1 / w[0].1).ln())).collect();
    Ok(ReturnSeries {
        symbol: prices.symbol().to_string(),
        observations,
    })
}

/// Inner join of two series on exact timestamp matches.
pub fn align(a: &[(Timestamp, f64)], b: &[(Timestamp, f64)]) -> Vec<(Timestamp, f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1, b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// OLS slope of `base` on `asset` (with intercept) over the common timestamps.
pub fn ols_beta(base: &ReturnSeries, asset: &ReturnSeries) -> Result<f64> {
    let joined = align(base.observations(), asset.observations());
    if joined.len() < 2 {
        return Err(Error::InsufficientOverlap { common: joined.len() });
    }
    let n = joined.len() as f64;
    let mb = joined.iter().map(|r| r.1).sum::<f64>() / n;
    let ma = joined.iter().map(|r| r.2).sum::<f64>() / n;
    let (mut sab, mut saa, mut sq) = (0.0, 0.0, 0.0);
    for &(_, b, a) in &joined {
        sab += (b - mb) * (a - ma);
        saa += (a - ma) * (a - ma);
        sq += a * a;
    }
    if saa <= 1e-24 * sq || saa == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    Ok(sab / saa)
}

pub fn build_spread(base: &ReturnSeries, asset: &ReturnSeries, beta: f64) -> Result<SpreadSeries> {
    let joined = align(base.observations(), asset.observations());
    if joined.is_empty() {
        return Err(Error::InsufficientOverlap { common: 0 });
    }
    Ok(SpreadSeries {
        base_symbol: base.symbol().to_string(),
        asset_symbol: asset.symbol().to_string(),
        beta,
        observations: joined.into_iter().map(|(t, b, a)| (t, b - beta * a)).collect(),
    })
}

/// Spread from explicit observations, e.g. for synthetic data.
pub fn spread_from_values(
    base_symbol: impl Into<String>,
    asset_symbol: impl Into<String>,
    beta: f64,
    observations: Vec<(Timestamp, f64)>,
) -> Result<SpreadSeries> {
    let asset_symbol = asset_symbol.into();
    check_increasing(&asset_symbol, &observations)?;
    Ok(SpreadSeries {
        base_symbol: base_symbol.into(),
        asset_symbol,
        beta,
        observations,
    })
}
