//! Order book imbalance, trade flow imbalance, past returns and mean
//! divergence features, plus forward-return targets.
//!
//! All series are indexed by grid point and hold `None` where an input is
//! absent or history is insufficient.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{BookSnapshot, Level, MarketSeries, SampledPanel};
use crate::stats;
use crate::BPS;

/// Band around the touch used by [`select_depth_n`], in basis points.
pub const DEPTH_BAND_BPS: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("book side is empty")]
    EmptySide,
    #[error("insufficient depth: requested {requested} USD, available {available} USD")]
    InsufficientDepth { requested: f64, available: f64 },
    #[error("size must be at least 1 USD, got {0}")]
    BadSize(f64),
    #[error("invalid feature key {0:?}")]
    BadKey(String),
    #[error("feature csv: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    IMBa,
    IMBb,
    TFI,
    PRET,
    DIV,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::IMBa => "IMBa",
            Family::IMBb => "IMBb",
            Family::TFI => "TFI",
            Family::PRET => "PRET",
            Family::DIV => "DIV",
        }
    }

    pub const ALL: [Family; 5] = [Family::IMBa, Family::IMBb, Family::TFI, Family::PRET, Family::DIV];
}

/// Identifies one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureKey {
    pub market_id: String,
    pub family: Family,
    pub horizon_ms: Option<i64>,
    pub counterparty: Option<String>,
}

impl FeatureKey {
    pub fn imb(market: &str, family: Family) -> Self {
        FeatureKey { market_id: market.into(), family, horizon_ms: None, counterparty: None }
    }

    pub fn tfi(market: &str, horizon_ms: i64) -> Self {
        FeatureKey { market_id: market.into(), family: Family::TFI, horizon_ms: Some(horizon_ms), counterparty: None }
    }

    pub fn pret(market: &str, horizon_ms: i64) -> Self {
        FeatureKey { market_id: market.into(), family: Family::PRET, horizon_ms: Some(horizon_ms), counterparty: None }
    }

    pub fn div(market: &str, counterparty: &str, lookback_ms: i64) -> Self {
        FeatureKey {
            market_id: market.into(),
            family: Family::DIV,
            horizon_ms: Some(lookback_ms),
            counterparty: Some(counterparty.into()),
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.horizon_ms.map(|h| h.to_string()).unwrap_or_default();
        match &self.counterparty {
            Some(c) => write!(f, "{}|DIV({})|{}", self.market_id, c, h),
            None => write!(f, "{}|{}|{}", self.market_id, self.family.name(), h),
        }
    }
}

impl FromStr for FeatureKey {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::BadKey(s.to_string());
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let horizon = if parts[2].is_empty() { None } else { Some(parts[2].parse().map_err(|_| bad())?) };
        let (family, counterparty) = match parts[1] {
            "IMBa" => (Family::IMBa, None),
            "IMBb" => (Family::IMBb, None),
            "TFI" => (Family::TFI, None),
            "PRET" => (Family::PRET, None),
            other => {
                let c = other.strip_prefix("DIV(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
                (Family::DIV, Some(c.to_string()))
            }
        };
        let key = FeatureKey { market_id: parts[0].to_string(), family, horizon_ms: horizon, counterparty };
        let needs_horizon = !matches!(family, Family::IMBa | Family::IMBb);
        if needs_horizon != key.horizon_ms.is_some() {
            return Err(bad());
        }
        if key.counterparty.as_deref() == Some(key.market_id.as_str()) {
            return Err(bad());
        }
        Ok(key)
    }
}

impl Serialize for FeatureKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Column name of the forward-return target of `market` at horizon `delta_ms`.
pub fn target_name(market: &str, delta_ms: i64) -> String {
    format!("fret|{market}|{delta_ms}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BookSide {
    Bid,
    Ask,
}

/// `(b - a) / (b + a)` on top-of-book sizes.
pub fn classical_imbalance(book: &BookSnapshot) -> Result<f64, FeatureError> {
    let b = book.best_bid().ok_or(FeatureError::EmptySide)?.size;
    let a = book.best_ask().ok_or(FeatureError::EmptySide)?.size;
    Ok((b - a) / (b + a))
}

fn levels(book: &BookSnapshot, side: BookSide) -> &[Level] {
    match side {
        BookSide::Bid => &book.bids,
        BookSide::Ask => &book.asks,
    }
}

/// Average price of the first `size` USD on one side of the book.
fn walk(levels: &[Level], size: f64) -> f64 {
    let mut remaining = size;
    let mut notional = 0.0;
    for l in levels {
        let take = l.size.min(remaining);
        notional += take * l.price;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    notional / (size - remaining.max(0.0))
}

/// Average price paid walking `side` until `size` USD is consumed.
pub fn avg_exec_price(book: &BookSnapshot, side: BookSide, size: f64) -> Result<f64, FeatureError> {
    if !(size >= 1.0) {
        return Err(FeatureError::BadSize(size));
    }
    let lv = levels(book, side);
    let top = lv.first().ok_or(FeatureError::EmptySide)?;
    if size <= top.size {
        return Ok(top.price);
    }
    let available: f64 = lv.iter().map(|l| l.size).sum();
    if available < size {
        return Err(FeatureError::InsufficientDepth { requested: size, available });
    }
    Ok(walk(lv, size))
}

/// Depth parameter N of one market, in USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthParameter {
    pub market_id: String,
    pub n: f64,
}

/// USD liquidity within `DEPTH_BAND_BPS` of the touch on `side`.
pub fn band_liquidity(book: &BookSnapshot, side: BookSide) -> f64 {
    let lv = levels(book, side);
    let Some(top) = lv.first() else { return 0.0 };
    let band = DEPTH_BAND_BPS / BPS;
    lv.iter()
        .take_while(|l| match side {
            BookSide::Ask => l.price <= top.price * (1.0 + band),
            BookSide::Bid => l.price >= top.price * (1.0 - band),
        })
        .map(|l| l.size)
        .sum()
}

/// Mean of the per-side median in-band liquidity, floored at 1.
pub fn select_depth_n<'a>(market_id: &str, books: impl IntoIterator<Item = &'a BookSnapshot>) -> DepthParameter {
    let (mut asks, mut bids) = (Vec::new(), Vec::new());
    for b in books {
        asks.push(band_liquidity(b, BookSide::Ask));
        bids.push(band_liquidity(b, BookSide::Bid));
    }
    let n = match (stats::median(&asks), stats::median(&bids)) {
        (Some(a), Some(b)) => ((a + b) / 2.0).max(1.0),
        _ => 1.0,
    };
    DepthParameter { market_id: market_id.into(), n }
}

/// Imbalance in basis points; `clamped` marks a sample where the book was
/// shallower than N and the whole side was walked instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imbalance {
    pub bpts: f64,
    pub clamped: bool,
}

/// `IMBa = (p_a(N)/p_a(1) - 1)·1e4`, `IMBb = (p_b(1)/p_b(N) - 1)·1e4`.
pub fn imbalance(book: &BookSnapshot, n: f64, side: BookSide) -> Result<Imbalance, FeatureError> {
    let lv = levels(book, side);
    let top = lv.first().ok_or(FeatureError::EmptySide)?.price;
    let (deep, clamped) = match avg_exec_price(book, side, n) {
        Ok(p) => (p, false),
        Err(FeatureError::InsufficientDepth { .. }) => (walk(lv, n), true),
        Err(e) => return Err(e),
    };
    let bpts = match side {
        BookSide::Ask => (deep / top - 1.0) * BPS,
        BookSide::Bid => (top / deep - 1.0) * BPS,
    };
    Ok(Imbalance { bpts: bpts.max(0.0), clamped })
}

/// Imbalance column of one market; absent where the book is absent or clamped.
pub fn imbalance_series(market: &MarketSeries, n: f64, side: BookSide) -> Vec<Option<f64>> {
    (0..market.book_at.len())
        .map(|i| {
            let book = market.book(i)?;
            match imbalance(book, n, side) {
                Ok(v) if !v.clamped => Some(v.bpts),
                _ => None,
            }
        })
        .collect()
}

/// `B - S` over the last `steps` buckets ending at each grid point.
pub fn tfi_series(buy: &[f64], sell: &[f64], steps: usize) -> Vec<Option<f64>> {
    (0..buy.len())
        .map(|i| {
            if steps == 0 || i + 1 < steps {
                return None;
            }
            let lo = i + 1 - steps;
            let b: f64 = buy[lo..=i].iter().sum();
            let s: f64 = sell[lo..=i].iter().sum();
            Some(b - s)
        })
        .collect()
}

/// `(p_t / p_{t-δ} - 1)·1e4` on the bucket VWAP.
pub fn pret_series(vwap: &[Option<f64>], steps: usize) -> Vec<Option<f64>> {
    (0..vwap.len())
        .map(|i| {
            let j = i.checked_sub(steps)?;
            Some((vwap[i]? / vwap[j]? - 1.0) * BPS)
        })
        .collect()
}

/// Forward return `(p_{t+δ} / p_t - 1)·1e4`.
pub fn fret_series(vwap: &[Option<f64>], steps: usize) -> Vec<Option<f64>> {
    let n = vwap.len();
    (0..n)
        .map(|i| {
            let j = i + steps;
            if j >= n {
                return None;
            }
            Some((vwap[j]? / vwap[i]? - 1.0) * BPS)
        })
        .collect()
}

/// Basis-point difference `(p/q - 1)·1e4`.
pub fn price_divergence(p: f64, q: f64) -> f64 {
    (p / q - 1.0) * BPS
}

/// Sums over each trailing window of length `w`, computed from per-block
/// prefix and suffix sums so that every value depends only on the samples
/// inside its own window.
fn windowed_sums(x: &[f64], w: usize) -> Vec<Option<f64>> {
    let n = x.len();
    if w == 0 {
        return vec![None; n];
    }
    let mut prefix = vec![0.0; n];
    let mut suffix = vec![0.0; n];
    for start in (0..n).step_by(w) {
        let end = (start + w).min(n);
        let mut acc = 0.0;
        for k in start..end {
            acc += x[k];
            prefix[k] = acc;
        }
        acc = 0.0;
        for k in (start..end).rev() {
            acc += x[k];
            suffix[k] = acc;
        }
    }
    (0..n)
        .map(|i| {
            if i + 1 < w {
                return None;
            }
            let lo = i + 1 - w;
            if lo % w == 0 {
                Some(prefix[i])
            } else {
                Some(suffix[lo] + prefix[i])
            }
        })
        .collect()
}

/// Mean divergence of market `p` from market `q` with a trailing window of
/// `steps` grid samples: `d_t - mean(d over the window)`.
pub fn div_series(p: &[Option<f64>], q: &[Option<f64>], steps: usize) -> Vec<Option<f64>> {
    let n = p.len();
    let d: Vec<Option<f64>> = (0..n)
        .map(|i| Some(price_divergence(p[i]?, q[i]?)))
        .collect();
    let dense: Vec<f64> = d.iter().map(|v| v.unwrap_or(0.0)).collect();
    let missing: Vec<f64> = d.iter().map(|v| if v.is_none() { 1.0 } else { 0.0 }).collect();
    let sums = windowed_sums(&dense, steps);
    let gaps = windowed_sums(&missing, steps);
    (0..n)
        .map(|i| {
            let (s, g) = (sums[i]?, gaps[i]?);
            if g > 0.0 {
                return None;
            }
            Some(d[i]? - s / steps as f64)
        })
        .collect()
}

/// Which horizons each family is evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub tfi_ms: Vec<i64>,
    pub pret_ms: Vec<i64>,
    pub div_ms: Vec<i64>,
    pub target_ms: Vec<i64>,
}

impl Default for FeatureGrid {
    fn default() -> Self {
        FeatureGrid {
            tfi_ms: vec![100, 250, 500, 1000, 2000],
            pret_ms: vec![100, 250, 500, 1000, 2000],
            div_ms: vec![5_000, 9_000, 19_000, 38_000, 75_000, 150_000, 300_000, 600_000],
            target_ms: vec![500, 1000],
        }
    }
}

/// Named feature and target columns on a shared timestamp index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureFrame {
    pub ts: Vec<i64>,
    pub columns: indexmap::IndexMap<String, Vec<Option<f64>>>,
}

impl FeatureFrame {
    pub fn get(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, name: String, values: Vec<Option<f64>>) {
        debug_assert_eq!(values.len(), self.ts.len());
        self.columns.insert(name, values);
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureFrame {
        FeatureFrame {
            ts: self.ts[range.clone()].to_vec(),
            columns: self.columns.iter().map(|(k, v)| (k.clone(), v[range.clone()].to_vec())).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "ts_ms")?;
        for k in self.columns.keys() {
            write!(out, ",{k}")?;
        }
        writeln!(out)?;
        for i in 0..self.ts.len() {
            write!(out, "{}", self.ts[i])?;
            for v in self.columns.values() {
                match v[i] {
                    Some(x) => write!(out, ",{x}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<FeatureFrame, FeatureError> {
        let fmt = FeatureError::Format;
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| fmt("empty file".into()))?.map_err(|e| FeatureError::Io(e.to_string()))?;
        let names: Vec<&str> = header.split(',').collect();
        if names.first() != Some(&"ts_ms") {
            return Err(fmt("first column must be ts_ms".into()));
        }
        let mut frame = FeatureFrame::default();
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len() - 1];
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| FeatureError::Io(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != names.len() {
                return Err(fmt(format!("row {row}: wrong cell count")));
            }
            frame.ts.push(cells[0].parse().map_err(|_| fmt(format!("row {row}: bad ts")))?);
            for (c, cell) in cells[1..].iter().enumerate() {
                cols[c].push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse().map_err(|_| fmt(format!("row {row}: bad number {cell:?}")))?)
                });
            }
        }
        for (name, col) in names[1..].iter().zip(cols) {
            frame.columns.insert(name.to_string(), col);
        }
        Ok(frame)
    }
}

/// Computes every base feature and target column for every market.
///
/// `depth` gives N per market in panel order; pass `None` to select it from
/// the panel itself.
pub fn compute_features(panel: &SampledPanel, grid: &FeatureGrid, depth: Option<&[DepthParameter]>) -> FeatureFrame {
    use rayon::prelude::*;

    let step = panel.grid.step_ms;
    let steps = |ms: i64| panel.grid.steps(ms).unwrap_or(((ms + step - 1) / step).max(1) as usize);
    let depths: Vec<f64> = match depth {
        Some(d) => panel
            .markets
            .iter()
            .map(|m| d.iter().find(|p| p.market_id == m.market_id).map(|p| p.n).unwrap_or(1.0))
            .collect(),
        None => panel.markets.iter().map(|m| select_depth_n(&m.market_id, &m.books).n).collect(),
    };

    let mut jobs: Vec<(String, Box<dyn Fn() -> Vec<Option<f64>> + Send + Sync + '_>)> = Vec::new();
    for (mi, m) in panel.markets.iter().enumerate() {
        let id = &m.market_id;
        let n = depths[mi];
        jobs.push((FeatureKey::imb(id, Family::IMBa).to_string(), Box::new(move || imbalance_series(m, n, BookSide::Ask))));
        jobs.push((FeatureKey::imb(id, Family::IMBb).to_string(), Box::new(move || imbalance_series(m, n, BookSide::Bid))));
        for &h in &grid.tfi_ms {
            let s = steps(h);
            jobs.push((FeatureKey::tfi(id, h).to_string(), Box::new(move || tfi_series(&m.buy_volume, &m.sell_volume, s))));
        }
        for &h in &grid.pret_ms {
            let s = steps(h);
            jobs.push((FeatureKey::pret(id, h).to_string(), Box::new(move || pret_series(&m.vwap_price, s))));
        }
        for other in &panel.markets {
            if other.market_id == *id {
                continue;
            }
            for &h in &grid.div_ms {
                let s = steps(h);
                jobs.push((
                    FeatureKey::div(id, &other.market_id, h).to_string(),
                    Box::new(move || div_series(&m.vwap_price, &other.vwap_price, s)),
                ));
            }
        }
    }
    for m in &panel.markets {
        for &h in &grid.target_ms {
            let s = steps(h);
            jobs.push((target_name(&m.market_id, h), Box::new(move || fret_series(&m.vwap_price, s))));
        }
    }
    let computed: Vec<(String, Vec<Option<f64>>)> = jobs.into_par_iter().map(|(k, f)| (k, f())).collect();
    let mut frame = FeatureFrame { ts: panel.grid.timestamps().collect(), columns: Default::default() };
    for (k, v) in computed {
        frame.insert(k, v);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn book(bids: &[(f64, f64)], asks: &[(f64, f64)]) -> BookSnapshot {
        BookSnapshot {
            ts: 0,
            market_id: "m".into(),
            bids: bids.iter().map(|&(p, s)| Level::new(p, s)).collect(),
            asks: asks.iter().map(|&(p, s)| Level::new(p, s)).collect(),
        }
    }

    #[test]
    fn classical_imbalance_examples() {
        assert_eq!(classical_imbalance(&book(&[(99.0, 100.0)], &[(100.0, 100.0)])).unwrap(), 0.0);
        let v = classical_imbalance(&book(&[(99.0, 0.0001)], &[(100.0, 100.0)])).unwrap();
        assert!((v - (0.0001 - 100.0) / 100.0001).abs() < 1e-15);
        assert!((v + 0.999998).abs() < 1e-6);
        let v = classical_imbalance(&book(&[(99.0, 169.0)], &[(100.0, 31.0)])).unwrap();
        assert!((v - 0.69).abs() < 1e-12);
        assert_eq!(classical_imbalance(&book(&[], &[(100.0, 1.0)])), Err(FeatureError::EmptySide));
    }

    #[test]
    fn avg_exec_price_examples() {
        let b = book(&[(99.0, 10.0)], &[(100.0, 500.0)]);
        assert_eq!(avg_exec_price(&b, BookSide::Ask, 1.0).unwrap(), 100.0);
        let b = book(&[(99.0, 10.0)], &[(100.0, 300.0), (101.0, 700.0)]);
        assert!((avg_exec_price(&b, BookSide::Ask, 500.0).unwrap() - 100.4).abs() < 1e-12);
        assert!(matches!(
            avg_exec_price(&b, BookSide::Ask, 2000.0),
            Err(FeatureError::InsufficientDepth { .. })
        ));
    }

    #[test]
    fn imbalance_examples() {
        let b = book(&[(100.0, 1000.0)], &[(100.5, 300.0), (101.5, 700.0)]);
        assert_eq!(imbalance(&b, 1.0, BookSide::Ask).unwrap().bpts, 0.0);
        assert_eq!(imbalance(&b, 1.0, BookSide::Bid).unwrap().bpts, 0.0);
        assert_eq!(imbalance(&b, 500.0, BookSide::Bid).unwrap().bpts, 0.0);
        let b = book(&[(99.0, 1000.0)], &[(100.0, 300.0), (101.0, 700.0)]);
        let v = imbalance(&b, 500.0, BookSide::Ask).unwrap();
        assert!((v.bpts - 40.0).abs() < 1e-9 && !v.clamped);
        let v = imbalance(&b, 5000.0, BookSide::Ask).unwrap();
        assert!(v.clamped);
    }

    #[test]
    fn depth_selection() {
        let b = book(&[(100.0, 10_000.0)], &[(100.01, 10_000.0)]);
        assert_eq!(select_depth_n("m", [&b, &b, &b]).n, 10_000.0);
        let b1 = book(&[(100.0, 12_000.0)], &[(100.01, 8_000.0)]);
        assert_eq!(select_depth_n("m", [&b1]).n, 10_000.0);
        // only liquidity far outside the band
        let far = book(&[(100.0, 0.5)], &[(100.01, 0.5), (200.0, 1e6)]);
        assert_eq!(select_depth_n("m", [&far]).n, 1.0);
    }

    #[test]
    fn tfi_examples() {
        let buy = vec![0.0, 7000.0, 0.0];
        let sell = vec![0.0, 0.0, 2500.0];
        assert_eq!(tfi_series(&buy, &sell, 2), vec![None, Some(7000.0), Some(4500.0)]);
        assert_eq!(tfi_series(&[0.0; 3], &[0.0, 3000.0, 0.0], 1), vec![Some(0.0), Some(-3000.0), Some(0.0)]);
    }

    #[test]
    fn pret_examples() {
        let p = vec![Some(100.0), Some(101.0), Some(100.0), Some(99.0)];
        let r = pret_series(&p, 1);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 100.0).abs() < 1e-9);
        assert!((pret_series(&[Some(100.0), Some(99.0)], 1)[1].unwrap() + 100.0).abs() < 1e-9);
        assert_eq!(pret_series(&[Some(5.0), Some(5.0)], 1)[1], Some(0.0));
        assert_eq!(pret_series(&[None, Some(5.0)], 1)[1], None);
    }

    #[test]
    fn div_examples() {
        // d = 10,10,10,14 bpts over a 4-sample window
        let q = vec![Some(100.0); 4];
        let p: Vec<Option<f64>> = [10.0, 10.0, 10.0, 14.0].iter().map(|d| Some(100.0 * (1.0 + d / BPS))).collect();
        let v = div_series(&p, &q, 4);
        assert_eq!(&v[..3], &[None, None, None]);
        assert!((v[3].unwrap() - 3.0).abs() < 1e-9);
        let c = div_series(&q, &q, 2);
        assert!(c[1..].iter().all(|x| *x == Some(0.0)));
    }

    #[test]
    fn fret_looks_forward() {
        let p = vec![Some(100.0), Some(101.0), Some(102.0)];
        let f = fret_series(&p, 1);
        assert!((f[0].unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(f[2], None);
    }

    #[test]
    fn feature_key_round_trip() {
        for k in [
            FeatureKey::imb("a", Family::IMBa),
            FeatureKey::tfi("a", 500),
            FeatureKey::pret("x_BTC/USD", 1000),
            FeatureKey::div("a", "b", 5000),
        ] {
            let s = k.to_string();
            assert_eq!(s.parse::<FeatureKey>().unwrap(), k);
        }
        assert_eq!(FeatureKey::imb("a", Family::IMBb).to_string(), "a|IMBb|");
        assert_eq!(FeatureKey::div("a", "b", 5000).to_string(), "a|DIV(b)|5000");
        assert!("a|DIV(a)|5000".parse::<FeatureKey>().is_err());
        assert!("a|TFI|".parse::<FeatureKey>().is_err());
    }

    #[test]
    fn windowed_sums_match_direct_sums() {
        let x: Vec<f64> = (0..37).map(|i| (i * 7 % 11) as f64).collect();
        for w in 1..10 {
            let s = windowed_sums(&x, w);
            for i in 0..x.len() {
                let want = if i + 1 < w { None } else { Some(x[i + 1 - w..=i].iter().sum::<f64>()) };
                assert_eq!(s[i], want, "w={w} i={i}");
            }
        }
    }

    proptest! {
        #[test]
        fn imbalance_nonnegative_and_monotone_in_n(
            sizes in prop::collection::vec(1.0f64..5000.0, 1..8),
            gaps in prop::collection::vec(0.5f64..3.0, 8),
            n1 in 1.0f64..20000.0,
            n2 in 1.0f64..20000.0,
        ) {
            let mut px = 100.0;
            let asks: Vec<(f64, f64)> = sizes.iter().zip(&gaps).map(|(s, g)| { px += g; (px, *s) }).collect();
            let mut px = 100.0;
            let bids: Vec<(f64, f64)> = sizes.iter().zip(&gaps).map(|(s, g)| { let l = (px, *s); px -= g; l }).collect();
            let b = book(&bids, &asks);
            let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
            for side in [BookSide::Ask, BookSide::Bid] {
                let a = imbalance(&b, lo, side).unwrap().bpts;
                let c = imbalance(&b, hi, side).unwrap().bpts;
                prop_assert!(a >= 0.0);
                prop_assert!(c >= a - 1e-9);
            }
        }

        #[test]
        fn classical_imbalance_is_antisymmetric(b in 0.001f64..1e6, a in 0.001f64..1e6) {
            let x = classical_imbalance(&book(&[(99.0, b)], &[(100.0, a)])).unwrap();
            let y = classical_imbalance(&book(&[(99.0, a)], &[(100.0, b)])).unwrap();
            prop_assert_eq!(x, -y);
            prop_assert!((-1.0..=1.0).contains(&x));
        }
    }
}
