//! Raw snapshot/trade records and the uniform 50 ms panel built from them.
//!
//! Books are resampled with the last-seen rule and forward filled. Trades are
//! bucketed into half-open windows `(t - step, t]`, so a trade stamped exactly
//! on a grid point belongs to that grid point.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sampling step.
pub const GRID_MS: i64 = 50;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("no BTC reference price observed yet")]
    MissingReferencePrice,
    #[error("grid step must be positive, got {0}")]
    BadGrid(i64),
    #[error("panel csv: {0}")]
    PanelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentKind {
    Spot,
    Perpetual,
    Futures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Margin {
    #[serde(rename = "BTC")]
    Btc,
    #[serde(rename = "USDT")]
    Usdt,
    #[serde(rename = "cross")]
    Cross,
    #[serde(rename = "none")]
    None,
}

/// Static properties and fee schedule of one market. Fees are in basis points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub market_id: String,
    pub instrument_kind: InstrumentKind,
    pub margin: Margin,
    pub tick_size: f64,
    pub taker_fee_default: f64,
    pub taker_fee_vip: f64,
    pub maker_rebate: f64,
}

impl MarketSpec {
    /// Returns every violated invariant, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tick_size > 0.0) {
            out.push(format!("markets.{}.tick_size must be > 0", self.market_id));
        }
        if self.taker_fee_vip > self.taker_fee_default {
            out.push(format!(
                "markets.{}.taker_fee_vip must not exceed taker_fee_default",
                self.market_id
            ));
        }
        out
    }
}

/// One price level: price and USD size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Level {
    pub price: f64,
    pub size: f64,
}

impl Level {
    pub fn new(price: f64, size: f64) -> Self {
        Level { price, size }
    }
}

impl From<(f64, f64)> for Level {
    fn from((price, size): (f64, f64)) -> Self {
        Level { price, size }
    }
}

impl From<Level> for (f64, f64) {
    fn from(l: Level) -> Self {
        (l.price, l.size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub ts: i64,
    pub market_id: String,
    /// Descending by price.
    pub bids: Vec<Level>,
    /// Ascending by price.
    pub asks: Vec<Level>,
}

impl BookSnapshot {
    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn validate(&self) -> Result<(), MarketDataError> {
        let bad = |msg: &str| {
            Err(MarketDataError::InvalidRecord(format!(
                "book {}@{}: {msg}",
                self.market_id, self.ts
            )))
        };
        if self
            .bids
            .iter()
            .chain(&self.asks)
            .any(|l| !(l.size > 0.0) || !(l.price > 0.0) || !l.price.is_finite() || !l.size.is_finite())
        {
            return bad("non-positive price or size");
        }
        if self.bids.windows(2).any(|w| w[0].price <= w[1].price) {
            return bad("bid prices not strictly descending");
        }
        if self.asks.windows(2).any(|w| w[0].price >= w[1].price) {
            return bad("ask prices not strictly ascending");
        }
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if b.price >= a.price {
                return bad("crossed book");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeTick {
    pub ts: i64,
    pub market_id: String,
    /// Aggressor side.
    pub side: Side,
    pub price: f64,
    /// USD notional.
    pub amount: f64,
}

impl TradeTick {
    pub fn validate(&self) -> Result<(), MarketDataError> {
        if !(self.amount > 0.0) || !(self.price > 0.0) || !self.price.is_finite() || !self.amount.is_finite() {
            return Err(MarketDataError::InvalidRecord(format!(
                "trade {}@{}: price and amount must be positive",
                self.market_id, self.ts
            )));
        }
        Ok(())
    }
}

/// Contract denomination for USD normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "unit", content = "value")]
pub enum ContractValue {
    /// USD per contract.
    Usd(f64),
    /// BTC per contract.
    Btc(f64),
}

/// Converts a contract amount to USD notional.
pub fn normalize_usd(
    amount: f64,
    contract_value: ContractValue,
    last_btc_price: Option<f64>,
) -> Result<f64, MarketDataError> {
    match contract_value {
        ContractValue::Usd(v) => Ok(amount * v),
        ContractValue::Btc(v) => match last_btc_price {
            Some(p) if p > 0.0 => Ok(amount * v * p),
            _ => Err(MarketDataError::MissingReferencePrice),
        },
    }
}

/// A record dropped during ingestion, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub ts: i64,
    pub reason: String,
}

/// Fixed-step timestamp grid: `start_ms + k * step_ms` for `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub start_ms: i64,
    pub step_ms: i64,
    pub len: usize,
}

impl Grid {
    pub fn new(start_ms: i64, step_ms: i64, len: usize) -> Result<Grid, MarketDataError> {
        if step_ms <= 0 {
            return Err(MarketDataError::BadGrid(step_ms));
        }
        Ok(Grid { start_ms, step_ms, len })
    }

    /// Smallest step-aligned grid whose buckets `(t - step, t]` cover `[first, last]`.
    pub fn covering(first_ts: i64, last_ts: i64, step_ms: i64) -> Result<Grid, MarketDataError> {
        if step_ms <= 0 {
            return Err(MarketDataError::BadGrid(step_ms));
        }
        let start = ceil_to(first_ts, step_ms);
        let end = ceil_to(last_ts, step_ms);
        Ok(Grid { start_ms: start, step_ms, len: ((end - start) / step_ms + 1) as usize })
    }

    pub fn ts(&self, i: usize) -> i64 {
        self.start_ms + i as i64 * self.step_ms
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len).map(|i| self.ts(i))
    }

    /// Index of the bucket `(t - step, t]` containing `ts`, if on the grid.
    pub fn bucket_of(&self, ts: i64) -> Option<usize> {
        let k = ceil_div(ts - self.start_ms, self.step_ms);
        if k < 0 || k as usize >= self.len {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Number of grid steps spanned by `duration_ms`, if it is a positive multiple.
    pub fn steps(&self, duration_ms: i64) -> Option<usize> {
        if duration_ms > 0 && duration_ms % self.step_ms == 0 {
            Some((duration_ms / self.step_ms) as usize)
        } else {
            None
        }
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    let d = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        d
    } else {
        d + 1
    }
}

fn ceil_to(ts: i64, step: i64) -> i64 {
    ceil_div(ts, step) * step
}

/// Books of a single market aligned to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BookSeries {
    /// Distinct snapshots referenced by the grid, in time order.
    pub books: Vec<BookSnapshot>,
    /// Index into `books` per grid point; `None` during warm-up.
    pub at: Vec<Option<u32>>,
    pub rejected: Vec<Rejected>,
}

/// Last-seen resampling of one market's snapshots onto `grid`.
pub fn resample_books(snapshots: &[BookSnapshot], grid: &Grid) -> BookSeries {
    let mut accepted: Vec<&BookSnapshot> = Vec::with_capacity(snapshots.len());
    let mut rejected = Vec::new();
    for s in snapshots {
        if let Err(e) = s.validate() {
            rejected.push(Rejected { ts: s.ts, reason: e.to_string() });
            continue;
        }
        if let Some(prev) = accepted.last() {
            if s.ts < prev.ts {
                rejected.push(Rejected {
                    ts: s.ts,
                    reason: format!("out of order snapshot (previous ts {})", prev.ts),
                });
                continue;
            }
        }
        accepted.push(s);
    }

    let mut books: Vec<BookSnapshot> = Vec::new();
    let mut at = Vec::with_capacity(grid.len);
    let mut next = 0usize;
    let mut current: Option<usize> = None;
    let mut emitted: Option<usize> = None;
    for t in grid.timestamps() {
        while next < accepted.len() && accepted[next].ts <= t {
            current = Some(next);
            next += 1;
        }
        match current {
            None => at.push(None),
            Some(c) => {
                if emitted != Some(c) {
                    books.push(accepted[c].clone());
                    emitted = Some(c);
                }
                at.push(Some((books.len() - 1) as u32));
            }
        }
    }
    BookSeries { books, at, rejected }
}

/// Per-bucket trade aggregates of one market.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeBuckets {
    pub buy_volume: Vec<f64>,
    pub sell_volume: Vec<f64>,
    /// Forward-filled VWAP; `None` before the first trade.
    pub vwap_price: Vec<Option<f64>>,
    pub rejected: Vec<Rejected>,
}

/// Buckets trades into `(t - step, t]` windows of `grid`.
pub fn aggregate_trades(ticks: &[TradeTick], grid: &Grid) -> TradeBuckets {
    let n = grid.len;
    let mut buy = vec![0.0; n];
    let mut sell = vec![0.0; n];
    let mut notional = vec![0.0; n];
    let mut volume = vec![0.0; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut rejected = Vec::new();
    let mut last_ts = i64::MIN;
    for t in ticks {
        if let Err(e) = t.validate() {
            rejected.push(Rejected { ts: t.ts, reason: e.to_string() });
            continue;
        }
        if t.ts < last_ts {
            rejected.push(Rejected { ts: t.ts, reason: format!("out of order trade (previous ts {last_ts})") });
            continue;
        }
        let Some(k) = grid.bucket_of(t.ts) else {
            rejected.push(Rejected { ts: t.ts, reason: "trade outside grid".into() });
            continue;
        };
        last_ts = t.ts;
        match t.side {
            Side::Buy => buy[k] += t.amount,
            Side::Sell => sell[k] += t.amount,
        }
        notional[k] += t.price * t.amount;
        volume[k] += t.amount;
        lo[k] = lo[k].min(t.price);
        hi[k] = hi[k].max(t.price);
    }
    let mut vwap = Vec::with_capacity(n);
    let mut last: Option<f64> = None;
    for k in 0..n {
        if volume[k] > 0.0 {
            last = Some((notional[k] / volume[k]).clamp(lo[k], hi[k]));
        }
        vwap.push(last);
    }
    TradeBuckets { buy_volume: buy, sell_volume: sell, vwap_price: vwap, rejected }
}

/// Book and trade aggregates of one market on the panel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    pub market_id: String,
    pub books: Vec<BookSnapshot>,
    pub book_at: Vec<Option<u32>>,
    pub buy_volume: Vec<f64>,
    pub sell_volume: Vec<f64>,
    pub vwap_price: Vec<Option<f64>>,
}

impl MarketSeries {
    pub fn book(&self, i: usize) -> Option<&BookSnapshot> {
        self.book_at[i].map(|k| &self.books[k as usize])
    }
}

/// Time-aligned per-market aggregates on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPanel {
    pub grid: Grid,
    pub markets: Vec<MarketSeries>,
}

/// Panel plus ingestion diagnostics.
#[derive(Debug, Clone)]
pub struct PanelBuild {
    pub panel: SampledPanel,
    pub rejected: BTreeMap<String, Vec<Rejected>>,
}

impl SampledPanel {
    /// Builds the panel from raw records of any number of markets. Markets are
    /// ordered by id; each is resampled independently on a common grid.
    pub fn build(
        books: &[BookSnapshot],
        trades: &[TradeTick],
        step_ms: i64,
    ) -> Result<PanelBuild, MarketDataError> {
        let mut by_market: BTreeMap<&str, (Vec<BookSnapshot>, Vec<TradeTick>)> = BTreeMap::new();
        for b in books {
            by_market.entry(&b.market_id).or_default().0.push(b.clone());
        }
        for t in trades {
            by_market.entry(&t.market_id).or_default().1.push(t.clone());
        }
        let first = books.iter().map(|b| b.ts).chain(trades.iter().map(|t| t.ts)).min();
        let last = books.iter().map(|b| b.ts).chain(trades.iter().map(|t| t.ts)).max();
        let grid = match (first, last) {
            (Some(f), Some(l)) => Grid::covering(f, l, step_ms)?,
            _ => Grid::new(0, step_ms, 0)?,
        };
        let built: Vec<(MarketSeries, Vec<Rejected>)> = by_market
            .into_par_iter()
            .map(|(id, (b, t))| {
                let bs = resample_books(&b, &grid);
                let tb = aggregate_trades(&t, &grid);
                let mut rejected = bs.rejected;
                rejected.extend(tb.rejected);
                (
                    MarketSeries {
                        market_id: id.to_string(),
                        books: bs.books,
                        book_at: bs.at,
                        buy_volume: tb.buy_volume,
                        sell_volume: tb.sell_volume,
                        vwap_price: tb.vwap_price,
                    },
                    rejected,
                )
            })
            .collect();
        let mut markets = Vec::with_capacity(built.len());
        let mut rejected = BTreeMap::new();
        for (m, r) in built {
            if !r.is_empty() {
                rejected.insert(m.market_id.clone(), r);
            }
            markets.push(m);
        }
        Ok(PanelBuild { panel: SampledPanel { grid, markets }, rejected })
    }

    pub fn market_index(&self, market_id: &str) -> Option<usize> {
        self.markets.iter().position(|m| m.market_id == market_id)
    }

    pub fn market_ids(&self) -> Vec<String> {
        self.markets.iter().map(|m| m.market_id.clone()).collect()
    }

    /// Sub-panel over grid indices `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SampledPanel {
        let grid = Grid { start_ms: self.grid.ts(range.start), step_ms: self.grid.step_ms, len: range.len() };
        let markets = self
            .markets
            .iter()
            .map(|m| {
                let refs: Vec<Option<u32>> = m.book_at[range.clone()].to_vec();
                let first = refs.iter().flatten().next().copied().unwrap_or(0);
                let last = refs.iter().flatten().last().copied();
                let books = match last {
                    Some(l) => m.books[first as usize..=l as usize].to_vec(),
                    None => Vec::new(),
                };
                MarketSeries {
                    market_id: m.market_id.clone(),
                    books,
                    book_at: refs.into_iter().map(|r| r.map(|k| k - first)).collect(),
                    buy_volume: m.buy_volume[range.clone()].to_vec(),
                    sell_volume: m.sell_volume[range.clone()].to_vec(),
                    vwap_price: m.vwap_price[range.clone()].to_vec(),
                }
            })
            .collect();
        SampledPanel { grid, markets }
    }

    /// Writes the panel as CSV: `ts_ms` plus `<market>.<field>` columns, with
    /// book levels expanded into `bid_px_k`/`bid_sz_k`/`ask_px_k`/`ask_sz_k`.
    /// Absent cells are empty. Floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), MarketDataError> {
        let depth: Vec<(usize, usize)> = self
            .markets
            .iter()
            .map(|m| {
                let b = m.books.iter().map(|s| s.bids.len()).max().unwrap_or(0);
                let a = m.books.iter().map(|s| s.asks.len()).max().unwrap_or(0);
                (b, a)
            })
            .collect();
        let mut header = String::from("ts_ms");
        for (m, (nb, na)) in self.markets.iter().zip(&depth) {
            let id = &m.market_id;
            write!(header, ",{id}.book_ts").unwrap();
            for k in 0..*nb {
                write!(header, ",{id}.bid_px_{k},{id}.bid_sz_{k}").unwrap();
            }
            for k in 0..*na {
                write!(header, ",{id}.ask_px_{k},{id}.ask_sz_{k}").unwrap();
            }
            write!(header, ",{id}.buy_volume,{id}.sell_volume,{id}.vwap_price").unwrap();
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for i in 0..self.grid.len {
            line.clear();
            write!(line, "{}", self.grid.ts(i)).unwrap();
            for (m, (nb, na)) in self.markets.iter().zip(&depth) {
                let book = m.book(i);
                match book {
                    Some(b) => write!(line, ",{}", b.ts).unwrap(),
                    None => line.push(','),
                }
                for (levels, n) in [(book.map(|b| &b.bids), *nb), (book.map(|b| &b.asks), *na)] {
                    for k in 0..n {
                        match levels.and_then(|l| l.get(k)) {
                            Some(l) => write!(line, ",{},{}", l.price, l.size).unwrap(),
                            None => line.push_str(",,"),
                        }
                    }
                }
                write!(line, ",{},{},", m.buy_volume[i], m.sell_volume[i]).unwrap();
                if let Some(p) = m.vwap_price[i] {
                    write!(line, "{p}").unwrap();
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Inverse of [`SampledPanel::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<SampledPanel, MarketDataError> {
        let fmt = |m: String| MarketDataError::PanelFormat(m);
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| fmt("empty file".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"ts_ms") {
            return Err(fmt("first column must be ts_ms".into()));
        }
        // layout per market: (id, start col, n_bid, n_ask)
        let mut layout: Vec<(String, usize, usize, usize)> = Vec::new();
        let mut c = 1;
        while c < cols.len() {
            let id = cols[c]
                .strip_suffix(".book_ts")
                .ok_or_else(|| fmt(format!("expected <market>.book_ts at column {c}")))?
                .to_string();
            let start = c;
            c += 1;
            let mut nb = 0;
            while c < cols.len() && cols[c] == format!("{id}.bid_px_{nb}") {
                nb += 1;
                c += 2;
            }
            let mut na = 0;
            while c < cols.len() && cols[c] == format!("{id}.ask_px_{na}") {
                na += 1;
                c += 2;
            }
            for (off, name) in ["buy_volume", "sell_volume", "vwap_price"].iter().enumerate() {
                if cols.get(c + off) != Some(&format!("{id}.{name}").as_str()) {
                    return Err(fmt(format!("missing column {id}.{name}")));
                }
            }
            c += 3;
            layout.push((id, start, nb, na));
        }
        let mut markets: Vec<MarketSeries> = layout
            .iter()
            .map(|(id, ..)| MarketSeries {
                market_id: id.clone(),
                books: Vec::new(),
                book_at: Vec::new(),
                buy_volume: Vec::new(),
                sell_volume: Vec::new(),
                vwap_price: Vec::new(),
            })
            .collect();
        let mut ts_values: Vec<i64> = Vec::new();
        let num = |s: &str, row: usize| -> Result<f64, MarketDataError> {
            s.parse::<f64>().map_err(|e| fmt(format!("row {row}: bad number {s:?}: {e}")))
        };
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(fmt(format!("row {row}: expected {} cells, got {}", cols.len(), cells.len())));
            }
            ts_values.push(cells[0].parse().map_err(|e| fmt(format!("row {row}: bad ts: {e}")))?);
            for ((id, start, nb, na), m) in layout.iter().zip(markets.iter_mut()) {
                let mut k = *start;
                let book_ts = cells[k];
                k += 1;
                let read_levels = |n: usize, k: &mut usize| -> Result<Vec<Level>, MarketDataError> {
                    let mut v = Vec::new();
                    for _ in 0..n {
                        let (p, s) = (cells[*k], cells[*k + 1]);
                        *k += 2;
                        if !p.is_empty() {
                            v.push(Level::new(num(p, row)?, num(s, row)?));
                        }
                    }
                    Ok(v)
                };
                let bids = read_levels(*nb, &mut k)?;
                let asks = read_levels(*na, &mut k)?;
                if book_ts.is_empty() {
                    m.book_at.push(None);
                } else {
                    let snap = BookSnapshot {
                        ts: book_ts.parse().map_err(|e| fmt(format!("row {row}: bad book ts: {e}")))?,
                        market_id: id.clone(),
                        bids,
                        asks,
                    };
                    if m.books.last() != Some(&snap) {
                        m.books.push(snap);
                    }
                    m.book_at.push(Some((m.books.len() - 1) as u32));
                }
                m.buy_volume.push(num(cells[k], row)?);
                m.sell_volume.push(num(cells[k + 1], row)?);
                let v = cells[k + 2];
                m.vwap_price.push(if v.is_empty() { None } else { Some(num(v, row)?) });
            }
        }
        let grid = if ts_values.len() >= 2 {
            let step = ts_values[1] - ts_values[0];
            if ts_values.windows(2).any(|w| w[1] - w[0] != step) {
                return Err(fmt("timestamps are not equally spaced".into()));
            }
            Grid::new(ts_values[0], step, ts_values.len())?
        } else {
            Grid::new(ts_values.first().copied().unwrap_or(0), GRID_MS, ts_values.len())?
        };
        Ok(SampledPanel { grid, markets })
    }
}

/// Reads line-delimited JSON records; malformed lines are returned as rejections.
pub fn read_ndjson<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<(Vec<T>, Vec<Rejected>), MarketDataError> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            Err(e) => rejected.push(Rejected { ts: -1, reason: format!("line {}: {e}", i + 1) }),
        }
    }
    Ok((records, rejected))
}

pub fn write_ndjson<T: Serialize, W: Write>(records: &[T], mut out: W) -> Result<(), MarketDataError> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
