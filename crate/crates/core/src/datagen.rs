//! Seeded synthetic data: a multi-market snapshot panel with planted lead-lag
//! structure, and an order-by-order event stream with planted top-level
//! collapses plus the prediction stream that anticipates them.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::exchsim::{OrderId, SimEvent, Signal, AMBIENT};
use crate::marketdata::{BookSnapshot, Level, Side, TradeTick};

const LATENT_STEP_MS: i64 = 10;
/// Lookahead of informed takers.
pub const INFORMED_HORIZON_MS: i64 = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L3Config {
    pub duration_ms: i64,
    pub price: f64,
    pub tick: f64,
    /// Levels kept on each side.
    pub levels: usize,
    /// Limit submits and cancels per second, both sides.
    pub churn_per_s: f64,
    /// Full-level sweeps per side per minute; the level refills at the same price.
    pub sweep_rate_per_min: f64,
    /// Planted collapses per side per minute.
    pub collapse_rate_per_min: f64,
    pub signal_step_ms: i64,
}

impl Default for L3Config {
    fn default() -> Self {
        L3Config {
            duration_ms: 3_600_000,
            price: 1000.0,
            tick: 0.1,
            levels: 10,
            churn_per_s: 4.0,
            sweep_rate_per_min: 2.0,
            collapse_rate_per_min: 1.0,
            signal_step_ms: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_markets: usize,
    /// Defaults to the first `n_markets` configured venue ids.
    #[serde(default)]
    pub market_ids: Vec<String>,
    /// Observation delay of the latent price per market.
    pub lag_ms: Vec<i64>,
    /// Latent volatility, bpts per √s.
    pub vol_bps: f64,
    /// Idiosyncratic quote noise, bpts.
    pub noise_bps: f64,
    /// USD per level, best first.
    pub depth_profile: Vec<f64>,
    /// Taker events per second per market.
    pub taker_intensity: f64,
    /// Probability that a taker on a lowest-lag market trades with the
    /// sign of the coming latent move.
    pub informedness: f64,
    pub duration_ms: i64,
    pub start_ms: i64,
    pub price: f64,
    pub tick: f64,
    pub l3: L3Config,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            n_markets: 4,
            market_ids: Vec::new(),
            lag_ms: vec![0, 200, 200, 200],
            vol_bps: 3.0,
            noise_bps: 0.3,
            depth_profile: (0..60).map(|k| 20_000.0 + 5_000.0 * k as f64).collect(),
            taker_intensity: 4.0,
            informedness: 0.6,
            duration_ms: 600_000,
            start_ms: 1_612_137_600_000,
            price: 50_000.0,
            tick: 1.0,
            l3: L3Config::default(),
        }
    }
}

impl GenConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_markets == 0 {
            out.push("n_markets: must be >= 1".into());
        }
        if self.lag_ms.len() != self.n_markets {
            out.push("lag_ms: needs one entry per market".into());
        }
        if self.lag_ms.iter().any(|l| *l < 0) {
            out.push("lag_ms: must be >= 0".into());
        }
        if !self.market_ids.is_empty() && self.market_ids.len() != self.n_markets {
            out.push("market_ids: needs one entry per market or none".into());
        }
        if !(0.0..=1.0).contains(&self.informedness) {
            out.push("informedness: must be in [0, 1]".into());
        }
        if self.depth_profile.is_empty() || self.depth_profile.iter().any(|d| !(*d > 0.0)) {
            out.push("depth_profile: must be nonempty and positive".into());
        }
        if !(self.taker_intensity >= 0.0) {
            out.push("taker_intensity: must be >= 0".into());
        }
        if !(self.vol_bps >= 0.0) || !(self.noise_bps >= 0.0) {
            out.push("vol_bps, noise_bps: must be >= 0".into());
        }
        if self.duration_ms <= 0 || self.l3.duration_ms <= 0 {
            out.push("duration_ms: must be > 0".into());
        }
        if !(self.tick > 0.0) || !(self.l3.tick > 0.0) {
            out.push("tick: must be > 0".into());
        }
        if self.l3.levels < 3 {
            out.push("l3.levels: must be >= 3".into());
        }
        if self.l3.signal_step_ms <= 0 {
            out.push("l3.signal_step_ms: must be > 0".into());
        }
        if !(self.l3.churn_per_s >= 0.0 && self.l3.sweep_rate_per_min >= 0.0 && self.l3.collapse_rate_per_min >= 0.0) {
            out.push("l3 rates: must be >= 0".into());
        }
        out
    }

    pub fn market_ids(&self) -> Vec<String> {
        if !self.market_ids.is_empty() {
            return self.market_ids.clone();
        }
        let known = crate::config::default_markets();
        (0..self.n_markets)
            .map(|k| known.get(k).map(|m| m.market_id.clone()).unwrap_or_else(|| format!("synthetic_{k}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPanel {
    pub markets: Vec<String>,
    pub books: Vec<BookSnapshot>,
    pub trades: Vec<TradeTick>,
}

fn exp_gap(rng: &mut ChaCha8Rng, rate_per_ms: f64) -> Option<i64> {
    if rate_per_ms <= 0.0 {
        return None;
    }
    let d = Exp::new(rate_per_ms).expect("positive rate").sample(rng);
    Some(d.ceil().max(1.0) as i64)
}

/// Latent arithmetic random walk on a fixed clock, with quotes and takers
/// per market. Output is sorted by timestamp.
pub fn gen_panel(cfg: &GenConfig) -> GeneratedPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let markets = cfg.market_ids();
    let end = cfg.start_ms + cfg.duration_ms;
    let n_steps = ((cfg.duration_ms + INFORMED_HORIZON_MS) / LATENT_STEP_MS + 2) as usize;
    let step_sd = cfg.price * cfg.vol_bps / crate::BPS * (LATENT_STEP_MS as f64 / 1000.0).sqrt();
    let step = Normal::new(0.0, step_sd).expect("finite sd");
    let mut latent = Vec::with_capacity(n_steps);
    let mut x = cfg.price;
    for _ in 0..n_steps {
        latent.push(x);
        x += step.sample(&mut rng);
    }
    let latent_at = |t: i64| {
        let k = ((t - cfg.start_ms).max(0) / LATENT_STEP_MS) as usize;
        latent[k.min(latent.len() - 1)]
    };
    let noise = Normal::new(0.0, cfg.price * cfg.noise_bps / crate::BPS).expect("finite sd");
    let depth_noise = Normal::new(0.0, 0.3).expect("finite sd");
    let min_lag = cfg.lag_ms.iter().copied().min().unwrap_or(0);

    let mut books = Vec::new();
    let mut trades = Vec::new();
    for (m, id) in markets.iter().enumerate() {
        let lag = cfg.lag_ms[m];
        let informed = if lag == min_lag { cfg.informedness } else { 0.0 };
        let mut quote: Option<(f64, f64)> = None;
        let mut next_book = cfg.start_ms;
        let mut next_trade = cfg.start_ms + exp_gap(&mut rng, cfg.taker_intensity / 1000.0).unwrap_or(i64::MAX / 2);
        loop {
            let t = next_book.min(next_trade);
            if t >= end {
                break;
            }
            if next_book <= next_trade {
                let mid = latent_at(t - lag) + noise.sample(&mut rng);
                let mut bid_k = (mid / cfg.tick - 0.5).floor() as i64;
                let mut ask_k = bid_k + 1;
                if rng.gen_bool(0.1) {
                    if rng.gen_bool(0.5) {
                        ask_k += 1;
                    } else {
                        bid_k -= 1;
                    }
                }
                let mut level = |k: usize| {
                    let f = (depth_noise.sample(&mut rng) - 0.045_f64).exp();
                    (cfg.depth_profile[k] * f).round().max(1.0)
                };
                let mut bids = Vec::with_capacity(cfg.depth_profile.len());
                let mut asks = Vec::with_capacity(cfg.depth_profile.len());
                for k in 0..cfg.depth_profile.len() {
                    bids.push(Level::new((bid_k - k as i64) as f64 * cfg.tick, level(k)));
                    asks.push(Level::new((ask_k + k as i64) as f64 * cfg.tick, level(k)));
                }
                quote = Some((bids[0].price, asks[0].price));
                books.push(BookSnapshot { ts: t, market_id: id.clone(), bids, asks });
                next_book = t + rng.gen_range(20..=100);
            } else {
                if let Some((bid, ask)) = quote {
                    let side = if informed > 0.0 && rng.gen_bool(informed) {
                        let d = latent_at(t + INFORMED_HORIZON_MS) - latent_at(t);
                        if d > 0.0 {
                            Side::Buy
                        } else if d < 0.0 {
                            Side::Sell
                        } else if rng.gen_bool(0.5) {
                            Side::Buy
                        } else {
                            Side::Sell
                        }
                    } else if rng.gen_bool(0.5) {
                        Side::Buy
                    } else {
                        Side::Sell
                    };
                    let amount: f64 = Exp::new(1.0 / 3000.0_f64).expect("rate").sample(&mut rng).round().max(1.0);
                    let price = if side == Side::Buy { ask } else { bid };
                    trades.push(TradeTick { ts: t, market_id: id.clone(), side, price, amount });
                }
                next_trade = t + exp_gap(&mut rng, cfg.taker_intensity / 1000.0).unwrap_or(i64::MAX / 2);
            }
        }
    }
    books.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.market_id.cmp(&b.market_id)));
    trades.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.market_id.cmp(&b.market_id)));
    GeneratedPanel { markets, books, trades }
}

/// A collapse planted by [`gen_l3_events`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedCollapse {
    /// Side whose top level collapses (`Sell` = asks).
    pub side: Side,
    pub signal_ts: i64,
    pub collapse_ts: i64,
    pub sweep_ts: i64,
    /// Levels consumed by the sweep.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedL3 {
    pub tick: f64,
    pub events: Vec<SimEvent>,
    pub signals: Vec<Signal>,
    pub collapses: Vec<PlantedCollapse>,
    /// Generator book after every event, when requested.
    pub snapshots: Vec<BookSnapshot>,
}

/// The generator's own view of the book: price-keyed FIFO queues.
#[derive(Default)]
struct GenBook {
    bids: BTreeMap<i64, Vec<(OrderId, f64)>>,
    asks: BTreeMap<i64, Vec<(OrderId, f64)>>,
    at: HashMap<OrderId, (Side, i64)>,
}

impl GenBook {
    fn side(&self, s: Side) -> &BTreeMap<i64, Vec<(OrderId, f64)>> {
        if s == Side::Buy { &self.bids } else { &self.asks }
    }

    fn side_mut(&mut self, s: Side) -> &mut BTreeMap<i64, Vec<(OrderId, f64)>> {
        if s == Side::Buy { &mut self.bids } else { &mut self.asks }
    }

    fn best(&self, s: Side) -> Option<i64> {
        if s == Side::Buy { self.bids.keys().next_back().copied() } else { self.asks.keys().next().copied() }
    }

    /// Price `depth` levels away from the best (0 = best).
    fn level_key(&self, s: Side, depth: usize) -> Option<i64> {
        if s == Side::Buy { self.bids.keys().rev().nth(depth).copied() } else { self.asks.keys().nth(depth).copied() }
    }

    fn worst(&self, s: Side) -> Option<i64> {
        if s == Side::Buy { self.bids.keys().next().copied() } else { self.asks.keys().next_back().copied() }
    }

    fn total(&self, s: Side, k: i64) -> f64 {
        self.side(s).get(&k).map(|q| q.iter().map(|o| o.1).sum()).unwrap_or(0.0)
    }

    fn add(&mut self, s: Side, k: i64, id: OrderId, size: f64) {
        self.side_mut(s).entry(k).or_default().push((id, size));
        self.at.insert(id, (s, k));
    }

    fn cancel(&mut self, id: OrderId) {
        let (s, k) = self.at.remove(&id).expect("live order");
        let book = self.side_mut(s);
        let q = book.get_mut(&k).expect("level");
        q.retain(|o| o.0 != id);
        if q.is_empty() {
            book.remove(&k);
        }
    }

    /// Market order by `aggressor`, consuming the opposite side front to back.
    fn market(&mut self, aggressor: Side, mut size: f64) {
        let s = aggressor.opposite();
        while size > 0.0 {
            let Some(k) = self.best(s) else { return };
            let q = self.side_mut(s).get_mut(&k).expect("level");
            let mut done = 0;
            for o in q.iter_mut() {
                let take = o.1.min(size);
                o.1 -= take;
                size -= take;
                if o.1 <= 0.0 {
                    done += 1;
                }
                if size <= 0.0 {
                    break;
                }
            }
            let gone: Vec<OrderId> = q.drain(..done).map(|o| o.0).collect();
            if q.is_empty() {
                self.side_mut(s).remove(&k);
            }
            for id in gone {
                self.at.remove(&id);
            }
        }
    }

    fn snapshot(&self, ts: i64, tick: f64, depth: usize) -> BookSnapshot {
        let lv = |(k, q): (&i64, &Vec<(OrderId, f64)>)| Level::new(*k as f64 * tick, q.iter().map(|o| o.1).sum());
        BookSnapshot {
            ts,
            market_id: String::new(),
            bids: self.bids.iter().rev().take(depth).map(lv).collect(),
            asks: self.asks.iter().take(depth).map(lv).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    Churn,
    Taker,
    Sweep(bool),
    Refill(bool, i64),
    EpisodeStart(bool),
    Collapse(bool),
    CollapseSweep(bool),
    Signal,
}

fn side_of(ask: bool) -> Side {
    if ask { Side::Sell } else { Side::Buy }
}

struct Episode {
    ask: bool,
    /// Index into the planted list.
    planted: usize,
    level: i64,
    depth: usize,
    until: i64,
}

struct L3Gen<'c> {
    cfg: &'c GenConfig,
    rng: ChaCha8Rng,
    book: GenBook,
    events: Vec<SimEvent>,
    snapshots: Option<(usize, Vec<BookSnapshot>)>,
    next_id: OrderId,
    seq: u64,
    queue: BinaryHeap<Reverse<(i64, u64, Action)>>,
    order: u64,
    episode: Option<Episode>,
    quiet_until: i64,
    collapses: Vec<PlantedCollapse>,
}

impl<'c> L3Gen<'c> {
    fn schedule(&mut self, ts: i64, a: Action) {
        self.order += 1;
        self.queue.push(Reverse((ts, self.order, a)));
    }

    fn schedule_after(&mut self, now: i64, rate_per_ms: f64, a: Action) {
        if let Some(d) = exp_gap(&mut self.rng, rate_per_ms) {
            self.schedule(now + d, a);
        }
    }

    fn emit(&mut self, mut ev: SimEvent) {
        self.seq += 1;
        ev.seq = self.seq;
        match ev.kind {
            crate::exchsim::EventKind::SubmitLimit => {
                let s = ev.side.expect("side");
                let k = (ev.price.expect("price") / self.cfg.l3.tick).round() as i64;
                self.book.add(s, k, ev.order_id, ev.size.expect("size"));
            }
            crate::exchsim::EventKind::Cancel => self.book.cancel(ev.order_id),
            crate::exchsim::EventKind::SubmitMarket => self.book.market(ev.side.expect("side"), ev.size.expect("size")),
        }
        if let Some((depth, snaps)) = &mut self.snapshots {
            snaps.push(self.book.snapshot(ev.ts, self.cfg.l3.tick, *depth));
        }
        self.events.push(ev);
    }

    fn id(&mut self) -> OrderId {
        self.next_id += 1;
        self.next_id
    }

    fn order_size(&mut self) -> f64 {
        100.0 * self.rng.gen_range(20..=60) as f64
    }

    fn limit(&mut self, ts: i64, s: Side, k: i64, size: f64) {
        let id = self.id();
        let price = k as f64 * self.cfg.l3.tick;
        self.emit(SimEvent::limit(0, ts, id, AMBIENT, s, price, size));
    }

    fn market(&mut self, ts: i64, aggressor: Side, size: f64) {
        let id = self.id();
        self.emit(SimEvent::market(0, ts, id, AMBIENT, aggressor, size));
    }

    fn fill_level(&mut self, ts: i64, s: Side, k: i64, lo: usize, hi: usize) {
        let n = self.rng.gen_range(lo..=hi);
        for _ in 0..n {
            let size = self.order_size();
            self.limit(ts, s, k, size);
        }
    }

    /// Keeps `levels` contiguous levels behind the best, trimming extras.
    fn maintain(&mut self, ts: i64, s: Side) {
        let levels = self.cfg.l3.levels;
        let step = if s == Side::Buy { -1 } else { 1 };
        while self.book.side(s).len() < levels {
            let k = match self.book.worst(s) {
                Some(w) => w + step,
                None => match self.book.best(s.opposite()) {
                    Some(b) => b + step,
                    None => return,
                },
            };
            self.fill_level(ts, s, k, 4, 8);
        }
        while self.book.side(s).len() > levels + 2 {
            let w = self.book.worst(s).expect("nonempty");
            let ids: Vec<OrderId> = self.book.side(s)[&w].iter().map(|o| o.0).collect();
            for id in ids {
                self.emit(SimEvent::cancel(0, ts, id, AMBIENT));
            }
        }
    }

    fn in_episode(&self, ts: i64) -> bool {
        self.episode.is_some() || ts < self.quiet_until
    }

    fn step(&mut self, ts: i64, a: Action) {
        let cfg = self.cfg;
        let l3 = &cfg.l3;
        let takers = self.cfg.taker_intensity > 0.0;
        match a {
            Action::Churn => {
                let s = if self.rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
                let depth = self.rng.gen_range(0..l3.levels);
                let episode_level = self.episode.as_ref().filter(|e| side_of(e.ask) == s).map(|e| e.level);
                if let Some(k) = self.book.level_key(s, depth).filter(|k| Some(*k) != episode_level) {
                    let n = self.book.side(s)[&k].len();
                    if n > 8 || (n > 4 && self.rng.gen_bool(0.5)) {
                        let ids: Vec<OrderId> = self.book.side(s)[&k].iter().map(|o| o.0).collect();
                        let id = *ids.choose(&mut self.rng).expect("nonempty");
                        self.emit(SimEvent::cancel(0, ts, id, AMBIENT));
                        if depth == 0 {
                            // top-level cancels are replacements
                            let size = self.order_size();
                            self.limit(ts, s, k, size);
                        }
                    } else {
                        let size = self.order_size();
                        self.limit(ts, s, k, size);
                    }
                }
                self.schedule_after(ts, l3.churn_per_s / 1000.0, Action::Churn);
            }
            Action::Taker => {
                let s = if self.rng.gen_bool(0.5) { Side::Buy } else { Side::Sell };
                let size = 100.0 * self.rng.gen_range(1..=10) as f64;
                self.market(ts, s, size);
                // top levels stay stocked
                for side in [Side::Buy, Side::Sell] {
                    if let Some(k) = self.book.best(side) {
                        let protected = self.episode.as_ref().is_some_and(|e| side_of(e.ask) == side && e.level == k);
                        if !protected && self.book.total(side, k) < 10_000.0 {
                            let size = self.order_size();
                            self.limit(ts, side, k, size);
                        }
                    }
                }
                self.schedule_after(ts, self.cfg.taker_intensity / 1000.0, Action::Taker);
            }
            Action::Sweep(ask) => {
                if takers && !self.in_episode(ts) {
                    let s = side_of(ask);
                    if let Some(k) = self.book.best(s) {
                        let size = self.book.total(s, k) + 100.0 * self.rng.gen_range(25..=50) as f64;
                        self.market(ts, s.opposite(), size);
                        self.maintain(ts, s);
                        let delay = self.rng.gen_range(20..=100);
                        self.quiet_until = self.quiet_until.max(ts + delay + 50);
                        self.schedule(ts + delay, Action::Refill(ask, k));
                    }
                }
                self.schedule_after(ts, l3.sweep_rate_per_min / 60_000.0, Action::Sweep(ask));
            }
            Action::Refill(ask, k) => {
                let s = side_of(ask);
                let inside = match (s, self.book.best(s), self.book.best(s.opposite())) {
                    (Side::Sell, Some(a), b) => k < a && b.map_or(true, |b| k > b),
                    (Side::Buy, Some(b), a) => k > b && a.map_or(true, |a| k < a),
                    _ => false,
                };
                if inside {
                    for _ in 0..8 {
                        let size = 100.0 * self.rng.gen_range(30..=60) as f64;
                        self.limit(ts, s, k, size);
                    }
                    self.maintain(ts, s);
                }
            }
            Action::EpisodeStart(ask) => {
                let s = side_of(ask);
                if !self.in_episode(ts) && ts + 2_000 < self.cfg.l3.duration_ms {
                    if let Some(k) = self.book.best(s) {
                        let pad = 50_000.0 - self.book.total(s, k);
                        let mut added = 0.0;
                        while added < pad {
                            let size = self.order_size();
                            added += size;
                            self.limit(ts, s, k, size);
                        }
                        let lead = self.rng.gen_range(600..=1000);
                        let hold = self.rng.gen_range(100..=300);
                        let depth = self.rng.gen_range(2..=6);
                        self.collapses.push(PlantedCollapse {
                            side: s,
                            signal_ts: ts,
                            collapse_ts: ts + lead,
                            sweep_ts: ts + lead + hold,
                            depth,
                        });
                        self.episode = Some(Episode {
                            ask,
                            planted: self.collapses.len() - 1,
                            level: k,
                            depth,
                            until: ts + lead + hold + 300,
                        });
                        self.quiet_until = ts + lead + hold + 3_000;
                        self.schedule(ts + lead, Action::Collapse(ask));
                        self.schedule(ts + lead + hold, Action::CollapseSweep(ask));
                    }
                }
                self.schedule_after(ts, l3.collapse_rate_per_min / 60_000.0, Action::EpisodeStart(ask));
            }
            Action::Collapse(ask) => {
                let e = self.episode.as_ref().expect("active episode");
                let (s, k) = (side_of(ask), e.level);
                self.limit(ts, s, k, 300.0);
                let ids: Vec<OrderId> = self.book.side(s)[&k].iter().map(|o| o.0).collect();
                for id in &ids[..ids.len() - 1] {
                    self.emit(SimEvent::cancel(0, ts, *id, AMBIENT));
                }
            }
            Action::CollapseSweep(ask) => {
                let e = self.episode.as_ref().expect("active episode");
                let (s, k, depth) = (side_of(ask), e.level, e.depth);
                if takers {
                    let step = if ask { 1 } else { -1 };
                    let levels: Vec<i64> = (0..depth as i64).map(|d| k + step * d).collect();
                    let consumed: f64 = levels.iter().map(|&l| self.book.total(s, l)).sum();
                    let size = consumed + 100.0 * self.rng.gen_range(25..=50) as f64;
                    self.market(ts, s.opposite(), size);
                    for l in levels {
                        if self.book.total(s, l) == 0.0 {
                            self.fill_level(ts, s.opposite(), l, 4, 8);
                        }
                    }
                    self.maintain(ts, s);
                    self.maintain(ts, s.opposite());
                } else {
                    self.maintain(ts, s);
                }
            }
            Action::Signal => {
                if let Some(e) = &self.episode {
                    if ts > e.until {
                        self.episode = None;
                    }
                }
                self.schedule(ts + l3.signal_step_ms, Action::Signal);
            }
        }
    }
}

/// Order-by-order events on one book with planted collapses. `record_depth`
/// captures the generator's own book after every event.
pub fn gen_l3_events(cfg: &GenConfig, record_depth: Option<usize>) -> GeneratedL3 {
    let l3 = &cfg.l3;
    let mut g = L3Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_13),
        book: GenBook::default(),
        events: Vec::new(),
        snapshots: record_depth.map(|d| (d, Vec::new())),
        next_id: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        order: 0,
        episode: None,
        quiet_until: 0,
        collapses: Vec::new(),
    };
    let mid = (l3.price / l3.tick).round() as i64;
    for d in 0..l3.levels as i64 {
        g.fill_level(0, Side::Buy, mid - 1 - d, 4, 8);
        g.fill_level(0, Side::Sell, mid + d, 4, 8);
    }
    g.schedule_after(0, l3.churn_per_s / 1000.0, Action::Churn);
    if cfg.taker_intensity > 0.0 {
        g.schedule_after(0, cfg.taker_intensity / 1000.0, Action::Taker);
    }
    for ask in [true, false] {
        g.schedule_after(0, l3.sweep_rate_per_min / 60_000.0, Action::Sweep(ask));
        g.schedule_after(0, l3.collapse_rate_per_min / 60_000.0, Action::EpisodeStart(ask));
    }
    g.schedule(l3.signal_step_ms, Action::Signal);

    let mut signal_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x516_a1);
    let base = Normal::new(0.0, 0.7).expect("sd");
    let flow = Normal::new(0.0, 1.0).expect("sd");
    let bump = Normal::new(0.0, 0.5).expect("sd");
    let mut signals = Vec::new();
    while let Some(Reverse((ts, _, a))) = g.queue.pop() {
        if ts > l3.duration_ms {
            break;
        }
        g.step(ts, a);
        if a == Action::Signal {
            let sig = match g.episode.as_ref() {
                Some(e) => {
                    let c = &g.collapses[e.planted];
                    let sign = if e.ask { 1.0 } else { -1.0 };
                    let p = 2.0 + 0.6 * (c.depth as f64 - 2.0) + f64::abs(bump.sample(&mut signal_rng));
                    let f = 0.5 + f64::abs(flow.sample(&mut signal_rng));
                    Signal { ts, prediction: sign * p, mtfi: sign * f }
                }
                None => Signal { ts, prediction: base.sample(&mut signal_rng), mtfi: flow.sample(&mut signal_rng) },
            };
            signals.push(sig);
        }
    }
    GeneratedL3 {
        tick: l3.tick,
        events: g.events,
        signals,
        collapses: g.collapses,
        snapshots: g.snapshots.map(|s| s.1).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig {
            duration_ms: 60_000,
            l3: L3Config { duration_ms: 120_000, ..L3Config::default() },
            ..GenConfig::default()
        }
    }

    #[test]
    fn panel_is_deterministic_and_valid() {
        let a = gen_panel(&small());
        assert_eq!(a, gen_panel(&small()));
        assert!(!a.books.is_empty() && !a.trades.is_empty());
        for b in &a.books {
            assert!(b.validate().is_ok());
        }
    }

    #[test]
    fn l3_is_deterministic_and_uncrossed() {
        let a = gen_l3_events(&small(), Some(3));
        assert_eq!(a, gen_l3_events(&small(), Some(3)));
        assert!(a.events.windows(2).all(|w| w[0].seq < w[1].seq && w[0].ts <= w[1].ts));
        for s in &a.snapshots {
            if let (Some(b), Some(k)) = (s.bids.first(), s.asks.first()) {
                assert!(b.price < k.price);
            }
        }
        assert!(!a.collapses.is_empty());
    }

    #[test]
    fn config_violations() {
        let mut c = GenConfig::default();
        assert!(c.violations().is_empty());
        c.informedness = 1.5;
        c.lag_ms[0] = -1;
        assert_eq!(c.violations().len(), 2);
    }
}
