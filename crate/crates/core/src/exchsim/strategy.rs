//! Maker strategy: a sell bot and a buy bot sharing one inventory and one
//! rate limiter, driven by model predictions and run against the L3 engine.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::book::{BookL3, Execution, OrderId, SimEvent, AMBIENT};
use crate::marketdata::Side;

/// Owner tag of strategy orders.
pub const STRATEGY: u32 = 1;
const STRATEGY_ID_BASE: OrderId = 1 << 62;

/// One model observation fed to the strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub ts: i64,
    pub prediction: f64,
    pub mtfi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakerParams {
    /// Cancel threshold T.
    pub t_cancel: f64,
    /// Flow gate T'.
    pub t_prime: f64,
    /// Order amount in USD; one inventory unit.
    pub amount: f64,
    pub tick: f64,
    pub rate_capacity: u32,
    pub refill_per_minute: f64,
    /// Starting inventory in units.
    pub initial_position: f64,
    /// Maker rebate credited per fill, bpts.
    pub rebate_bps: f64,
}

impl Default for MakerParams {
    fn default() -> Self {
        MakerParams {
            t_cancel: 1.83,
            t_prime: 0.0,
            amount: 2000.0,
            tick: 0.1,
            rate_capacity: 100,
            refill_per_minute: 100.0,
            initial_position: 1.0,
            rebate_bps: 2.5,
        }
    }
}

impl MakerParams {
    /// Never-cancel benchmark: `T = T' = ∞`.
    pub fn benchmark(&self) -> MakerParams {
        MakerParams { t_cancel: f64::INFINITY, t_prime: f64::INFINITY, ..self.clone() }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.amount > 0.0) {
            out.push("amount: must be > 0".into());
        }
        if self.rate_capacity < 2 {
            out.push("rate_capacity: must be >= 2".into());
        }
        if !(self.tick > 0.0) {
            out.push("tick: must be > 0".into());
        }
        if !(self.refill_per_minute > 0.0) {
            out.push("refill_per_minute: must be > 0".into());
        }
        if self.initial_position != 1.0 && self.initial_position != 0.0 {
            out.push("initial_position: must be 0 or 1 unit".into());
        }
        out
    }
}

/// Sliding-window request limiter: at most `capacity` actions in any window
/// of `60000·capacity/refill_per_minute` ms.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    capacity: u32,
    window_ms: i64,
    log: VecDeque<i64>,
}

impl RateLimiter {
    pub fn new(capacity: u32, refill_per_minute: f64) -> Self {
        let window_ms = (60_000.0 * capacity as f64 / refill_per_minute).round() as i64;
        RateLimiter { capacity, window_ms, log: VecDeque::new() }
    }

    pub fn window_ms(&self) -> i64 {
        self.window_ms
    }

    /// Remaining requests at `now`.
    pub fn remaining(&mut self, now: i64) -> u32 {
        while let Some(&t) = self.log.front() {
            if t <= now - self.window_ms {
                self.log.pop_front();
            } else {
                break;
            }
        }
        self.capacity - self.log.len() as u32
    }

    /// Consumes one request if more than `reserve` remain.
    pub fn try_consume(&mut self, now: i64, reserve: u32) -> bool {
        if self.remaining(now) > reserve {
            self.log.push_back(now);
            true
        } else {
            false
        }
    }
}

/// A strategy execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MakerFill {
    pub ts: i64,
    pub side: Side,
    pub price: f64,
    /// USD notional.
    pub size: f64,
    pub order_id: OrderId,
}

/// Consecutive same-side fills that together move the inventory by one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub side: Side,
    pub size: f64,
    /// Size-weighted average price.
    pub price: f64,
    pub start_ts: i64,
    pub end_ts: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub posts: usize,
    pub cancels: usize,
    /// Cancels of an order no longer at the top, followed by a new post.
    pub reprices: usize,
    /// Decisions blocked by the rate limiter.
    pub suppressed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakerRun {
    pub fills: Vec<MakerFill>,
    pub legs: Vec<Leg>,
    pub actions: ActionCounts,
    /// Last traded price after every execution, `(ts, price)`.
    pub trades: Vec<(i64, f64)>,
    /// Strategy actions as engine events, in order.
    pub strategy_events: Vec<SimEvent>,
}

impl MakerRun {
    /// `(avg sell / avg buy - 1)·1e4` over all fills, size weighted.
    pub fn roundtrip_bps(&self) -> Option<f64> {
        roundtrip_bps(&self.fills)
    }

    /// Whether consecutive legs alternate sides.
    pub fn legs_alternate(&self) -> bool {
        self.legs.windows(2).all(|w| w[0].side != w[1].side)
    }
}

pub fn roundtrip_bps(fills: &[MakerFill]) -> Option<f64> {
    let (mut bn, mut bs, mut sn, mut ss) = (0.0, 0.0, 0.0, 0.0);
    for f in fills {
        match f.side {
            Side::Buy => {
                bn += f.price * f.size;
                bs += f.size;
            }
            Side::Sell => {
                sn += f.price * f.size;
                ss += f.size;
            }
        }
    }
    if bs == 0.0 || ss == 0.0 {
        return None;
    }
    Some(((sn / ss) / (bn / bs) - 1.0) * crate::BPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Selling,
    Buying,
}

struct Maker<'p> {
    params: &'p MakerParams,
    book: BookL3,
    limiter: RateLimiter,
    seq: u64,
    next_id: OrderId,
    phase: Phase,
    /// Inventory in USD, measured against one unit.
    inventory: f64,
    /// Live strategy order and its price in ticks.
    resting: Option<(OrderId, i64)>,
    signal: Option<Signal>,
    run: MakerRun,
}

impl<'p> Maker<'p> {
    fn apply(&mut self, mut ev: SimEvent) {
        self.seq += 1;
        ev.seq = self.seq;
        let out = self.book.apply_event(&ev);
        if ev.owner == STRATEGY {
            self.run.strategy_events.push(ev.clone());
        }
        for x in out.fills {
            self.record(&x);
        }
    }

    fn record(&mut self, x: &Execution) {
        self.run.trades.push((x.ts, x.price));
        if x.maker_owner != STRATEGY {
            return;
        }
        let side = x.side.opposite();
        self.run.fills.push(MakerFill { ts: x.ts, side, price: x.price, size: x.size, order_id: x.maker_id });
        match self.run.legs.last_mut() {
            Some(leg) if leg.side == side => {
                leg.price = (leg.price * leg.size + x.price * x.size) / (leg.size + x.size);
                leg.size += x.size;
                leg.end_ts = x.ts;
            }
            _ => self.run.legs.push(Leg { side, size: x.size, price: x.price, start_ts: x.ts, end_ts: x.ts }),
        }
        match side {
            Side::Sell => self.inventory -= x.size,
            Side::Buy => self.inventory += x.size,
        }
        if !self.book.is_live(x.maker_id) {
            self.resting = None;
        }
        match self.phase {
            Phase::Selling if self.inventory <= 0.0 => self.phase = Phase::Buying,
            Phase::Buying if self.inventory >= self.params.amount => self.phase = Phase::Selling,
            _ => {}
        }
    }

    fn decide(&mut self, ts: i64) {
        let Some(sig) = self.signal else { return };
        let p = self.params;
        let (side, cancel, post_ok) = match self.phase {
            Phase::Selling => (Side::Sell, sig.prediction > p.t_cancel, sig.prediction <= p.t_cancel && sig.mtfi < p.t_prime),
            Phase::Buying => (Side::Buy, sig.prediction < -p.t_cancel, sig.prediction >= -p.t_cancel && sig.mtfi > -p.t_prime),
        };
        if let Some((id, k)) = self.resting {
            let outbid = match side {
                Side::Sell => self.book.best_ask_ticks().is_some_and(|a| a < k),
                Side::Buy => self.book.best_bid_ticks().is_some_and(|b| b > k),
            };
            if cancel || outbid {
                if self.limiter.try_consume(ts, 0) {
                    if cancel {
                        self.run.actions.cancels += 1;
                    } else {
                        self.run.actions.reprices += 1;
                    }
                    self.resting = None;
                    self.apply(SimEvent::cancel(0, ts, id, STRATEGY));
                } else {
                    self.run.actions.suppressed += 1;
                    return;
                }
            } else {
                return;
            }
        }
        if !post_ok {
            return;
        }
        let price_ticks = match side {
            Side::Sell => self.book.best_bid_ticks().map(|k| k + 1),
            Side::Buy => self.book.best_ask_ticks().map(|k| k - 1),
        };
        let Some(k) = price_ticks else { return };
        let size = match side {
            Side::Sell => self.inventory,
            Side::Buy => p.amount - self.inventory,
        };
        if size <= 0.0 {
            return;
        }
        if !self.limiter.try_consume(ts, 1) {
            self.run.actions.suppressed += 1;
            return;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.run.actions.posts += 1;
        self.resting = Some((id, k));
        let price = self.book.price_of(k);
        self.apply(SimEvent::limit(0, ts, id, STRATEGY, side, price, size));
        if !self.book.is_live(id) {
            self.resting = None;
        }
    }
}

/// Runs the maker strategy against ambient `events`, consulting the most
/// recent signal at every step. Signals are processed before events that
/// share their timestamp.
pub fn run_maker_strategy(events: &[SimEvent], signals: &[Signal], params: &MakerParams) -> MakerRun {
    let mut m = Maker {
        params,
        book: BookL3::new(params.tick),
        limiter: RateLimiter::new(params.rate_capacity, params.refill_per_minute),
        seq: 0,
        next_id: STRATEGY_ID_BASE,
        phase: if params.initial_position > 0.0 { Phase::Selling } else { Phase::Buying },
        inventory: params.initial_position * params.amount,
        resting: None,
        signal: None,
        run: MakerRun {
            fills: Vec::new(),
            legs: Vec::new(),
            actions: ActionCounts::default(),
            trades: Vec::new(),
            strategy_events: Vec::new(),
        },
    };
    let (mut e, mut s) = (0, 0);
    while e < events.len() || s < signals.len() {
        let take_signal = s < signals.len() && (e >= events.len() || signals[s].ts <= events[e].ts);
        let ts = if take_signal {
            m.signal = Some(signals[s]);
            s += 1;
            signals[s - 1].ts
        } else {
            let mut ev = events[e].clone();
            e += 1;
            if ev.owner == STRATEGY {
                ev.owner = AMBIENT;
            }
            let ts = ev.ts;
            m.apply(ev);
            ts
        };
        m.decide(ts);
    }
    m.run
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed_book(ts: i64) -> Vec<SimEvent> {
        vec![
            SimEvent::limit(1, ts, 1, AMBIENT, Side::Buy, 99.9, 5000.0),
            SimEvent::limit(2, ts, 2, AMBIENT, Side::Sell, 100.0, 5000.0),
        ]
    }

    fn sig(ts: i64, prediction: f64) -> Signal {
        Signal { ts, prediction, mtfi: -1.0 }
    }

    fn params() -> MakerParams {
        MakerParams { t_cancel: 2.0, tick: 0.1, ..MakerParams::default() }
    }

    #[test]
    fn closed_gate_never_posts() {
        let mut ev = seed_book(0);
        ev.push(SimEvent::market(3, 100, 10, AMBIENT, Side::Buy, 20_000.0));
        let run = run_maker_strategy(&ev, &[sig(1, 5.0)], &params());
        assert!(run.fills.is_empty());
        assert_eq!(run.actions.posts, 0);
    }

    #[test]
    fn sweep_before_signal_fills_and_cancel_first_avoids() {
        let mut ev = seed_book(0);
        ev.push(SimEvent::market(3, 100, 10, AMBIENT, Side::Buy, 7000.0));
        // signal turns at 150, after the sweep
        let late = run_maker_strategy(&ev, &[sig(1, 0.0), sig(150, 5.0)], &params());
        assert_eq!(late.fills.len(), 1);
        assert_eq!((late.fills[0].side, late.fills[0].price, late.fills[0].size), (Side::Sell, 100.0, 2000.0));
        // the same signal one event earlier cancels first
        let early = run_maker_strategy(&ev, &[sig(1, 0.0), sig(100, 5.0)], &params());
        assert!(early.fills.is_empty());
        assert_eq!(early.actions.cancels, 1);
    }

    #[test]
    fn benchmark_never_cancels() {
        let mut ev = seed_book(0);
        ev.push(SimEvent::market(3, 100, 10, AMBIENT, Side::Buy, 7000.0));
        let run = run_maker_strategy(&ev, &[sig(1, 0.0), sig(50, 1e9)], &params().benchmark());
        assert_eq!(run.actions.cancels, 0);
        assert_eq!(run.fills.len(), 1);
    }

    #[test]
    fn rate_limiter_window() {
        let mut rl = RateLimiter::new(3, 3.0);
        assert_eq!(rl.window_ms(), 60_000);
        assert!(rl.try_consume(0, 0));
        assert!(rl.try_consume(1, 0));
        assert!(!rl.try_consume(2, 1));
        assert!(rl.try_consume(2, 0));
        assert!(!rl.try_consume(3, 0));
        assert!(rl.try_consume(60_000, 0));
    }

    #[test]
    fn roundtrip_metric() {
        let f = |side, price| MakerFill { ts: 0, side, price, size: 2000.0, order_id: 0 };
        assert!((roundtrip_bps(&[f(Side::Buy, 100.0), f(Side::Sell, 101.0)]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(roundtrip_bps(&[f(Side::Buy, 100.0)]), None);
    }
}
