//! Price-time priority limit order book with per-order queues.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::marketdata::{BookSnapshot, Level, Side};

pub type OrderId = u64;

/// Owner tag of ambient (non-strategy) flow.
pub const AMBIENT: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SubmitLimit,
    Cancel,
    SubmitMarket,
}

/// One simulator input. `side`, `price` and `size` are ignored for cancels;
/// `price` is ignored for market orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub seq: u64,
    pub ts: i64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    pub order_id: OrderId,
    #[serde(default)]
    pub owner: u32,
}

impl SimEvent {
    pub fn limit(seq: u64, ts: i64, id: OrderId, owner: u32, side: Side, price: f64, size: f64) -> Self {
        SimEvent { seq, ts, kind: EventKind::SubmitLimit, side: Some(side), price: Some(price), size: Some(size), order_id: id, owner }
    }

    pub fn market(seq: u64, ts: i64, id: OrderId, owner: u32, side: Side, size: f64) -> Self {
        SimEvent { seq, ts, kind: EventKind::SubmitMarket, side: Some(side), price: None, size: Some(size), order_id: id, owner }
    }

    pub fn cancel(seq: u64, ts: i64, id: OrderId, owner: u32) -> Self {
        SimEvent { seq, ts, kind: EventKind::Cancel, side: None, price: None, size: None, order_id: id, owner }
    }
}

/// A resting order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub owner: u32,
    pub size: f64,
    pub seq: u64,
}

/// One execution between an incoming order and a resting one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub seq: u64,
    pub ts: i64,
    /// Aggressor side.
    pub side: Side,
    pub price: f64,
    pub size: f64,
    pub taker_id: OrderId,
    pub taker_owner: u32,
    pub maker_id: OrderId,
    pub maker_owner: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApplyOutcome {
    pub fills: Vec<Execution>,
    pub diagnostic: Option<String>,
}

/// L3 book. Prices are stored as integer multiples of `tick`.
#[derive(Debug, Clone)]
pub struct BookL3 {
    tick: f64,
    bids: BTreeMap<i64, VecDeque<Order>>,
    asks: BTreeMap<i64, VecDeque<Order>>,
    index: HashMap<OrderId, (Side, i64)>,
    last_seq: Option<u64>,
}

impl BookL3 {
    pub fn new(tick: f64) -> Self {
        assert!(tick > 0.0, "tick must be positive");
        BookL3 { tick, bids: BTreeMap::new(), asks: BTreeMap::new(), index: HashMap::new(), last_seq: None }
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn to_ticks(&self, price: f64) -> i64 {
        (price / self.tick).round() as i64
    }

    pub fn price_of(&self, ticks: i64) -> f64 {
        ticks as f64 * self.tick
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<i64, VecDeque<Order>> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn side(&self, side: Side) -> &BTreeMap<i64, VecDeque<Order>> {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    pub fn best_bid_ticks(&self) -> Option<i64> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask_ticks(&self) -> Option<i64> {
        self.asks.keys().next().copied()
    }

    /// Best price and total resting size on `side` (`Buy` = bids).
    pub fn top(&self, side: Side) -> Option<(f64, f64)> {
        let (k, q) = match side {
            Side::Buy => self.bids.iter().next_back()?,
            Side::Sell => self.asks.iter().next()?,
        };
        Some((self.price_of(*k), q.iter().map(|o| o.size).sum()))
    }

    pub fn best_bid(&self) -> Option<f64> {
        self.best_bid_ticks().map(|k| self.price_of(k))
    }

    pub fn best_ask(&self) -> Option<f64> {
        self.best_ask_ticks().map(|k| self.price_of(k))
    }

    pub fn order(&self, id: OrderId) -> Option<Order> {
        let (side, k) = self.index.get(&id)?;
        self.side(*side).get(k)?.iter().find(|o| o.id == id).copied()
    }

    pub fn is_live(&self, id: OrderId) -> bool {
        self.index.contains_key(&id)
    }

    /// Orders at one level in queue order.
    pub fn queue(&self, side: Side, price: f64) -> Vec<Order> {
        let k = self.to_ticks(price);
        self.side(side).get(&k).map(|q| q.iter().copied().collect()).unwrap_or_default()
    }

    /// Aggregated view with at most `depth` levels per side.
    pub fn snapshot(&self, ts: i64, market_id: &str, depth: usize) -> BookSnapshot {
        let agg = |(k, q): (&i64, &VecDeque<Order>)| Level::new(self.price_of(*k), q.iter().map(|o| o.size).sum());
        BookSnapshot {
            ts,
            market_id: market_id.to_string(),
            bids: self.bids.iter().rev().take(depth).map(agg).collect(),
            asks: self.asks.iter().take(depth).map(agg).collect(),
        }
    }

    /// Applies one event.
    pub fn apply_event(&mut self, ev: &SimEvent) -> ApplyOutcome {
        let mut out = ApplyOutcome::default();
        if let Some(prev) = self.last_seq {
            if ev.seq <= prev {
                out.diagnostic = Some(format!("event seq {} not after {}", ev.seq, prev));
                return out;
            }
        }
        self.last_seq = Some(ev.seq);
        match ev.kind {
            EventKind::Cancel => {
                if !self.cancel(ev.order_id) {
                    out.diagnostic = Some(format!("cancel of unknown or filled order {}", ev.order_id));
                }
            }
            EventKind::SubmitLimit | EventKind::SubmitMarket => {
                let (Some(side), Some(size)) = (ev.side, ev.size) else {
                    out.diagnostic = Some(format!("order {} lacks side or size", ev.order_id));
                    return out;
                };
                if !(size > 0.0) {
                    out.diagnostic = Some(format!("order {} has non-positive size", ev.order_id));
                    return out;
                }
                if self.index.contains_key(&ev.order_id) {
                    out.diagnostic = Some(format!("duplicate order id {}", ev.order_id));
                    return out;
                }
                let limit = match ev.kind {
                    EventKind::SubmitLimit => match ev.price {
                        Some(p) if p > 0.0 => Some(self.to_ticks(p)),
                        _ => {
                            out.diagnostic = Some(format!("limit order {} lacks a positive price", ev.order_id));
                            return out;
                        }
                    },
                    _ => None,
                };
                let remaining = self.match_incoming(ev, side, size, limit, &mut out.fills);
                if remaining > 0.0 {
                    match limit {
                        Some(k) => {
                            self.side_mut(side).entry(k).or_default().push_back(Order {
                                id: ev.order_id,
                                owner: ev.owner,
                                size: remaining,
                                seq: ev.seq,
                            });
                            self.index.insert(ev.order_id, (side, k));
                        }
                        None => {
                            out.diagnostic = Some(format!("market order {} left {remaining} unfilled", ev.order_id));
                        }
                    }
                }
            }
        }
        out
    }

    fn match_incoming(&mut self, ev: &SimEvent, side: Side, size: f64, limit: Option<i64>, fills: &mut Vec<Execution>) -> f64 {
        let mut remaining = size;
        let tick = self.tick;
        while remaining > 0.0 {
            let best = match side {
                Side::Buy => self.best_ask_ticks(),
                Side::Sell => self.best_bid_ticks(),
            };
            let Some(k) = best else { break };
            let crosses = match (side, limit) {
                (_, None) => true,
                (Side::Buy, Some(l)) => k <= l,
                (Side::Sell, Some(l)) => k >= l,
            };
            if !crosses {
                break;
            }
            let book_side = self.side_mut(side.opposite());
            let queue = book_side.get_mut(&k).expect("level exists");
            let mut emptied = Vec::new();
            while remaining > 0.0 {
                let Some(front) = queue.front_mut() else { break };
                let take = front.size.min(remaining);
                front.size -= take;
                remaining -= take;
                fills.push(Execution {
                    seq: ev.seq,
                    ts: ev.ts,
                    side,
                    price: k as f64 * tick,
                    size: take,
                    taker_id: ev.order_id,
                    taker_owner: ev.owner,
                    maker_id: front.id,
                    maker_owner: front.owner,
                });
                if front.size <= 0.0 {
                    emptied.push(front.id);
                    queue.pop_front();
                }
            }
            if queue.is_empty() {
                book_side.remove(&k);
            }
            for id in emptied {
                self.index.remove(&id);
            }
        }
        remaining
    }

    fn cancel(&mut self, id: OrderId) -> bool {
        let Some((side, k)) = self.index.remove(&id) else { return false };
        let book_side = self.side_mut(side);
        if let Some(q) = book_side.get_mut(&k) {
            q.retain(|o| o.id != id);
            if q.is_empty() {
                book_side.remove(&k);
            }
        }
        true
    }

    pub fn is_crossed(&self) -> bool {
        matches!((self.best_bid_ticks(), self.best_ask_ticks()), (Some(b), Some(a)) if b >= a)
    }
}

/// `(bid·a_bid + ask·a_ask) / (a_bid + a_ask)`: each price weighted by its own side's size.
pub fn microprice(book: &BookSnapshot) -> Option<f64> {
    let b = book.best_bid()?;
    let a = book.best_ask()?;
    Some((b.price * b.size + a.price * a.size) / (b.size + a.size))
}

/// Replays `events` on an empty book, returning every execution in order.
pub fn replay(tick: f64, events: &[SimEvent]) -> (BookL3, Vec<Execution>) {
    let mut book = BookL3::new(tick);
    let mut fills = Vec::new();
    for ev in events {
        fills.extend(book.apply_event(ev).fills);
    }
    (book, fills)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(seq: u64, id: OrderId, price: f64, size: f64) -> SimEvent {
        SimEvent::limit(seq, seq as i64, id, AMBIENT, Side::Sell, price, size)
    }

    #[test]
    fn partial_fill_of_single_order() {
        let mut b = BookL3::new(0.5);
        b.apply_event(&ask(1, 1, 100.0, 300.0));
        let out = b.apply_event(&SimEvent::market(2, 2, 9, AMBIENT, Side::Buy, 100.0));
        assert_eq!(out.fills.len(), 1);
        assert_eq!((out.fills[0].maker_id, out.fills[0].size), (1, 100.0));
        assert_eq!(b.queue(Side::Sell, 100.0)[0].size, 200.0);
    }

    #[test]
    fn fifo_within_level() {
        let mut b = BookL3::new(0.5);
        b.apply_event(&ask(1, 1, 100.0, 300.0));
        b.apply_event(&ask(2, 2, 100.0, 400.0));
        let out = b.apply_event(&SimEvent::market(3, 3, 9, AMBIENT, Side::Buy, 500.0));
        let got: Vec<(OrderId, f64)> = out.fills.iter().map(|f| (f.maker_id, f.size)).collect();
        assert_eq!(got, vec![(1, 300.0), (2, 200.0)]);
        assert_eq!(b.queue(Side::Sell, 100.0), vec![Order { id: 2, owner: AMBIENT, size: 200.0, seq: 2 }]);
    }

    #[test]
    fn passive_limit_rests() {
        let mut b = BookL3::new(0.5);
        b.apply_event(&ask(1, 1, 100.0, 300.0));
        let out = b.apply_event(&SimEvent::limit(2, 2, 2, AMBIENT, Side::Buy, 99.5, 50.0));
        assert!(out.fills.is_empty());
        assert_eq!(b.top(Side::Buy), Some((99.5, 50.0)));
        assert_eq!(b.top(Side::Sell), Some((100.0, 300.0)));
    }

    #[test]
    fn marketable_limit_executes_then_rests() {
        let mut b = BookL3::new(0.5);
        b.apply_event(&ask(1, 1, 100.0, 300.0));
        b.apply_event(&ask(2, 2, 101.0, 300.0));
        let out = b.apply_event(&SimEvent::limit(3, 3, 3, AMBIENT, Side::Buy, 100.5, 500.0));
        assert_eq!(out.fills.len(), 1);
        assert_eq!(b.top(Side::Buy), Some((100.5, 200.0)));
        assert_eq!(b.top(Side::Sell), Some((101.0, 300.0)));
        assert!(!b.is_crossed());
    }

    #[test]
    fn cancel_unknown_is_a_noop_with_diagnostic() {
        let mut b = BookL3::new(0.5);
        b.apply_event(&ask(1, 1, 100.0, 300.0));
        let out = b.apply_event(&SimEvent::cancel(2, 2, 77, AMBIENT));
        assert!(out.diagnostic.is_some());
        assert_eq!(b.top(Side::Sell), Some((100.0, 300.0)));
        b.apply_event(&SimEvent::market(3, 3, 5, AMBIENT, Side::Buy, 300.0));
        assert!(b.apply_event(&SimEvent::cancel(4, 4, 1, AMBIENT)).diagnostic.is_some());
    }

    #[test]
    fn microprice_examples() {
        let mk = |bs: f64, as_: f64| BookSnapshot {
            ts: 0,
            market_id: "m".into(),
            bids: vec![Level::new(99.0, bs)],
            asks: vec![Level::new(101.0, as_)],
        };
        assert_eq!(microprice(&mk(100.0, 100.0)), Some(100.0));
        assert_eq!(microprice(&mk(300.0, 100.0)), Some(99.5));
        assert!((microprice(&mk(100.0, 1e-9)).unwrap() - 99.0).abs() < 1e-9);
    }

    #[test]
    fn event_json_round_trip() {
        let ev = SimEvent::limit(3, 10, 4, 1, Side::Buy, 100.5, 200.0);
        let s = serde_json::to_string(&ev).unwrap();
        assert_eq!(serde_json::from_str::<SimEvent>(&s).unwrap(), ev);
        let c = SimEvent::cancel(4, 11, 4, 1);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"seq":4,"ts":11,"kind":"cancel","order_id":4,"owner":1}"#);
    }
}
