//! One-unit taker strategy driven by model predictions, and its PnL in
//! accumulated basis points.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::marketdata::{BookSnapshot, Side};
use crate::stats;
use crate::BPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub ts: i64,
    pub side: Side,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FillSequence {
    pub fills: Vec<Fill>,
    /// Position after each fill, in units.
    pub positions: Vec<i8>,
    /// Signals dropped because the book or prediction was absent.
    pub skipped: usize,
}

impl FillSequence {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ts_ms,side,price,position")?;
        for (f, p) in self.fills.iter().zip(&self.positions) {
            let side = match f.side {
                Side::Buy => "buy",
                Side::Sell => "sell",
            };
            writeln!(out, "{},{},{},{}", f.ts, side, f.price, p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnLReport {
    pub pnl1: f64,
    pub pnl2: f64,
    pub pnl3: f64,
    pub n_trades: usize,
    pub threshold: f64,
}

/// Percentile (0..=100) of in-sample predictions, linearly interpolated.
pub fn threshold_from_insample(predictions: &[f64], percentile: f64) -> Option<f64> {
    stats::quantile(predictions, percentile / 100.0)
}

/// Scans predictions chronologically: buy at the ask when `pred > T` and the
/// position is not long, sell at the bid when `pred < -T` and not short.
pub fn run_taker_walkforward<'a, B>(
    ts: &[i64],
    predictions: &[Option<f64>],
    book_at: B,
    threshold: f64,
) -> FillSequence
where
    B: Fn(usize) -> Option<&'a BookSnapshot>,
{
    let mut seq = FillSequence::default();
    let mut position: i8 = 0;
    for (i, pred) in predictions.iter().enumerate() {
        let want = match pred {
            Some(p) if *p > threshold && position <= 0 => Some(Side::Buy),
            Some(p) if *p < -threshold && position >= 0 => Some(Side::Sell),
            Some(_) => None,
            None => {
                seq.skipped += 1;
                None
            }
        };
        let Some(side) = want else { continue };
        let touch = book_at(i).and_then(|b| match side {
            Side::Buy => b.best_ask(),
            Side::Sell => b.best_bid(),
        });
        let Some(level) = touch else {
            log::debug!("signal at {} skipped: no book", ts[i]);
            seq.skipped += 1;
            continue;
        };
        position = if side == Side::Buy { 1 } else { -1 };
        seq.fills.push(Fill { ts: ts[i], side, price: level.price });
        seq.positions.push(position);
    }
    seq
}

/// PnL of a fill sequence. Fills are paired `(0,1), (2,3), …`; each pair adds
/// `(p_sell/p_buy - 1)·1e4`. An unmatched trailing fill adds nothing but its
/// fee is still charged.
pub fn compute_pnl(seq: &FillSequence, fee_default: f64, fee_vip: f64, threshold: f64) -> PnLReport {
    let mut pnl1 = 0.0;
    for pair in seq.fills.chunks_exact(2) {
        let (buy, sell) = match (pair[0].side, pair[1].side) {
            (Side::Buy, Side::Sell) => (pair[0].price, pair[1].price),
            (Side::Sell, Side::Buy) => (pair[1].price, pair[0].price),
            _ => continue,
        };
        pnl1 += (sell / buy - 1.0) * BPS;
    }
    let n = seq.fills.len();
    PnLReport {
        pnl1,
        pnl2: pnl1 - n as f64 * fee_default,
        pnl3: pnl1 - n as f64 * fee_vip,
        n_trades: n,
        threshold,
    }
}

/// `cells[i][j]`: report for target market `i` traded on signals from source `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnLMatrix {
    pub markets: Vec<String>,
    pub cells: Vec<Vec<Option<PnLReport>>>,
}

impl PnLMatrix {
    pub fn values(&self, pick: impl Fn(&PnLReport) -> f64) -> Vec<Vec<f64>> {
        self.cells.iter().map(|r| r.iter().map(|c| c.as_ref().map(&pick).unwrap_or(0.0)).collect()).collect()
    }

    pub fn row_avg(&self, pick: impl Fn(&PnLReport) -> f64) -> Vec<f64> {
        let m = self.markets.len().max(1) as f64;
        self.values(pick).iter().map(|r| r.iter().sum::<f64>() / m).collect()
    }

    pub fn col_avg(&self, pick: impl Fn(&PnLReport) -> f64) -> Vec<f64> {
        let v = self.values(pick);
        let m = self.markets.len();
        (0..m).map(|j| (0..m).map(|i| v[i][j]).sum::<f64>() / m.max(1) as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, pick: impl Fn(&PnLReport) -> f64) -> std::io::Result<()> {
        write!(out, "target")?;
        for m in &self.markets {
            write!(out, ",{m}")?;
        }
        writeln!(out)?;
        for (m, row) in self.markets.iter().zip(self.values(pick)) {
            write!(out, "{m}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::Level;

    fn fixed_book() -> BookSnapshot {
        BookSnapshot {
            ts: 0,
            market_id: "m".into(),
            bids: vec![Level::new(99.0, 1.0)],
            asks: vec![Level::new(100.0, 1.0)],
        }
    }

    fn fill(side: Side, price: f64) -> Fill {
        Fill { ts: 0, side, price }
    }

    #[test]
    fn threshold_examples() {
        let p: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((threshold_from_insample(&p, 95.0).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(threshold_from_insample(&[2.5; 10], 95.0), Some(2.5));
        assert_eq!(threshold_from_insample(&[-1.0], 95.0), Some(-1.0));
    }

    #[test]
    fn walkforward_traces() {
        let book = fixed_book();
        let ts: Vec<i64> = (0..6).collect();
        let quiet = vec![Some(0.5); 6];
        assert!(run_taker_walkforward(&ts, &quiet, |_| Some(&book), 1.0).fills.is_empty());

        let preds = vec![Some(2.0), Some(0.0), Some(-2.0), Some(-3.0), Some(2.0), Some(5.0)];
        let seq = run_taker_walkforward(&ts, &preds, |_| Some(&book), 1.0);
        let got: Vec<(Side, f64)> = seq.fills.iter().map(|f| (f.side, f.price)).collect();
        assert_eq!(got, vec![(Side::Buy, 100.0), (Side::Sell, 99.0), (Side::Buy, 100.0)]);
        assert_eq!(seq.positions, vec![1, -1, 1]);

        let burst = vec![Some(9.0); 6];
        assert_eq!(run_taker_walkforward(&ts, &burst, |_| Some(&book), 1.0).fills.len(), 1);

        let seq = run_taker_walkforward(&ts, &burst, |i| if i == 0 { None } else { Some(&book) }, 1.0);
        assert_eq!(seq.fills[0].ts, 1);
        assert_eq!(seq.skipped, 1);
    }

    #[test]
    fn pnl_examples() {
        let seq = FillSequence { fills: vec![fill(Side::Buy, 100.0), fill(Side::Sell, 101.0)], positions: vec![1, -1], skipped: 0 };
        let r = compute_pnl(&seq, 4.0, 1.5, 0.0);
        assert!((r.pnl1 - 100.0).abs() < 1e-9);
        assert!((r.pnl2 - 92.0).abs() < 1e-9);
        assert!((r.pnl3 - 97.0).abs() < 1e-9);

        let flat = FillSequence { fills: vec![fill(Side::Buy, 100.0), fill(Side::Sell, 100.0)], positions: vec![1, -1], skipped: 0 };
        let r = compute_pnl(&flat, 4.0, 1.5, 0.0);
        assert_eq!((r.pnl1, r.pnl2), (0.0, -8.0));

        let r = compute_pnl(&FillSequence::default(), 4.0, 1.5, 0.0);
        assert_eq!((r.pnl1, r.pnl2, r.pnl3, r.n_trades), (0.0, 0.0, 0.0, 0));
    }

    #[test]
    fn trailing_fill_is_charged_but_not_paired() {
        let seq = FillSequence {
            fills: vec![fill(Side::Sell, 101.0), fill(Side::Buy, 100.0), fill(Side::Sell, 50.0)],
            positions: vec![-1, 1, -1],
            skipped: 0,
        };
        let r = compute_pnl(&seq, 5.0, 2.0, 0.0);
        assert!((r.pnl1 - 100.0).abs() < 1e-9);
        assert_eq!(r.pnl2, r.pnl1 - 15.0);
        assert_eq!(r.pnl3, r.pnl1 - 6.0);
    }
}
