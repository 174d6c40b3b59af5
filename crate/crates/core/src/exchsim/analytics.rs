//! Post-fill analytics: adverse selection over horizons and the realized
//! plus unrealized PnL path.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::strategy::MakerFill;
use crate::marketdata::Side;
use crate::stats::Summary;
use crate::BPS;

/// 0.5 s to 4800 s.
pub const ADVERSE_HORIZONS_MS: [i64; 11] =
    [500, 5_000, 10_000, 30_000, 60_000, 150_000, 300_000, 600_000, 1_200_000, 2_400_000, 4_800_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdverseSelection {
    pub horizons_ms: Vec<i64>,
    /// One entry per horizon, absent when no fill had data that far out.
    pub stats: Vec<Option<Summary>>,
}

/// Last price at or before `ts` in a time-ordered series.
fn price_at(series: &[(i64, f64)], ts: i64) -> Option<f64> {
    let k = series.partition_point(|&(t, _)| t <= ts);
    (k > 0).then(|| series[k - 1].1)
}

/// Signed move after each fill: negative means the price went against the
/// filled side. Fills whose horizon runs past the series end are excluded.
pub fn adverse_selection(fills: &[MakerFill], reference: &[(i64, f64)], horizons_ms: &[i64]) -> AdverseSelection {
    let end = reference.last().map(|&(t, _)| t).unwrap_or(i64::MIN);
    let stats = horizons_ms
        .iter()
        .map(|&h| {
            let moves: Vec<f64> = fills
                .iter()
                .filter(|f| f.ts + h <= end)
                .filter_map(|f| {
                    let p = price_at(reference, f.ts + h)?;
                    let r = (p / f.price - 1.0) * BPS;
                    Some(match f.side {
                        Side::Buy => r,
                        Side::Sell => -r,
                    })
                })
                .collect();
            Summary::of(&moves)
        })
        .collect();
    AdverseSelection { horizons_ms: horizons_ms.to_vec(), stats }
}

impl AdverseSelection {
    /// Rows are statistics, columns horizons in seconds.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "statistic")?;
        for h in &self.horizons_ms {
            write!(out, ",{}", *h as f64 / 1000.0)?;
        }
        writeln!(out)?;
        let rows: [(&str, fn(&Summary) -> f64); 8] = [
            ("count", |s| s.count as f64),
            ("avg", |s| s.avg),
            ("std", |s| s.std),
            ("min", |s| s.min),
            ("q1", |s| s.q1),
            ("median", |s| s.median),
            ("q3", |s| s.q3),
            ("max", |s| s.max),
        ];
        for (name, pick) in rows {
            write!(out, "{name}")?;
            for s in &self.stats {
                match s {
                    Some(s) => write!(out, ",{}", pick(s))?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnlPoint {
    pub ts: i64,
    /// Signed open inventory from fills, in USD at fill prices.
    pub inventory_usd: f64,
    /// Cash plus open inventory flattened at the last price, plus rebates.
    pub pnl_usd: f64,
    /// `pnl_usd` per order amount, in basis points.
    pub pnl_bps: f64,
}

/// PnL of the fill set augmented with a flattening trade of the open
/// inventory at the last price, evaluated at every reference point.
/// `rebate_bps` is credited on the notional of every fill.
pub fn pnl_timeseries(fills: &[MakerFill], last_price: &[(i64, f64)], rebate_bps: f64, amount: f64) -> Vec<PnlPoint> {
    let (mut cash, mut btc, mut inv_usd, mut rebates) = (0.0, 0.0, 0.0, 0.0);
    let mut f = 0;
    let mut out = Vec::with_capacity(last_price.len());
    for &(ts, price) in last_price {
        while f < fills.len() && fills[f].ts <= ts {
            let x = &fills[f];
            let sign = match x.side {
                Side::Buy => 1.0,
                Side::Sell => -1.0,
            };
            cash -= sign * x.size;
            btc += sign * x.size / x.price;
            inv_usd += sign * x.size;
            rebates += x.size * rebate_bps / BPS;
            f += 1;
        }
        let pnl = cash + btc * price + rebates;
        out.push(PnlPoint { ts, inventory_usd: inv_usd, pnl_usd: pnl, pnl_bps: pnl / amount * BPS });
    }
    out
}

pub fn write_pnl_csv<W: Write>(path: &[PnlPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ts_ms,inventory_usd,pnl_usd,pnl_bps")?;
    for p in path {
        writeln!(out, "{},{},{},{}", p.ts, p.inventory_usd, p.pnl_usd, p.pnl_bps)?;
    }
    Ok(())
}

pub fn write_fills_csv<W: Write>(fills: &[MakerFill], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ts_ms,side,price,size_usd,order_id")?;
    for f in fills {
        let side = match f.side {
            Side::Buy => "buy",
            Side::Sell => "sell",
        };
        writeln!(out, "{},{},{},{},{}", f.ts, side, f.price, f.size, f.order_id)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(ts: i64, side: Side, price: f64) -> MakerFill {
        MakerFill { ts, side, price, size: 2000.0, order_id: 0 }
    }

    #[test]
    fn frozen_price_gives_zero_moves() {
        let series: Vec<(i64, f64)> = (0..20).map(|k| (k * 1000, 100.0)).collect();
        let r = adverse_selection(&[fill(0, Side::Sell, 100.0), fill(1000, Side::Buy, 100.0)], &series, &[500, 5000]);
        for s in r.stats.iter().flatten() {
            assert_eq!((s.avg, s.min, s.max), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn sell_fill_sign_convention() {
        let series = vec![(0, 100.0), (400, 100.2), (1000, 100.2)];
        let r = adverse_selection(&[fill(0, Side::Sell, 100.0)], &series, &[500, 5000]);
        assert!((r.stats[0].unwrap().avg + 20.0).abs() < 1e-9);
        assert!(r.stats[1].is_none());
    }

    #[test]
    fn two_fill_order_statistics() {
        let series = vec![(0, 100.0), (500, 100.1), (600, 100.3), (2000, 100.3)];
        let fills = [fill(0, Side::Sell, 100.0), fill(100, Side::Sell, 100.0)];
        let s = adverse_selection(&fills, &series, &[500]).stats[0].unwrap();
        assert!((s.avg + 20.0).abs() < 1e-9);
        assert!((s.min + 30.0).abs() < 1e-9);
        assert!((s.max + 10.0).abs() < 1e-9);
    }

    #[test]
    fn flattening_and_rebates() {
        let long = pnl_timeseries(&[fill(0, Side::Buy, 100.0)], &[(0, 100.0), (10, 101.0)], 0.0, 2000.0);
        assert!((long[1].pnl_usd - 20.0).abs() < 1e-9);
        assert_eq!(long[1].inventory_usd, 2000.0);

        let fills = [fill(0, Side::Buy, 100.0), fill(5, Side::Sell, 100.0)];
        let path = pnl_timeseries(&fills, &[(0, 100.0), (10, 100.0)], 2.5, 2000.0);
        assert!((path[1].pnl_bps - 5.0).abs() < 1e-9);
        assert_eq!(path[1].inventory_usd, 0.0);
    }
}
