//! Cancel-threshold calibration from observed top-ask collapses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::book::{BookL3, SimEvent};
use super::strategy::Signal;
use crate::marketdata::{Grid, Side};
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("no sample satisfies the collapse condition")]
    EmptySet,
    #[error("no top-of-book samples")]
    NoSamples,
}

/// Quantile levels of the exposed threshold family.
pub const THRESHOLD_QUANTILES: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelCalibration {
    /// Median prediction over the qualifying set.
    pub threshold: f64,
    /// `(q, T_q)` for each level in [`THRESHOLD_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
    /// First quartile of top-ask size.
    pub m_low: f64,
    /// Median of top-ask size.
    pub m_high: f64,
    /// Indices of qualifying samples.
    pub qualifying: Vec<usize>,
    /// Runs of consecutive qualifying samples.
    pub episodes: usize,
}

/// Top-of-book `(price, size)` on `side` at every grid point, replaying
/// `events` with last-state-at-or-before semantics.
pub fn sample_top(events: &[SimEvent], tick: f64, grid: &Grid, side: Side) -> Vec<Option<(f64, f64)>> {
    let mut book = BookL3::new(tick);
    let mut out = Vec::with_capacity(grid.len);
    let mut e = 0;
    for t in grid.timestamps() {
        while e < events.len() && events[e].ts <= t {
            book.apply_event(&events[e]);
            e += 1;
        }
        out.push(book.top(side));
    }
    out
}

/// Latest prediction at or before each grid point.
pub fn sample_predictions(signals: &[Signal], grid: &Grid) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(grid.len);
    let mut s = 0;
    let mut last = None;
    for t in grid.timestamps() {
        while s < signals.len() && signals[s].ts <= t {
            last = Some(signals[s].prediction);
            s += 1;
        }
        out.push(last);
    }
    out
}

/// Builds the set of samples whose top-ask size exceeds the median and
/// collapses below the first quartile at an unchanged price within
/// `window_steps` samples, and returns the median prediction over it.
pub fn calibrate_cancel_threshold(
    top_ask: &[Option<(f64, f64)>],
    predictions: &[Option<f64>],
    window_steps: usize,
) -> Result<CancelCalibration, CalibrationError> {
    let sizes: Vec<f64> = top_ask.iter().flatten().map(|&(_, a)| a).collect();
    let m_low = stats::quantile(&sizes, 0.25).ok_or(CalibrationError::NoSamples)?;
    let m_high = stats::quantile(&sizes, 0.5).ok_or(CalibrationError::NoSamples)?;
    let n = top_ask.len().min(predictions.len());
    let mut qualifying = Vec::new();
    let mut preds = Vec::new();
    for t in 0..n {
        let (Some((p, a)), Some(f)) = (top_ask[t], predictions[t]) else { continue };
        if a <= m_high {
            continue;
        }
        let collapses = (t + 1..=(t + window_steps).min(top_ask.len() - 1))
            .any(|u| matches!(top_ask[u], Some((pu, au)) if pu == p && au < m_low));
        if collapses {
            qualifying.push(t);
            preds.push(f);
        }
    }
    if preds.is_empty() {
        return Err(CalibrationError::EmptySet);
    }
    preds.sort_by(f64::total_cmp);
    let episodes = qualifying.iter().enumerate().filter(|&(k, &t)| k == 0 || qualifying[k - 1] + 1 != t).count();
    Ok(CancelCalibration {
        threshold: stats::quantile_sorted(&preds, 0.5),
        quantiles: THRESHOLD_QUANTILES.iter().map(|&q| (q, stats::quantile_sorted(&preds, q))).collect(),
        m_low,
        m_high,
        qualifying,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collapse_trace() -> Vec<Option<(f64, f64)>> {
        let mut v = vec![Some((100.0, 10.0)); 40];
        v.extend([Some((100.0, 50.0)), Some((100.0, 50.0)), Some((100.0, 1.0)), Some((100.5, 10.0))]);
        v.extend(vec![Some((100.5, 10.0)); 20]);
        v
    }

    #[test]
    fn constant_predictions_give_constant_threshold() {
        let top = collapse_trace();
        let preds = vec![Some(0.7); top.len()];
        let c = calibrate_cancel_threshold(&top, &preds, 10).unwrap();
        assert_eq!(c.threshold, 0.7);
        assert_eq!(c.qualifying, vec![40, 41]);
        assert_eq!(c.episodes, 1);
        assert!(c.quantiles.iter().all(|&(_, t)| t == 0.7));
    }

    #[test]
    fn price_change_disqualifies() {
        let mut top = collapse_trace();
        top[42] = Some((100.5, 1.0));
        let preds = vec![Some(1.0); top.len()];
        assert_eq!(calibrate_cancel_threshold(&top, &preds, 10), Err(CalibrationError::EmptySet));
    }

    #[test]
    fn window_bounds_the_lookahead() {
        let top = collapse_trace();
        let preds = vec![Some(1.0); top.len()];
        assert_eq!(calibrate_cancel_threshold(&top, &preds, 1).unwrap().qualifying, vec![41]);
    }
}
