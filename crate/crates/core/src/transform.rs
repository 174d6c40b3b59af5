//! Sign-symmetric step transforms `f_T(x) = sgn(x)·#{t in T : t <= |x|}` and
//! their calibration by greedy threshold pruning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, r2_from_sums};

pub const DEFAULT_QUANTILE: f64 = 0.0001;
pub const DEFAULT_THRESHOLDS: usize = 100;
/// Gains at or below this are treated as rounding noise.
pub const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("feature column has no samples")]
    Empty,
    #[error("fewer than 2 usable samples ({0})")]
    TooFewSamples(usize),
    #[error("initial threshold set is empty")]
    NoThresholds,
}

/// Calibrated transform of one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTransform {
    pub feature: String,
    pub thresholds: Vec<f64>,
    /// Average R² over targets of the final transform.
    pub r2_bar: f64,
    /// Average R² of the initial transform.
    pub r2_bar_initial: f64,
    /// Average R² of the untransformed feature.
    pub r2_bar_raw: f64,
    /// Average R² after each accepted removal, starting with the initial set.
    pub history: Vec<f64>,
}

impl StepTransform {
    pub fn apply(&self, x: f64) -> f64 {
        apply(&self.thresholds, x)
    }

    /// Whether the transform beats the raw feature.
    pub fn improves(&self) -> bool {
        self.r2_bar > self.r2_bar_raw
    }
}

/// `sgn(x)` times the number of thresholds `<= |x|`. `thresholds` must be sorted.
pub fn apply(thresholds: &[f64], x: f64) -> f64 {
    if x == 0.0 || x.is_nan() {
        return 0.0;
    }
    let count = thresholds.partition_point(|t| *t <= x.abs()) as f64;
    if x > 0.0 {
        count
    } else {
        -count
    }
}

pub fn apply_column(thresholds: &[f64], xs: &[Option<f64>]) -> Vec<Option<f64>> {
    xs.iter().map(|x| x.map(|v| apply(thresholds, v))).collect()
}

/// `n` evenly spaced thresholds between the `q` and `1 - q` quantiles of `x`.
pub fn init_partition(x: &[f64], q: f64, n: usize) -> Result<Vec<f64>, TransformError> {
    let mut sorted: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(TransformError::Empty);
    }
    sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = stats::quantile_sorted(&sorted, q);
    let hi = stats::quantile_sorted(&sorted, 1.0 - q);
    if n <= 1 || hi <= lo {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|k| if k == n - 1 { hi } else { lo + step * k as f64 }).collect();
    out.dedup();
    Ok(out)
}

/// Per-target sufficient statistics of the samples in one count bucket.
/// `a = n+ - n-`, `t = n+ + n-`, `u = Σy+ - Σy-` over nonzero-sign samples.
#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    a: f64,
    t: f64,
    u: f64,
}

/// Per-target totals that do not depend on the transform.
#[derive(Debug, Clone, Copy, Default)]
struct Totals {
    n: f64,
    sy: f64,
    syy: f64,
}

struct Aggregates {
    /// `cells[b][j]` for bucket `b` (count of thresholds `<= |x|`) and target `j`.
    cells: Vec<Vec<Cell>>,
    totals: Vec<Totals>,
}

impl Aggregates {
    fn build(thresholds: &[f64], x: &[Option<f64>], targets: &[&[Option<f64>]]) -> Aggregates {
        let k = thresholds.len();
        let m = targets.len();
        let mut cells = vec![vec![Cell::default(); m]; k + 1];
        let mut totals = vec![Totals::default(); m];
        for (i, xi) in x.iter().enumerate() {
            let Some(xv) = xi else { continue };
            let b = thresholds.partition_point(|t| *t <= xv.abs());
            let s = if *xv > 0.0 {
                1.0
            } else if *xv < 0.0 {
                -1.0
            } else {
                0.0
            };
            for (j, y) in targets.iter().enumerate() {
                let Some(yv) = y[i] else { continue };
                totals[j].n += 1.0;
                totals[j].sy += yv;
                totals[j].syy += yv * yv;
                if s != 0.0 {
                    let c = &mut cells[b][j];
                    c.a += s;
                    c.t += 1.0;
                    c.u += s * yv;
                }
            }
        }
        Aggregates { cells, totals }
    }

    /// Average R² over targets when threshold `removed` (if any) is dropped.
    fn r2_bar(&self, removed: Option<usize>) -> f64 {
        let m = self.totals.len();
        let mut total = 0.0;
        for j in 0..m {
            let (mut sf, mut sff, mut sfy) = (0.0, 0.0, 0.0);
            for (b, row) in self.cells.iter().enumerate() {
                let c = row[j];
                if c.t == 0.0 {
                    continue;
                }
                let v = match removed {
                    Some(i) if b > i => (b - 1) as f64,
                    _ => b as f64,
                };
                sf += v * c.a;
                sff += v * v * c.t;
                sfy += v * c.u;
            }
            let t = self.totals[j];
            total += r2_from_sums(t.n, sf, sff, t.sy, t.syy, sfy);
        }
        total / m as f64
    }

    /// Drops threshold `i`, merging bucket `i + 1` into bucket `i`.
    fn remove(&mut self, i: usize) {
        let upper = self.cells.remove(i + 1);
        for (c, u) in self.cells[i].iter_mut().zip(upper) {
            c.a += u.a;
            c.t += u.t;
            c.u += u.u;
        }
    }
}

/// Average univariate R² of each target on `x`.
pub fn average_r2(x: &[Option<f64>], targets: &[&[Option<f64>]]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    targets.iter().map(|y| stats::univariate_r2(x, y)).sum::<f64>() / targets.len() as f64
}

/// Greedy pruning: repeatedly drop the threshold whose removal most increases
/// the average R² across `targets`; stop when no removal improves it.
pub fn calibrate(
    feature: &str,
    x: &[Option<f64>],
    targets: &[&[Option<f64>]],
    initial: Vec<f64>,
) -> Result<StepTransform, TransformError> {
    if initial.is_empty() {
        return Err(TransformError::NoThresholds);
    }
    let usable = (0..x.len())
        .filter(|&i| x[i].is_some() && targets.iter().any(|y| y[i].is_some()))
        .count();
    if usable < 2 {
        return Err(TransformError::TooFewSamples(usable));
    }
    let mut thresholds = initial;
    let mut agg = Aggregates::build(&thresholds, x, targets);
    let mut current = agg.r2_bar(None);
    let mut history = vec![current];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..thresholds.len() {
            let r = agg.r2_bar(Some(i));
            if best.map_or(true, |(_, b)| r > b + GAIN_TOL) {
                best = Some((i, r));
            }
        }
        match best {
            Some((i, r)) if r > current + GAIN_TOL => {
                thresholds.remove(i);
                agg.remove(i);
                current = r;
                history.push(r);
            }
            _ => break,
        }
    }
    Ok(StepTransform {
        feature: feature.to_string(),
        thresholds,
        r2_bar: current,
        r2_bar_initial: history[0],
        r2_bar_raw: average_r2(x, targets),
        history,
    })
}

/// [`calibrate`] with the default initial partition of `x`.
pub fn calibrate_default(
    feature: &str,
    x: &[Option<f64>],
    targets: &[&[Option<f64>]],
) -> Result<StepTransform, TransformError> {
    let present: Vec<f64> = x.iter().flatten().copied().collect();
    let initial = init_partition(&present, DEFAULT_QUANTILE, DEFAULT_THRESHOLDS)?;
    calibrate(feature, x, targets, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apply_examples() {
        assert_eq!(apply(&[], 3.0), 0.0);
        assert_eq!(apply(&[1.0, 5.0], -3.0), -1.0);
        let grid: Vec<f64> = (1..=20).map(f64::from).collect();
        for x in 0..=20 {
            assert_eq!(apply(&grid, x as f64), x as f64);
            assert_eq!(apply(&grid, -(x as f64)), -(x as f64));
        }
    }

    #[test]
    fn zero_threshold_counts_for_every_nonzero_input() {
        let grid: Vec<f64> = (0..=5).map(f64::from).collect();
        assert_eq!(apply(&grid, 3.0), 4.0);
        assert_eq!(apply(&grid, 0.0), 0.0);
    }

    #[test]
    fn init_partition_examples() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let t = init_partition(&x, 0.0, 100).unwrap();
        for (k, v) in t.iter().enumerate() {
            assert!((v - k as f64).abs() < 1e-9);
        }
        assert_eq!(init_partition(&[5.0, 5.0, 5.0], 0.0001, 100).unwrap(), vec![5.0]);
        let x = vec![-50.0, 0.0, 50.0];
        assert_eq!(init_partition(&x, 0.0, 3).unwrap(), vec![-50.0, 0.0, 50.0]);
        assert_eq!(init_partition(&[], 0.0, 3), Err(TransformError::Empty));
    }

    fn oracle_r2_bar(t: &[f64], x: &[Option<f64>], ys: &[&[Option<f64>]]) -> f64 {
        average_r2(&apply_column(t, x), ys)
    }

    #[test]
    fn aggregate_r2_matches_direct_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Option<f64>> = (0..500)
            .map(|i| if i % 37 == 0 { None } else { Some(rng.gen_range(-10.0..10.0)) })
            .collect();
        let y1: Vec<Option<f64>> = x
            .iter()
            .map(|v| v.map(|v| v.signum() * v.abs().sqrt() + rng.gen_range(-1.0..1.0)))
            .collect();
        let y2: Vec<Option<f64>> = (0..500).map(|i| if i % 11 == 0 { None } else { Some(rng.gen::<f64>()) }).collect();
        let ys: Vec<&[Option<f64>]> = vec![&y1, &y2];
        let t: Vec<f64> = (0..15).map(|k| k as f64 * 0.7).collect();
        let agg = Aggregates::build(&t, &x, &ys);
        assert!((agg.r2_bar(None) - oracle_r2_bar(&t, &x, &ys)).abs() < 1e-9);
        for i in 0..t.len() {
            let mut reduced = t.clone();
            reduced.remove(i);
            assert!((agg.r2_bar(Some(i)) - oracle_r2_bar(&reduced, &x, &ys)).abs() < 1e-9, "i={i}");
        }
    }

    /// Straightforward pruning loop used as an oracle for the aggregated one.
    fn brute_force_calibrate(x: &[Option<f64>], ys: &[&[Option<f64>]], mut t: Vec<f64>) -> Vec<f64> {
        let mut current = oracle_r2_bar(&t, x, ys);
        loop {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                let mut reduced = t.clone();
                reduced.remove(i);
                let r = oracle_r2_bar(&reduced, x, ys);
                if best.map_or(true, |(_, b)| r > b + 1e-12) {
                    best = Some((i, r));
                }
            }
            match best {
                Some((i, r)) if r > current + 1e-12 => {
                    t.remove(i);
                    current = r;
                }
                _ => return t,
            }
        }
    }

    #[test]
    fn calibrate_matches_brute_force() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Option<f64>> = (0..300).map(|_| Some(rng.gen_range(-5.0..5.0))).collect();
            let y: Vec<Option<f64>> =
                x.iter().map(|v| v.map(|v| v.signum() + 0.5 * rng.gen_range(-1.0..1.0))).collect();
            let ys: Vec<&[Option<f64>]> = vec![&y];
            let t0 = init_partition(&x.iter().flatten().copied().collect::<Vec<_>>(), 0.0, 12).unwrap();
            let fast = calibrate("f", &x, &ys, t0.clone()).unwrap();
            assert_eq!(fast.thresholds, brute_force_calibrate(&x, &ys, t0));
        }
    }

    #[test]
    fn proportional_target_is_a_fixed_point() {
        let x: Vec<Option<f64>> = (0..200).map(|i| Some((i as f64 - 100.0) / 7.0)).collect();
        let t0 = init_partition(&x.iter().flatten().copied().collect::<Vec<_>>(), 0.0001, 20).unwrap();
        let y = apply_column(&t0, &x).into_iter().map(|v| v.map(|v| 3.0 * v)).collect::<Vec<_>>();
        let ys: Vec<&[Option<f64>]> = vec![&y];
        let cal = calibrate("f", &x, &ys, t0.clone()).unwrap();
        assert_eq!(cal.thresholds, t0);
        assert!((cal.r2_bar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_target_prunes_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Option<f64>> = (0..1000).map(|_| Some(rng.gen_range(-10.0..10.0))).collect();
        let y: Vec<Option<f64>> = x.iter().map(|v| v.map(f64::signum)).collect();
        let ys: Vec<&[Option<f64>]> = vec![&y];
        let cal = calibrate_default("f", &x, &ys).unwrap();
        assert!(cal.thresholds.len() < DEFAULT_THRESHOLDS);
        assert!(cal.history.windows(2).all(|w| w[1] > w[0]));
        assert!(cal.history.len() <= DEFAULT_THRESHOLDS + 1);
    }

    #[test]
    fn singleton_set_is_kept() {
        let x: Vec<Option<f64>> = (0..50).map(|i| Some(i as f64 - 25.0)).collect();
        let y: Vec<Option<f64>> = x.iter().map(|v| v.map(|v| v.signum())).collect();
        let ys: Vec<&[Option<f64>]> = vec![&y];
        let cal = calibrate("f", &x, &ys, vec![1.0]).unwrap();
        assert_eq!(cal.thresholds, vec![1.0]);
        assert_eq!(cal.history.len(), 1);
    }

    #[test]
    fn too_few_samples() {
        let x = vec![Some(1.0), None];
        let y = vec![Some(1.0), Some(2.0)];
        let ys: Vec<&[Option<f64>]> = vec![&y];
        assert_eq!(calibrate("f", &x, &ys, vec![0.5]), Err(TransformError::TooFewSamples(1)));
    }

    proptest! {
        #[test]
        fn apply_is_odd_and_monotone(
            mut t in prop::collection::vec(-5.0f64..50.0, 0..20),
            a in -100.0f64..100.0,
            b in -100.0f64..100.0,
        ) {
            t.sort_by(|x, y| x.total_cmp(y));
            t.dedup();
            prop_assert_eq!(apply(&t, -a), -apply(&t, a));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if lo >= 0.0 || hi <= 0.0 {
                // monotone on each half line; across zero the sign jump keeps it nondecreasing
                prop_assert!(apply(&t, lo) <= apply(&t, hi));
            } else {
                prop_assert!(apply(&t, lo) <= 0.0 && apply(&t, hi) >= 0.0);
            }
        }
    }
}
