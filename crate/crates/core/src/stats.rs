//! Small descriptive-statistics helpers shared across modules.

/// Linearly interpolated quantile (the "linear" / type-7 definition).
///
/// `q` is clamped to `[0, 1]`. Returns `None` on empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Some(quantile_sorted(&sorted, q))
}

/// Same as [`quantile`] on data that is already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

/// Sufficient statistics for a univariate regression of `y` on `x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairSums {
    pub n: f64,
    pub sx: f64,
    pub sy: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl PairSums {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    /// R² of the OLS fit `y = a + b x`. Zero when either side has no variance.
    pub fn r2(&self) -> f64 {
        r2_from_sums(self.n, self.sx, self.sxx, self.sy, self.syy, self.sxy)
    }
}

/// R² of a univariate OLS fit from raw moment sums.
pub fn r2_from_sums(n: f64, sx: f64, sxx: f64, sy: f64, syy: f64, sxy: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    let cxy = sxy - sx * sy / n;
    // relative guards: cancellation can leave tiny positive residue for constant columns
    if vx <= 1e-12 * sxx.abs().max(1e-300) || vy <= 1e-12 * syy.abs().max(1e-300) {
        return 0.0;
    }
    (cxy * cxy / (vx * vy)).clamp(0.0, 1.0)
}

/// Univariate R² over the rows where both `x` and `y` are present.
pub fn univariate_r2(x: &[Option<f64>], y: &[Option<f64>]) -> f64 {
    let mut sums = PairSums::default();
    for (a, b) in x.iter().zip(y) {
        if let (Some(a), Some(b)) = (a, b) {
            sums.push(*a, *b);
        }
    }
    sums.r2()
}

/// Univariate R² on fully-present columns. Centers first for numerical stability.
pub fn univariate_r2_dense(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut vx, mut vy, mut c) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        c += dx * dy;
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (c * c / (vx * vy)).clamp(0.0, 1.0)
}

/// Seven-number summary used by the adverse-selection tables.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub count: usize,
    pub avg: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let avg = sorted.iter().sum::<f64>() / sorted.len() as f64;
        // sample std, as pandas' describe() reports
        let std = if sorted.len() > 1 {
            (sorted.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / (sorted.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count: sorted.len(),
            avg,
            std,
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_linear_interpolation() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&v, 0.95).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 0.3), Some(3.0));
        assert_eq!(quantile(&[], 0.3), None);
        assert_eq!(median(&[1.0, 2.0, 10.0, 4.0]), Some(3.0));
    }

    #[test]
    fn r2_of_exact_line_is_one() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((univariate_r2_dense(&x, &y) - 1.0).abs() < 1e-12);
        let xo: Vec<Option<f64>> = x.iter().copied().map(Some).collect();
        let yo: Vec<Option<f64>> = y.iter().copied().map(Some).collect();
        assert!((univariate_r2(&xo, &yo) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_column_has_zero_r2() {
        let x = vec![2.0; 20];
        let y: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(univariate_r2_dense(&x, &y), 0.0);
    }

    #[test]
    fn summary_orders_statistics() {
        let s = Summary::of(&[-10.0, -30.0]).unwrap();
        assert_eq!(s.avg, -20.0);
        assert_eq!(s.min, -30.0);
        assert_eq!(s.max, -10.0);
        assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
    }
}
