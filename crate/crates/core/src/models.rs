//! OLS and LASSO linear models on standardized features, horizon selection
//! and meta features.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::linalg;
use crate::stats;
use crate::transform::average_r2;

/// Regularization grid `0.001·2^k`, `k = 0..=8`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=8).map(|k| 0.001 * f64::powi(2.0, k)).collect()
}

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 100_000;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("rank-deficient design: {column} is a combination of {dependent:?}")]
    RankDeficient { column: String, dependent: Vec<String> },
    #[error("{n} samples are not enough for {p} features")]
    TooFewSamples { n: usize, p: usize },
    #[error("feature {0} has zero variance")]
    ZeroVariance(String),
    #[error("lambda must be non-negative, got {0}")]
    BadLambda(f64),
    #[error("need at least {need} candidates, got {got}")]
    TooFewCandidates { need: usize, got: usize },
    #[error("meta model needs exactly 5 covariates, got {0}")]
    MetaArity(usize),
}

/// Complete-case design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    /// Column-major feature values.
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Source row of each retained sample.
    pub rows: Vec<usize>,
}

impl Design {
    /// Keeps rows where the target and every feature are present.
    pub fn complete_cases(names: Vec<String>, columns: &[&[Option<f64>]], y: &[Option<f64>]) -> Design {
        let mut out_cols = vec![Vec::new(); columns.len()];
        let mut out_y = Vec::new();
        let mut rows = Vec::new();
        'row: for i in 0..y.len() {
            let Some(yv) = y[i] else { continue };
            for c in columns {
                if c[i].is_none() {
                    continue 'row;
                }
            }
            for (k, c) in columns.iter().enumerate() {
                out_cols[k].push(c[i].unwrap());
            }
            out_y.push(yv);
            rows.push(i);
        }
        Design { names, columns: out_cols, y: out_y, rows }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoInfo {
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub max_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub r2_in_sample: f64,
    pub r2_out_of_sample: Option<f64>,
    pub t_stats: IndexMap<String, f64>,
    pub p_values: IndexMap<String, f64>,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lasso: Option<LassoInfo>,
}

/// Linear model on standardized features; coefficients apply to `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub target: String,
    pub delta_ms: i64,
    pub intercept: f64,
    pub coefficients: IndexMap<String, f64>,
    pub standardizer: IndexMap<String, Scale>,
    pub diagnostics: FitDiagnostics,
}

impl LinearModel {
    /// Prediction from raw (unstandardized) feature values in coefficient order.
    pub fn predict(&self, raw: &[f64]) -> f64 {
        let mut out = self.intercept;
        for ((beta, scale), x) in self.coefficients.values().zip(self.standardizer.values()).zip(raw) {
            out += beta * (x - scale.mean) / scale.std;
        }
        out
    }

    /// Intercept and slopes on the raw feature scale.
    pub fn destandardized(&self) -> (f64, Vec<f64>) {
        let mut intercept = self.intercept;
        let mut slopes = Vec::with_capacity(self.coefficients.len());
        for (beta, scale) in self.coefficients.values().zip(self.standardizer.values()) {
            slopes.push(beta / scale.std);
            intercept -= beta * scale.mean / scale.std;
        }
        (intercept, slopes)
    }

    /// Predictions for every row of `design`.
    pub fn predict_design(&self, design: &Design) -> Vec<f64> {
        let mut row = vec![0.0; design.p()];
        (0..design.n())
            .map(|i| {
                for (k, c) in design.columns.iter().enumerate() {
                    row[k] = c[i];
                }
                self.predict(&row)
            })
            .collect()
    }

    /// `1 - SSE/SST` on `design`.
    pub fn r2_on(&self, design: &Design) -> f64 {
        r2_score(&design.y, &self.predict_design(design))
    }

    pub fn count_nonzero(&self) -> usize {
        count_nonzero(self)
    }
}

/// Number of coefficients that are not exactly zero.
pub fn count_nonzero(model: &LinearModel) -> usize {
    model.coefficients.values().filter(|b| **b != 0.0).count()
}

pub fn r2_score(y: &[f64], pred: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    if sst <= 0.0 {
        return 0.0;
    }
    1.0 - sse / sst
}

struct Standardized {
    columns: Vec<Vec<f64>>,
    scales: IndexMap<String, Scale>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

fn standardize(design: &Design) -> Result<Standardized, ModelError> {
    let mut columns = Vec::with_capacity(design.p());
    let mut scales = IndexMap::new();
    for (name, c) in design.names.iter().zip(&design.columns) {
        let mean = stats::mean(c).unwrap_or(0.0);
        let std = stats::std_dev(c).unwrap_or(0.0);
        if !(std > 1e-12 * mean.abs().max(1e-300)) || std == 0.0 {
            return Err(ModelError::ZeroVariance(name.clone()));
        }
        columns.push(c.iter().map(|v| (v - mean) / std).collect());
        scales.insert(name.clone(), Scale { mean, std });
    }
    let y_mean = stats::mean(&design.y).unwrap_or(0.0);
    let y_centered = design.y.iter().map(|v| v - y_mean).collect();
    Ok(Standardized { columns, scales, y_mean, y_centered })
}

/// Ordinary least squares with an intercept on standardized features.
pub fn fit_ols(design: &Design, target: &str, delta_ms: i64) -> Result<LinearModel, ModelError> {
    let (n, p) = (design.n(), design.p());
    if n < p + 2 {
        return Err(ModelError::TooFewSamples { n, p });
    }
    let s = standardize(design)?;
    let ls = linalg::least_squares(&s.columns, &s.y_centered, RANK_TOL).map_err(|e| ModelError::RankDeficient {
        column: design.names[e.column].clone(),
        dependent: e.dependent_set.iter().map(|&k| design.names[k].clone()).collect(),
    })?;
    let beta = ls.coefficients.clone();
    let mut sse = 0.0;
    for i in 0..n {
        let fit: f64 = (0..p).map(|k| beta[k] * s.columns[k][i]).sum();
        let r = s.y_centered[i] - fit;
        sse += r * r;
    }
    let sst: f64 = s.y_centered.iter().map(|v| v * v).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    let df = (n - p - 1) as f64;
    let sigma2 = sse / df;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let mut t_stats = IndexMap::new();
    let mut p_values = IndexMap::new();
    for (k, d) in ls.inverse_gram_diagonal().into_iter().enumerate() {
        let se = (sigma2 * d).sqrt();
        let t = beta[k] / se;
        let pv = if t.is_finite() { (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0) } else { 0.0 };
        t_stats.insert(design.names[k].clone(), t);
        p_values.insert(design.names[k].clone(), pv);
    }
    Ok(LinearModel {
        target: target.to_string(),
        delta_ms,
        intercept: s.y_mean,
        coefficients: design.names.iter().cloned().zip(beta).collect(),
        standardizer: s.scales,
        diagnostics: FitDiagnostics {
            r2_in_sample: r2,
            r2_out_of_sample: None,
            t_stats,
            p_values,
            n_samples: n,
            lasso: None,
        },
    })
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Coordinate descent on `(1/2n)||y - ȳ - Xw||² + λ||w||₁` with standardized `X`.
pub fn fit_lasso(design: &Design, lambda: f64, target: &str, delta_ms: i64) -> Result<LinearModel, ModelError> {
    if !(lambda >= 0.0) {
        return Err(ModelError::BadLambda(lambda));
    }
    let (n, p) = (design.n(), design.p());
    if n < 2 {
        return Err(ModelError::TooFewSamples { n, p });
    }
    let s = standardize(design)?;
    let nf = n as f64;
    let mut gram = vec![0.0; p * p];
    for a in 0..p {
        for b in a..p {
            let v: f64 = s.columns[a].iter().zip(&s.columns[b]).map(|(x, y)| x * y).sum::<f64>() / nf;
            gram[a * p + b] = v;
            gram[b * p + a] = v;
        }
    }
    let c: Vec<f64> = s
        .columns
        .iter()
        .map(|col| col.iter().zip(&s.y_centered).map(|(x, y)| x * y).sum::<f64>() / nf)
        .collect();
    let mut w = vec![0.0; p];
    let mut sweeps = 0;
    let mut max_delta = f64::INFINITY;
    while sweeps < LASSO_MAX_SWEEPS && p > 0 {
        sweeps += 1;
        max_delta = 0.0;
        for j in 0..p {
            let mut z = c[j];
            for k in 0..p {
                if k != j {
                    z -= gram[j * p + k] * w[k];
                }
            }
            let next = soft_threshold(z, lambda) / gram[j * p + j];
            max_delta = f64::max(max_delta, (next - w[j]).abs());
            w[j] = next;
        }
        if max_delta < LASSO_TOL {
            break;
        }
    }
    if p == 0 {
        max_delta = 0.0;
    }
    let converged = max_delta < LASSO_TOL;
    if !converged {
        log::warn!("lasso for {target} did not converge after {sweeps} sweeps (max delta {max_delta:e})");
    }
    let mut sse = 0.0;
    for i in 0..n {
        let fit: f64 = (0..p).map(|k| w[k] * s.columns[k][i]).sum();
        sse += (s.y_centered[i] - fit).powi(2);
    }
    let sst: f64 = s.y_centered.iter().map(|v| v * v).sum();
    Ok(LinearModel {
        target: target.to_string(),
        delta_ms,
        intercept: s.y_mean,
        coefficients: design.names.iter().cloned().zip(w).collect(),
        standardizer: s.scales,
        diagnostics: FitDiagnostics {
            r2_in_sample: if sst > 0.0 { 1.0 - sse / sst } else { 0.0 },
            r2_out_of_sample: None,
            t_stats: IndexMap::new(),
            p_values: IndexMap::new(),
            n_samples: n,
            lasso: Some(LassoInfo { lambda, sweeps, converged, max_delta }),
        },
    })
}

/// Outcome of a horizon search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonChoice {
    pub horizon_ms: i64,
    /// Average R² across targets per candidate horizon, in input order.
    pub r2_bar: Vec<(i64, f64)>,
}

/// Picks the horizon whose feature has the highest average univariate R²
/// across `targets`. Ties go to the smaller horizon.
pub fn select_horizon(
    candidates: &[(i64, &[Option<f64>])],
    targets: &[&[Option<f64>]],
) -> Result<HorizonChoice, ModelError> {
    if candidates.len() < 2 {
        return Err(ModelError::TooFewCandidates { need: 2, got: candidates.len() });
    }
    let scored: Vec<(i64, f64)> = candidates.iter().map(|(h, x)| (*h, average_r2(x, targets))).collect();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by_key(|&k| scored[k].0);
    let mut best = order[0];
    for &k in &order[1..] {
        if scored[k].1 > scored[best].1 {
            best = k;
        }
    }
    Ok(HorizonChoice { horizon_ms: scored[best].0, r2_bar: scored })
}

/// Weights `α_j = R²_j / max_j R²_j`; uniform ones when every R² is zero.
pub fn meta_weights(r2: &[f64]) -> Vec<f64> {
    let max = r2.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        r2.iter().map(|v| v / max).collect()
    } else {
        vec![1.0; r2.len()]
    }
}

/// One meta feature: the weighted sum of a family's per-market columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeature {
    pub name: String,
    pub values: Vec<Option<f64>>,
    /// `(source market, R², weight)`.
    pub weights: Vec<(String, f64, f64)>,
}

/// Builds `Σ_j α_j F^j` from `(source market, column)` pairs, weighting by
/// each source's univariate R² against `target`.
pub fn build_meta_feature(name: &str, sources: &[(String, &[Option<f64>])], target: &[Option<f64>]) -> MetaFeature {
    let r2: Vec<f64> = sources.iter().map(|(_, x)| stats::univariate_r2(x, target)).collect();
    if r2.iter().all(|v| *v == 0.0) {
        log::warn!("meta feature {name}: every source has zero R², using uniform weights");
    }
    let alpha = meta_weights(&r2);
    let n = target.len();
    let values = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for ((_, x), a) in sources.iter().zip(&alpha) {
                acc += a * x[i]?;
            }
            Some(acc)
        })
        .collect();
    MetaFeature {
        name: name.to_string(),
        values,
        weights: sources.iter().zip(r2).zip(alpha).map(|(((s, _), r), a)| (s.clone(), r, a)).collect(),
    }
}

/// OLS on exactly the five meta features.
pub fn fit_meta(design: &Design, target: &str, delta_ms: i64) -> Result<LinearModel, ModelError> {
    if design.p() != 5 {
        return Err(ModelError::MetaArity(design.p()));
    }
    fit_ols(design, target, delta_ms)
}

/// Chronological calibration/train/test split of `n` rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub calibration: std::ops::Range<usize>,
    pub train: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
}

impl Split {
    /// One part calibration, six parts training, two parts test.
    pub fn chronological(n: usize) -> Split {
        let a = n / 9;
        let b = a + n * 6 / 9;
        Split { calibration: 0..a, train: a..b, test: b..n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design_from(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Design {
        let names = (0..cols.len()).map(|k| format!("x{k}")).collect();
        let n = y.len();
        Design { names, columns: cols, y, rows: (0..n).collect() }
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Design {
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y = (0..n)
            .map(|i| (0..p).map(|k| (k as f64 - 1.5) * cols[k][i]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        design_from(cols, y)
    }

    #[test]
    fn exact_line_is_recovered() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit_ols(&design_from(vec![x], y), "t", 500).unwrap();
        assert!((m.diagnostics.r2_in_sample - 1.0).abs() < 1e-12);
        let (b0, b) = m.destandardized();
        assert!((b[0] - 2.0).abs() < 1e-10 && (b0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noise_has_near_zero_r2() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        let m = fit_ols(&design_from(vec![x], y), "t", 500).unwrap();
        assert!(m.diagnostics.r2_in_sample < 1e-3);
        let p = m.diagnostics.p_values["x0"];
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn tiny_instance_matches_normal_equations() {
        let cols = vec![vec![1.0, 2.0, 0.5, -1.0, 3.0], vec![0.3, -0.2, 1.0, 0.7, 0.1]];
        let y = vec![1.0, 0.5, 2.0, -0.3, 1.7];
        let d = design_from(cols.clone(), y.clone());
        let m = fit_ols(&d, "t", 500).unwrap();
        let (_, b) = m.destandardized();
        // explicit (XᵀX)⁻¹Xᵀy with an intercept column, 3x3 via Cramer's rule
        let x: Vec<[f64; 3]> = (0..5).map(|i| [1.0, cols[0][i], cols[1][i]]).collect();
        let mut g = [[0.0; 3]; 3];
        let mut r = [0.0; 3];
        for i in 0..5 {
            for a in 0..3 {
                r[a] += x[i][a] * y[i];
                for b in 0..3 {
                    g[a][b] += x[i][a] * x[i][b];
                }
            }
        }
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d0 = det(g);
        for k in 1..3 {
            let mut mk = g;
            for a in 0..3 {
                mk[a][k] = r[a];
            }
            assert!((det(mk) / d0 - b[k - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn residuals_are_orthogonal_and_predictions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_design(&mut rng, 200, 4);
        let m = fit_ols(&d, "t", 500).unwrap();
        let pred = m.predict_design(&d);
        let (b0, b) = m.destandardized();
        for i in 0..d.n() {
            let direct = b0 + (0..d.p()).map(|k| b[k] * d.columns[k][i]).sum::<f64>();
            assert!((direct - pred[i]).abs() < 1e-10);
        }
        for (k, col) in d.columns.iter().enumerate() {
            let s = m.standardizer[k];
            let dot: f64 = (0..d.n()).map(|i| (col[i] - s.mean) / s.std * (d.y[i] - pred[i])).sum();
            assert!(dot.abs() < 1e-8 * d.n() as f64);
        }
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let a: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 2.0 * y).collect();
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        let err = fit_ols(&design_from(vec![a, b, c], y), "t", 500).unwrap_err();
        assert_eq!(
            err,
            ModelError::RankDeficient { column: "x2".into(), dependent: vec!["x0".into(), "x1".into(), "x2".into()] }
        );
    }

    #[test]
    fn lasso_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_design(&mut rng, 300, 5);
        let ols = fit_ols(&d, "t", 500).unwrap();
        let l0 = fit_lasso(&d, 0.0, "t", 500).unwrap();
        let diff: f64 = ols
            .coefficients
            .values()
            .zip(l0.coefficients.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-6);
        let big = fit_lasso(&d, 1e6, "t", 500).unwrap();
        assert_eq!(count_nonzero(&big), 0);
        assert_eq!(big.intercept, stats::mean(&d.y).unwrap());
        assert_eq!(count_nonzero(&l0), 5);
    }

    #[test]
    fn univariate_lasso_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let d = design_from(vec![x.clone()], y.clone());
        let mx = stats::mean(&x).unwrap();
        let sx = stats::std_dev(&x).unwrap();
        let my = stats::mean(&y).unwrap();
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) / sx * (b - my)).sum::<f64>() / 500.0;
        for lambda in [0.0, 0.01, 0.1, cov.abs() * 0.9] {
            let m = fit_lasso(&d, lambda, "t", 500).unwrap();
            assert!((m.coefficients["x0"] - soft_threshold(cov, lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_selection_rules() {
        let y: Vec<Option<f64>> = (0..50).map(|i| Some(((i * 7) % 13) as f64)).collect();
        let noise: Vec<Option<f64>> = (0..50).map(|i| Some(((i * 3) % 5) as f64)).collect();
        let c = [(100, noise.as_slice()), (500, y.as_slice()), (1000, noise.as_slice())];
        let targets: Vec<&[Option<f64>]> = vec![&y];
        assert_eq!(select_horizon(&c, &targets).unwrap().horizon_ms, 500);
        let same = [(1000, y.as_slice()), (250, y.as_slice())];
        assert_eq!(select_horizon(&same, &targets).unwrap().horizon_ms, 250);
        // affine rescaling of the target keeps the argmax
        let y2: Vec<Option<f64>> = y.iter().map(|v| v.map(|v| 3.0 * v - 7.0)).collect();
        let t2: Vec<&[Option<f64>]> = vec![&y2];
        assert_eq!(select_horizon(&c, &t2).unwrap().horizon_ms, 500);
        assert!(select_horizon(&c[..1], &targets).is_err());
    }

    #[test]
    fn meta_weights_follow_ratios() {
        assert_eq!(meta_weights(&[0.2, 0.1]), vec![1.0, 0.5]);
        assert_eq!(meta_weights(&[0.0, 0.0]), vec![1.0, 1.0]);
        let x: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        let m = build_meta_feature("mTFI", &[("a".into(), &x)], &x);
        assert_eq!(m.values, x);
        assert_eq!(m.weights[0].2, 1.0);
    }

    #[test]
    fn split_is_chronological() {
        let s = Split::chronological(900);
        assert_eq!((s.calibration, s.train, s.test), (0..100, 100..700, 700..900));
    }

    #[test]
    fn model_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_design(&mut rng, 50, 2);
        let m = fit_ols(&d, "ftx_BTC-PERP", 500).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for k in ["target", "delta_ms", "intercept", "coefficients", "standardizer", "diagnostics"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
