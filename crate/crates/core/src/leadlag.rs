//! Pairwise lead-lag R² network: entry `(i, j)` is the in-sample R² of
//! predicting market `i`'s forward return from market `j`'s features.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureFrame;
use crate::models::{self, Design, LinearModel, ModelError};

/// One covariate dropped from a pairwise fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCovariate {
    pub target: String,
    pub source: String,
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagMatrix {
    pub markets: Vec<String>,
    pub delta_ms: i64,
    /// `r2[i][j]`: target `i`, source `j`.
    pub r2: Vec<Vec<f64>>,
    /// Average over sources per target: how predictable each market is.
    pub row_avg: Vec<f64>,
    /// Average over targets per source: how predictive each market is.
    pub col_avg: Vec<f64>,
}

/// Market orderings derived from a [`LeadLagMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    /// Most predictive source first (descending column average).
    pub leadingness: Vec<String>,
    /// Most predictable target first (descending row average).
    pub laggardness: Vec<String>,
    pub by_row_sum: Vec<String>,
    pub by_col_sum: Vec<String>,
}

pub struct LeadLagFit {
    pub matrix: LeadLagMatrix,
    /// `models[i][j]`, absent when the pair could not be fitted.
    pub models: Vec<Vec<Option<LinearModel>>>,
    pub dropped: Vec<DroppedCovariate>,
}

/// Fits OLS, dropping zero-variance or collinear covariates until the fit succeeds.
pub fn fit_with_drops(
    frame: &FeatureFrame,
    names: &[String],
    target_col: &str,
    target: &str,
    delta_ms: i64,
) -> (Option<LinearModel>, Vec<(String, String)>) {
    let mut keep: Vec<String> = names.to_vec();
    let mut dropped = Vec::new();
    let Some(y) = frame.get(target_col) else {
        return (None, dropped);
    };
    loop {
        let cols: Vec<&[Option<f64>]> = keep.iter().map(|k| frame.get(k).expect("covariate column")).collect();
        let design = Design::complete_cases(keep.clone(), &cols, y);
        match models::fit_ols(&design, target, delta_ms) {
            Ok(m) => return (Some(m), dropped),
            Err(ModelError::ZeroVariance(name)) => {
                keep.retain(|k| *k != name);
                dropped.push((name, "zero variance".into()));
            }
            Err(ModelError::RankDeficient { column, .. }) => {
                keep.retain(|k| *k != column);
                dropped.push((column, "collinear".into()));
            }
            Err(e) => {
                log::warn!("pairwise fit for {target_col} failed: {e}");
                return (None, dropped);
            }
        }
    }
}

/// Builds the M×M matrix. `covariates(i, j)` names the columns of source `j`
/// used to predict target `i`; `target_col(i)` names target `i`'s return column.
pub fn pairwise_r2_matrix<C, T>(
    frame: &FeatureFrame,
    markets: &[String],
    delta_ms: i64,
    covariates: C,
    target_col: T,
) -> LeadLagFit
where
    C: Fn(usize, usize) -> Vec<String> + Sync,
    T: Fn(usize) -> String + Sync,
{
    let m = markets.len();
    let cells: Vec<(usize, usize, Option<LinearModel>, Vec<(String, String)>)> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            let (model, dropped) = fit_with_drops(frame, &covariates(i, j), &target_col(i), &markets[i], delta_ms);
            (i, j, model, dropped)
        })
        .collect();
    let mut r2 = vec![vec![0.0; m]; m];
    let mut fitted: Vec<Vec<Option<LinearModel>>> = (0..m).map(|_| (0..m).map(|_| None).collect()).collect();
    let mut dropped = Vec::new();
    for (i, j, model, d) in cells {
        for (feature, reason) in d {
            dropped.push(DroppedCovariate { target: markets[i].clone(), source: markets[j].clone(), feature, reason });
        }
        if let Some(model) = model {
            r2[i][j] = model.diagnostics.r2_in_sample.clamp(0.0, 1.0);
            fitted[i][j] = Some(model);
        }
    }
    LeadLagFit { matrix: LeadLagMatrix::new(markets.to_vec(), delta_ms, r2), models: fitted, dropped }
}

impl LeadLagMatrix {
    pub fn new(markets: Vec<String>, delta_ms: i64, r2: Vec<Vec<f64>>) -> Self {
        let m = markets.len();
        let denom = m.max(1) as f64;
        let row_avg = (0..m).map(|i| r2[i].iter().sum::<f64>() / denom).collect();
        let col_avg = (0..m).map(|j| (0..m).map(|i| r2[i][j]).sum::<f64>() / denom).collect();
        LeadLagMatrix { markets, delta_ms, r2, row_avg, col_avg }
    }

    pub fn get(&self, target: &str, source: &str) -> Option<f64> {
        let i = self.markets.iter().position(|m| m == target)?;
        let j = self.markets.iter().position(|m| m == source)?;
        Some(self.r2[i][j])
    }

    pub fn write_r2_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "target")?;
        for m in &self.markets {
            write!(out, ",{m}")?;
        }
        writeln!(out)?;
        for (m, row) in self.markets.iter().zip(&self.r2) {
            write!(out, "{m}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_avg_csv<W: Write>(&self, mut out: W, rows: bool) -> std::io::Result<()> {
        let (label, values) = if rows { ("row_avg", &self.row_avg) } else { ("col_avg", &self.col_avg) };
        writeln!(out, "market,{label}")?;
        for (m, v) in self.markets.iter().zip(values) {
            writeln!(out, "{m},{v}")?;
        }
        Ok(())
    }
}

fn order_desc(markets: &[String], score: &[f64]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..markets.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then_with(|| markets[a].cmp(&markets[b])));
    idx.into_iter().map(|k| markets[k].clone()).collect()
}

pub fn rank_leaders(matrix: &LeadLagMatrix) -> Rankings {
    let m = matrix.markets.len();
    let row_sum: Vec<f64> = (0..m).map(|i| matrix.r2[i].iter().sum()).collect();
    let col_sum: Vec<f64> = (0..m).map(|j| (0..m).map(|i| matrix.r2[i][j]).sum()).collect();
    Rankings {
        leadingness: order_desc(&matrix.markets, &matrix.col_avg),
        laggardness: order_desc(&matrix.markets, &matrix.row_avg),
        by_row_sum: order_desc(&matrix.markets, &row_sum),
        by_col_sum: order_desc(&matrix.markets, &col_sum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rankings_on_simple_matrices() {
        let sym = LeadLagMatrix::new(ids(&["a", "b", "c"]), 500, vec![
            vec![0.1, 0.2, 0.3],
            vec![0.2, 0.5, 0.1],
            vec![0.3, 0.1, 0.0],
        ]);
        let r = rank_leaders(&sym);
        assert_eq!(r.leadingness, r.laggardness);
        let zero = LeadLagMatrix::new(ids(&["c", "a", "b"]), 500, vec![vec![0.0; 3]; 3]);
        assert_eq!(rank_leaders(&zero).leadingness, ids(&["a", "b", "c"]));
    }

    #[test]
    fn planted_source_dependence_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5000;
        let mut frame = FeatureFrame { ts: (0..n as i64).collect(), ..Default::default() };
        let markets = ids(&["a", "b", "c"]);
        let mut feats = Vec::new();
        for m in &markets {
            let x: Vec<Option<f64>> = (0..n).map(|_| Some(rng.sample(StandardNormal))).collect();
            feats.push(x.clone());
            frame.insert(format!("{m}|TFI|500"), x);
            frame.insert(format!("{m}|ZERO|"), vec![Some(1.0); n]);
        }
        // b's return is driven by a's feature; a and c are noise
        for (k, m) in markets.iter().enumerate() {
            let y: Vec<Option<f64>> = (0..n)
                .map(|i| {
                    let e: f64 = rng.sample(StandardNormal);
                    Some(if k == 1 { feats[0][i].unwrap() + 0.5 * e } else { e })
                })
                .collect();
            frame.insert(format!("fret|{m}|500"), y);
        }
        let fit = pairwise_r2_matrix(
            &frame,
            &markets,
            500,
            |_, j| vec![format!("{}|TFI|500", markets[j]), format!("{}|ZERO|", markets[j])],
            |i| format!("fret|{}|500", markets[i]),
        );
        let r = &fit.matrix;
        assert!(r.get("b", "a").unwrap() > 0.7);
        assert!(r.get("b", "c").unwrap() < 0.01);
        assert!(r.get("a", "b").unwrap() < 0.01);
        assert_eq!(rank_leaders(r).leadingness[0], "a");
        assert_eq!(fit.dropped.len(), 9);
        assert!(fit.dropped.iter().all(|d| d.reason == "zero variance"));
    }
}
