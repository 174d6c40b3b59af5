//! Stage functions shared by the command line and the end-to-end tests:
//! transform calibration, horizon selection, design assembly, pairwise and
//! per-target fits, and the pairwise backtest.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{self, FillSequence, PnLMatrix, PnLReport};
use crate::config::{Adoption, RunConfig};
use crate::features::{target_name, Family, FeatureFrame, FeatureKey};
use crate::leadlag::{self, LeadLagFit};
use crate::marketdata::SampledPanel;
use crate::models::{self, Design, LinearModel, MetaFeature, ModelError, Split};
use crate::transform::{self, StepTransform};

/// A calibrated transform and whether it replaced the raw column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptedTransform {
    pub family: Family,
    pub adopted: bool,
    pub transform: StepTransform,
}

fn adoption(cfg: &RunConfig, family: Family) -> Adoption {
    let a = &cfg.transform.adoption;
    match family {
        Family::IMBa | Family::IMBb => a.imb,
        Family::TFI => a.tfi,
        Family::PRET => a.pret,
        Family::DIV => a.div,
    }
}

/// Calibrates a transform for every feature column whose family is not set
/// to `never`, on rows `rows`, against every market's forward return.
pub fn calibrate_transforms(frame: &FeatureFrame, markets: &[String], cfg: &RunConfig, rows: Range<usize>) -> Vec<AdoptedTransform> {
    let part = frame.slice(rows);
    let targets: Vec<&[Option<f64>]> =
        markets.iter().filter_map(|m| part.get(&target_name(m, cfg.transform.target_ms))).collect();
    let jobs: Vec<(String, Family)> = part
        .columns
        .keys()
        .filter_map(|name| {
            let key: FeatureKey = name.parse().ok()?;
            (adoption(cfg, key.family) != Adoption::Never).then(|| (name.clone(), key.family))
        })
        .collect();
    jobs.into_par_iter()
        .filter_map(|(name, family)| {
            let x = part.get(&name).expect("column");
            let present: Vec<f64> = x.iter().flatten().copied().collect();
            let initial = transform::init_partition(&present, cfg.transform.quantile, cfg.transform.thresholds).ok()?;
            match transform::calibrate(&name, x, &targets, initial) {
                Ok(t) => {
                    let adopted = match adoption(cfg, family) {
                        Adoption::Always => true,
                        Adoption::IfImproves => t.improves(),
                        Adoption::Never => false,
                    };
                    Some(AdoptedTransform { family, adopted, transform: t })
                }
                Err(e) => {
                    log::warn!("transform for {name} skipped: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Replaces each adopted column by its transformed values.
pub fn apply_transforms(frame: &mut FeatureFrame, transforms: &[AdoptedTransform]) {
    for t in transforms.iter().filter(|t| t.adopted) {
        if let Some(col) = frame.columns.get_mut(&t.transform.feature) {
            *col = transform::apply_column(&t.transform.thresholds, col);
        }
    }
}

/// Chosen column per family and market. DIV is keyed `target|source`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Horizons {
    pub delta_ms: i64,
    pub tfi: BTreeMap<String, i64>,
    pub pret: BTreeMap<String, i64>,
    pub div: BTreeMap<String, i64>,
    /// Average R² per candidate horizon behind each choice.
    pub scores: BTreeMap<String, Vec<(i64, f64)>>,
}

impl Horizons {
    /// The (up to) five columns of `source` used to predict `target`.
    pub fn covariates(&self, target: &str, source: &str) -> Vec<String> {
        let mut out = vec![
            FeatureKey::imb(source, Family::IMBa).to_string(),
            FeatureKey::imb(source, Family::IMBb).to_string(),
        ];
        if let Some(h) = self.tfi.get(source) {
            out.push(FeatureKey::tfi(source, *h).to_string());
        }
        if let Some(h) = self.pret.get(source) {
            out.push(FeatureKey::pret(source, *h).to_string());
        }
        if let Some(h) = self.div.get(&format!("{target}|{source}")) {
            out.push(FeatureKey::div(source, target, *h).to_string());
        }
        out
    }
}

fn choose(
    frame: &FeatureFrame,
    horizons: &[i64],
    column: impl Fn(i64) -> String,
    targets: &[&[Option<f64>]],
) -> Option<models::HorizonChoice> {
    let cols: Vec<(i64, &[Option<f64>])> = horizons.iter().filter_map(|&h| Some((h, frame.get(&column(h))?))).collect();
    match cols.len() {
        0 => None,
        1 => Some(models::HorizonChoice { horizon_ms: cols[0].0, r2_bar: vec![(cols[0].0, 0.0)] }),
        _ => models::select_horizon(&cols, targets).ok(),
    }
}

/// Picks TFI and PRET horizons per source market against every market's
/// return, and DIV horizons per pair against the target's own return.
pub fn select_horizons(frame: &FeatureFrame, markets: &[String], cfg: &RunConfig, delta_ms: i64, rows: Range<usize>) -> Horizons {
    let part = frame.slice(rows);
    let all_targets: Vec<&[Option<f64>]> = markets.iter().filter_map(|m| part.get(&target_name(m, delta_ms))).collect();
    let mut out = Horizons { delta_ms, ..Default::default() };
    for m in markets {
        if let Some(c) = choose(&part, &cfg.features.tfi_ms, |h| FeatureKey::tfi(m, h).to_string(), &all_targets) {
            out.scores.insert(FeatureKey::tfi(m, c.horizon_ms).to_string(), c.r2_bar);
            out.tfi.insert(m.clone(), c.horizon_ms);
        }
        if let Some(c) = choose(&part, &cfg.features.pret_ms, |h| FeatureKey::pret(m, h).to_string(), &all_targets) {
            out.scores.insert(FeatureKey::pret(m, c.horizon_ms).to_string(), c.r2_bar);
            out.pret.insert(m.clone(), c.horizon_ms);
        }
    }
    let pairs: Vec<(String, String)> = markets
        .iter()
        .flat_map(|i| markets.iter().filter(move |j| *j != i).map(move |j| (i.clone(), j.clone())))
        .collect();
    let chosen: Vec<(String, String, Option<models::HorizonChoice>)> = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let target: Vec<&[Option<f64>]> = part.get(&target_name(&i, delta_ms)).into_iter().collect();
            let c = choose(&part, &cfg.features.div_ms, |h| FeatureKey::div(&j, &i, h).to_string(), &target);
            (i, j, c)
        })
        .collect();
    for (i, j, c) in chosen {
        if let Some(c) = c {
            out.scores.insert(FeatureKey::div(&j, &i, c.horizon_ms).to_string(), c.r2_bar);
            out.div.insert(format!("{i}|{j}"), c.horizon_ms);
        }
    }
    out
}

/// Pairwise lead-lag fits on `rows`.
pub fn fit_leadlag(frame: &FeatureFrame, markets: &[String], horizons: &Horizons, rows: Range<usize>) -> LeadLagFit {
    let part = frame.slice(rows);
    let delta = horizons.delta_ms;
    leadlag::pairwise_r2_matrix(
        &part,
        markets,
        delta,
        |i, j| horizons.covariates(&markets[i], &markets[j]),
        |i| target_name(&markets[i], delta),
    )
}

/// Every source market's covariates for one target.
pub fn baseline_columns(markets: &[String], horizons: &Horizons, target: &str) -> Vec<String> {
    markets.iter().flat_map(|j| horizons.covariates(target, j)).collect()
}

pub fn design(frame: &FeatureFrame, names: &[String], target_col: &str) -> Result<Design, ModelError> {
    let cols: Vec<&[Option<f64>]> = names
        .iter()
        .map(|n| frame.get(n).ok_or_else(|| ModelError::ZeroVariance(format!("missing column {n}"))))
        .collect::<Result<_, _>>()?;
    let y = frame.get(target_col).ok_or_else(|| ModelError::ZeroVariance(format!("missing column {target_col}")))?;
    Ok(Design::complete_cases(names.to_vec(), &cols, y))
}

/// Drops missing, zero-variance and collinear columns until OLS succeeds.
fn usable_columns(frame: &FeatureFrame, names: &[String], target_col: &str, target: &str, delta: i64) -> Vec<String> {
    let present: Vec<String> = names.iter().filter(|n| frame.get(n).is_some()).cloned().collect();
    match leadlag::fit_with_drops(frame, &present, target_col, target, delta) {
        (Some(m), _) => m.coefficients.keys().cloned().collect(),
        (None, _) => Vec::new(),
    }
}

/// Fitted per-target model with its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFit {
    pub kind: String,
    pub lambda: Option<f64>,
    pub model: LinearModel,
    pub nonzero: usize,
}

/// Baseline OLS for `target` on `train`, scored out of sample on `test`.
pub fn fit_baseline(
    frame: &FeatureFrame,
    markets: &[String],
    horizons: &Horizons,
    target: &str,
    split: &Split,
) -> Result<TargetFit, ModelError> {
    let delta = horizons.delta_ms;
    let tcol = target_name(target, delta);
    let train = frame.slice(split.train.clone());
    let names = usable_columns(&train, &baseline_columns(markets, horizons, target), &tcol, target, delta);
    let mut model = models::fit_ols(&design(&train, &names, &tcol)?, target, delta)?;
    let test = design(&frame.slice(split.test.clone()), &names, &tcol)?;
    model.diagnostics.r2_out_of_sample = (test.n() > 0).then(|| model.r2_on(&test));
    let nonzero = model.count_nonzero();
    Ok(TargetFit { kind: "baseline".into(), lambda: None, model, nonzero })
}

/// LASSO path for `target` over `lambdas`.
pub fn fit_lasso_path(
    frame: &FeatureFrame,
    markets: &[String],
    horizons: &Horizons,
    target: &str,
    lambdas: &[f64],
    split: &Split,
) -> Result<Vec<TargetFit>, ModelError> {
    let delta = horizons.delta_ms;
    let tcol = target_name(target, delta);
    let train = frame.slice(split.train.clone());
    let names = usable_columns(&train, &baseline_columns(markets, horizons, target), &tcol, target, delta);
    let d = design(&train, &names, &tcol)?;
    let test = design(&frame.slice(split.test.clone()), &names, &tcol)?;
    lambdas
        .iter()
        .map(|&l| {
            let mut model = models::fit_lasso(&d, l, target, delta)?;
            model.diagnostics.r2_out_of_sample = (test.n() > 0).then(|| model.r2_on(&test));
            let nonzero = model.count_nonzero();
            Ok(TargetFit { kind: "lasso".into(), lambda: Some(l), model, nonzero })
        })
        .collect()
}

/// Meta family column name for `target`.
pub fn meta_name(target: &str, family: Family) -> String {
    format!("meta|{target}|m{}", family.name())
}

/// Builds the five meta features for `target` with weights from `weight_rows`
/// and inserts them into `frame`.
pub fn add_meta_features(
    frame: &mut FeatureFrame,
    markets: &[String],
    horizons: &Horizons,
    target: &str,
    weight_rows: Range<usize>,
) -> Vec<MetaFeature> {
    let delta = horizons.delta_ms;
    let mut out = Vec::new();
    for family in Family::ALL {
        let sources: Vec<(String, String)> = markets
            .iter()
            .filter_map(|j| {
                let col = match family {
                    Family::IMBa | Family::IMBb => FeatureKey::imb(j, family).to_string(),
                    Family::TFI => FeatureKey::tfi(j, *horizons.tfi.get(j)?).to_string(),
                    Family::PRET => FeatureKey::pret(j, *horizons.pret.get(j)?).to_string(),
                    Family::DIV => FeatureKey::div(j, target, *horizons.div.get(&format!("{target}|{j}"))?).to_string(),
                };
                frame.get(&col).is_some().then(|| (j.clone(), col))
            })
            .collect();
        let y = frame.get(&target_name(target, delta)).expect("target column");
        let y_fit = &y[weight_rows.clone()];
        let fit_cols: Vec<(String, &[Option<f64>])> =
            sources.iter().map(|(j, c)| (j.clone(), &frame.get(c).expect("column")[weight_rows.clone()])).collect();
        let weights = models::build_meta_feature(&meta_name(target, family), &fit_cols, y_fit).weights;
        let n = frame.len();
        let values: Vec<Option<f64>> = (0..n)
            .map(|r| {
                let mut acc = 0.0;
                for ((_, c), (_, _, a)) in sources.iter().zip(&weights) {
                    acc += a * frame.get(c).expect("column")[r]?;
                }
                (!sources.is_empty()).then_some(acc)
            })
            .collect();
        frame.insert(meta_name(target, family), values.clone());
        out.push(MetaFeature { name: meta_name(target, family), values, weights });
    }
    out
}

/// Meta model for `target`; meta weights come from the training rows.
pub fn fit_meta_model(
    frame: &FeatureFrame,
    markets: &[String],
    horizons: &Horizons,
    target: &str,
    split: &Split,
) -> Result<(TargetFit, Vec<MetaFeature>), ModelError> {
    let delta = horizons.delta_ms;
    let tcol = target_name(target, delta);
    let mut work = frame.clone();
    let metas = add_meta_features(&mut work, markets, horizons, target, split.train.clone());
    let names: Vec<String> = Family::ALL.iter().map(|f| meta_name(target, *f)).collect();
    let mut model = models::fit_meta(&design(&work.slice(split.train.clone()), &names, &tcol)?, target, delta)?;
    let test = design(&work.slice(split.test.clone()), &names, &tcol)?;
    model.diagnostics.r2_out_of_sample = (test.n() > 0).then(|| model.r2_on(&test));
    let nonzero = model.count_nonzero();
    Ok((TargetFit { kind: "meta".into(), lambda: None, model, nonzero }, metas))
}

/// Model output on every row where all its inputs are present.
pub fn predict_column(model: &LinearModel, frame: &FeatureFrame) -> Vec<Option<f64>> {
    let cols: Vec<Option<&[Option<f64>]>> = model.coefficients.keys().map(|k| frame.get(k)).collect();
    let mut row = vec![0.0; cols.len()];
    (0..frame.len())
        .map(|r| {
            for (k, c) in cols.iter().enumerate() {
                row[k] = (*c)?[r]?;
            }
            Some(model.predict(&row))
        })
        .collect()
}

/// One backtest cell: threshold from training predictions, walk-forward on test.
pub fn backtest_cell(
    model: &LinearModel,
    frame: &FeatureFrame,
    panel: &SampledPanel,
    target_index: usize,
    split: &Split,
    percentile: f64,
    fees: (f64, f64),
) -> Option<(PnLReport, FillSequence)> {
    let preds = predict_column(model, frame);
    let insample: Vec<f64> = preds[split.train.clone()].iter().flatten().copied().collect();
    let threshold = backtest::threshold_from_insample(&insample, percentile)?;
    let market = &panel.markets[target_index];
    let test = split.test.clone();
    let ts: Vec<i64> = test.clone().map(|i| panel.grid.ts(i)).collect();
    let seq = backtest::run_taker_walkforward(&ts, &preds[test.clone()], |k| market.book(test.start + k), threshold);
    let report = backtest::compute_pnl(&seq, fees.1, fees.0, threshold);
    Some((report, seq))
}

/// PnL matrices of the pairwise models. `fees[i]` is `(vip, default)` for target `i`.
pub fn backtest_matrix(
    fit: &LeadLagFit,
    frame: &FeatureFrame,
    panel: &SampledPanel,
    split: &Split,
    percentile: f64,
    fees: &[(f64, f64)],
) -> (PnLMatrix, Vec<Vec<Option<FillSequence>>>) {
    let markets = &fit.matrix.markets;
    let m = markets.len();
    let cells: Vec<Option<(PnLReport, FillSequence)>> = (0..m * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            let model = fit.models[i][j].as_ref()?;
            let pi = panel.market_index(&markets[i])?;
            backtest_cell(model, frame, panel, pi, split, percentile, fees[i])
        })
        .collect();
    let mut reports = vec![vec![None; m]; m];
    let mut fills = vec![vec![None; m]; m];
    for (k, c) in cells.into_iter().enumerate() {
        if let Some((r, s)) = c {
            reports[k / m][k % m] = Some(r);
            fills[k / m][k % m] = Some(s);
        }
    }
    (PnLMatrix { markets: markets.clone(), cells: reports }, fills)
}

/// Parses `start..end x factor` into a geometric grid, e.g. `0.001..0.256x2`.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("lambda grid {spec:?}: expected start..endxfactor");
    let (range, factor) = spec.split_once('x').ok_or_else(bad)?;
    let (a, b) = range.split_once("..").ok_or_else(bad)?;
    let (a, b, f): (f64, f64, f64) =
        (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?, factor.trim().parse().map_err(|_| bad())?);
    if !(a > 0.0 && b >= a && f > 1.0) {
        return Err(bad());
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let v = a * f.powi(k);
        if v > b * (1.0 + 1e-9) {
            break;
        }
        out.push(v);
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_grid_syntax() {
        let g = parse_lambda_grid("0.001..0.256x2").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g, models::lambda_grid());
        assert!(parse_lambda_grid("0.1..0.01x2").is_err());
        assert!(parse_lambda_grid("nonsense").is_err());
    }

    #[test]
    fn covariates_per_pair() {
        let mut h = Horizons { delta_ms: 500, ..Default::default() };
        h.tfi.insert("a".into(), 500);
        h.pret.insert("a".into(), 250);
        h.div.insert("b|a".into(), 5000);
        assert_eq!(h.covariates("b", "a"), vec!["a|IMBa|", "a|IMBb|", "a|TFI|500", "a|PRET|250", "a|DIV(b)|5000"]);
        assert_eq!(h.covariates("a", "a").len(), 4);
    }
}
