use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fragnet::backtest::PnLMatrix;
use fragnet::config::{ConfigError, RunConfig};
use fragnet::datagen::{self, GenConfig, PlantedCollapse};
use fragnet::exchsim::analytics::{self, ADVERSE_HORIZONS_MS};
use fragnet::exchsim::calibration::{self, CancelCalibration};
use fragnet::exchsim::{run_maker_strategy, MakerRun, SimEvent, Signal};
use fragnet::features::{self, DepthParameter, FeatureFrame};
use fragnet::leadlag::{self, LeadLagMatrix};
use fragnet::marketdata::{self, BookSnapshot, Grid, SampledPanel, Side, TradeTick};
use fragnet::models::{LinearModel, Split};
use fragnet::pipeline::{self, Horizons};

use crate::{Cli, Command, FitKind, ReportKind};

/// An input artifact that has not been produced yet.
#[derive(Debug)]
pub struct MissingInput {
    pub path: PathBuf,
    pub producer: &'static str,
}

impl fmt::Display for MissingInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing input {}: run `fragnet {}` first", self.path.display(), self.producer)
    }
}

impl std::error::Error for MissingInput {}

/// Exit code and JSON body for an error.
pub fn error_json(e: &anyhow::Error) -> (u8, String) {
    let (code, body) = if let Some(ConfigError::Invalid(v)) = e.downcast_ref::<ConfigError>() {
        (2, serde_json::json!({"error": "invalid_config", "violations": v}))
    } else if let Some(m) = e.downcast_ref::<MissingInput>() {
        let body = serde_json::json!({
            "error": "missing_input",
            "path": m.path.display().to_string(),
            "producer": m.producer,
            "message": m.to_string(),
        });
        (3, body)
    } else {
        (1, serde_json::json!({"error": "failed", "message": format!("{e:#}")}))
    };
    (code, body.to_string())
}

struct Ctx {
    dir: PathBuf,
    cfg: RunConfig,
    seed: u64,
}

impl Ctx {
    fn input(&self, name: &str, producer: &'static str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(MissingInput { path, producer }.into())
        }
    }

    fn output(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut out = self.output(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &'static str) -> Result<T> {
        let path = self.input(name, producer)?;
        let file = File::open(&path)?;
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
    }

    fn delta(&self, delta: Option<i64>) -> Result<i64> {
        let d = delta.unwrap_or(self.cfg.models.headline_ms);
        if !self.cfg.models.target_ms.contains(&d) {
            return Err(ConfigError::Invalid(vec![format!("delta: {d} is not in models.target_ms")]).into());
        }
        Ok(d)
    }

    /// File name with a horizon suffix unless `delta` is the headline horizon.
    fn tagged(&self, stem: &str, delta: i64, ext: &str) -> String {
        if delta == self.cfg.models.headline_ms {
            format!("{stem}.{ext}")
        } else {
            format!("{stem}_{delta}.{ext}")
        }
    }

    fn markets(&self) -> Result<Vec<String>> {
        self.read_json("markets.json", "resample")
    }

    fn panel(&self) -> Result<SampledPanel> {
        let path = self.input("panel.csv", "resample")?;
        Ok(SampledPanel::read_csv(BufReader::new(File::open(path)?))?)
    }

    fn frame(&self, name: &str, producer: &'static str) -> Result<FeatureFrame> {
        let path = self.input(name, producer)?;
        FeatureFrame::read_csv(BufReader::new(File::open(&path)?)).with_context(|| format!("reading {}", path.display()))
    }

    fn transformed(&self) -> Result<FeatureFrame> {
        self.frame("features_transformed.csv", "calibrate-transform")
    }

    fn horizons(&self, delta: i64) -> Result<Horizons> {
        self.read_json(&format!("horizons_{delta}.json"), "select-horizons")
    }
}

/// Market id made safe for file names.
fn file_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { dir: cli.dir.clone(), cfg, seed: cli.seed };
    fs::create_dir_all(&ctx.dir)?;
    match &cli.command {
        Command::InitConfig { out } => {
            fs::write(out, ctx.cfg.to_toml()?)?;
            Ok(())
        }
        Command::Gen { gen_config, duration_ms, l3_duration_ms } => gen(&ctx, gen_config.as_deref(), *duration_ms, *l3_duration_ms),
        Command::Resample => resample(&ctx),
        Command::Features => compute_features(&ctx),
        Command::CalibrateTransform => calibrate_transform(&ctx),
        Command::SelectHorizons { delta } => select_horizons(&ctx, ctx.delta(*delta)?),
        Command::Leadlag { delta } => run_leadlag(&ctx, ctx.delta(*delta)?),
        Command::Fit { kind, delta, lambda_grid } => fit(&ctx, *kind, ctx.delta(*delta)?, lambda_grid.as_deref()),
        Command::Backtest { delta } => run_backtest(&ctx, ctx.delta(*delta)?),
        Command::MakerSim { threshold } => maker_sim(&ctx, *threshold),
        Command::Report { what } => report(&ctx, *what),
    }
}

#[derive(Serialize, Deserialize)]
struct L3Meta {
    tick: f64,
    collapses: Vec<PlantedCollapse>,
}

fn gen(ctx: &Ctx, gen_config: Option<&Path>, duration_ms: Option<i64>, l3_duration_ms: Option<i64>) -> Result<()> {
    let mut g = match gen_config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => GenConfig::default(),
    };
    g.seed = ctx.seed;
    if let Some(d) = duration_ms {
        g.duration_ms = d;
    }
    if let Some(d) = l3_duration_ms {
        g.l3.duration_ms = d;
    }
    let v = g.violations();
    if !v.is_empty() {
        return Err(ConfigError::Invalid(v.into_iter().map(|s| format!("gen.{s}")).collect()).into());
    }
    let ids = g.market_ids();
    ctx.cfg.check_markets(ids.iter().map(|s| s.as_str()))?;
    let panel = datagen::gen_panel(&g);
    marketdata::write_ndjson(&panel.books, ctx.output("panel.books.ndjson")?)?;
    marketdata::write_ndjson(&panel.trades, ctx.output("panel.trades.ndjson")?)?;
    let l3 = datagen::gen_l3_events(&g, None);
    marketdata::write_ndjson(&l3.events, ctx.output("l3.events.ndjson")?)?;
    marketdata::write_ndjson(&l3.signals, ctx.output("l3.signals.ndjson")?)?;
    ctx.write_json("l3.meta.json", &L3Meta { tick: l3.tick, collapses: l3.collapses })?;
    fs::write(ctx.dir.join("gen_config.toml"), toml::to_string_pretty(&g)?)?;
    log::info!("generated {} books, {} trades, {} events", panel.books.len(), panel.trades.len(), l3.events.len());
    Ok(())
}

fn resample(ctx: &Ctx) -> Result<()> {
    let (books, bad_books) = marketdata::read_ndjson::<BookSnapshot>(&ctx.input("panel.books.ndjson", "gen")?)?;
    let (trades, bad_trades) = marketdata::read_ndjson::<TradeTick>(&ctx.input("panel.trades.ndjson", "gen")?)?;
    let build = SampledPanel::build(&books, &trades, ctx.cfg.grid_ms)?;
    let ids = build.panel.market_ids();
    ctx.cfg.check_markets(ids.iter().map(|s| s.as_str()))?;
    let mut out = ctx.output("panel.csv")?;
    build.panel.write_csv(&mut out)?;
    out.flush()?;
    let mut rejected = build.rejected;
    if !bad_books.is_empty() {
        rejected.insert("panel.books.ndjson".into(), bad_books);
    }
    if !bad_trades.is_empty() {
        rejected.insert("panel.trades.ndjson".into(), bad_trades);
    }
    ctx.write_json("rejected.json", &rejected)?;
    ctx.write_json("markets.json", &ids)
}

fn compute_features(ctx: &Ctx) -> Result<()> {
    let panel = ctx.panel()?;
    let split = Split::chronological(panel.grid.len);
    let calib = panel.slice(split.calibration.clone());
    let depths: Vec<DepthParameter> =
        calib.markets.iter().map(|m| features::select_depth_n(&m.market_id, &m.books)).collect();
    let frame = features::compute_features(&panel, &ctx.cfg.features, Some(&depths));
    let mut out = ctx.output("features.csv")?;
    frame.write_csv(&mut out)?;
    out.flush()?;
    ctx.write_json("depth.json", &depths)
}

fn calibrate_transform(ctx: &Ctx) -> Result<()> {
    let markets = ctx.markets()?;
    let mut frame = ctx.frame("features.csv", "features")?;
    let split = Split::chronological(frame.len());
    let transforms = pipeline::calibrate_transforms(&frame, &markets, &ctx.cfg, split.calibration.clone());
    pipeline::apply_transforms(&mut frame, &transforms);
    ctx.write_json("transforms.json", &transforms)?;
    let mut out = ctx.output("features_transformed.csv")?;
    frame.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn select_horizons(ctx: &Ctx, delta: i64) -> Result<()> {
    let markets = ctx.markets()?;
    let frame = ctx.transformed()?;
    let split = Split::chronological(frame.len());
    let h = pipeline::select_horizons(&frame, &markets, &ctx.cfg, delta, split.train.clone());
    ctx.write_json(&format!("horizons_{delta}.json"), &h)
}

fn run_leadlag(ctx: &Ctx, delta: i64) -> Result<()> {
    let markets = ctx.markets()?;
    let frame = ctx.transformed()?;
    let horizons = ctx.horizons(delta)?;
    let split = Split::chronological(frame.len());
    let fit = pipeline::fit_leadlag(&frame, &markets, &horizons, split.train.clone());
    let m = &fit.matrix;
    let mut out = ctx.output(&ctx.tagged("leadlag_r2", delta, "csv"))?;
    m.write_r2_csv(&mut out)?;
    out.flush()?;
    let mut out = ctx.output(&ctx.tagged("leadlag_rowavg", delta, "csv"))?;
    m.write_avg_csv(&mut out, true)?;
    out.flush()?;
    let mut out = ctx.output(&ctx.tagged("leadlag_colavg", delta, "csv"))?;
    m.write_avg_csv(&mut out, false)?;
    out.flush()?;
    ctx.write_json(&format!("leadlag_{delta}.json"), m)?;
    ctx.write_json(&format!("leadlag_rankings_{delta}.json"), &leadlag::rank_leaders(m))?;
    ctx.write_json(&format!("leadlag_dropped_{delta}.json"), &fit.dropped)?;
    ctx.write_json(&format!("leadlag_models_{delta}.json"), &fit.models)
}

#[derive(Serialize)]
struct FitRow<'a> {
    market: &'a str,
    lambda: Option<f64>,
    r2_in_sample: f64,
    r2_out_of_sample: Option<f64>,
    nonzero: usize,
    n_samples: usize,
}

fn fit(ctx: &Ctx, kind: FitKind, delta: i64, grid: Option<&str>) -> Result<()> {
    let markets = ctx.markets()?;
    let frame = ctx.transformed()?;
    let horizons = ctx.horizons(delta)?;
    let split = Split::chronological(frame.len());
    let lambdas = match grid {
        Some(g) => pipeline::parse_lambda_grid(g).map_err(|e| ConfigError::Invalid(vec![format!("lambda_grid: {e}")]))?,
        None => ctx.cfg.models.lambda_grid.clone(),
    };
    let label = match kind {
        FitKind::Baseline => "baseline",
        FitKind::Lasso => "lasso",
        FitKind::Meta => "meta",
    };
    let mut summary = ctx.output(&format!("fit_{label}_{delta}.csv"))?;
    writeln!(summary, "market,lambda,r2_in_sample,r2_out_of_sample,nonzero,n_samples")?;
    let mut meta_weights = Vec::new();
    for target in &markets {
        let fits = match kind {
            FitKind::Baseline => vec![pipeline::fit_baseline(&frame, &markets, &horizons, target, &split)],
            FitKind::Lasso => match pipeline::fit_lasso_path(&frame, &markets, &horizons, target, &lambdas, &split) {
                Ok(v) => v.into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e)],
            },
            FitKind::Meta => vec![pipeline::fit_meta_model(&frame, &markets, &horizons, target, &split).map(|(f, metas)| {
                meta_weights.push((target.clone(), metas.into_iter().map(|m| (m.name, m.weights)).collect::<Vec<_>>()));
                f
            })],
        };
        for f in fits {
            let f = match f {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("{label} fit for {target} failed: {e}");
                    continue;
                }
            };
            let name = match f.lambda {
                Some(l) => format!("models/{label}_{}_{delta}_{l}.json", file_id(target)),
                None => format!("models/{label}_{}_{delta}.json", file_id(target)),
            };
            ctx.write_json(&name, &f.model)?;
            let d = &f.model.diagnostics;
            let row = FitRow {
                market: target,
                lambda: f.lambda,
                r2_in_sample: d.r2_in_sample,
                r2_out_of_sample: d.r2_out_of_sample,
                nonzero: f.nonzero,
                n_samples: d.n_samples,
            };
            writeln!(
                summary,
                "{},{},{},{},{},{}",
                row.market,
                row.lambda.map(|l| l.to_string()).unwrap_or_default(),
                row.r2_in_sample,
                row.r2_out_of_sample.map(|r| r.to_string()).unwrap_or_default(),
                row.nonzero,
                row.n_samples
            )?;
        }
    }
    summary.flush()?;
    if kind == FitKind::Meta {
        ctx.write_json(&format!("meta_weights_{delta}.json"), &meta_weights)?;
    }
    Ok(())
}

fn run_backtest(ctx: &Ctx, delta: i64) -> Result<()> {
    let panel = ctx.panel()?;
    let frame = ctx.transformed()?;
    let markets: Vec<String> = ctx.markets()?;
    let models: Vec<Vec<Option<LinearModel>>> = ctx.read_json(&format!("leadlag_models_{delta}.json"), "leadlag")?;
    let matrix: LeadLagMatrix = ctx.read_json(&format!("leadlag_{delta}.json"), "leadlag")?;
    let split = Split::chronological(frame.len());
    let fees: Vec<(f64, f64)> = markets
        .iter()
        .map(|m| ctx.cfg.market(m).map(|s| (s.taker_fee_vip, s.taker_fee_default)))
        .collect::<Option<_>>()
        .ok_or_else(|| anyhow!("a market lacks a fee schedule"))?;
    let fit = leadlag::LeadLagFit { matrix, models, dropped: Vec::new() };
    let (pnl, fills) = pipeline::backtest_matrix(&fit, &frame, &panel, &split, ctx.cfg.backtest.percentile, &fees);
    for (name, pick) in pnl_picks() {
        let mut out = ctx.output(&ctx.tagged(name, delta, "csv"))?;
        pnl.write_csv(&mut out, pick)?;
        out.flush()?;
    }
    ctx.write_json(&format!("backtest_{delta}.json"), &pnl)?;
    for (i, row) in fills.iter().enumerate() {
        for (j, seq) in row.iter().enumerate() {
            if let Some(seq) = seq {
                let mut out = ctx.output(&format!(
                    "trades_{delta}/trades_{}_{}.csv",
                    file_id(&markets[i]),
                    file_id(&markets[j])
                ))?;
                seq.write_csv(&mut out)?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

type Pick = fn(&fragnet::backtest::PnLReport) -> f64;

fn pnl_picks() -> [(&'static str, Pick); 3] {
    [("pnl1", |r| r.pnl1), ("pnl2", |r| r.pnl2), ("pnl3", |r| r.pnl3)]
}

#[derive(Serialize, Deserialize)]
struct RunSummary {
    fills: usize,
    legs: usize,
    legs_alternate: bool,
    roundtrip_bps: Option<f64>,
    final_pnl_bps: Option<f64>,
    posts: usize,
    cancels: usize,
    reprices: usize,
    suppressed: usize,
    adverse_avg_bps: Vec<(i64, Option<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct MakerSummary {
    threshold: f64,
    calibration: Option<CancelCalibration>,
    planted_ask_collapses: usize,
    maker: RunSummary,
    benchmark: RunSummary,
}

fn write_run(ctx: &Ctx, sub: &str, run: &MakerRun, rebate_bps: f64, amount: f64) -> Result<RunSummary> {
    let mut out = ctx.output(&format!("{sub}/fills.csv"))?;
    analytics::write_fills_csv(&run.fills, &mut out)?;
    out.flush()?;
    let path = analytics::pnl_timeseries(&run.fills, &run.trades, rebate_bps, amount);
    let mut out = ctx.output(&format!("{sub}/pnl_path.csv"))?;
    analytics::write_pnl_csv(&path, &mut out)?;
    out.flush()?;
    let adverse = analytics::adverse_selection(&run.fills, &run.trades, &ADVERSE_HORIZONS_MS);
    let mut out = ctx.output(&format!("{sub}/adverse_selection.csv"))?;
    adverse.write_csv(&mut out)?;
    out.flush()?;
    Ok(RunSummary {
        fills: run.fills.len(),
        legs: run.legs.len(),
        legs_alternate: run.legs_alternate(),
        roundtrip_bps: run.roundtrip_bps(),
        final_pnl_bps: path.last().map(|p| p.pnl_bps),
        posts: run.actions.posts,
        cancels: run.actions.cancels,
        reprices: run.actions.reprices,
        suppressed: run.actions.suppressed,
        adverse_avg_bps: adverse.horizons_ms.iter().zip(&adverse.stats).map(|(h, s)| (*h, s.map(|s| s.avg))).collect(),
    })
}

fn maker_sim(ctx: &Ctx, threshold: Option<f64>) -> Result<()> {
    let (events, bad) = marketdata::read_ndjson::<SimEvent>(&ctx.input("l3.events.ndjson", "gen")?)?;
    let (signals, bad_signals) = marketdata::read_ndjson::<Signal>(&ctx.input("l3.signals.ndjson", "gen")?)?;
    if !bad.is_empty() || !bad_signals.is_empty() {
        log::warn!("skipped {} malformed event and {} malformed signal lines", bad.len(), bad_signals.len());
    }
    let meta: L3Meta = ctx.read_json("l3.meta.json", "gen")?;
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Err(anyhow!("event stream is empty"));
    };
    let grid = Grid::covering(first.ts, last.ts, ctx.cfg.grid_ms)?;
    let (threshold, calibration) = match threshold {
        Some(t) => (t, None),
        None => {
            let top = calibration::sample_top(&events, meta.tick, &grid, Side::Sell);
            let preds = calibration::sample_predictions(&signals, &grid);
            let window = (500 / ctx.cfg.grid_ms).max(1) as usize;
            let c = calibration::calibrate_cancel_threshold(&top, &preds, window)?;
            (c.threshold, Some(c))
        }
    };
    let params = fragnet::exchsim::MakerParams { t_cancel: threshold, tick: meta.tick, ..ctx.cfg.maker.clone() };
    let maker = run_maker_strategy(&events, &signals, &params);
    let bench = run_maker_strategy(&events, &signals, &params.benchmark());
    let summary = MakerSummary {
        threshold,
        calibration,
        planted_ask_collapses: meta.collapses.iter().filter(|c| c.side == Side::Sell).count(),
        maker: write_run(ctx, "maker", &maker, params.rebate_bps, params.amount)?,
        benchmark: write_run(ctx, "benchmark", &bench, params.rebate_bps, params.amount)?,
    };
    ctx.write_json("maker_summary.json", &summary)
}

/// Matrix rows and columns reordered by `order`.
fn write_ordered(ctx: &Ctx, name: &str, markets: &[String], values: &[Vec<f64>], order: &[String]) -> Result<()> {
    let idx: Vec<usize> = order.iter().map(|m| markets.iter().position(|x| x == m).expect("known market")).collect();
    let mut out = ctx.output(name)?;
    write!(out, "target")?;
    for &j in &idx {
        write!(out, ",{}", markets[j])?;
    }
    writeln!(out)?;
    for &i in &idx {
        write!(out, "{}", markets[i])?;
        for &j in &idx {
            write!(out, ",{}", values[i][j])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn orderings(markets: &[String], values: &[Vec<f64>]) -> (Vec<String>, Vec<String>) {
    let m = LeadLagMatrix::new(markets.to_vec(), 0, values.to_vec());
    let r = leadlag::rank_leaders(&m);
    (r.by_row_sum, r.by_col_sum)
}

fn report(ctx: &Ctx, what: ReportKind) -> Result<()> {
    let delta = ctx.cfg.models.headline_ms;
    let all = what == ReportKind::All;
    if all || what == ReportKind::Leadlag {
        let m: LeadLagMatrix = ctx.read_json(&format!("leadlag_{delta}.json"), "leadlag")?;
        let (rows, cols) = orderings(&m.markets, &m.r2);
        write_ordered(ctx, "report/leadlag_r2_by_row_sum.csv", &m.markets, &m.r2, &rows)?;
        write_ordered(ctx, "report/leadlag_r2_by_col_sum.csv", &m.markets, &m.r2, &cols)?;
    }
    if all || what == ReportKind::Pnl {
        let p: PnLMatrix = ctx.read_json(&format!("backtest_{delta}.json"), "backtest")?;
        for (name, pick) in pnl_picks() {
            let v = p.values(pick);
            let (rows, cols) = orderings(&p.markets, &v);
            write_ordered(ctx, &format!("report/{name}_by_row_sum.csv"), &p.markets, &v, &rows)?;
            write_ordered(ctx, &format!("report/{name}_by_col_sum.csv"), &p.markets, &v, &cols)?;
        }
    }
    if all || what == ReportKind::Models {
        let mut out = ctx.output("report/models.csv")?;
        writeln!(out, "kind,market,delta_ms,lambda,r2_in_sample,r2_out_of_sample,nonzero")?;
        let dir = ctx.input("models", "fit")?;
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        files.sort();
        for f in files {
            let model: LinearModel = serde_json::from_reader(BufReader::new(File::open(&f)?))?;
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let kind = stem.split('_').next().unwrap_or_default();
            let d = &model.diagnostics;
            writeln!(
                out,
                "{kind},{},{},{},{},{},{}",
                model.target,
                model.delta_ms,
                d.lasso.as_ref().map(|l| l.lambda.to_string()).unwrap_or_default(),
                d.r2_in_sample,
                d.r2_out_of_sample.map(|r| r.to_string()).unwrap_or_default(),
                model.count_nonzero()
            )?;
        }
        out.flush()?;
    }
    if all || what == ReportKind::Maker {
        let s: MakerSummary = ctx.read_json("maker_summary.json", "maker-sim")?;
        let mut out = ctx.output("report/maker.csv")?;
        write!(out, "run,threshold,fills,roundtrip_bps,final_pnl_bps")?;
        for (h, _) in &s.maker.adverse_avg_bps {
            write!(out, ",adverse_avg_{}s", *h as f64 / 1000.0)?;
        }
        writeln!(out)?;
        for (name, t, r) in [("maker", s.threshold, &s.maker), ("benchmark", f64::INFINITY, &s.benchmark)] {
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            write!(out, "{name},{t},{},{},{}", r.fills, opt(r.roundtrip_bps), opt(r.final_pnl_bps))?;
            for (_, a) in &r.adverse_avg_bps {
                write!(out, ",{}", opt(*a))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
    }
    Ok(())
}
