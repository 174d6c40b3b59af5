//! Run configuration: market specs with fee schedule, horizon grids and
//! per-stage settings. Serialized as TOML.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exchsim::MakerParams;
use crate::features::FeatureGrid;
use crate::marketdata::{InstrumentKind, Margin, MarketSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a calibrated transform is adopted for one feature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adoption {
    Always,
    /// Only where the transform beats the raw feature.
    IfImproves,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionFlags {
    pub imb: Adoption,
    pub tfi: Adoption,
    pub pret: Adoption,
    pub div: Adoption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSettings {
    pub quantile: f64,
    pub thresholds: usize,
    /// Target horizon used in the calibration loop.
    pub target_ms: i64,
    pub adoption: AdoptionFlags,
}

impl Default for TransformSettings {
    fn default() -> Self {
        TransformSettings {
            quantile: crate::transform::DEFAULT_QUANTILE,
            thresholds: crate::transform::DEFAULT_THRESHOLDS,
            target_ms: 500,
            adoption: AdoptionFlags {
                imb: Adoption::Never,
                tfi: Adoption::Always,
                pret: Adoption::IfImproves,
                div: Adoption::Never,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub lambda_grid: Vec<f64>,
    pub target_ms: Vec<i64>,
    /// Horizon the lead-lag network, backtests and reports are built on.
    pub headline_ms: i64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings { lambda_grid: crate::models::lambda_grid(), target_ms: vec![500, 1000], headline_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSettings {
    /// Percentile of in-sample predictions used as the trading threshold.
    pub percentile: f64,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        BacktestSettings { percentile: 95.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid_ms: i64,
    pub features: FeatureGrid,
    pub transform: TransformSettings,
    pub models: ModelSettings,
    pub backtest: BacktestSettings,
    pub maker: MakerParams,
    pub markets: Vec<MarketSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_ms: crate::marketdata::GRID_MS,
            features: FeatureGrid::default(),
            transform: TransformSettings::default(),
            models: ModelSettings::default(),
            backtest: BacktestSettings::default(),
            maker: MakerParams::default(),
            markets: default_markets(),
        }
    }
}

/// The fourteen markets with their published taker fees (default, VIP).
/// Maker rebates follow `fee - rebate = 5`; tick sizes other than FTX (1.0)
/// and Binance (0.1) are placeholders.
pub fn default_markets() -> Vec<MarketSpec> {
    use InstrumentKind::*;
    use Margin::*;
    let rows: [(&str, InstrumentKind, Margin, f64, f64, f64); 14] = [
        ("ftx_BTC-PERP", Perpetual, Cross, 1.0, 7.0, 1.5),
        ("binancefut_BTC/USDT", Perpetual, Usdt, 0.1, 4.0, 1.53),
        ("binancecmfut_BTC/USD", Perpetual, Btc, 0.1, 5.0, 1.8),
        ("huobipro_BTC/USDT", Spot, None, 0.01, 4.75, 1.93),
        ("hbdm_BTC_CQ", Futures, Btc, 0.1, 4.0, 2.0),
        ("okex_BTC-USD-210326", Futures, Btc, 0.1, 5.0, 2.5),
        ("thbdm_BTC-USDT", Perpetual, Usdt, 0.1, 4.0, 2.7),
        ("okex_BTC-USD-SWAP", Perpetual, Btc, 0.1, 5.0, 3.0),
        ("okex_BTC-USDT-SWAP", Perpetual, Usdt, 0.1, 5.0, 3.0),
        ("hbdm_BTC-USD", Perpetual, Btc, 0.1, 5.0, 3.7),
        ("deribit_BTC-PERPETUAL", Perpetual, Btc, 0.5, 5.0, 5.0),
        ("bitmex_BTC/USD", Perpetual, Btc, 0.5, 7.5, 7.5),
        ("bybit_BTC/USD", Perpetual, Btc, 0.5, 7.5, 7.5),
        ("tbybit_BTC/USDT", Perpetual, Usdt, 0.5, 7.5, 7.5),
    ];
    rows.iter()
        .map(|&(id, kind, margin, tick, default, vip)| MarketSpec {
            market_id: id.to_string(),
            instrument_kind: kind,
            margin,
            tick_size: tick,
            taker_fee_default: default,
            taker_fee_vip: vip,
            maker_rebate: default - 5.0,
        })
        .collect()
}

impl RunConfig {
    pub fn market(&self, id: &str) -> Option<&MarketSpec> {
        self.markets.iter().find(|m| m.market_id == id)
    }

    /// Every violated constraint, as `field: message` strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.grid_ms <= 0 {
            out.push("grid_ms: must be > 0".into());
        }
        for m in &self.markets {
            out.extend(m.violations());
        }
        let mut ids: Vec<&str> = self.markets.iter().map(|m| m.market_id.as_str()).collect();
        ids.sort();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                out.push(format!("markets: duplicate market_id {}", w[0]));
            }
        }
        if self.models.lambda_grid.is_empty() {
            out.push("models.lambda_grid: must be nonempty".into());
        }
        if self.models.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            out.push("models.lambda_grid: values must be >= 0".into());
        }
        if self.models.target_ms.is_empty() {
            out.push("models.target_ms: must be nonempty".into());
        }
        if !self.models.target_ms.contains(&self.models.headline_ms) {
            out.push("models.headline_ms: must be one of models.target_ms".into());
        }
        let grids = [
            ("features.tfi_ms", &self.features.tfi_ms),
            ("features.pret_ms", &self.features.pret_ms),
            ("features.div_ms", &self.features.div_ms),
            ("features.target_ms", &self.features.target_ms),
        ];
        for (name, grid) in grids {
            if grid.is_empty() {
                out.push(format!("{name}: must be nonempty"));
            }
            if self.grid_ms > 0 && grid.iter().any(|h| *h <= 0 || h % self.grid_ms != 0) {
                out.push(format!("{name}: horizons must be positive multiples of grid_ms"));
            }
        }
        for t in &self.models.target_ms {
            if !self.features.target_ms.contains(t) {
                out.push(format!("models.target_ms: {t} is not in features.target_ms"));
            }
        }
        if !self.features.target_ms.contains(&self.transform.target_ms) {
            out.push("transform.target_ms: must be one of features.target_ms".into());
        }
        if !(0.0..0.5).contains(&self.transform.quantile) {
            out.push("transform.quantile: must be in [0, 0.5)".into());
        }
        if self.transform.thresholds == 0 {
            out.push("transform.thresholds: must be >= 1".into());
        }
        if !(0.0..=100.0).contains(&self.backtest.percentile) {
            out.push("backtest.percentile: must be in [0, 100]".into());
        }
        out.extend(self.maker.violations().into_iter().map(|v| format!("maker.{v}")));
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Checks that every market in `ids` has a spec.
    pub fn check_markets<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
        let missing: Vec<String> = ids
            .into_iter()
            .filter(|id| self.market(id).is_none())
            .map(|id| format!("markets: no spec for market {id}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(missing))
        }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = RunConfig::default();
        assert!(cfg.violations().is_empty(), "{:?}", cfg.violations());
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn fee_spot_checks() {
        let cfg = RunConfig::default();
        let fee = |id: &str| {
            let m = cfg.market(id).unwrap();
            (m.taker_fee_vip, m.taker_fee_default)
        };
        assert_eq!(fee("ftx_BTC-PERP"), (1.5, 7.0));
        assert_eq!(fee("bitmex_BTC/USD"), (7.5, 7.5));
        assert_eq!(fee("binancefut_BTC/USDT"), (1.53, 4.0));
        assert_eq!(cfg.market("bybit_BTC/USD").unwrap().maker_rebate, 2.5);
    }

    #[test]
    fn violations_are_all_listed() {
        let mut cfg = RunConfig::default();
        cfg.models.lambda_grid.clear();
        cfg.markets[0].tick_size = -1.0;
        cfg.features.tfi_ms.push(75);
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
