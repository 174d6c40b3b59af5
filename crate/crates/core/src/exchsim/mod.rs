//! Event-driven L3 exchange simulator with a maker strategy on top.

pub mod analytics;
pub mod book;
pub mod calibration;
pub mod strategy;

pub use analytics::{adverse_selection, pnl_timeseries, AdverseSelection, PnlPoint, ADVERSE_HORIZONS_MS};
pub use book::{microprice, replay, BookL3, EventKind, Execution, OrderId, SimEvent, AMBIENT};
pub use calibration::{calibrate_cancel_threshold, CancelCalibration};
pub use strategy::{run_maker_strategy, MakerFill, MakerParams, MakerRun, RateLimiter, Signal, STRATEGY};
