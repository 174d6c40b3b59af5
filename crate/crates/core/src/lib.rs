//! Cross-venue Bitcoin microstructure toolkit.
//!
//! The crate is organised along the research pipeline:
//!
//! * [`marketdata`] ingests book snapshots and trades and resamples them onto a
//!   uniform 50 ms grid ([`marketdata::SampledPanel`]).
//! * [`features`] computes order book imbalances, trade flow imbalance, past
//!   returns and mean divergence, plus forward-return targets.
//! * [`transform`] calibrates sign-symmetric step-function transforms by
//!   greedy threshold pruning.
//! * [`models`] fits OLS and LASSO models, selects horizons and builds meta
//!   features.
//! * [`leadlag`] estimates the pairwise lead-lag R² network.
//! * [`backtest`] maps models to a one-unit taker strategy and accounts PnL.
//! * [`exchsim`] is an order-by-order matching engine with a maker strategy,
//!   cancel-threshold calibration and adverse-selection analytics.
//! * [`datagen`] produces seeded synthetic data with planted structure.
//! * [`pipeline`] glues the stages together for the CLI.

pub mod backtest;
pub mod config;
pub mod datagen;
pub mod exchsim;
pub mod features;
pub mod leadlag;
pub mod linalg;
pub mod marketdata;
pub mod models;
pub mod pipeline;
pub mod stats;
pub mod transform;

/// Basis points per unit return.
pub const BPS: f64 = 10_000.0;
