//! Climate-lagged monthly time-series forecasting toolkit.
//!
//! Pipeline stages: panel alignment and lagged design matrices ([`data`]),
//! seasonal-trend decomposition ([`stl`]), lagged correlation screening
//! ([`correlation`]), residual diagnostics ([`diagnostics`]), four model
//! families ([`sarimax`], [`poisson`], [`mlp`], [`gbt`]), and a model ×
//! feature-set evaluation harness ([`evaluation`]).

pub mod correlation;
pub mod data;
pub mod diagnostics;
pub mod evaluation;
pub mod gbt;
mod linalg;
pub mod mlp;
pub mod poisson;
pub mod sarimax;
pub mod stl;
pub mod synthetic;
