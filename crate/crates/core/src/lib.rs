//! Quarterly state-industry panel analysis: location quotients, unit-root
//! and Johansen cointegration testing, VECM estimation, residual
//! diagnostics, and forecasting with backtests.

pub mod numerics;
pub mod panel;
pub mod stats;
pub mod parallel;
pub mod simulate;
pub mod unit_root;
pub mod lags;
pub mod johansen;
pub mod vecm;
pub mod diagnostics;
pub mod montecarlo;
pub mod fixtures;
pub mod pipeline;
