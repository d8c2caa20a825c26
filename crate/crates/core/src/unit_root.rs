//! Augmented Dickey-Fuller unit-root test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ols, LinalgError, Matrix};

/// Lag order used when none is configured (one year of quarterly lags).
pub const DEFAULT_ADF_LAGS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdfError {
    #[error("series of length {len} is too short for {lags} lags (need at least {needed})")]
    SampleTooShort { len: usize, lags: usize, needed: usize },
    #[error("series is constant")]
    ConstantSeries,
    #[error("test regression is singular: {0}")]
    Singular(LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfDeterministic {
    None,
    #[default]
    Constant,
    ConstantTrend,
}

impl fmt::Display for AdfDeterministic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdfDeterministic::None => "none",
            AdfDeterministic::Constant => "constant",
            AdfDeterministic::ConstantTrend => "constant_trend",
        })
    }
}

impl FromStr for AdfDeterministic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "n" => Ok(Self::None),
            "constant" | "c" => Ok(Self::Constant),
            "constant_trend" | "ct" => Ok(Self::ConstantTrend),
            other => Err(format!("unknown ADF deterministic case `{other}`")),
        }
    }
}

/// Left-tail critical values at 1%, 5% and 10%.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalValues {
    pub pct1: f64,
    pub pct5: f64,
    pub pct10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    pub deterministic: AdfDeterministic,
    pub nobs: usize,
    pub critical_values: CriticalValues,
    pub reject_at_5pct: bool,
}

// MacKinnon (2010) response surfaces for the single-series tau statistic:
// cv(T) = b0 + b1/T + b2/T^2 + b3/T^3, rows for 1%, 5%, 10%.
const TAU_NONE: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const TAU_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const TAU_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

/// Finite-sample critical values for `nobs` effective observations.
pub fn critical_values(case: AdfDeterministic, nobs: usize) -> CriticalValues {
    let table = match case {
        AdfDeterministic::None => &TAU_NONE,
        AdfDeterministic::Constant => &TAU_CONSTANT,
        AdfDeterministic::ConstantTrend => &TAU_TREND,
    };
    let t = nobs as f64;
    let eval = |b: &[f64; 4]| b[0] + b[1] / t + b[2] / t.powi(2) + b[3] / t.powi(3);
    CriticalValues { pct1: eval(&table[0]), pct5: eval(&table[1]), pct10: eval(&table[2]) }
}

/// t-ratio on ρ in `Δy_t = [c] + [δ t] + ρ y_{t-1} + Σ φ_i Δy_{t-i} + ε_t`.
pub fn adf_test(y: &[f64], lag_order: usize, deterministic: AdfDeterministic) -> Result<AdfResult, AdfError> {
    let needed = lag_order + 10;
    if y.len() < needed {
        return Err(AdfError::SampleTooShort { len: y.len(), lags: lag_order, needed });
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if hi - lo == 0.0 {
        return Err(AdfError::ConstantSeries);
    }

    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // dy[t-1] = y[t] - y[t-1]; regression rows t = lag_order + 1 ..= len - 1
    let first = lag_order + 1;
    let nobs = y.len() - first;
    let extra = match deterministic {
        AdfDeterministic::None => 0,
        AdfDeterministic::Constant => 1,
        AdfDeterministic::ConstantTrend => 2,
    };
    let p = 1 + extra + lag_order;
    let mut x = Matrix::zeros(nobs, p);
    let mut z = Matrix::zeros(nobs, 1);
    for (row, t) in (first..y.len()).enumerate() {
        z[(row, 0)] = dy[t - 1];
        x[(row, 0)] = y[t - 1];
        if extra >= 1 {
            x[(row, 1)] = 1.0;
        }
        if extra == 2 {
            x[(row, 2)] = t as f64;
        }
        for i in 1..=lag_order {
            x[(row, extra + i)] = dy[t - 1 - i];
        }
    }
    let fit = ols(&x, &z).map_err(AdfError::Singular)?;
    let s2 = fit.unbiased_covariance()[(0, 0)];
    let se = (s2 * fit.xtx_inv[(0, 0)]).sqrt();
    let statistic = fit.coefficients[(0, 0)] / se;
    let critical_values = critical_values(deterministic, nobs);
    Ok(AdfResult {
        statistic,
        lag_order,
        deterministic,
        nobs,
        critical_values,
        reject_at_5pct: statistic < critical_values.pct5,
    })
}
