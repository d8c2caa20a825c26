//! Lag-order selection for level VARs with a constant.
//!
//! Every candidate lag is fit on the same estimation sample (the first
//! `max_lag` observations are held back), so the criteria are comparable.

use thiserror::Error;

use crate::numerics::{ols, spd_log_det, LinalgError, Matrix};
use crate::panel::PanelDataset;
use crate::stats::chi2_sf;

pub const DEFAULT_MAX_LAG: usize = 4;

/// Significance level for the sequential likelihood-ratio rule.
const LR_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LagError {
    #[error("effective sample {effective} too short for max lag {max_lag} with {vars} variables")]
    SampleTooShort { effective: usize, max_lag: usize, vars: usize },
    #[error("regressors are collinear at lag {lag}: {source}")]
    RankDeficient { lag: usize, source: LinalgError },
    #[error("residual covariance is singular at lag {lag}")]
    SingularCovariance { lag: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCriteria {
    pub lag: usize,
    pub log_lik: f64,
    pub log_det_sigma: f64,
    pub aic: f64,
    pub fpe: f64,
    pub hqic: f64,
    pub sbic: f64,
    /// LR test of this lag against `lag - 1`; absent at lag 0.
    pub lr_statistic: Option<f64>,
    pub lr_pvalue: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChosenLags {
    pub by_aic: usize,
    pub by_fpe: usize,
    pub by_lr: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagSelection {
    pub max_lag: usize,
    pub nobs: usize,
    pub per_lag: Vec<LagCriteria>,
    pub chosen: ChosenLags,
}

pub fn select_lags(panel: &PanelDataset, max_lag: usize) -> Result<LagSelection, LagError> {
    select_lags_levels(&panel.levels(), max_lag)
}

/// Fits VAR(0..=max_lag) with intercept on `levels` (T x n) and scores each lag.
pub fn select_lags_levels(levels: &Matrix, max_lag: usize) -> Result<LagSelection, LagError> {
    let n = levels.cols();
    let effective = levels.rows().saturating_sub(max_lag);
    // T_eff >= 5 n maxLag / 2, kept in integers.
    if 2 * effective < 5 * n * max_lag || effective == 0 {
        return Err(LagError::SampleTooShort { effective, max_lag, vars: n });
    }
    let t = effective as f64;
    let nf = n as f64;
    let y = levels.row_range(max_lag, levels.rows());

    let mut per_lag: Vec<LagCriteria> = Vec::with_capacity(max_lag + 1);
    for p in 0..=max_lag {
        let s = n * p + 1;
        let mut x = Matrix::zeros(effective, s);
        for row in 0..effective {
            let obs = row + max_lag;
            x[(row, 0)] = 1.0;
            for i in 1..=p {
                let lagged = levels.row(obs - i);
                x.row_mut(row)[1 + (i - 1) * n..1 + i * n].copy_from_slice(lagged);
            }
        }
        let fit = ols(&x, &y).map_err(|source| LagError::RankDeficient { lag: p, source })?;
        let log_det_sigma =
            spd_log_det(&fit.residual_covariance).map_err(|_| LagError::SingularCovariance { lag: p })?;
        let log_lik = -0.5 * t * (nf * (2.0 * std::f64::consts::PI).ln() + log_det_sigma + nf);
        let m = (n * s) as f64;
        let sf = s as f64;
        let (lr_statistic, lr_pvalue) = match per_lag.last() {
            Some(prev) => {
                let lr = ((t - sf) * (prev.log_det_sigma - log_det_sigma)).max(0.0);
                (Some(lr), Some(chi2_sf(lr, (n * n) as f64)))
            }
            None => (None, None),
        };
        per_lag.push(LagCriteria {
            lag: p,
            log_lik,
            log_det_sigma,
            aic: (-2.0 * log_lik + 2.0 * m) / t,
            fpe: log_det_sigma.exp() * ((t + sf) / (t - sf)).powi(n as i32),
            hqic: (-2.0 * log_lik + 2.0 * t.ln().ln() * m) / t,
            sbic: (-2.0 * log_lik + t.ln() * m) / t,
            lr_statistic,
            lr_pvalue,
        });
    }

    let argmin = |key: fn(&LagCriteria) -> f64| {
        per_lag
            .iter()
            .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.lag.cmp(&b.lag)))
            .map_or(0, |c| c.lag)
    };
    let by_lr = per_lag
        .iter()
        .rev()
        .find(|c| c.lr_pvalue.is_some_and(|p| p < LR_LEVEL))
        .map_or(0, |c| c.lag);
    let chosen = ChosenLags { by_aic: argmin(|c| c.aic), by_fpe: argmin(|c| c.fpe), by_lr };
    Ok(LagSelection { max_lag, nobs: effective, per_lag, chosen })
}
