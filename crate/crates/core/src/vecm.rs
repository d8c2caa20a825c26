//! Maximum-likelihood VECM estimation for a given lag, rank and
//! deterministic case, plus the level-VAR representation, forecasting,
//! orthogonalized impulse responses and holdout backtests.
//!
//! The model is
//!
//! ```text
//! Δx_t = α (β' x_{t-1} + ρ d_t) + Γ_1 Δx_{t-1} + … + Γ_{k-1} Δx_{t-k+1} + μ + μ_τ t + ε_t
//! ```
//!
//! where `ρ d_t` holds the restricted constant or trend (the last row of
//! `beta` when present) and `μ`, `μ_τ` the unrestricted terms.

use thiserror::Error;

use crate::johansen::{self, beta_normalize, design, trend_value, DeterministicCase, JohansenError};
use crate::numerics::{cholesky, ols, LinalgError, Matrix};
use crate::panel::{PanelDataset, QuarterDate, Variable};

pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VecmError {
    #[error(transparent)]
    Johansen(#[from] JohansenError),
    #[error("rank {rank} exceeds the {available} available eigenvectors")]
    RankMismatch { rank: usize, available: usize },
    #[error("forecast horizon must be at least 1")]
    HorizonZero,
    #[error("expected {expected} rows of {vars} observations, got {rows}x{cols}")]
    ObservationShape { expected: usize, vars: usize, rows: usize, cols: usize },
    #[error("residual covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("holdout start {start} is outside the usable range {first}..={last}")]
    HoldoutOutOfRange { start: QuarterDate, first: QuarterDate, last: QuarterDate },
    #[error("training sample too short: {0}")]
    SampleTooShort(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Estimation settings: lag order `k` of the level VAR, cointegration
/// rank, and deterministic case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub k: usize,
    pub rank: usize,
    pub case: DeterministicCase,
}

#[derive(Debug, Clone)]
pub struct VecmFit {
    pub spec: ModelSpec,
    /// n x r loadings.
    pub alpha: Matrix,
    /// (n + restricted terms) x r, identity block on `beta_rows`.
    pub beta: Matrix,
    pub beta_rows: Vec<usize>,
    /// Γ_1..Γ_{k-1}, each n x n.
    pub gammas: Vec<Matrix>,
    /// Unrestricted constant (zero when the case has none).
    pub mu: Vec<f64>,
    /// Unrestricted trend slope (zero unless the case has one).
    pub mu_trend: Vec<f64>,
    /// `E'E / T`.
    pub sigma: Matrix,
    /// T x n.
    pub residuals: Matrix,
    /// Short-run regressors `z2` used in estimation, T x m2.
    pub(crate) short_run: Matrix,
    /// Error-correction terms `β' z1`, T x r.
    pub(crate) ec_terms: Matrix,
    pub eigenvalues: Vec<f64>,
    /// Number of level observations the model was fit on.
    pub sample_len: usize,
    pub sample_end: Option<QuarterDate>,
    pub variable_names: Vec<String>,
}

impl VecmFit {
    pub fn n_vars(&self) -> usize {
        self.alpha.rows()
    }

    pub fn nobs(&self) -> usize {
        self.residuals.rows()
    }

    /// `Π = α β'` on the level variables only.
    pub fn pi(&self) -> Matrix {
        let n = self.n_vars();
        self.alpha.matmul(&self.beta.row_range(0, n).transpose())
    }

    /// `α ρ'`: loading of the restricted deterministic term, if any.
    fn restricted_loading(&self) -> Vec<f64> {
        let n = self.n_vars();
        if self.beta.rows() > n {
            self.alpha.mul_vec(self.beta.row(n))
        } else {
            vec![0.0; n]
        }
    }

    /// Intercept and trend slope of the level/difference equations.
    fn deterministic_parts(&self) -> (Vec<f64>, Vec<f64>) {
        let restricted = self.restricted_loading();
        let mut intercept = self.mu.clone();
        let mut trend = self.mu_trend.clone();
        match self.spec.case {
            DeterministicCase::RestrictedConstant => add_into(&mut intercept, &restricted),
            DeterministicCase::RestrictedTrend => add_into(&mut trend, &restricted),
            _ => {}
        }
        (intercept, trend)
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn fit_vecm(panel: &PanelDataset, spec: ModelSpec) -> Result<VecmFit, VecmError> {
    let mut fit = fit_vecm_levels(&panel.levels(), spec)?;
    fit.sample_end = Some(panel.end());
    fit.variable_names = Variable::ALL.iter().map(|v| v.column().to_string()).collect();
    Ok(fit)
}

/// Fits a VECM to a `T x n` level matrix.
pub fn fit_vecm_levels(levels: &Matrix, spec: ModelSpec) -> Result<VecmFit, VecmError> {
    let n = levels.cols();
    let jres = johansen::johansen_levels(levels, spec.k, spec.case)?;
    if spec.rank > jres.dim() {
        return Err(VecmError::RankMismatch { rank: spec.rank, available: jres.dim() });
    }
    let d = design(levels, spec.k, spec.case);
    let r = spec.rank;

    let normalized = beta_normalize(&jres.beta, r, n)?;
    let beta = normalized.beta;
    let alpha = if r == 0 {
        Matrix::zeros(n, 0)
    } else {
        let bsb = beta.transpose().matmul(&jres.s11).matmul(&beta);
        let bsb_inv = crate::numerics::spd_inverse(&bsb).map_err(|_| VecmError::NotPositiveDefinite)?;
        jres.s01.matmul(&beta).matmul(&bsb_inv)
    };

    // Short-run coefficients by OLS given the error-correction terms.
    let ec_terms = d.z1.matmul(&beta);
    let target = d.z0.sub(&ec_terms.matmul(&alpha.transpose()));
    let fit = ols(&d.z2, &target)?;
    let coef = fit.coefficients;
    let gammas: Vec<Matrix> = (0..spec.k - 1)
        .map(|i| coef.row_range(i * n, (i + 1) * n).transpose())
        .collect();
    let (uconst, utrend) = spec.case.unrestricted_terms();
    let mut row = n * (spec.k - 1);
    let mu = if uconst {
        row += 1;
        coef.row(row - 1).to_vec()
    } else {
        vec![0.0; n]
    };
    let mu_trend = if utrend { coef.row(row).to_vec() } else { vec![0.0; n] };

    let residuals = fit.residuals;
    let sigma = fit.residual_covariance;
    Ok(VecmFit {
        spec,
        alpha,
        beta,
        beta_rows: normalized.rows,
        gammas,
        mu,
        mu_trend,
        sigma,
        residuals,
        short_run: d.z2,
        ec_terms,
        eigenvalues: jres.eigenvalues,
        sample_len: levels.rows(),
        sample_end: None,
        variable_names: (1..=n).map(|i| format!("y{i}")).collect(),
    })
}

/// Level form `x_t = c + τ t + A_1 x_{t-1} + … + A_k x_{t-k} + ε_t`.
#[derive(Debug, Clone)]
pub struct LevelVar {
    pub coefs: Vec<Matrix>,
    pub intercept: Vec<f64>,
    pub trend: Vec<f64>,
}

pub fn to_level_var(fit: &VecmFit) -> LevelVar {
    let n = fit.n_vars();
    let k = fit.spec.k;
    let pi = fit.pi();
    let eye = Matrix::identity(n);
    let mut coefs = Vec::with_capacity(k);
    if k == 1 {
        coefs.push(eye.add(&pi));
    } else {
        coefs.push(eye.add(&pi).add(&fit.gammas[0]));
        for i in 1..k - 1 {
            coefs.push(fit.gammas[i].sub(&fit.gammas[i - 1]));
        }
        coefs.push(fit.gammas[k - 2].scale(-1.0));
    }
    let (intercept, trend) = fit.deterministic_parts();
    LevelVar { coefs, intercept, trend }
}

#[derive(Debug, Clone)]
pub struct ForecastPath {
    /// Last observed quarter, when the fit came from a dated panel.
    pub origin: Option<QuarterDate>,
    pub horizon: usize,
    /// horizon x n; row `h - 1` is the h-step-ahead level forecast.
    pub values: Matrix,
    pub variable_names: Vec<String>,
}

impl ForecastPath {
    pub fn quarter(&self, step: usize) -> Option<QuarterDate> {
        self.origin.map(|o| o.advance(step as i64))
    }
}

fn check_last_obs(fit: &VecmFit, last: &Matrix) -> Result<(), VecmError> {
    let (k, n) = (fit.spec.k, fit.n_vars());
    if last.rows() != k || last.cols() != n {
        return Err(VecmError::ObservationShape { expected: k, vars: n, rows: last.rows(), cols: last.cols() });
    }
    Ok(())
}

/// Point forecasts by iterating the error-correction recursion with zero
/// shocks. `last_obs` holds the final `k` level observations of the
/// estimation sample, oldest first.
pub fn forecast(fit: &VecmFit, last_obs: &Matrix, horizon: usize) -> Result<ForecastPath, VecmError> {
    if horizon == 0 {
        return Err(VecmError::HorizonZero);
    }
    check_last_obs(fit, last_obs)?;
    let n = fit.n_vars();
    let k = fit.spec.k;
    let restricted = fit.spec.case.restricted_terms() > 0;

    let mut levels: Vec<Vec<f64>> = (0..k).map(|i| last_obs.row(i).to_vec()).collect();
    let mut out = Matrix::zeros(horizon, n);
    for h in 0..horizon {
        let t = fit.sample_len + h;
        let prev = &levels[levels.len() - 1];
        let mut z1 = prev.clone();
        if restricted {
            z1.push(match fit.spec.case {
                DeterministicCase::RestrictedTrend => trend_value(t),
                _ => 1.0,
            });
        }
        let ec: Vec<f64> = (0..fit.beta.cols())
            .map(|j| (0..z1.len()).map(|i| fit.beta[(i, j)] * z1[i]).sum())
            .collect();
        let mut dx = fit.alpha.mul_vec(&ec);
        let len = levels.len();
        for (i, g) in fit.gammas.iter().enumerate() {
            let lagged: Vec<f64> = (0..n).map(|j| levels[len - 1 - i][j] - levels[len - 2 - i][j]).collect();
            add_into(&mut dx, &g.mul_vec(&lagged));
        }
        add_into(&mut dx, &fit.mu);
        let tv = trend_value(t);
        add_into(&mut dx, &fit.mu_trend.iter().map(|m| m * tv).collect::<Vec<_>>());
        let next: Vec<f64> = prev.iter().zip(&dx).map(|(a, b)| a + b).collect();
        out.row_mut(h).copy_from_slice(&next);
        levels.push(next);
    }
    Ok(ForecastPath {
        origin: fit.sample_end,
        horizon,
        values: out,
        variable_names: fit.variable_names.clone(),
    })
}

/// Same forecasts computed by iterating the level-VAR representation.
pub fn forecast_level_var(fit: &VecmFit, last_obs: &Matrix, horizon: usize) -> Result<Matrix, VecmError> {
    if horizon == 0 {
        return Err(VecmError::HorizonZero);
    }
    check_last_obs(fit, last_obs)?;
    let var = to_level_var(fit);
    let n = fit.n_vars();
    let mut levels: Vec<Vec<f64>> = (0..last_obs.rows()).map(|i| last_obs.row(i).to_vec()).collect();
    let mut out = Matrix::zeros(horizon, n);
    for h in 0..horizon {
        let tv = trend_value(fit.sample_len + h);
        let mut next: Vec<f64> = var.intercept.iter().zip(&var.trend).map(|(c, d)| c + d * tv).collect();
        let len = levels.len();
        for (i, a) in var.coefs.iter().enumerate() {
            add_into(&mut next, &a.mul_vec(&levels[len - 1 - i]));
        }
        out.row_mut(h).copy_from_slice(&next);
        levels.push(next);
    }
    Ok(out)
}

/// Orthogonalized impulse responses `Θ_0..Θ_H`; entry `(i, j)` of `Θ_h` is
/// the response of variable `i` after `h` quarters to a one-standard-deviation
/// shock in variable `j`, with Cholesky ordering equal to the variable order.
#[derive(Debug, Clone)]
pub struct IrfSet {
    pub horizons: usize,
    pub responses: Vec<Matrix>,
    pub ordering: Vec<String>,
}

/// Companion matrix of a level VAR (nk x nk).
pub fn companion(var: &LevelVar) -> Matrix {
    let n = var.intercept.len();
    let k = var.coefs.len();
    let mut c = Matrix::zeros(n * k, n * k);
    for (i, a) in var.coefs.iter().enumerate() {
        for r in 0..n {
            for s in 0..n {
                c[(r, i * n + s)] = a[(r, s)];
            }
        }
    }
    for r in n..n * k {
        c[(r, r - n)] = 1.0;
    }
    c
}

pub fn irf(fit: &VecmFit, horizons: usize) -> Result<IrfSet, VecmError> {
    let p = cholesky(&fit.sigma).map_err(|_| VecmError::NotPositiveDefinite)?;
    let var = to_level_var(fit);
    let n = fit.n_vars();
    let c = companion(&var);
    let mut power = Matrix::identity(c.rows());
    let mut responses = Vec::with_capacity(horizons + 1);
    for h in 0..=horizons {
        if h > 0 {
            power = power.matmul(&c);
        }
        // Ψ_h = J C^h J' is the leading n x n block.
        let psi = power.row_range(0, n).column_range(0, n);
        responses.push(psi.matmul(&p));
    }
    Ok(IrfSet { horizons, responses, ordering: fit.variable_names.clone() })
}

pub fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Mean absolute percentage error as a fraction, actuals in the denominator.
pub fn mape(forecast: &[f64], actual: &[f64]) -> f64 {
    forecast.iter().zip(actual).map(|(f, a)| (f - a).abs() / a.abs()).sum::<f64>() / actual.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub variable: Variable,
    pub rmse: f64,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    pub quarter: QuarterDate,
    pub variable: Variable,
    pub forecast: f64,
    pub actual: f64,
}

#[derive(Debug, Clone)]
pub struct BacktestReport {
    pub holdout_start: QuarterDate,
    pub accuracy: Vec<Accuracy>,
    pub rows: Vec<BacktestRow>,
}

/// Fits on observations strictly before `holdout_start`, forecasts to the
/// end of the panel and scores the forecasts against the held-out actuals.
pub fn backtest(panel: &PanelDataset, spec: ModelSpec, holdout_start: QuarterDate) -> Result<BacktestReport, VecmError> {
    let first_usable = panel.start().succ();
    let out_of_range = || VecmError::HoldoutOutOfRange { start: holdout_start, first: first_usable, last: panel.end() };
    let split = panel.index_of(holdout_start).filter(|&i| i > 0).ok_or_else(out_of_range)?;
    let train = panel.slice(0, split).map_err(|_| out_of_range())?;
    let fit = fit_vecm(&train, spec).map_err(|e| match e {
        VecmError::Johansen(JohansenError::SampleTooShort { effective, needed }) => {
            VecmError::SampleTooShort(format!("{effective} effective observations, need {needed}"))
        }
        other => other,
    })?;
    let levels = train.levels();
    let last = levels.row_range(levels.rows() - spec.k, levels.rows());
    let horizon = panel.len() - split;
    let path = forecast(&fit, &last, horizon)?;

    let mut rows = Vec::with_capacity(horizon * 5);
    let mut accuracy = Vec::with_capacity(5);
    for (j, &variable) in Variable::ALL.iter().enumerate() {
        let actual = &panel.series(variable).values()[split..];
        let predicted = path.values.column(j);
        let errors: Vec<f64> = predicted.iter().zip(actual).map(|(f, a)| f - a).collect();
        accuracy.push(Accuracy { variable, rmse: rmse(&errors), mape: mape(&predicted, actual) });
    }
    for h in 0..horizon {
        for (j, &variable) in Variable::ALL.iter().enumerate() {
            rows.push(BacktestRow {
                quarter: panel.quarter_at(split + h),
                variable,
                forecast: path.values[(h, j)],
                actual: panel.series(variable).values()[split + h],
            });
        }
    }
    Ok(BacktestReport { holdout_start, accuracy, rows })
}
