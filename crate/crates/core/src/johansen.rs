//! Johansen reduced-rank cointegration analysis.
//!
//! The procedure concentrates out the short-run terms, forms the product
//! moment matrices `S00, S01, S11` and solves `|λ S11 − S10 S00⁻¹ S01| = 0`.
//! Trace and maximum-eigenvalue statistics follow from the eigenvalues.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{generalized_sym_eig, ols, spd_inverse, LinalgError, Matrix};
use crate::panel::PanelDataset;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JohansenError {
    #[error("lag order must be at least 1")]
    LagZero,
    #[error("effective sample {effective} too short (need {needed})")]
    SampleTooShort { effective: usize, needed: usize },
    #[error("S00 is singular")]
    SingularS00,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Placement of constants and trends relative to the cointegration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DeterministicCase {
    #[serde(rename = "none")]
    None,
    /// Constant inside the cointegration relation, no drift in levels.
    #[default]
    #[serde(rename = "rconst")]
    RestrictedConstant,
    /// Unrestricted constant: drift in the levels.
    #[serde(rename = "uconst")]
    UnrestrictedConstant,
    /// Trend inside the cointegration relation plus an unrestricted constant.
    #[serde(rename = "rtrend")]
    RestrictedTrend,
    /// Unrestricted constant and trend.
    #[serde(rename = "utrend")]
    UnrestrictedTrend,
}

impl DeterministicCase {
    pub const ALL: [DeterministicCase; 5] = [
        DeterministicCase::None,
        DeterministicCase::RestrictedConstant,
        DeterministicCase::UnrestrictedConstant,
        DeterministicCase::RestrictedTrend,
        DeterministicCase::UnrestrictedTrend,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DeterministicCase::None => "none",
            DeterministicCase::RestrictedConstant => "rconst",
            DeterministicCase::UnrestrictedConstant => "uconst",
            DeterministicCase::RestrictedTrend => "rtrend",
            DeterministicCase::UnrestrictedTrend => "utrend",
        }
    }

    /// Extra rows appended to `x_{t-1}` in the cointegration relation.
    pub fn restricted_terms(self) -> usize {
        match self {
            DeterministicCase::RestrictedConstant | DeterministicCase::RestrictedTrend => 1,
            _ => 0,
        }
    }

    /// Deterministic columns in the short-run regression: (constant, trend).
    pub fn unrestricted_terms(self) -> (bool, bool) {
        match self {
            DeterministicCase::None | DeterministicCase::RestrictedConstant => (false, false),
            DeterministicCase::UnrestrictedConstant | DeterministicCase::RestrictedTrend => (true, false),
            DeterministicCase::UnrestrictedTrend => (true, true),
        }
    }
}

impl fmt::Display for DeterministicCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DeterministicCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeterministicCase::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| format!("unknown deterministic case `{s}` (expected none|rconst|uconst|rtrend|utrend)"))
    }
}

// 5% asymptotic critical values indexed by n - r = 1..=6
// (MacKinnon, Haug & Michelis 1999 response surfaces, T = ∞).
const TRACE_CV5_NONE: [f64; 6] = [4.129906, 12.32090, 24.27596, 40.17493, 60.06141, 83.93712];
const MAXEIG_CV5_NONE: [f64; 6] = [4.129906, 11.22480, 17.79730, 24.15921, 30.43961, 36.63019];
const TRACE_CV5_RCONST: [f64; 6] = [9.164546, 20.26184, 35.19275, 54.07904, 76.97277, 103.8473];
const MAXEIG_CV5_RCONST: [f64; 6] = [9.164546, 15.89210, 22.29962, 28.58808, 34.80587, 40.95680];
const TRACE_CV5_UCONST: [f64; 6] = [3.841466, 15.49471, 29.79707, 47.85613, 69.81889, 95.75366];
const MAXEIG_CV5_UCONST: [f64; 6] = [3.841466, 14.26460, 21.13162, 27.58434, 33.87687, 40.07757];

/// 5% critical values `(trace, max-eigenvalue)` for `n - r` common trends,
/// or `None` when the case or dimension has no embedded table.
pub fn critical_values_5pct(case: DeterministicCase, common_trends: usize) -> Option<(f64, f64)> {
    let (trace, maxeig) = match case {
        DeterministicCase::None => (&TRACE_CV5_NONE, &MAXEIG_CV5_NONE),
        DeterministicCase::RestrictedConstant => (&TRACE_CV5_RCONST, &MAXEIG_CV5_RCONST),
        DeterministicCase::UnrestrictedConstant => (&TRACE_CV5_UCONST, &MAXEIG_CV5_UCONST),
        DeterministicCase::RestrictedTrend | DeterministicCase::UnrestrictedTrend => return None,
    };
    let idx = common_trends.checked_sub(1)?;
    Some((*trace.get(idx)?, *maxeig.get(idx)?))
}

/// Regressor blocks of the concentrated likelihood for lag order `k`:
/// `z0 = Δx_t`, `z1 = x_{t-1}` plus restricted terms, `z2` short-run terms.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub z0: Matrix,
    pub z1: Matrix,
    pub z2: Matrix,
}

/// Value of the trend regressor at observation `t` (0-based within the sample).
pub(crate) fn trend_value(t: usize) -> f64 {
    t as f64
}

pub(crate) fn design(levels: &Matrix, k: usize, case: DeterministicCase) -> Design {
    let n = levels.cols();
    let nobs = levels.rows() - k;
    let m1 = n + case.restricted_terms();
    let (uconst, utrend) = case.unrestricted_terms();
    let m2 = n * (k - 1) + uconst as usize + utrend as usize;
    let mut z0 = Matrix::zeros(nobs, n);
    let mut z1 = Matrix::zeros(nobs, m1);
    let mut z2 = Matrix::zeros(nobs, m2);
    for row in 0..nobs {
        let t = row + k;
        for j in 0..n {
            z0[(row, j)] = levels[(t, j)] - levels[(t - 1, j)];
            z1[(row, j)] = levels[(t - 1, j)];
        }
        match case {
            DeterministicCase::RestrictedConstant => z1[(row, n)] = 1.0,
            DeterministicCase::RestrictedTrend => z1[(row, n)] = trend_value(t),
            _ => {}
        }
        for i in 1..k {
            for j in 0..n {
                z2[(row, (i - 1) * n + j)] = levels[(t - i, j)] - levels[(t - i - 1, j)];
            }
        }
        let mut c = n * (k - 1);
        if uconst {
            z2[(row, c)] = 1.0;
            c += 1;
        }
        if utrend {
            z2[(row, c)] = trend_value(t);
        }
    }
    Design { z0, z1, z2 }
}

#[derive(Debug, Clone)]
pub struct JohansenResult {
    pub k: usize,
    pub case: DeterministicCase,
    /// Effective sample size `T = len - k`.
    pub nobs: usize,
    /// Descending, in `[0, 1)`, one per variable.
    pub eigenvalues: Vec<f64>,
    /// Indexed by hypothesized rank `r = 0..n`.
    pub trace_stats: Vec<f64>,
    pub max_eig_stats: Vec<f64>,
    pub trace_cv5: Vec<Option<f64>>,
    pub max_eig_cv5: Vec<Option<f64>>,
    /// `None` when no critical values exist for the case.
    pub selected_rank: Option<usize>,
    /// Eigenvectors as columns, `(n + restricted terms) x n`, normalized `v' S11 v = 1`.
    pub beta: Matrix,
    pub s00: Matrix,
    pub s01: Matrix,
    pub s11: Matrix,
}

impl JohansenResult {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn has_critical_values(&self) -> bool {
        self.trace_cv5.iter().all(Option::is_some)
    }
}

pub fn johansen_test(panel: &PanelDataset, k: usize, case: DeterministicCase) -> Result<JohansenResult, JohansenError> {
    johansen_levels(&panel.levels(), k, case)
}

pub(crate) fn check_sample(len: usize, n: usize, k: usize) -> Result<usize, JohansenError> {
    if k == 0 {
        return Err(JohansenError::LagZero);
    }
    let effective = len.saturating_sub(k);
    let needed = 10 + n * k;
    if effective < needed {
        return Err(JohansenError::SampleTooShort { effective, needed });
    }
    Ok(effective)
}

/// Product-moment matrices of the residuals of `z0` and `z1` on `z2`.
pub(crate) fn moments(d: &Design) -> Result<(Matrix, Matrix, Matrix), JohansenError> {
    let nobs = d.z0.rows() as f64;
    let (r0, r1) = if d.z2.cols() == 0 {
        (d.z0.clone(), d.z1.clone())
    } else {
        (ols(&d.z2, &d.z0)?.residuals, ols(&d.z2, &d.z1)?.residuals)
    };
    let s00 = r0.tr_matmul(&r0).scale(1.0 / nobs);
    let s01 = r0.tr_matmul(&r1).scale(1.0 / nobs);
    let s11 = r1.tr_matmul(&r1).scale(1.0 / nobs);
    Ok((s00, s01, s11))
}

/// Runs the Johansen procedure on a `T x n` level matrix.
pub fn johansen_levels(levels: &Matrix, k: usize, case: DeterministicCase) -> Result<JohansenResult, JohansenError> {
    let n = levels.cols();
    let nobs = check_sample(levels.rows(), n, k)?;
    let d = design(levels, k, case);
    let (s00, s01, s11) = moments(&d)?;

    let s00_inv = spd_inverse(&s00).map_err(|_| JohansenError::SingularS00)?;
    let a = s01.transpose().matmul(&s00_inv).matmul(&s01);
    let pairs = generalized_sym_eig(&a, &s11)
        .map_err(|e| JohansenError::NumericalFailure(format!("S11 eigen-solve failed: {e}")))?;

    let m1 = s11.rows();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut beta = Matrix::zeros(m1, n);
    for (j, pair) in pairs.iter().take(n).enumerate() {
        let lambda = pair.value;
        if !(-1e-10..1.0 + 1e-10).contains(&lambda) || !lambda.is_finite() {
            return Err(JohansenError::NumericalFailure(format!("eigenvalue {lambda} outside [0, 1)")));
        }
        eigenvalues.push(lambda.clamp(0.0, 1.0 - f64::EPSILON));
        // Sign convention: largest-magnitude loading positive.
        let v = &pair.vector;
        let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in v.iter().enumerate() {
            beta[(i, j)] = sign * x;
        }
    }

    let t = nobs as f64;
    let contrib: Vec<f64> = eigenvalues.iter().map(|l| -t * (1.0 - l).ln()).collect();
    let trace_stats: Vec<f64> = (0..n).map(|r| contrib[r..].iter().sum()).collect();
    let max_eig_stats = contrib.clone();
    let cvs: Vec<Option<(f64, f64)>> = (0..n).map(|r| critical_values_5pct(case, n - r)).collect();
    let trace_cv5: Vec<Option<f64>> = cvs.iter().map(|c| c.map(|(tr, _)| tr)).collect();
    let max_eig_cv5: Vec<Option<f64>> = cvs.iter().map(|c| c.map(|(_, me)| me)).collect();
    let selected_rank = if trace_cv5.iter().all(Option::is_some) {
        Some(
            trace_stats
                .iter()
                .zip(&trace_cv5)
                .position(|(stat, cv)| *stat < cv.unwrap_or(f64::INFINITY))
                .unwrap_or(n),
        )
    } else {
        None
    };

    Ok(JohansenResult {
        k,
        case,
        nobs,
        eigenvalues,
        trace_stats,
        max_eig_stats,
        trace_cv5,
        max_eig_cv5,
        selected_rank,
        beta,
        s00,
        s01,
        s11,
    })
}

/// β rescaled so that the rows in `rows` form an identity block.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBeta {
    pub beta: Matrix,
    /// Variables whose coefficients were set to the identity.
    pub rows: Vec<usize>,
    /// True when the leading block was singular and other rows were used.
    pub pivoted: bool,
}

/// Normalizes the first `r` columns of `beta` to `β (c'β)⁻¹`, where `c`
/// selects the first `r` rows. If that block is singular, rows are picked
/// among the first `n_vars` by partial pivoting instead.
pub fn beta_normalize(beta: &Matrix, r: usize, n_vars: usize) -> Result<NormalizedBeta, JohansenError> {
    if r > beta.cols() || r > n_vars || n_vars > beta.rows() {
        return Err(JohansenError::NumericalFailure(format!("cannot normalize rank {r} with {} vectors", beta.cols())));
    }
    let b = beta.column_range(0, r);
    if r == 0 {
        return Ok(NormalizedBeta { beta: b, rows: Vec::new(), pivoted: false });
    }
    let leading: Vec<usize> = (0..r).collect();
    let rows = if block_is_regular(&b, &leading) { leading } else { pivot_rows(&b, r, n_vars) };
    let pivoted = rows.iter().enumerate().any(|(i, &row)| i != row);
    let mut block = Matrix::zeros(r, r);
    for (i, &row) in rows.iter().enumerate() {
        block.row_mut(i).copy_from_slice(b.row(row));
    }
    let inv = crate::numerics::inverse(&block)
        .map_err(|_| JohansenError::NumericalFailure("no invertible r x r block in beta".into()))?;
    Ok(NormalizedBeta { beta: b.matmul(&inv), rows, pivoted })
}

fn block_is_regular(b: &Matrix, rows: &[usize]) -> bool {
    let r = rows.len();
    let mut m = Matrix::zeros(r, r);
    for (i, &row) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(b.row(row));
    }
    let scale = b.max_abs();
    // Partial-pivot elimination; any tiny pivot means singular.
    for col in 0..r {
        let piv = (col..r).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        if m[(piv, col)].abs() <= 1e-10 * scale {
            return false;
        }
        if piv != col {
            for j in 0..r {
                let tmp = m[(piv, j)];
                m[(piv, j)] = m[(col, j)];
                m[(col, j)] = tmp;
            }
        }
        for i in col + 1..r {
            let f = m[(i, col)] / m[(col, col)];
            for j in col..r {
                m[(i, j)] -= f * m[(col, j)];
            }
        }
    }
    true
}

fn pivot_rows(b: &Matrix, r: usize, n_vars: usize) -> Vec<usize> {
    let mut work = b.row_range(0, n_vars);
    let mut available: Vec<usize> = (0..n_vars).collect();
    let mut chosen = Vec::with_capacity(r);
    for col in 0..r {
        let (pos, &row) = available
            .iter()
            .enumerate()
            .max_by(|(_, &i), (_, &j)| work[(i, col)].abs().total_cmp(&work[(j, col)].abs()).then(j.cmp(&i)))
            .expect("rank exceeds variables");
        available.remove(pos);
        chosen.push(row);
        let p = work[(row, col)];
        if p != 0.0 {
            for &i in &available {
                let f = work[(i, col)] / p;
                for j in col..r {
                    work[(i, j)] -= f * work[(row, j)];
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}
