//! Residual diagnostics for fitted VECMs: LM autocorrelation tests and
//! Jarque-Bera normality tests on orthogonalized residuals.

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{cholesky, ols, solve_lower, spd_log_det, Matrix};
use crate::stats::chi2_sf;
use crate::vecm::VecmFit;

/// Off-diagonal tolerance for the identity check on orthogonalized residuals.
const ORTHO_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("{nobs} residual rows are too few (need more than {needed})")]
    SampleTooShort { nobs: usize, needed: usize },
    #[error("residual covariance is singular")]
    SingularCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LmResult {
    pub lag: usize,
    pub statistic: f64,
    pub dof: usize,
    pub pvalue: f64,
}

/// LM tests for residual autocorrelation at lags `1..=max_lag`.
///
/// For each lag `j`, the residuals are regressed on the model's own
/// regressors (short-run terms and error-correction terms) with and
/// without `ε_{t-j}` appended, zero-filled where unavailable, and
/// `LM_j = (T − n j − 0.5) ln(|Σ_aux| / |Σ_j|)` is referred to χ²(n²).
pub fn lm_autocorrelation(fit: &VecmFit, max_lag: usize) -> Result<Vec<LmResult>, DiagnosticsError> {
    if max_lag == 0 {
        return Ok(Vec::new());
    }
    let e = &fit.residuals;
    let (t, n) = (e.rows(), e.cols());
    let base = fit.short_run.hstack(&fit.ec_terms);
    let needed = n * max_lag + base.cols();
    if t <= needed {
        return Err(DiagnosticsError::SampleTooShort { nobs: t, needed });
    }
    let log_det_of = |x: &Matrix| -> Result<f64, DiagnosticsError> {
        let aux = if x.cols() == 0 { e.tr_matmul(e).scale(1.0 / t as f64) } else {
            ols(x, e).map_err(|_| DiagnosticsError::SingularCovariance)?.residual_covariance
        };
        spd_log_det(&aux).map_err(|_| DiagnosticsError::SingularCovariance)
    };
    let restricted = log_det_of(&base)?;

    let dof = n * n;
    (1..=max_lag)
        .map(|j| {
            let mut lagged = Matrix::zeros(t, n);
            for row in j..t {
                lagged.row_mut(row).copy_from_slice(e.row(row - j));
            }
            let augmented = log_det_of(&base.hstack(&lagged))?;
            let multiplier = t as f64 - (n * j) as f64 - 0.5;
            let statistic = (multiplier * (restricted - augmented)).max(0.0);
            Ok(LmResult { lag: j, statistic, dof, pvalue: chi2_sf(statistic, dof as f64) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestStat {
    pub stat: f64,
    pub dof: usize,
    pub p: f64,
}

impl TestStat {
    fn new(stat: f64, dof: usize) -> Self {
        Self { stat, dof, p: chi2_sf(stat, dof as f64) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationNormality {
    pub equation: String,
    pub jb: TestStat,
    pub skew: f64,
    pub skewness: TestStat,
    pub kurt: f64,
    pub kurtosis: TestStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointNormality {
    pub jb: TestStat,
    pub skewness: TestStat,
    pub kurtosis: TestStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub nobs: usize,
    pub per_equation: Vec<EquationNormality>,
    pub joint: JointNormality,
}

pub fn skewness_statistic(nobs: usize, skew: f64) -> f64 {
    nobs as f64 * skew * skew / 6.0
}

pub fn kurtosis_statistic(nobs: usize, kurt: f64) -> f64 {
    nobs as f64 * (kurt - 3.0).powi(2) / 24.0
}

/// Moment skewness and kurtosis with divisor `T`.
fn moments(x: &[f64]) -> (f64, f64) {
    let t = x.len() as f64;
    let mean = x.iter().sum::<f64>() / t;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / t, m3 / t, m4 / t);
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Residuals premultiplied by the inverse Cholesky factor of `sigma`.
pub fn orthogonalize(residuals: &Matrix, sigma: &Matrix) -> Result<Matrix, DiagnosticsError> {
    let p = cholesky(sigma).map_err(|_| DiagnosticsError::SingularCovariance)?;
    Ok(solve_lower(&p, &residuals.transpose()).transpose())
}

/// Jarque-Bera, skewness and kurtosis tests per equation and jointly.
pub fn normality_tests(fit: &VecmFit) -> Result<NormalityReport, DiagnosticsError> {
    let t = fit.nobs();
    if t < 10 {
        return Err(DiagnosticsError::SampleTooShort { nobs: t, needed: 9 });
    }
    let n = fit.n_vars();
    let u = orthogonalize(&fit.residuals, &fit.sigma)?;
    let cov = u.tr_matmul(&u).scale(1.0 / t as f64);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                assert!(cov[(i, j)].abs() <= ORTHO_TOLERANCE, "orthogonalized residuals are correlated: {}", cov[(i, j)]);
            }
        }
    }

    let per_equation: Vec<EquationNormality> = (0..n)
        .map(|j| {
            let (skew, kurt) = moments(&u.column(j));
            let s = skewness_statistic(t, skew);
            let k = kurtosis_statistic(t, kurt);
            let name = fit.variable_names.get(j).cloned().unwrap_or_else(|| format!("y{}", j + 1));
            EquationNormality {
                equation: equation_label(&name),
                jb: TestStat::new(s + k, 2),
                skew,
                skewness: TestStat::new(s, 1),
                kurt,
                kurtosis: TestStat::new(k, 1),
            }
        })
        .collect();
    let sum = |f: fn(&EquationNormality) -> f64| per_equation.iter().map(f).sum::<f64>();
    let joint = JointNormality {
        jb: TestStat::new(sum(|e| e.jb.stat), 2 * n),
        skewness: TestStat::new(sum(|e| e.skewness.stat), n),
        kurtosis: TestStat::new(sum(|e| e.kurtosis.stat), n),
    };
    let report = NormalityReport { nobs: t, per_equation, joint };
    assert!(report.is_additive(1e-9), "normality report is not additive");
    Ok(report)
}

fn equation_label(variable: &str) -> String {
    crate::panel::Variable::ALL
        .iter()
        .find(|v| v.column() == variable)
        .map_or_else(|| format!("D_{variable}"), |v| v.equation_name().to_string())
}

impl NormalityReport {
    /// Joint statistics equal per-equation sums and each JB equals its
    /// skewness plus kurtosis component.
    pub fn is_additive(&self, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(1.0);
        let eq = &self.per_equation;
        let n = eq.len();
        eq.iter().all(|e| close(e.jb.stat, e.skewness.stat + e.kurtosis.stat))
            && close(self.joint.jb.stat, eq.iter().map(|e| e.jb.stat).sum())
            && close(self.joint.skewness.stat, eq.iter().map(|e| e.skewness.stat).sum())
            && close(self.joint.kurtosis.stat, eq.iter().map(|e| e.kurtosis.stat).sum())
            && (self.joint.jb.dof, self.joint.skewness.dof, self.joint.kurtosis.dof) == (2 * n, n, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::johansen::DeterministicCase;
    use crate::parallel::{replicate, replication_rng, Execution};
    use crate::simulate::{cumulative_sum, gaussian_noise, random_walks};
    use crate::vecm::{fit_vecm_levels, ModelSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn difference_fit(levels: &Matrix) -> VecmFit {
        fit_vecm_levels(levels, ModelSpec { k: 1, rank: 0, case: DeterministicCase::UnrestrictedConstant }).unwrap()
    }

    #[test]
    fn reference_row_is_consistent() {
        // Per-equation (skew, kurtosis, skew stat, kurt stat, JB) from a
        // reference five-equation table with 69 effective observations.
        let rows = [
            (0.263, 4.054, 0.795, 3.192, 3.987),
            (0.435, 5.267, 2.181, 14.779, 16.960),
            (-0.110, 3.921, 0.139, 2.440, 2.579),
            (0.049, 2.801, 0.028, 0.114, 0.141),
            (-0.782, 4.526, 7.033, 6.693, 13.726),
        ];
        for (skew, kurt, s, k, jb) in rows {
            assert!((skewness_statistic(69, skew) - s).abs() < 0.02 * s.max(1.0));
            assert!((kurtosis_statistic(69, kurt) - k).abs() < 0.02 * k.max(1.0));
            assert_abs_diff_eq!(s + k, jb, epsilon = 1.5e-3);
        }
        let total: f64 = rows.iter().map(|r| r.4).sum();
        assert_abs_diff_eq!(total, 37.393, epsilon = 1e-9);
        assert!(chi2_sf(total, 10.0) < 5e-4);
        assert_abs_diff_eq!(chi2_sf(3.987, 2.0), 0.136, epsilon = 5e-4);
        assert_abs_diff_eq!(chi2_sf(10.18, 5.0), 0.070, epsilon = 5e-4);
    }

    #[test]
    fn moments_of_known_sample() {
        // Symmetric two-point sample: skew 0, kurtosis 1.
        let (s, k) = moments(&[-1.0, 1.0, -1.0, 1.0]);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k, 1.0, epsilon = 1e-15);
        // {0, 0, 0, 4}: mean 1, m2 3, m3 6, m4 21.
        let (s, k) = moments(&[0.0, 0.0, 0.0, 4.0]);
        assert_abs_diff_eq!(s, 6.0 / 3f64.powf(1.5), epsilon = 1e-12);
        assert_abs_diff_eq!(k, 21.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn report_is_additive_with_standard_dofs() {
        let mut rng = replication_rng(12, 0);
        let fit = difference_fit(&random_walks(&mut rng, 200, 5));
        let rep = normality_tests(&fit).unwrap();
        assert!(rep.is_additive(1e-9));
        assert_eq!((rep.joint.jb.dof, rep.joint.skewness.dof, rep.joint.kurtosis.dof), (10, 5, 5));
        assert_eq!(rep.per_equation[0].jb.dof, 2);
        assert_eq!(rep.nobs, 199);
    }

    #[test]
    fn orthogonalized_residuals_are_white() {
        let mut rng = replication_rng(13, 0);
        let mix = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.8, 0.5, 0.0], [-0.3, 0.4, 2.0]]);
        let shocks = gaussian_noise(&mut rng, 300, 3).matmul(&mix.transpose());
        let fit = difference_fit(&cumulative_sum(&shocks));
        let u = orthogonalize(&fit.residuals, &fit.sigma).unwrap();
        let cov = u.tr_matmul(&u).scale(1.0 / u.rows() as f64);
        assert!(cov.sub(&Matrix::identity(3)).max_abs() < 1e-10);
    }

    #[test]
    fn zero_lags_give_no_tests() {
        let mut rng = replication_rng(3, 0);
        let fit = difference_fit(&random_walks(&mut rng, 60, 2));
        assert!(lm_autocorrelation(&fit, 0).unwrap().is_empty());
        assert!(matches!(lm_autocorrelation(&fit, 40), Err(DiagnosticsError::SampleTooShort { .. })));
    }

    #[test]
    fn lm_detects_ar1_residuals() {
        let phi = 0.8;
        let hits: usize = replicate(100, 77, Execution::Parallel, |rng, _| {
            let shocks = gaussian_noise(rng, 500, 5);
            let mut dx = shocks.clone();
            for t in 1..dx.rows() {
                for j in 0..5 {
                    dx[(t, j)] += phi * dx[(t - 1, j)];
                }
            }
            let fit = difference_fit(&cumulative_sum(&dx));
            (lm_autocorrelation(&fit, 1).unwrap()[0].pvalue < 0.05) as usize
        })
        .into_iter()
        .sum();
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn large_gaussian_samples_pass_jb() {
        let reps = 200;
        let passes: usize = replicate(reps, 90, Execution::Parallel, |rng, _| {
            let fit = difference_fit(&random_walks(rng, 10_000, 2));
            let rep = normality_tests(&fit).unwrap();
            rep.per_equation.iter().filter(|e| e.jb.stat < 9.21).count()
        })
        .into_iter()
        .sum();
        assert!(passes as f64 >= 0.98 * (2 * reps) as f64, "{passes}/{}", 2 * reps);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn lm_is_scale_invariant(seed in 0u64..1000, scale in 1e-3f64..1e3) {
            let mut rng = replication_rng(seed, 0);
            let levels = random_walks(&mut rng, 120, 3);
            let spec = ModelSpec { k: 2, rank: 1, case: DeterministicCase::RestrictedConstant };
            let a = lm_autocorrelation(&fit_vecm_levels(&levels, spec).unwrap(), 4).unwrap();
            let b = lm_autocorrelation(&fit_vecm_levels(&levels.scale(scale), spec).unwrap(), 4).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.statistic - y.statistic).abs() < 1e-6 * x.statistic.max(1.0));
                prop_assert!((0.0..=1.0).contains(&x.pvalue));
            }
        }

        #[test]
        fn normality_report_is_always_additive(seed in 0u64..1000, n in 1usize..=5) {
            let mut rng = replication_rng(seed, 0);
            let rep = normality_tests(&difference_fit(&random_walks(&mut rng, 80, n))).unwrap();
            prop_assert!(rep.is_additive(1e-9));
        }
    }
}
