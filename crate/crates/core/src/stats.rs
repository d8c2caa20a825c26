//! Small descriptive-statistics and distribution helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail probability `P(χ²_dof > stat)`.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    // statrs evaluates the regularized upper incomplete gamma directly, so
    // tiny tail probabilities do not cancel to zero.
    let dist = ChiSquared::new(dof).expect("chi-square dof must be positive");
    dist.sf(stat).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `N - 1` divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi2_two_dof_is_exponential() {
        for x in [0.1, 1.0, 3.987, 10.0, 40.0] {
            assert_abs_diff_eq!(chi2_sf(x, 2.0), (-x / 2.0f64).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn chi2_one_dof_matches_normal_tail() {
        // P(χ²₁ > 3.841459) = 0.05
        assert_abs_diff_eq!(chi2_sf(3.841458820694124, 1.0), 0.05, epsilon = 1e-10);
        // 99% point of χ²₂ is 9.21034
        assert_abs_diff_eq!(chi2_sf(9.210340371976184, 2.0), 0.01, epsilon = 1e-10);
    }

    #[test]
    fn reference_normality_p_values() {
        // JB 3.987 on 2 dof and kurtosis 3.192 on 1 dof, printed to 3 decimals.
        assert_abs_diff_eq!(chi2_sf(3.987, 2.0), 0.136, epsilon = 5e-4);
        assert_abs_diff_eq!(chi2_sf(3.192, 1.0), 0.074, epsilon = 5e-4);
        assert_abs_diff_eq!(chi2_sf(18.34, 10.0), 0.049, epsilon = 5e-4);
    }

    #[test]
    fn sd_of_constant_is_zero() {
        assert_eq!(sample_sd(&[5.0, 5.0, 5.0]), 0.0);
        assert_abs_diff_eq!(sample_sd(&[1.0, 2.0, 3.0, 4.0]), (5.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    }
}
