//! Seeded Monte Carlo scenarios for rank recovery, unit-root size and
//! power, diagnostics calibration and forecast-representation agreement.
//! Every scenario runs under either execution mode and returns identical
//! results for the same seed.

use rand::Rng;

use crate::diagnostics::{lm_autocorrelation, normality_tests};
use crate::johansen::{johansen_levels, DeterministicCase};
use crate::numerics::Matrix;
use crate::parallel::{replicate, Execution};
use crate::simulate::{cumulative_sum, gaussian_noise, random_walks, var_process};
use crate::unit_root::{adf_test, AdfDeterministic};
use crate::vecm::{fit_vecm_levels, forecast, forecast_level_var, ModelSpec};

const LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankScenario {
    /// Two I(1) series sharing one stochastic trend with drift.
    CointegratedPair,
    /// Two independent driftless random walks.
    IndependentWalks,
    /// Stationary bivariate VAR(1).
    StationaryVar,
}

impl RankScenario {
    pub const ALL: [RankScenario; 3] = [Self::CointegratedPair, Self::IndependentWalks, Self::StationaryVar];

    pub fn true_rank(self) -> usize {
        match self {
            Self::CointegratedPair => 1,
            Self::IndependentWalks => 0,
            Self::StationaryVar => 2,
        }
    }

    pub fn simulate<R: Rng + ?Sized>(self, rng: &mut R, t: usize) -> Matrix {
        match self {
            Self::CointegratedPair => {
                let mut m = cumulative_sum(&gaussian_noise(rng, t, 1).add(&Matrix::from_rows(&vec![[0.5]; t])));
                let e = gaussian_noise(rng, t, 1);
                m = m.hstack(&Matrix::zeros(t, 1));
                for i in 0..t {
                    m[(i, 1)] = m[(i, 0)] + e[(i, 0)];
                }
                m
            }
            Self::IndependentWalks => random_walks(rng, t, 2),
            Self::StationaryVar => {
                let a = Matrix::from_rows(&[[0.5, 0.0], [0.1, 0.3]]);
                var_process(rng, &[a], &[0.0, 0.0], t, 100)
            }
        }
    }
}

/// Share of replications whose selected Johansen rank equals the true rank
/// (unrestricted constant, k = 2).
pub fn rank_recovery(scenario: RankScenario, reps: usize, t: usize, seed: u64, exec: Execution) -> f64 {
    let hits: usize = replicate(reps, seed, exec, |rng, _| {
        let levels = scenario.simulate(rng, t);
        let res = johansen_levels(&levels, 2, DeterministicCase::UnrestrictedConstant).expect("johansen on simulated data");
        (res.selected_rank == Some(scenario.true_rank())) as usize
    })
    .into_iter()
    .sum();
    hits as f64 / reps as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfRates {
    /// Share of random walks where the unit root is not rejected.
    pub random_walk_acceptance: f64,
    /// Share of white-noise series where the unit root is rejected.
    pub white_noise_rejection: f64,
}

pub fn adf_size_power(reps: usize, t: usize, seed: u64, exec: Execution) -> AdfRates {
    let run = |seed: u64, walk: bool| -> usize {
        replicate(reps, seed, exec, |rng, _| {
            let y = if walk { random_walks(rng, t, 1) } else { gaussian_noise(rng, t, 1) }.column(0);
            adf_test(&y, 1, AdfDeterministic::Constant).expect("adf on simulated data").reject_at_5pct as usize
        })
        .into_iter()
        .sum()
    };
    let rw = run(seed, true);
    let wn = run(seed.wrapping_add(1), false);
    AdfRates {
        random_walk_acceptance: (reps - rw) as f64 / reps as f64,
        white_noise_rejection: wn as f64 / reps as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRates {
    pub lm_rejection: f64,
    pub jb_rejection: f64,
}

/// Rejection rates at 5% of the lag-1 LM test and the joint JB test on
/// residuals of an `r = 0, k = 1` fit to Gaussian random walks, whose
/// residuals are demeaned white noise.
pub fn diagnostics_calibration(reps: usize, t: usize, n: usize, seed: u64, exec: Execution) -> DiagnosticRates {
    let spec = ModelSpec { k: 1, rank: 0, case: DeterministicCase::UnrestrictedConstant };
    let outcomes = replicate(reps, seed, exec, |rng, _| {
        let fit = fit_vecm_levels(&random_walks(rng, t, n), spec).expect("fit on simulated data");
        let lm = lm_autocorrelation(&fit, 1).expect("lm test")[0].pvalue < LEVEL;
        let jb = normality_tests(&fit).expect("normality test").joint.jb.p < LEVEL;
        (lm as usize, jb as usize)
    });
    let (lm, jb) = outcomes.into_iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
    DiagnosticRates { lm_rejection: lm as f64 / reps as f64, jb_rejection: jb as f64 / reps as f64 }
}

/// Largest relative gap between the error-correction and level-VAR
/// forecasts over `reps` randomly specified fits (n ≤ 5, k ≤ 4, r ≤ n,
/// random deterministic case).
pub fn dual_forecast_gap(reps: usize, horizon: usize, seed: u64, exec: Execution) -> f64 {
    replicate(reps, seed, exec, |rng, _| {
        let n = rng.random_range(1..=5);
        let k = rng.random_range(1..=4);
        let rank = rng.random_range(0..=n);
        let case = DeterministicCase::ALL[rng.random_range(0..DeterministicCase::ALL.len())];
        let t = 40 + 10 * n * k;
        let levels = random_walks(rng, t, n).add(&gaussian_noise(rng, t, n).scale(0.2));
        let fit = fit_vecm_levels(&levels, ModelSpec { k, rank, case }).expect("fit on simulated data");
        let last = levels.row_range(t - k, t);
        let a = forecast(&fit, &last, horizon).expect("forecast").values;
        let b = forecast_level_var(&fit, &last, horizon).expect("forecast");
        let mut worst: f64 = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
        }
        worst
    })
    .into_iter()
    .fold(0.0, f64::max)
}
