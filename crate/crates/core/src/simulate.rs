//! Seeded data-generating processes used by Monte Carlo checks and
//! synthetic fixtures.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::Matrix;

/// T x n matrix of independent standard normal draws.
pub fn gaussian_noise<R: Rng + ?Sized>(rng: &mut R, t: usize, n: usize) -> Matrix {
    let data: Vec<f64> = (0..t * n).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(t, n, data).expect("normal draws are finite")
}

/// Independent Gaussian random walks starting at zero.
pub fn random_walks<R: Rng + ?Sized>(rng: &mut R, t: usize, n: usize) -> Matrix {
    cumulative_sum(&gaussian_noise(rng, t, n))
}

pub fn cumulative_sum(increments: &Matrix) -> Matrix {
    let mut out = increments.clone();
    for i in 1..out.rows() {
        for j in 0..out.cols() {
            out[(i, j)] += out[(i - 1, j)];
        }
    }
    out
}

/// Level VAR `x_t = c + Σ A_i x_{t-i} + ε_t` with N(0, I) shocks. The first
/// `burn_in` draws are discarded.
pub fn var_process<R: Rng + ?Sized>(
    rng: &mut R,
    lags: &[Matrix],
    intercept: &[f64],
    t: usize,
    burn_in: usize,
) -> Matrix {
    let n = intercept.len();
    let p = lags.len();
    let total = t + burn_in + p;
    let shocks = gaussian_noise(rng, total, n);
    let mut x = Matrix::zeros(total, n);
    for s in p..total {
        let mut row = intercept.to_vec();
        for (i, a) in lags.iter().enumerate() {
            let lagged = a.mul_vec(x.row(s - i - 1));
            for (r, v) in row.iter_mut().zip(lagged) {
                *r += v;
            }
        }
        for (j, r) in row.iter().enumerate() {
            x[(s, j)] = r + shocks[(s, j)];
        }
    }
    x.row_range(total - t, total)
}

/// Error-correction process
/// `Δx_t = α β' x_{t-1} + Σ Γ_i Δx_{t-i} + μ + ε_t`, started at zero.
pub fn vecm_process<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: &Matrix,
    beta: &Matrix,
    gammas: &[Matrix],
    mu: &[f64],
    t: usize,
    burn_in: usize,
) -> Matrix {
    let n = mu.len();
    let pi = alpha.matmul(&beta.transpose());
    let k = gammas.len() + 1;
    let total = t + burn_in + k;
    let shocks = gaussian_noise(rng, total, n);
    let mut x = Matrix::zeros(total, n);
    let mut dx = Matrix::zeros(total, n);
    for s in k..total {
        let mut d = mu.to_vec();
        let ec = pi.mul_vec(x.row(s - 1));
        for (a, b) in d.iter_mut().zip(ec) {
            *a += b;
        }
        for (i, g) in gammas.iter().enumerate() {
            let sr = g.mul_vec(dx.row(s - i - 1));
            for (a, b) in d.iter_mut().zip(sr) {
                *a += b;
            }
        }
        for j in 0..n {
            dx[(s, j)] = d[j] + shocks[(s, j)];
            x[(s, j)] = x[(s - 1, j)] + dx[(s, j)];
        }
    }
    x.row_range(total - t, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::replication_rng;

    #[test]
    fn random_walk_differences_are_the_noise() {
        let mut a = replication_rng(3, 0);
        let mut b = replication_rng(3, 0);
        let walk = random_walks(&mut a, 50, 2);
        let noise = gaussian_noise(&mut b, 50, 2);
        for i in 1..50 {
            for j in 0..2 {
                assert!((walk[(i, j)] - walk[(i - 1, j)] - noise[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vecm_without_adjustment_is_a_random_walk() {
        let mut rng = replication_rng(9, 0);
        let x = vecm_process(&mut rng, &Matrix::zeros(2, 0), &Matrix::zeros(2, 0), &[], &[0.0, 0.0], 100, 0);
        assert_eq!(x.rows(), 100);
    }
}
