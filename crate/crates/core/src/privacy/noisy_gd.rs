use serde::{Deserialize, Serialize};

use super::GaussianLaw;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{DenseMatrix, SpdMatrix};
use crate::rng::{standard_normals, Stream};

/// Stationary law of noisy gradient descent on a quadratic loss in the
/// continuous-time limit: `N(theta*, sigma^2 eta H^{-1} / 2)`.
pub fn noisy_gd_stationary(
    theta_star: &[f64],
    hessian: &SpdMatrix,
    eta: f64,
    sigma: f64,
) -> Result<GaussianLaw> {
    check_dim(hessian.dim(), theta_star.len())?;
    check_step(eta, sigma)?;
    Ok(GaussianLaw {
        mean: theta_star.to_vec(),
        covariance: hessian.inverse().scaled(0.5 * sigma * sigma * eta),
    })
}

/// Exact stationary covariance of the discrete iteration,
/// `eta sigma^2 (2H - eta H^2)^{-1}`.
///
/// It differs from the continuous-time covariance by a factor
/// `(I - eta H / 2)^{-1}`, which matters unless `eta lambda_max` is small.
pub fn discrete_stationary_covariance(hessian: &SpdMatrix, eta: f64, sigma: f64) -> Result<DenseMatrix> {
    check_step(eta, sigma)?;
    check_stability(hessian, eta)?;
    let h = hessian.matrix();
    let m = h.scaled(2.0).sub(&h.matmul(h)?.scaled(eta))?;
    Ok(SpdMatrix::new(m.symmetrized())?.inverse().scaled(eta * sigma * sigma))
}

/// Max-abs residual of `Theta H + H Theta - eta sigma^2 I`.
pub fn lyapunov_residual(covariance: &DenseMatrix, hessian: &SpdMatrix, eta: f64, sigma: f64) -> Result<f64> {
    let h = hessian.matrix();
    let lhs = covariance.matmul(h)?.add(&h.matmul(covariance)?)?;
    let rhs = DenseMatrix::identity(hessian.dim()).scaled(eta * sigma * sigma);
    Ok(lhs.sub(&rhs)?.max_abs())
}

/// Inputs for [`noisy_gd_simulate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoisyGdConfig {
    pub theta0: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub hessian: SpdMatrix,
    pub eta: f64,
    pub sigma: f64,
    pub steps: usize,
    pub burn_in: usize,
}

/// Moments of the iterates after burn-in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub mean: Vec<f64>,
    pub covariance: DenseMatrix,
    pub samples: usize,
}

/// Runs `theta <- theta - eta (H (theta - theta*) + sigma xi)` and returns
/// the sample mean and covariance of the iterates after `burn_in`.
pub fn noisy_gd_simulate(config: &NoisyGdConfig, rng: &mut Stream) -> Result<TrajectoryStats> {
    let p = config.hessian.dim();
    check_dim(p, config.theta0.len())?;
    check_dim(p, config.theta_star.len())?;
    check_step(config.eta, config.sigma)?;
    check_stability(&config.hessian, config.eta)?;
    if config.steps <= config.burn_in {
        return Err(Error::config(format!(
            "steps ({}) must exceed burn-in ({})",
            config.steps, config.burn_in
        )));
    }

    let h = config.hessian.matrix();
    let mut theta = config.theta0.clone();
    let mut count = 0usize;
    let mut mean = vec![0.0; p];
    let mut comoment = DenseMatrix::zeros(p, p);
    let mut delta = vec![0.0; p];
    for t in 1..=config.steps {
        let centered: Vec<f64> = theta.iter().zip(&config.theta_star).map(|(a, b)| a - b).collect();
        let grad = h.mul_vec(&centered)?;
        let xi = if config.sigma > 0.0 {
            standard_normals(rng, p)
        } else {
            vec![0.0; p]
        };
        for i in 0..p {
            theta[i] -= config.eta * (grad[i] + config.sigma * xi[i]);
        }
        if t <= config.burn_in {
            continue;
        }
        // Welford update of mean and co-moment.
        count += 1;
        for ((d, m), t) in delta.iter_mut().zip(mean.iter_mut()).zip(&theta) {
            *d = t - *m;
            *m += *d / count as f64;
        }
        for (i, d) in delta.iter().enumerate() {
            for j in 0..p {
                let v = comoment.get(i, j) + d * (theta[j] - mean[j]);
                comoment.set(i, j, v);
            }
        }
    }
    let denom = if count > 1 { (count - 1) as f64 } else { 1.0 };
    Ok(TrajectoryStats {
        mean,
        covariance: comoment.scaled(1.0 / denom).symmetrized(),
        samples: count,
    })
}

fn check_step(eta: f64, sigma: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!("learning rate must be finite and > 0, got {eta}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

fn check_stability(hessian: &SpdMatrix, eta: f64) -> Result<()> {
    let product = eta * hessian.eigen_range().lambda_max;
    if product >= 2.0 {
        return Err(Error::config(format!(
            "unstable step: eta * lambda_max(H) = {product} must be < 2"
        )));
    }
    Ok(())
}
