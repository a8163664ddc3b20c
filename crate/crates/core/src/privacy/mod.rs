//! Gaussian output perturbation: budget calibration, sampling of private
//! models, Bayesian auditing posterior and the noisy-GD stationary law.

mod calibration;
mod noisy_gd;
mod posterior;

use serde::{Deserialize, Serialize};

pub use calibration::{calibrate_sigma, privacy_condition, Calibration};
pub use noisy_gd::{
    discrete_stationary_covariance, lyapunov_residual, noisy_gd_simulate, noisy_gd_stationary,
    NoisyGdConfig, TrajectoryStats,
};
pub use posterior::{auditing_posterior, GaussianLaw, GaussianPrior, PriorScale};

use crate::error::{check_dim, Error, Result};
use crate::linmodel::LinearModel;
use crate::numerics::SpdMatrix;
use crate::rng::{standard_normals, Stream};

/// An `(epsilon, delta)` target together with the L2 sensitivity of the
/// non-private learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
    sensitivity: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::domain(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(sensitivity > 0.0) || !sensitivity.is_finite() {
            return Err(Error::domain(format!(
                "sensitivity must be finite and > 0, got {sensitivity}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            sensitivity,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }
}

/// Perturbation `theta + sigma * xi` with `xi ~ N(0, Sigma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    sigma: f64,
    covariance: SpdMatrix,
}

impl NoiseSpec {
    pub fn new(sigma: f64, covariance: SpdMatrix) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma, covariance })
    }

    pub fn isotropic(sigma: f64, dim: usize) -> Result<Self> {
        Self::new(sigma, SpdMatrix::identity(dim))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(sigma, self.covariance.clone())
    }

    /// Short human-readable description of the covariance.
    pub fn covariance_descriptor(&self) -> String {
        let p = self.dim();
        if self.covariance.is_identity() {
            format!("identity({p})")
        } else {
            let m = self.covariance.matrix();
            let diagonal = (0..p).all(|i| (0..p).all(|j| i == j || m.get(i, j) == 0.0));
            if diagonal {
                format!("diagonal({p})")
            } else {
                format!("full({p})")
            }
        }
    }
}

/// Draws one private model `theta + sigma * L z` from `rng`, where
/// `L L^T = Sigma` and `z` is standard normal.
pub fn perturb(model: &LinearModel, noise: &NoiseSpec, rng: &mut Stream) -> Result<LinearModel> {
    check_dim(noise.dim(), model.dim())?;
    if noise.sigma == 0.0 {
        return Ok(model.clone());
    }
    let z = standard_normals(rng, model.dim());
    let xi = noise.covariance.factor_mul(&z)?;
    let weights = model
        .weights()
        .iter()
        .zip(&xi)
        .map(|(w, e)| w + noise.sigma * e)
        .collect();
    LinearModel::new(weights)
}
