use serde::{Deserialize, Serialize};

use super::NoiseSpec;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{DenseMatrix, SpdMatrix};

/// Multivariate normal law. A zero covariance encodes a point mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw {
    pub mean: Vec<f64>,
    pub covariance: DenseMatrix,
}

impl GaussianLaw {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Re-expresses this law as the perturbation `mean + sigma * xi`,
    /// `xi ~ N(0, covariance / sigma^2)`. A zero covariance gives `sigma = 0`.
    pub fn as_noise(&self, sigma: f64) -> Result<NoiseSpec> {
        let p = self.dim();
        if self.covariance.max_abs() == 0.0 || sigma == 0.0 {
            return NoiseSpec::isotropic(0.0, p);
        }
        NoiseSpec::new(sigma, SpdMatrix::new(self.covariance.scaled(1.0 / (sigma * sigma)))?)
    }
}

/// Prior variance scale `eta^2`, or the flat (uniform) limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScale {
    Uniform,
    Variance(f64),
}

/// Prior `N(mu, eta^2 A)` on the non-private weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    scale: PriorScale,
    shape: SpdMatrix,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, scale: PriorScale, shape: SpdMatrix) -> Result<Self> {
        check_dim(shape.dim(), mean.len())?;
        if let PriorScale::Variance(eta2) = scale {
            if !(eta2 > 0.0) || !eta2.is_finite() {
                return Err(Error::domain(format!("prior variance must be finite and > 0, got {eta2}")));
            }
        }
        Ok(Self { mean, scale, shape })
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: PriorScale::Uniform,
            shape: SpdMatrix::identity(dim),
        }
    }

    /// `N(mu, eta^2 I)`.
    pub fn isotropic(mean: Vec<f64>, eta2: f64) -> Result<Self> {
        let p = mean.len();
        Self::new(mean, PriorScale::Variance(eta2), SpdMatrix::identity(p))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> PriorScale {
        self.scale
    }

    pub fn shape(&self) -> &SpdMatrix {
        &self.shape
    }
}

/// Posterior of the non-private weights given a released private model.
///
/// With prior `N(mu, eta^2 A)` and noise `sigma^2 Sigma`, writing
/// `K = A [A + (sigma^2/eta^2) Sigma]^{-1}`:
/// mean `mu + K (theta_priv - mu)`, covariance `K sigma^2 Sigma`.
/// The uniform prior gives `N(theta_priv, sigma^2 Sigma)`.
pub fn auditing_posterior(
    theta_priv: &[f64],
    noise: &NoiseSpec,
    prior: &GaussianPrior,
) -> Result<GaussianLaw> {
    let p = noise.dim();
    check_dim(p, theta_priv.len())?;
    check_dim(p, prior.mean.len())?;
    let sigma2 = noise.sigma() * noise.sigma();
    let noise_cov = noise.covariance().matrix().scaled(sigma2);

    let eta2 = match prior.scale {
        PriorScale::Uniform => {
            return Ok(GaussianLaw {
                mean: theta_priv.to_vec(),
                covariance: noise_cov,
            })
        }
        PriorScale::Variance(eta2) => eta2,
    };

    let a = prior.shape.matrix();
    let combined = SpdMatrix::new(a.add(&noise.covariance().matrix().scaled(sigma2 / eta2))?)?;
    let gain = a.matmul(&combined.inverse())?;
    let centered: Vec<f64> = theta_priv.iter().zip(&prior.mean).map(|(t, m)| t - m).collect();
    let shift = gain.mul_vec(&centered)?;
    let mean = prior.mean.iter().zip(&shift).map(|(m, s)| m + s).collect();
    let covariance = gain.matmul(&noise_cov)?.symmetrized();
    Ok(GaussianLaw { mean, covariance })
}
