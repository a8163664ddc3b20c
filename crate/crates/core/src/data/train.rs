use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::linmodel::LinearModel;
use crate::numerics::{dot, norm2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Ridge coefficient, applied to every weight including the bias.
    pub l2: f64,
    /// Initial step of each backtracking line search.
    pub learning_rate: f64,
    pub iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 1.0,
            iterations: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainResult {
    pub model: LinearModel,
    pub loss_history: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations_run: usize,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `l2/2 ||theta||^2`, and its gradient.
pub fn loss_and_gradient(dataset: &LabeledDataset, theta: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
    check_dim(dataset.dim(), theta.len())?;
    if dataset.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    let n = dataset.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for ex in dataset.examples() {
        let y = ex.label().sign();
        let m = y * dot(theta, ex.features());
        loss += softplus(-m);
        let w = -y * sigmoid(-m) / n;
        for (g, x) in grad.iter_mut().zip(ex.features()) {
            *g += w * x;
        }
    }
    loss /= n;
    loss += 0.5 * l2 * dot(theta, theta);
    for (g, t) in grad.iter_mut().zip(theta) {
        *g += l2 * t;
    }
    Ok((loss, grad))
}

/// Full-batch gradient descent with step halving; the recorded loss never
/// increases.
pub fn train_logistic(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainResult> {
    if !(config.l2 >= 0.0) || !config.l2.is_finite() {
        return Err(Error::domain(format!("l2 must be finite and >= 0, got {}", config.l2)));
    }
    if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
        return Err(Error::domain("learning rate must be finite and > 0"));
    }
    let mut theta = vec![0.0; dataset.dim()];
    let (mut loss, mut grad) = loss_and_gradient(dataset, &theta, config.l2)?;
    let mut history = vec![loss];
    let mut iterations_run = 0;
    for _ in 0..config.iterations {
        if norm2(&grad) <= config.tolerance {
            break;
        }
        let mut step = config.learning_rate;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (l, g) = loss_and_gradient(dataset, &candidate, config.l2)?;
            if !l.is_finite() {
                return Err(Error::Divergence(format!("loss became {l} at step size {step}")));
            }
            if l <= loss {
                accepted = Some((candidate, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, l, g)) = accepted else {
            break;
        };
        theta = candidate;
        loss = l;
        grad = g;
        history.push(loss);
        iterations_run += 1;
    }
    Ok(TrainResult {
        model: LinearModel::new(theta)?,
        loss_history: history,
        gradient_norm: norm2(&grad),
        iterations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::linmodel::predict_label;

    fn data(separation: f64) -> LabeledDataset {
        generate_synthetic(&SyntheticSpec::two_groups(400, 2, (0.5, 0.5), separation, 5)).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = data(1.0);
        let theta = [0.3, -0.7, 0.2];
        let (_, g) = loss_and_gradient(&d, &theta, 0.1).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut up = theta;
            let mut dn = theta;
            up[i] += h;
            dn[i] -= h;
            let fd = (loss_and_gradient(&d, &up, 0.1).unwrap().0 - loss_and_gradient(&d, &dn, 0.1).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn loss_is_monotone() {
        let r = train_logistic(&data(1.0), &TrainConfig::default()).unwrap();
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn strong_ridge_shrinks_to_zero() {
        let cfg = TrainConfig {
            l2: 1e6,
            ..TrainConfig::default()
        };
        let r = train_logistic(&data(1.0), &cfg).unwrap();
        assert!(r.model.norm() < 1e-5, "{}", r.model.norm());
    }

    #[test]
    fn separable_data_is_fit() {
        let d = data(5.0);
        let r = train_logistic(&d, &TrainConfig::default()).unwrap();
        let correct = d
            .examples()
            .iter()
            .filter(|e| predict_label(&r.model, e.features()).unwrap() == e.label())
            .count();
        assert!(correct as f64 / d.len() as f64 >= 0.97);
    }
}
