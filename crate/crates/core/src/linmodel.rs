//! Linear classifiers, their prediction rule and their margins.
//!
//! The bias is folded into the last weight; every feature vector carries a
//! constant 1 in its last coordinate.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, norm2, SpdMatrix};

/// Binary label, serialized as `+1` / `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(value: i8) -> Result<Self> {
        match value {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::domain(format!("label must be +1 or -1, got {other}"))),
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        if value == 1.0 {
            Ok(Label::Positive)
        } else if value == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::domain(format!("label must be +1 or -1, got {value}")))
        }
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        match label {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "+1",
            Label::Negative => "-1",
        })
    }
}

/// Weight vector of a linear scorer `h(x) = theta^T x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LinearModel {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    weights: Vec<f64>,
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        LinearModel::new(file.weights)
    }
}

impl From<LinearModel> for ModelFile {
    fn from(model: LinearModel) -> Self {
        ModelFile {
            weights: model.weights,
        }
    }
}

impl LinearModel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("a linear model needs at least one weight"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::domain(format!("weight {i} is not finite")));
        }
        Ok(Self { weights })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn negated(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| -w).collect(),
        }
    }

    /// `theta^T x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(dot(&self.weights, x))
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.weights)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// One labeled row `(x, s, y)`. The last feature is the constant bias 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    features: Vec<f64>,
    sensitive: String,
    label: Label,
}

impl Example {
    pub fn new(features: Vec<f64>, sensitive: impl Into<String>, label: Label) -> Result<Self> {
        match features.last() {
            None => return Err(Error::domain("an example needs at least the bias feature")),
            Some(&b) if b != 1.0 => {
                return Err(Error::domain(format!("last feature must be the bias 1, got {b}")))
            }
            _ => {}
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("feature {i} is not finite")));
        }
        Ok(Self {
            features,
            sensitive: sensitive.into(),
            label,
        })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sensitive(&self) -> &str {
        &self.sensitive
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// `+1` when the score is nonnegative, `-1` otherwise.
#[inline]
pub fn label_of_score(score: f64) -> Label {
    if score >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn predict_label(model: &LinearModel, x: &[f64]) -> Result<Label> {
    Ok(label_of_score(model.score(x)?))
}

/// `y * theta^T x`.
pub fn signed_margin(model: &LinearModel, x: &[f64], y: Label) -> Result<f64> {
    Ok(y.sign() * model.score(x)?)
}

/// `y * theta^T x / sqrt(x^T Sigma x)`.
pub fn angular_margin(model: &LinearModel, x: &[f64], y: Label, sigma: &SpdMatrix) -> Result<f64> {
    let rho = signed_margin(model, x, y)?;
    let q = sigma.quadratic_form(x)?;
    if !(q > 0.0) {
        return Err(Error::DegenerateExample(q));
    }
    Ok(rho / q.sqrt())
}

/// Lipschitz constant of the scores, `|theta|_2`.
///
/// This equals the smallest individual-fairness constant when the feature
/// space is open and upper-bounds it otherwise.
pub fn individual_fairness_constant(model: &LinearModel) -> f64 {
    model.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: &[f64]) -> LinearModel {
        LinearModel::new(w.to_vec()).unwrap()
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(predict_label(&model(&[1.0, 0.0]), &[1.0, 1.0]).unwrap(), Label::Positive);
        assert_eq!(predict_label(&model(&[0.0, 0.0]), &[3.0, 1.0]).unwrap(), Label::Positive);
        assert_eq!(predict_label(&model(&[-2.0, 1.0]), &[1.0, 1.0]).unwrap(), Label::Negative);
        assert!(matches!(
            predict_label(&model(&[1.0]), &[1.0, 1.0]),
            Err(Error::Shape { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn signed_margin_examples() {
        let m = model(&[1.0, 1.0]);
        assert_eq!(signed_margin(&m, &[2.0, 1.0], Label::Positive).unwrap(), 3.0);
        assert_eq!(signed_margin(&m, &[2.0, 1.0], Label::Negative).unwrap(), -3.0);
        assert_eq!(signed_margin(&model(&[0.0, 0.0]), &[2.0, 1.0], Label::Negative).unwrap(), 0.0);
        assert!(Label::try_from(0i8).is_err());
        assert!(Label::try_from(0.5f64).is_err());
    }

    #[test]
    fn angular_margin_examples() {
        let i2 = SpdMatrix::identity(2);
        let m = model(&[3.0, 4.0]);
        assert_eq!(angular_margin(&m, &[1.0, 0.0], Label::Positive, &i2).unwrap(), 3.0);
        assert_eq!(angular_margin(&m, &[0.0, 2.0], Label::Negative, &i2).unwrap(), -4.0);
        let four = SpdMatrix::diagonal(&[4.0, 4.0]).unwrap();
        let a = angular_margin(&model(&[1.0, 1.0]), &[1.0, 1.0], Label::Positive, &four).unwrap();
        assert!((a - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!(matches!(
            angular_margin(&m, &[0.0, 0.0], Label::Positive, &i2),
            Err(Error::DegenerateExample(_))
        ));
    }

    #[test]
    fn individual_fairness_constant_examples() {
        assert_eq!(individual_fairness_constant(&model(&[3.0, 4.0])), 5.0);
        assert_eq!(individual_fairness_constant(&LinearModel::zeros(3)), 0.0);
        assert_eq!(individual_fairness_constant(&model(&[1.0; 4])), 2.0);
    }

    #[test]
    fn model_json_format() {
        let m = model(&[0.5, -1.0]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"weights":[0.5,-1.0]}"#);
        let back: LinearModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<LinearModel>(r#"{"weights":[]}"#).is_err());
    }

    #[test]
    fn example_enforces_bias() {
        assert!(Example::new(vec![2.0, 1.0], "a", Label::Positive).is_ok());
        assert!(Example::new(vec![2.0, 0.0], "a", Label::Positive).is_err());
        assert!(Example::new(vec![], "a", Label::Positive).is_err());
        assert!(Example::new(vec![f64::INFINITY, 1.0], "a", Label::Positive).is_err());
    }

    #[test]
    fn rejects_non_finite_weights() {
        assert!(LinearModel::new(vec![1.0, f64::NAN]).is_err());
        assert!(LinearModel::new(vec![]).is_err());
    }
}
