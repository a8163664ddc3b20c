//! Labeled datasets: ingestion, synthetic generation, splitting and the
//! logistic-regression trainer that produces the non-private model.

mod ingest;
mod synthetic;
mod train;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use ingest::{load_csv, write_csv, DatasetSchema};
pub use synthetic::{generate_synthetic, SyntheticGroup, SyntheticSpec};
pub use train::{loss_and_gradient, train_logistic, TrainConfig, TrainResult};

use crate::error::{check_dim, Error, Result};
use crate::linmodel::{Example, Label};
use crate::rng;

pub const BIAS_FEATURE: &str = "bias";

// Stream index reserved for shuffling, disjoint from per-model streams.
const SPLIT_STREAM: u64 = u64::MAX;

/// Rows `(x, s, y)` sharing one feature layout; the last feature is the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    feature_names: Vec<String>,
    examples: Vec<Example>,
}

/// Provenance summary written next to audit reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p: usize,
    pub group_counts: BTreeMap<String, usize>,
    pub positive: usize,
    pub negative: usize,
}

impl LabeledDataset {
    pub fn new(feature_names: Vec<String>, examples: Vec<Example>) -> Result<Self> {
        if feature_names.last().map(String::as_str) != Some(BIAS_FEATURE) {
            return Err(Error::domain("the last feature must be the bias column"));
        }
        for ex in &examples {
            check_dim(feature_names.len(), ex.dim())?;
        }
        Ok(Self {
            feature_names,
            examples,
        })
    }

    /// Builds a dataset from rows without bias; the bias column is appended.
    pub fn from_raw(rows: Vec<(Vec<f64>, String, Label)>) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.0.len());
        let mut names: Vec<String> = (0..p).map(|i| format!("x{i}")).collect();
        names.push(BIAS_FEATURE.to_string());
        let examples = rows
            .into_iter()
            .map(|(mut x, s, y)| {
                x.push(1.0);
                Example::new(x, s, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names, examples)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Feature dimension, bias included.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Distinct sensitive values in sorted order.
    pub fn sensitive_values(&self) -> Vec<String> {
        let mut values: Vec<String> = self.examples.iter().map(|e| e.sensitive().to_string()).collect();
        values.sort();
        values.dedup();
        values
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut group_counts = BTreeMap::new();
        let mut positive = 0;
        for ex in &self.examples {
            *group_counts.entry(ex.sensitive().to_string()).or_insert(0) += 1;
            if ex.label() == Label::Positive {
                positive += 1;
            }
        }
        DatasetSummary {
            n: self.len(),
            p: self.dim(),
            group_counts,
            positive,
            negative: self.len() - positive,
        }
    }
}

/// Shuffled train/test partition of row indices.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::child(seed, SPLIT_STREAM));
    let n_train = (train_fraction * n as f64).round() as usize;
    let test = idx.split_off(n_train.min(n));
    Ok((idx, test))
}

pub fn split(dataset: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(dataset.len(), train_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Train-set z-scoring of every non-bias feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(dataset: &LabeledDataset) -> Self {
        let p = dataset.dim() - 1;
        let n = dataset.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        for ex in dataset.examples() {
            for (m, x) in mean.iter_mut().zip(ex.features()) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; p];
        for ex in dataset.examples() {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(ex.features()) {
                *v += (x - m) * (x - m) / n;
            }
        }
        // Constant columns are centered but not rescaled.
        let scale = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, dataset: &LabeledDataset) -> Result<LabeledDataset> {
        check_dim(self.mean.len() + 1, dataset.dim())?;
        let examples = dataset
            .examples()
            .iter()
            .map(|ex| {
                let mut x: Vec<f64> = ex
                    .features()
                    .iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect();
                x.push(1.0);
                Example::new(x, ex.sensitive(), ex.label())
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(dataset.feature_names().to_vec(), examples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> LabeledDataset {
        LabeledDataset::from_raw(
            (0..n)
                .map(|i| (vec![i as f64], if i % 2 == 0 { "a" } else { "b" }.to_string(), Label::Positive))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_examples() {
        let d = toy(10);
        let (train, test) = split(&d, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let again = split_indices(10, 0.8, 3).unwrap();
        assert_eq!(again, split_indices(10, 0.8, 3).unwrap());
        let mut all: Vec<usize> = again.0.iter().chain(&again.1).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
    }

    #[test]
    fn summary_counts() {
        let s = toy(5).summary();
        assert_eq!(s.n, 5);
        assert_eq!(s.p, 2);
        assert_eq!(s.group_counts["a"], 3);
        assert_eq!(s.positive, 5);
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let d = toy(4);
        let z = Standardizer::fit(&d).apply(&d).unwrap();
        let col: Vec<f64> = z.examples().iter().map(|e| e.features()[0]).collect();
        let mean: f64 = col.iter().sum::<f64>() / 4.0;
        let var: f64 = col.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12);
        assert!(z.examples().iter().all(|e| e.features()[1] == 1.0));
    }
}
