use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::data::{
    generate_synthetic, load_csv, split, train_logistic, DatasetSchema, LabeledDataset, Standardizer,
    SyntheticSpec, TrainConfig,
};
use crate::error::{check_dim, Error, Result};
use crate::fairness::FiniteSampleOptions;
use crate::linmodel::LinearModel;
use crate::numerics::{DenseMatrix, SpdMatrix};
use crate::privacy::{calibrate_sigma, NoiseSpec, PrivacyBudget};

/// Where the dataset comes from.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON column-role schema for --data.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Feature columns in model order.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Feature columns to one-hot encode.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[arg(long)]
    pub sensitive: Option<String>,
    #[arg(long)]
    pub label: Option<String>,
    /// Label token mapped to +1.
    #[arg(long)]
    pub positive: Option<String>,
    /// JSON synthetic-population spec.
    #[arg(long, conflicts_with = "data")]
    pub synthetic: Option<PathBuf>,
    /// Size of a built-in two-group synthetic population.
    #[arg(long, conflicts_with_all = ["data", "synthetic"])]
    pub synth_n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub synth_p: usize,
    #[arg(long, default_value_t = 1.0)]
    pub synth_separation: f64,
    /// Proportion of group `a`.
    #[arg(long, default_value_t = 0.5)]
    pub synth_proportion: f64,
    /// Z-score features with training-set statistics.
    #[arg(long)]
    pub standardize: bool,
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("invalid JSON in {}: {e}", path.display())))
}

impl DataArgs {
    fn schema(&self) -> Result<DatasetSchema> {
        if let Some(path) = &self.schema {
            return read_json(path);
        }
        let need = |v: &Option<String>, flag: &str| {
            v.clone()
                .ok_or_else(|| Error::config(format!("--data needs --schema or --{flag}")))
        };
        if self.features.is_empty() {
            return Err(Error::config("--data needs --schema or --features"));
        }
        Ok(DatasetSchema {
            feature_columns: self.features.clone(),
            categorical_columns: self.categorical.clone(),
            sensitive_column: need(&self.sensitive, "sensitive")?,
            label_column: need(&self.label, "label")?,
            positive_label: need(&self.positive, "positive")?,
        })
    }

    pub fn load(&self, seed: u64) -> Result<LabeledDataset> {
        if let Some(path) = &self.data {
            return load_csv(path, &self.schema()?);
        }
        if let Some(path) = &self.synthetic {
            return generate_synthetic(&read_json::<SyntheticSpec>(path)?);
        }
        if let Some(n) = self.synth_n {
            return generate_synthetic(&self.two_group_spec(n, seed));
        }
        Err(Error::config("no data source: give --data, --synthetic or --synth-n"))
    }

    pub fn two_group_spec(&self, n: usize, seed: u64) -> SyntheticSpec {
        let a = self.synth_proportion;
        SyntheticSpec::two_groups(n, self.synth_p, (a, 1.0 - a), self.synth_separation, seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            l2: self.l2,
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            ..TrainConfig::default()
        }
    }
}

/// Load a model, or train one on a split of the data.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model JSON `{"weights": [...]}`; the whole dataset is audited.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Share of rows used for training when no --model is given; the rest
    /// is audited.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub final_loss: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// A model together with the dataset its bounds are evaluated on.
pub struct Prepared {
    pub model: LinearModel,
    pub audit_set: LabeledDataset,
    /// Size of the dataset the model was trained on; sets the default delta.
    pub n_private: usize,
    pub training: Option<TrainSummary>,
}

pub fn prepare(data: &DataArgs, model: &ModelArgs, seed: u64) -> Result<Prepared> {
    let dataset = data.load(seed)?;
    let prepared = if let Some(path) = &model.model {
        let loaded = LinearModel::from_json_file(path)?;
        let audit_set = if data.standardize {
            Standardizer::fit(&dataset).apply(&dataset)?
        } else {
            dataset
        };
        Prepared {
            model: loaded,
            n_private: audit_set.len(),
            audit_set,
            training: None,
        }
    } else {
        let (mut train, mut test) = split(&dataset, model.train_fraction, seed)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::config("train/test split left an empty side; use more rows"));
        }
        if data.standardize {
            let z = Standardizer::fit(&train);
            train = z.apply(&train)?;
            test = z.apply(&test)?;
        }
        let fit = train_logistic(&train, &model.train.config())?;
        Prepared {
            model: fit.model,
            audit_set: test,
            n_private: train.len(),
            training: Some(TrainSummary {
                n_train: train.len(),
                final_loss: *fit.loss_history.last().expect("history has the initial loss"),
                gradient_norm: fit.gradient_norm,
                iterations: fit.iterations_run,
            }),
        }
    };
    check_dim(prepared.audit_set.dim(), prepared.model.dim())?;
    Ok(prepared)
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Privacy parameter(s); several values form a sweep.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub epsilon: Vec<f64>,
    /// Defaults to 1/n^2 with n the training-set size.
    #[arg(long)]
    pub delta: Option<f64>,
    /// L2 sensitivity of the non-private learner.
    #[arg(long)]
    pub sensitivity: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Explicit noise level instead of a privacy budget.
    #[arg(long, conflicts_with = "epsilon")]
    pub sigma: Option<f64>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Noise covariance as JSON: a list of rows, or a list for a diagonal.
    #[arg(long)]
    pub covariance: Option<PathBuf>,
}

pub(crate) fn read_covariance(path: &Path) -> Result<SpdMatrix> {
    let value: serde_json::Value = read_json(path)?;
    let invalid = || Error::config(format!("{}: expected a list of rows or a diagonal list", path.display()));
    let rows = value.as_array().ok_or_else(invalid)?;
    if rows.iter().all(|v| v.is_number()) {
        let diag = rows.iter().map(|v| v.as_f64().ok_or_else(invalid)).collect::<Result<Vec<_>>>()?;
        return SpdMatrix::diagonal(&diag);
    }
    let rows: Vec<Vec<f64>> = serde_json::from_value(value).map_err(|_| invalid())?;
    SpdMatrix::new(DenseMatrix::from_rows(&rows)?)
}

/// One resolved noise setting: either an explicit sigma or a calibrated one.
pub struct NoiseSetting {
    pub noise: NoiseSpec,
    pub budget: Option<PrivacyBudget>,
}

impl NoiseArgs {
    pub fn covariance(&self, dim: usize) -> Result<SpdMatrix> {
        match &self.covariance {
            Some(path) => {
                let c = read_covariance(path)?;
                check_dim(dim, c.dim())?;
                Ok(c)
            }
            None => Ok(SpdMatrix::identity(dim)),
        }
    }

    /// One setting per epsilon, or a single explicit-sigma setting.
    pub fn resolve(&self, dim: usize, n_private: usize) -> Result<Vec<NoiseSetting>> {
        let covariance = self.covariance(dim)?;
        if let Some(sigma) = self.sigma {
            return Ok(vec![NoiseSetting {
                noise: NoiseSpec::new(sigma, covariance)?,
                budget: None,
            }]);
        }
        if self.budget.epsilon.is_empty() {
            return Err(Error::config("give --sigma or --epsilon with --sensitivity"));
        }
        let sensitivity = self
            .budget
            .sensitivity
            .ok_or_else(|| Error::config("--epsilon needs --sensitivity"))?;
        let delta = self
            .budget
            .delta
            .unwrap_or_else(|| 1.0 / (n_private.max(2) as f64).powi(2));
        self.budget
            .epsilon
            .iter()
            .map(|&eps| {
                let budget = PrivacyBudget::new(eps, delta, sensitivity)?;
                let sigma = calibrate_sigma(&budget)?.sigma;
                Ok(NoiseSetting {
                    noise: NoiseSpec::new(sigma, covariance.clone())?,
                    budget: Some(budget),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Args)]
pub struct FiniteSampleArgs {
    /// Attach the finite-sample term to fairness reports.
    #[arg(long)]
    pub finite_sample: bool,
    #[arg(long, default_value_t = 0.05)]
    pub kappa: f64,
    /// Natarajan dimension; defaults to the feature dimension.
    #[arg(long)]
    pub d_h: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub b3: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b4: f64,
}

impl FiniteSampleArgs {
    pub fn options(&self) -> Option<FiniteSampleOptions> {
        self.finite_sample.then_some(FiniteSampleOptions {
            kappa: self.kappa,
            d_h: self.d_h,
            b3: self.b3,
            b4: self.b4,
        })
    }
}
