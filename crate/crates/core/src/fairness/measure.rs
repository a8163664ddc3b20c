use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linmodel::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    AccuracyParity,
    DemographicParity,
    EqualOpportunity,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [
        MeasureKind::AccuracyParity,
        MeasureKind::DemographicParity,
        MeasureKind::EqualOpportunity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::AccuracyParity => "accuracy_parity",
            MeasureKind::DemographicParity => "demographic_parity",
            MeasureKind::EqualOpportunity => "equal_opportunity",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown fairness measure {s:?}")))
    }
}

/// One cell `D_k` of the partition: its key, member rows and proportion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    pub sensitive: String,
    /// `None` when the partition ignores the label.
    pub label: Option<Label>,
    pub indices: Vec<usize>,
    pub proportion: f64,
}

impl GroupView {
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn name(&self) -> String {
        match self.label {
            None => self.sensitive.clone(),
            Some(y) => format!("{}|{}", self.sensitive, i8::from(y)),
        }
    }
}

/// `F_k = c0 + sum_k' coeffs[k'] * A(D_k')` for one target group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessTarget {
    pub group: String,
    pub c0: f64,
    pub coeffs: Vec<f64>,
}

/// A group-fairness notion written as affine combinations of per-cell
/// accuracies, bound to the dataset it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessMeasure {
    pub kind: MeasureKind,
    pub n: usize,
    pub groups: Vec<GroupView>,
    pub targets: Vec<FairnessTarget>,
}

fn partition(dataset: &LabeledDataset, by_label: bool) -> Vec<GroupView> {
    let mut cells: BTreeMap<(String, Option<Label>), Vec<usize>> = BTreeMap::new();
    for (i, ex) in dataset.examples().iter().enumerate() {
        let label = by_label.then_some(ex.label());
        cells.entry((ex.sensitive().to_string(), label)).or_default().push(i);
    }
    let n = dataset.len() as f64;
    cells
        .into_iter()
        .map(|((sensitive, label), indices)| GroupView {
            proportion: indices.len() as f64 / n,
            sensitive,
            label,
            indices,
        })
        .collect()
}

/// Builds the coefficient form of `kind` on `dataset`.
///
/// * accuracy parity: `F_s = A(D_s) - A(D)`, i.e. `C^{s'} = 1{s'=s} - p_{s'}`.
/// * demographic parity: `F_s = P(yhat=1 | s) - P(yhat=1)`. With
///   `w_{s'} = 1{s'=s} - p_{s'}` and `q_{s'} = P(y=+1 | s')`, using
///   `P(yhat=1 | s') = q A(s',+) + (1-q)(1 - A(s',-))`:
///   `C^{(s',+)} = w q`, `C^{(s',-)} = -w (1-q)`, `c0 = sum w (1-q)`.
/// * equal opportunity: `F_s = P(yhat=1 | s, +) - P(yhat=1 | +)`, so
///   `C^{(s',+)} = 1{s'=s} - P(s' | +)` and zero on negative cells.
pub fn build_measure(kind: MeasureKind, dataset: &LabeledDataset) -> Result<FairnessMeasure> {
    if dataset.is_empty() {
        return Err(Error::DegenerateGroup("cannot build a fairness measure on an empty dataset".into()));
    }
    let n = dataset.len() as f64;
    let values = dataset.sensitive_values();
    let mut size = BTreeMap::new();
    let mut positives = BTreeMap::new();
    for ex in dataset.examples() {
        *size.entry(ex.sensitive()).or_insert(0usize) += 1;
        if ex.label() == Label::Positive {
            *positives.entry(ex.sensitive()).or_insert(0usize) += 1;
        }
    }
    let p_s = |s: &str| size[s] as f64 / n;
    let q_s = |s: &str| positives.get(s).copied().unwrap_or(0) as f64 / size[s] as f64;
    let total_pos: usize = positives.values().sum();

    let groups = partition(dataset, kind != MeasureKind::AccuracyParity);
    let targets = match kind {
        MeasureKind::AccuracyParity => values
            .iter()
            .map(|s| FairnessTarget {
                group: s.clone(),
                c0: 0.0,
                coeffs: groups
                    .iter()
                    .map(|g| f64::from(u8::from(&g.sensitive == s)) - g.proportion)
                    .collect(),
            })
            .collect(),
        MeasureKind::DemographicParity => values
            .iter()
            .map(|s| {
                let w = |t: &str| f64::from(u8::from(t == s)) - p_s(t);
                let c0 = values.iter().map(|t| w(t) * (1.0 - q_s(t))).sum();
                let coeffs = groups
                    .iter()
                    .map(|g| {
                        let (w, q) = (w(&g.sensitive), q_s(&g.sensitive));
                        match g.label {
                            Some(Label::Positive) => w * q,
                            _ => -w * (1.0 - q),
                        }
                    })
                    .collect();
                FairnessTarget {
                    group: s.clone(),
                    c0,
                    coeffs,
                }
            })
            .collect(),
        MeasureKind::EqualOpportunity => {
            if total_pos == 0 {
                return Err(Error::DegenerateGroup(
                    "equal opportunity needs at least one positive example".into(),
                ));
            }
            values
                .iter()
                .filter(|s| positives.contains_key(s.as_str()))
                .map(|s| FairnessTarget {
                    group: s.clone(),
                    c0: 0.0,
                    coeffs: groups
                        .iter()
                        .map(|g| match g.label {
                            Some(Label::Positive) => {
                                f64::from(u8::from(&g.sensitive == s)) - g.count() as f64 / total_pos as f64
                            }
                            _ => 0.0,
                        })
                        .collect(),
                })
                .collect()
        }
    };
    Ok(FairnessMeasure {
        kind,
        n: dataset.len(),
        groups,
        targets,
    })
}

impl FairnessMeasure {
    pub fn target(&self, group: &str) -> Result<&FairnessTarget> {
        self.targets
            .iter()
            .find(|t| t.group == group)
            .ok_or_else(|| Error::config(format!("{} has no target group {group:?}", self.kind)))
    }

    /// `c0 + sum C^{k'} A_{k'}` for per-cell accuracies `A`.
    pub fn combine(&self, target: &FairnessTarget, accuracies: &[f64]) -> f64 {
        target.c0 + target.coeffs.iter().zip(accuracies).map(|(c, a)| c * a).sum::<f64>()
    }

    /// Checks that this measure was built from `dataset`.
    pub fn check_dataset(&self, dataset: &LabeledDataset) -> Result<()> {
        let by_label = self.kind != MeasureKind::AccuracyParity;
        let consistent = self.n == dataset.len()
            && self.groups.iter().all(|g| {
                g.indices.iter().all(|&i| {
                    dataset.examples().get(i).is_some_and(|ex| {
                        ex.sensitive() == g.sensitive && (!by_label || Some(ex.label()) == g.label)
                    })
                })
            });
        if consistent {
            Ok(())
        } else {
            Err(Error::config(format!("{} measure was built from a different dataset", self.kind)))
        }
    }
}
