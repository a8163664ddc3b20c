//! Monte Carlo validation: samples private models, records their realized
//! metrics and checks analytical bounds against them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::fairness::{
    build_measure, BoundReport, FairnessMeasure, MeasureKind, ACCURACY_METRIC, ALL_GROUPS,
    DISAGREEMENT_METRIC, NORM_METRIC,
};
use crate::linmodel::{label_of_score, Example, Label, LinearModel};
use crate::numerics::dot;
use crate::privacy::{perturb, NoiseSpec};
use crate::rng;

/// Column name of a metric for one group, e.g. `accuracy_parity[a]`.
pub fn metric_key(metric: &str, group: &str) -> String {
    format!("{metric}[{group}]")
}

/// Realized metrics of `m` sampled private models, one row per model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub base_seed: u64,
    pub sigma: f64,
    pub n: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleRun {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, key: &str) -> Result<Vec<f64>> {
        let at = self
            .columns
            .iter()
            .position(|c| c == key)
            .ok_or_else(|| Error::config(format!("sample run has no metric {key:?}")))?;
        Ok(self.rows.iter().map(|r| r[at]).collect())
    }

    /// One CSV row per model: `index` followed by every metric column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["index".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct CellIndex {
    measure: FairnessMeasure,
    cell_of: Vec<usize>,
}

impl CellIndex {
    fn new(measure: FairnessMeasure, n: usize) -> Self {
        let mut cell_of = vec![0; n];
        for (k, g) in measure.groups.iter().enumerate() {
            for &i in &g.indices {
                cell_of[i] = k;
            }
        }
        Self { measure, cell_of }
    }

    fn accuracies(&self, correct: &[bool]) -> Vec<f64> {
        let mut hits = vec![0usize; self.measure.groups.len()];
        for (c, &k) in correct.iter().zip(&self.cell_of) {
            hits[k] += usize::from(*c);
        }
        hits.iter()
            .zip(&self.measure.groups)
            .map(|(h, g)| *h as f64 / g.count() as f64)
            .collect()
    }
}

/// Draws `m` private models from child streams of `base_seed` and records,
/// per model: norm, disagreement with `model`, overall and per-group
/// accuracy, and every target of each requested fairness measure.
///
/// Rows are in model-index order whatever the thread schedule.
pub fn sample_models(
    model: &LinearModel,
    noise: &NoiseSpec,
    dataset: &LabeledDataset,
    measures: &[MeasureKind],
    m: usize,
    base_seed: u64,
) -> Result<SampleRun> {
    if m == 0 {
        return Err(Error::domain("sample_models needs m >= 1"));
    }
    check_dim(noise.dim(), model.dim())?;
    check_dim(dataset.dim(), model.dim())?;
    if dataset.is_empty() {
        return Err(Error::DegenerateGroup("cannot sample metrics on an empty dataset".into()));
    }
    let n = dataset.len();
    let examples = dataset.examples();
    let base_pred: Vec<Label> = examples.iter().map(|e| label_of_score(dot(model.weights(), e.features()))).collect();

    let groups = CellIndex::new(build_measure(MeasureKind::AccuracyParity, dataset)?, n);
    let indexed = measures
        .iter()
        .map(|&k| Ok(CellIndex::new(build_measure(k, dataset)?, n)))
        .collect::<Result<Vec<_>>>()?;

    let mut columns = vec![
        metric_key(NORM_METRIC, ALL_GROUPS),
        metric_key(DISAGREEMENT_METRIC, ALL_GROUPS),
        metric_key(ACCURACY_METRIC, ALL_GROUPS),
    ];
    columns.extend(groups.measure.groups.iter().map(|g| metric_key(ACCURACY_METRIC, &g.sensitive)));
    for ci in &indexed {
        columns.extend(ci.measure.targets.iter().map(|t| metric_key(ci.measure.kind.name(), &t.group)));
    }

    let rows = (0..m)
        .into_par_iter()
        .map(|i| {
            let private = perturb(model, noise, &mut rng::child(base_seed, i as u64))?;
            let mut correct = Vec::with_capacity(n);
            let mut flips = 0usize;
            for (ex, base) in examples.iter().zip(&base_pred) {
                let pred = label_of_score(dot(private.weights(), ex.features()));
                correct.push(pred == ex.label());
                flips += usize::from(pred != *base);
            }
            let hits = correct.iter().filter(|&&c| c).count();
            let mut row = vec![private.norm(), flips as f64 / n as f64, hits as f64 / n as f64];
            row.extend(groups.accuracies(&correct));
            for ci in &indexed {
                let acc = ci.accuracies(&correct);
                row.extend(ci.measure.targets.iter().map(|t| ci.measure.combine(t, &acc)));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SampleRun {
        base_seed,
        sigma: noise.sigma(),
        n,
        columns,
        rows,
    })
}

/// Fraction of examples on which the two models predict differently.
pub fn empirical_disagreement(a: &LinearModel, b: &LinearModel, examples: &[Example]) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if examples.is_empty() {
        return Err(Error::DegenerateGroup("empty dataset".into()));
    }
    let mut differ = 0usize;
    for ex in examples {
        if a.score(ex.features()).map(label_of_score)? != b.score(ex.features()).map(label_of_score)? {
            differ += 1;
        }
    }
    Ok(differ as f64 / examples.len() as f64)
}

/// Sample mean, unbiased sample variance and standard error of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McMoments {
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
}

pub fn mc_moments(run: &SampleRun, key: &str) -> Result<McMoments> {
    if run.len() < 2 {
        return Err(Error::domain(format!("Monte Carlo moments need m >= 2, got {}", run.len())));
    }
    let values = run.column(key)?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    Ok(McMoments {
        mean,
        variance,
        standard_error: (variance / m).sqrt(),
    })
}

/// `(mean, standard error)` of one metric column.
pub fn mc_expectation(run: &SampleRun, key: &str) -> Result<(f64, f64)> {
    let mm = mc_moments(run, key)?;
    Ok((mm.mean, mm.standard_error))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub metric: String,
    pub zeta: f64,
    pub nominal: f64,
    pub coverage: f64,
    pub standard_error: f64,
    /// `1 - zeta - 3 sqrt(zeta (1 - zeta) / m)`.
    pub threshold: f64,
    pub pass: bool,
}

fn coverage_result(metric: String, zeta: f64, inside: usize, m: usize) -> CoverageResult {
    let mf = m as f64;
    let standard_error = (zeta * (1.0 - zeta) / mf).sqrt();
    let threshold = 1.0 - zeta - 3.0 * standard_error;
    let coverage = inside as f64 / mf;
    CoverageResult {
        metric,
        zeta,
        nominal: 1.0 - zeta,
        coverage,
        standard_error,
        threshold,
        pass: coverage >= threshold,
    }
}

/// Checks each report at confidence `zeta` against the realized metrics.
///
/// Norm reports yield two checks (`norm_upper`, `norm_lower`), since each
/// side holds with probability `1 - zeta` on its own. Comparisons use the
/// unclipped interval ends and are inclusive.
pub fn coverage_check(run: &SampleRun, reports: &[BoundReport], zeta: f64) -> Result<Vec<CoverageResult>> {
    let m = run.len();
    let mut out = Vec::new();
    for r in reports.iter().filter(|r| r.zeta == zeta) {
        if r.n != run.n || r.noise.sigma != run.sigma {
            return Err(Error::config(format!(
                "report {} was computed for n = {}, sigma = {} but the run has n = {}, sigma = {}",
                metric_key(&r.metric, &r.group),
                r.n,
                r.noise.sigma,
                run.n,
                run.sigma
            )));
        }
        let values = run.column(&metric_key(&r.metric, &r.group))?;
        let [lo, hi] = r.interval_raw;
        let count = |f: &dyn Fn(f64) -> bool| values.iter().filter(|v| f(**v)).count();
        match r.metric.as_str() {
            NORM_METRIC => {
                out.push(coverage_result(metric_key("norm_upper", &r.group), zeta, count(&|v| v <= hi), m));
                out.push(coverage_result(metric_key("norm_lower", &r.group), zeta, count(&|v| v >= lo), m));
            }
            DISAGREEMENT_METRIC => {
                out.push(coverage_result(metric_key(&r.metric, &r.group), zeta, count(&|v| v <= hi), m));
            }
            _ => {
                out.push(coverage_result(
                    metric_key(&r.metric, &r.group),
                    zeta,
                    count(&|v| lo <= v && v <= hi),
                    m,
                ));
            }
        }
    }
    Ok(out)
}
