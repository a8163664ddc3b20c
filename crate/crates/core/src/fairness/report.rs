use serde::{Deserialize, Serialize};

use super::bounds::{check_zeta, confidence_interval, norm_bounds, CellMoments, Margins};
use super::finite_sample::{finite_sample_correction, FiniteSampleParams};
use super::measure::{build_measure, MeasureKind};
use crate::data::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::linmodel::LinearModel;
use crate::privacy::{NoiseSpec, PrivacyBudget};

pub const ALL_GROUPS: &str = "all";
pub const NORM_METRIC: &str = "norm";
pub const DISAGREEMENT_METRIC: &str = "disagreement";
pub const ACCURACY_METRIC: &str = "accuracy";

/// Noise parameters echoed in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseContext {
    pub sigma: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub covariance: String,
}

impl NoiseContext {
    pub fn new(noise: &NoiseSpec, budget: Option<&PrivacyBudget>) -> Self {
        Self {
            sigma: noise.sigma(),
            epsilon: budget.map(PrivacyBudget::epsilon),
            delta: budget.map(PrivacyBudget::delta),
            covariance: noise.covariance_descriptor(),
        }
    }
}

/// One bound on one metric at one confidence level.
///
/// * `norm`: `expected` is the non-private norm, `interval` is
///   `[lower, upper]`; each end holds with probability `1 - zeta`.
/// * `disagreement`: `expected` is the mean flip probability, `interval` is
///   `[0, expected / zeta]` clipped to 1.
/// * `accuracy` and fairness measures: Chebyshev intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub metric: String,
    pub group: String,
    pub expected: f64,
    pub variance_bound: Option<f64>,
    pub zeta: f64,
    pub interval: [f64; 2],
    pub interval_raw: [f64; 2],
    pub finite_sample_t: Option<f64>,
    pub noise: NoiseContext,
    pub n: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleOptions {
    pub kappa: f64,
    /// Defaults to the feature dimension.
    pub d_h: Option<usize>,
    pub b3: f64,
    pub b4: f64,
}

impl Default for FiniteSampleOptions {
    fn default() -> Self {
        Self {
            kappa: 0.05,
            d_h: None,
            b3: 1.0,
            b4: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub zetas: Vec<f64>,
    pub measures: Vec<MeasureKind>,
    pub finite_sample: Option<FiniteSampleOptions>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            zetas: vec![0.01],
            measures: MeasureKind::ALL.to_vec(),
            finite_sample: None,
        }
    }
}

/// All bounds for `model` released with `noise`, evaluated on `dataset`.
pub fn audit_reports(
    model: &LinearModel,
    noise: &NoiseSpec,
    context: &NoiseContext,
    dataset: &LabeledDataset,
    options: &AuditOptions,
) -> Result<Vec<BoundReport>> {
    check_dim(dataset.dim(), model.dim())?;
    if options.zetas.is_empty() {
        return Err(Error::config("at least one zeta is required"));
    }
    for &z in &options.zetas {
        check_zeta(z)?;
    }
    let n = dataset.len();
    let sigma = noise.sigma();
    let margins = Margins::compute(model, noise.covariance(), dataset.examples())?;

    let accuracy_parity = build_measure(MeasureKind::AccuracyParity, dataset)?;
    let group_moments = CellMoments::compute(&margins, &accuracy_parity, sigma)?;
    let overall = (margins.expected_accuracy(sigma)?, margins.accuracy_variance_bound(sigma)?);
    let mean_flip = margins.mean_disagreement(sigma)?;

    let mut fairness = Vec::new();
    for &kind in &options.measures {
        let measure = build_measure(kind, dataset)?;
        let moments = CellMoments::compute(&margins, &measure, sigma)?;
        fairness.push((measure, moments));
    }

    let report = |metric: &str, group: &str, expected: f64, variance: Option<f64>, zeta: f64, lo, hi, raw_lo, raw_hi| {
        BoundReport {
            metric: metric.to_string(),
            group: group.to_string(),
            expected,
            variance_bound: variance,
            zeta,
            interval: [lo, hi],
            interval_raw: [raw_lo, raw_hi],
            finite_sample_t: None,
            noise: context.clone(),
            n,
            warnings: Vec::new(),
        }
    };

    let mut out = Vec::new();
    for &zeta in &options.zetas {
        let nb = norm_bounds(model, noise, zeta)?;
        out.push(report(NORM_METRIC, ALL_GROUPS, model.norm(), None, zeta, nb.lower, nb.upper, nb.lower, nb.upper));

        let ratio = mean_flip / zeta;
        out.push(report(DISAGREEMENT_METRIC, ALL_GROUPS, mean_flip, None, zeta, 0.0, ratio.min(1.0), 0.0, ratio));

        let i = confidence_interval(overall.0, overall.1, zeta, (0.0, 1.0))?;
        out.push(report(ACCURACY_METRIC, ALL_GROUPS, overall.0, Some(overall.1), zeta, i.lo, i.hi, i.raw_lo, i.raw_hi));
        for (g, (e, v)) in accuracy_parity
            .groups
            .iter()
            .zip(group_moments.expected.iter().zip(&group_moments.variance))
        {
            let i = confidence_interval(*e, *v, zeta, (0.0, 1.0))?;
            out.push(report(ACCURACY_METRIC, &g.sensitive, *e, Some(*v), zeta, i.lo, i.hi, i.raw_lo, i.raw_hi));
        }

        for (measure, moments) in &fairness {
            for target in &measure.targets {
                let e = measure.combine(target, &moments.expected);
                let v = moments.fairness_variance(&target.coeffs);
                let i = confidence_interval(e, v, zeta, (-1.0, 1.0))?;
                let mut r = report(measure.kind.name(), &target.group, e, Some(v), zeta, i.lo, i.hi, i.raw_lo, i.raw_hi);
                if let Some(fs) = &options.finite_sample {
                    let term = finite_sample_correction(&FiniteSampleParams {
                        n,
                        proportions: measure.groups.iter().map(|g| g.proportion).collect(),
                        coeff_abs: target.coeffs.iter().map(|c| c.abs()).collect(),
                        kappa: fs.kappa,
                        d_h: fs.d_h.unwrap_or(model.dim()),
                        b3: fs.b3,
                        b4: fs.b4,
                        label_count: 2,
                    })?;
                    r.finite_sample_t = Some(term.t);
                    r.warnings.extend(term.warning);
                }
                out.push(r);
            }
        }
    }
    Ok(out)
}
