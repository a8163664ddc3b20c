//! Bound engine: group-fairness measures in coefficient form, expected
//! accuracy and fairness of perturbed models, variance bounds, Chebyshev
//! intervals, disagreement and norm bounds, and the finite-sample term.

mod bounds;
mod finite_sample;
mod measure;
mod report;

pub use bounds::{
    accuracy_variance_bound, confidence_interval, disagreement_probability, disagreement_ratio_bound,
    empirical_accuracy, empirical_fairness, expected_accuracy, expected_fairness, fairness_variance_bound,
    norm_bounds, CellMoments, Interval, Margins, NormBounds,
};
pub use finite_sample::{finite_sample_correction, FiniteSampleParams, FiniteSampleTerm};
pub use measure::{build_measure, FairnessMeasure, FairnessTarget, GroupView, MeasureKind};
pub use report::{
    audit_reports, AuditOptions, BoundReport, FiniteSampleOptions, NoiseContext, ACCURACY_METRIC,
    ALL_GROUPS, DISAGREEMENT_METRIC, NORM_METRIC,
};
