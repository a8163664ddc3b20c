use serde::{Deserialize, Serialize};

use super::measure::FairnessMeasure;
use crate::data::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::linmodel::{angular_margin, predict_label, Example, Label, LinearModel};
use crate::numerics::{chi_square_tail_thresholds, phi, SpdMatrix};
use crate::privacy::NoiseSpec;

/// Angular margins of a model on a list of examples, together with the
/// tie-rule correctness of each prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Margins {
    alpha: Vec<f64>,
    correct: Vec<bool>,
}

impl Margins {
    pub fn compute(model: &LinearModel, covariance: &SpdMatrix, examples: &[Example]) -> Result<Self> {
        check_dim(covariance.dim(), model.dim())?;
        let mut alpha = Vec::with_capacity(examples.len());
        let mut correct = Vec::with_capacity(examples.len());
        for ex in examples {
            alpha.push(angular_margin(model, ex.features(), ex.label(), covariance)?);
            correct.push(predict_label(model, ex.features())? == ex.label());
        }
        Ok(Self { alpha, correct })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn correct(&self) -> &[bool] {
        &self.correct
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            alpha: indices.iter().map(|&i| self.alpha[i]).collect(),
            correct: indices.iter().map(|&i| self.correct[i]).collect(),
        }
    }

    fn nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::DegenerateGroup("empty view".into()))
        } else {
            Ok(())
        }
    }

    pub fn empirical_accuracy(&self) -> Result<f64> {
        self.nonempty()?;
        Ok(self.correct.iter().filter(|&&c| c).count() as f64 / self.len() as f64)
    }

    /// Mean of `Phi(alpha / sigma)`; the empirical accuracy when `sigma = 0`.
    pub fn expected_accuracy(&self, sigma: f64) -> Result<f64> {
        self.nonempty()?;
        if sigma == 0.0 {
            return self.empirical_accuracy();
        }
        Ok(self.alpha.iter().map(|a| phi(a / sigma)).sum::<f64>() / self.len() as f64)
    }

    /// Mean over all ordered pairs `(i, j)`, `i = j` included, of
    /// `Phi(min / sigma) Phi(-max / sigma)`.
    ///
    /// After sorting, the pair `(i < j)` contributes `Phi(a_i) Phi(-a_j)`, so
    /// the off-diagonal sum is one pass with a running prefix of `Phi(a_i)`.
    pub fn accuracy_variance_bound(&self, sigma: f64) -> Result<f64> {
        self.nonempty()?;
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let mut a: Vec<f64> = self.alpha.iter().map(|x| x / sigma).collect();
        a.sort_by(f64::total_cmp);
        let mut prefix = 0.0;
        let mut off_diagonal = 0.0;
        let mut diagonal = 0.0;
        for &x in &a {
            let (up, down) = (phi(x), phi(-x));
            off_diagonal += prefix * down;
            diagonal += up * down;
            prefix += up;
        }
        let n = a.len() as f64;
        Ok(((diagonal + 2.0 * off_diagonal) / (n * n)).clamp(0.0, 0.25))
    }

    /// Mean of `Phi(-|alpha| / sigma)`; zero when `sigma = 0`.
    pub fn mean_disagreement(&self, sigma: f64) -> Result<f64> {
        self.nonempty()?;
        if sigma == 0.0 {
            return Ok(0.0);
        }
        Ok(self.alpha.iter().map(|a| phi(-a.abs() / sigma)).sum::<f64>() / self.len() as f64)
    }
}

fn margins(model: &LinearModel, noise: &NoiseSpec, examples: &[Example]) -> Result<Margins> {
    Margins::compute(model, noise.covariance(), examples)
}

pub fn empirical_accuracy(model: &LinearModel, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::DegenerateGroup("empty view".into()));
    }
    let mut correct = 0usize;
    for ex in examples {
        if predict_label(model, ex.features())? == ex.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

pub fn expected_accuracy(model: &LinearModel, noise: &NoiseSpec, examples: &[Example]) -> Result<f64> {
    margins(model, noise, examples)?.expected_accuracy(noise.sigma())
}

pub fn accuracy_variance_bound(model: &LinearModel, noise: &NoiseSpec, examples: &[Example]) -> Result<f64> {
    margins(model, noise, examples)?.accuracy_variance_bound(noise.sigma())
}

/// Per-cell expected accuracies and accuracy-variance bounds of a measure.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMoments {
    pub expected: Vec<f64>,
    pub variance: Vec<f64>,
}

impl CellMoments {
    pub fn compute(all: &Margins, measure: &FairnessMeasure, sigma: f64) -> Result<Self> {
        let mut expected = Vec::with_capacity(measure.groups.len());
        let mut variance = Vec::with_capacity(measure.groups.len());
        for g in &measure.groups {
            let m = all.subset(&g.indices);
            expected.push(m.expected_accuracy(sigma)?);
            variance.push(m.accuracy_variance_bound(sigma)?);
        }
        Ok(Self { expected, variance })
    }

    /// `(sum_k' |C^{k'}| sqrt(V_A(D_k')))^2`.
    pub fn fairness_variance(&self, coeffs: &[f64]) -> f64 {
        let s: f64 = coeffs.iter().zip(&self.variance).map(|(c, v)| c.abs() * v.sqrt()).sum();
        s * s
    }
}

pub fn empirical_fairness(
    model: &LinearModel,
    dataset: &LabeledDataset,
    measure: &FairnessMeasure,
    group: &str,
) -> Result<f64> {
    measure.check_dataset(dataset)?;
    let target = measure.target(group)?;
    let accuracies = measure
        .groups
        .iter()
        .map(|g| empirical_accuracy(model, dataset.subset(&g.indices).examples()))
        .collect::<Result<Vec<_>>>()?;
    Ok(measure.combine(target, &accuracies))
}

fn fairness_moments(
    model: &LinearModel,
    noise: &NoiseSpec,
    dataset: &LabeledDataset,
    measure: &FairnessMeasure,
) -> Result<CellMoments> {
    measure.check_dataset(dataset)?;
    let all = margins(model, noise, dataset.examples())?;
    CellMoments::compute(&all, measure, noise.sigma())
}

pub fn expected_fairness(
    model: &LinearModel,
    noise: &NoiseSpec,
    dataset: &LabeledDataset,
    measure: &FairnessMeasure,
    group: &str,
) -> Result<f64> {
    let target = measure.target(group)?;
    let moments = fairness_moments(model, noise, dataset, measure)?;
    Ok(measure.combine(target, &moments.expected))
}

pub fn fairness_variance_bound(
    model: &LinearModel,
    noise: &NoiseSpec,
    dataset: &LabeledDataset,
    measure: &FairnessMeasure,
    group: &str,
) -> Result<f64> {
    let target = measure.target(group)?;
    let moments = fairness_moments(model, noise, dataset, measure)?;
    Ok(moments.fairness_variance(&target.coeffs))
}

/// Chebyshev interval with its clipped and unclipped ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub raw_lo: f64,
    pub raw_hi: f64,
}

impl Interval {
    pub fn contains_raw(&self, value: f64) -> bool {
        self.raw_lo <= value && value <= self.raw_hi
    }
}

pub(crate) fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("confidence parameter zeta must lie in (0, 1), got {zeta}")))
    }
}

/// `expected +- sqrt(variance_bound / zeta)`, clipped to `natural_range`.
pub fn confidence_interval(
    expected: f64,
    variance_bound: f64,
    zeta: f64,
    natural_range: (f64, f64),
) -> Result<Interval> {
    check_zeta(zeta)?;
    if !(variance_bound >= 0.0) {
        return Err(Error::domain(format!("variance bound must be >= 0, got {variance_bound}")));
    }
    let half = (variance_bound / zeta).sqrt();
    let (raw_lo, raw_hi) = (expected - half, expected + half);
    Ok(Interval {
        lo: raw_lo.max(natural_range.0),
        hi: raw_hi.min(natural_range.1),
        raw_lo,
        raw_hi,
    })
}

/// `Phi(-|alpha| / sigma)`: chance that a private model flips the
/// prediction on `x`. Zero when `sigma = 0`.
pub fn disagreement_probability(model: &LinearModel, noise: &NoiseSpec, x: &[f64], y: Label) -> Result<f64> {
    let alpha = angular_margin(model, x, y, noise.covariance())?;
    if noise.sigma() == 0.0 {
        return Ok(0.0);
    }
    Ok(phi(-alpha.abs() / noise.sigma()))
}

/// Mean disagreement probability divided by `zeta`, unclipped.
pub fn disagreement_ratio_bound(
    model: &LinearModel,
    noise: &NoiseSpec,
    examples: &[Example],
    zeta: f64,
) -> Result<f64> {
    check_zeta(zeta)?;
    Ok(margins(model, noise, examples)?.mean_disagreement(noise.sigma())? / zeta)
}

/// High-probability bounds on `||theta_priv||_2`; each side holds with
/// probability at least `1 - zeta` on its own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn norm_bounds(model: &LinearModel, noise: &NoiseSpec, zeta: f64) -> Result<NormBounds> {
    check_zeta(zeta)?;
    check_dim(noise.dim(), model.dim())?;
    let norm = model.norm();
    let sigma = noise.sigma();
    if sigma == 0.0 {
        return Ok(NormBounds {
            lower: norm,
            upper: norm,
        });
    }
    let p = model.dim();
    let range = noise.covariance().eigen_range();
    let (root_min, root_max) = (range.lambda_min.max(0.0).sqrt(), range.lambda_max.sqrt());
    let (_, upper_one) = chi_square_tail_thresholds(p, (1.0 / zeta).ln())?;
    let (lower_two, upper_two) = chi_square_tail_thresholds(p, (2.0 / zeta).ln())?;
    let upper = norm + sigma * root_max * upper_one.sqrt();
    let lower = (norm - sigma * root_max * upper_two.sqrt())
        .max(sigma * root_min * lower_two.sqrt() - norm)
        .max(0.0);
    Ok(NormBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{build_measure, MeasureKind};
    use crate::rng;
    use rand::Rng;

    fn example(x: &[f64], s: &str, y: i8) -> Example {
        Example::new(x.to_vec(), s, Label::try_from(y).unwrap()).unwrap()
    }

    fn brute_force_variance(alpha: &[f64], sigma: f64) -> f64 {
        let n = alpha.len() as f64;
        let mut total = 0.0;
        for a in alpha {
            for b in alpha {
                total += phi(a.min(*b) / sigma) * phi(-a.max(*b) / sigma);
            }
        }
        total / (n * n)
    }

    fn margins_of(alpha: &[f64]) -> Margins {
        Margins {
            alpha: alpha.to_vec(),
            correct: alpha.iter().map(|a| *a >= 0.0).collect(),
        }
    }

    #[test]
    fn empirical_accuracy_examples() {
        let model = LinearModel::new(vec![1.0, 0.0]).unwrap();
        let view = [example(&[1.0, 1.0], "a", 1), example(&[-1.0, 1.0], "a", 1)];
        assert_eq!(empirical_accuracy(&model, &view).unwrap(), 0.5);
        let zero = LinearModel::zeros(2);
        let view = [example(&[1.0, 1.0], "a", 1), example(&[2.0, 1.0], "a", -1), example(&[3.0, 1.0], "a", 1)];
        assert!((empirical_accuracy(&zero, &view).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(empirical_accuracy(&zero, &[]).is_err());
    }

    #[test]
    fn expected_accuracy_examples() {
        assert_eq!(margins_of(&[0.0]).expected_accuracy(1.0).unwrap(), 0.5);
        assert!((margins_of(&[2.0]).expected_accuracy(2.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-12);
        let m = margins_of(&[0.3, -1.2, 4.0]);
        assert!((m.expected_accuracy(1e6 * 4.0).unwrap() - 0.5).abs() < 1e-4);
        assert_eq!(m.expected_accuracy(0.0).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn variance_examples() {
        let a = 0.7;
        let exact = phi(a) * phi(-a);
        assert!((margins_of(&[a]).accuracy_variance_bound(1.0).unwrap() - exact).abs() < 1e-15);
        assert_eq!(margins_of(&[0.0, 0.0]).accuracy_variance_bound(1.0).unwrap(), 0.25);
    }

    #[test]
    fn sorted_variance_matches_brute_force() {
        let mut rng = rng::stream(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=200);
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let sigma = rng.gen_range(0.1..3.0);
            let fast = margins_of(&alpha).accuracy_variance_bound(sigma).unwrap();
            assert!((fast - brute_force_variance(&alpha, sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_examples() {
        let i = confidence_interval(0.0, 0.01, 0.04, (-1.0, 1.0)).unwrap();
        assert!((i.raw_lo + 0.5).abs() < 1e-15 && (i.raw_hi - 0.5).abs() < 1e-15);
        let i = confidence_interval(0.9, 0.04, 0.25, (0.0, 1.0)).unwrap();
        assert!((i.lo - 0.5).abs() < 1e-12 && i.hi == 1.0 && (i.raw_hi - 1.3).abs() < 1e-12);
        let i = confidence_interval(0.3, 0.0, 0.1, (0.0, 1.0)).unwrap();
        assert_eq!((i.lo, i.hi), (0.3, 0.3));
        assert!(confidence_interval(0.0, 0.1, 1.0, (0.0, 1.0)).is_err());
        assert!(confidence_interval(0.0, 0.1, 0.0, (0.0, 1.0)).is_err());
        assert!(confidence_interval(0.0, -0.1, 0.5, (0.0, 1.0)).is_err());
    }

    #[test]
    fn disagreement_examples() {
        let noise = NoiseSpec::isotropic(1.0, 2).unwrap();
        let on_boundary = LinearModel::new(vec![1.0, -1.0]).unwrap();
        let p = disagreement_probability(&on_boundary, &noise, &[1.0, 1.0], Label::Positive).unwrap();
        assert_eq!(p, 0.5);

        // alpha = 1 for theta = (sqrt2, 0), x = (1, 1).
        let model = LinearModel::new(vec![2f64.sqrt(), 0.0]).unwrap();
        let p = disagreement_probability(&model, &noise, &[1.0, 1.0], Label::Negative).unwrap();
        assert!((p - 0.158_655_253_931_457_05).abs() < 1e-12);
        let five = LinearModel::new(vec![5.0 * 2f64.sqrt(), 0.0]).unwrap();
        let p = disagreement_probability(&five, &noise, &[1.0, 1.0], Label::Positive).unwrap();
        assert!((p / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-9);

        let view = vec![example(&[1.0, 1.0], "a", 1); 3];
        let b = disagreement_ratio_bound(&on_boundary, &noise, &view, 0.5).unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn norm_bound_examples() {
        let zero = LinearModel::zeros(100);
        let noise = NoiseSpec::isotropic(1.0, 100).unwrap();
        let b = norm_bounds(&zero, &noise, 0.5).unwrap();
        let lower = (100.0 - 2.0 * (100.0 * 4f64.ln()).sqrt()).sqrt();
        let upper = (100.0 + 2.0 * (100.0 * 2f64.ln()).sqrt() + 2.0 * 2f64.ln()).sqrt();
        assert!((b.lower - lower).abs() < 1e-12 && (b.upper - upper).abs() < 1e-12);
        assert!((b.lower - 8.744).abs() < 1e-3 && (b.upper - 10.864).abs() < 1e-3);

        let scaled = NoiseSpec::new(1.0, SpdMatrix::identity(100).scaled(4.0).unwrap()).unwrap();
        let b4 = norm_bounds(&zero, &scaled, 0.5).unwrap();
        assert!((b4.lower / b.lower - 2.0).abs() < 1e-12 && (b4.upper / b.upper - 2.0).abs() < 1e-12);

        let model = LinearModel::new(vec![3.0, 4.0]).unwrap();
        let b = norm_bounds(&model, &NoiseSpec::isotropic(0.0, 2).unwrap(), 0.1).unwrap();
        assert_eq!((b.lower, b.upper), (5.0, 5.0));
    }

    #[test]
    fn constant_margin_groups_fairness() {
        // Group a has alpha = +1 and group b alpha = -1 under Sigma = I.
        let model = LinearModel::new(vec![2f64.sqrt(), 0.0]).unwrap();
        let rows = vec![example(&[1.0, 1.0], "a", 1), example(&[1.0, 1.0], "b", -1)];
        let d = LabeledDataset::new(vec!["x0".into(), "bias".into()], rows).unwrap();
        let noise = NoiseSpec::isotropic(1.0, 2).unwrap();
        let m = build_measure(MeasureKind::AccuracyParity, &d).unwrap();
        let f = expected_fairness(&model, &noise, &d, &m, "a").unwrap();
        assert!((f - (0.5 * phi(1.0) - 0.5 * phi(-1.0))).abs() < 1e-15);
        assert!((f - 0.341_344_746).abs() < 1e-9);

        let far = noise.with_sigma(1e9).unwrap();
        assert!(expected_fairness(&model, &far, &d, &m, "a").unwrap().abs() < 1e-4);
    }
}
