use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linmodel::Label;
use crate::rng::{self, standard_normals};

/// One sensitive group of a synthetic population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroup {
    pub name: String,
    pub proportion: f64,
    /// `P(y = +1 | group)`.
    pub positive_rate: f64,
    pub positive_mean: Vec<f64>,
    pub negative_mean: Vec<f64>,
    /// Isotropic standard deviation around the class mean.
    pub spread: f64,
}

/// Gaussian class-conditional mixture: `x = separation * mean_y + spread * z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Feature dimension before the bias column.
    pub p: usize,
    pub groups: Vec<SyntheticGroup>,
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two groups with unequal base rates; group `b` sits closer to the
    /// decision boundary along the first axis, so it is harder to classify.
    pub fn two_groups(n: usize, p: usize, proportions: (f64, f64), separation: f64, seed: u64) -> Self {
        let axis = |first: f64, second: f64| {
            let mut v = vec![0.0; p.max(1)];
            v[0] = first;
            if p > 1 {
                v[1] = second;
            }
            v
        };
        Self {
            n,
            p: p.max(1),
            groups: vec![
                SyntheticGroup {
                    name: "a".into(),
                    proportion: proportions.0,
                    positive_rate: 0.5,
                    positive_mean: axis(1.0, 0.0),
                    negative_mean: axis(-1.0, 0.0),
                    spread: 1.0,
                },
                SyntheticGroup {
                    name: "b".into(),
                    proportion: proportions.1,
                    positive_rate: 0.3,
                    positive_mean: axis(0.5, 1.0),
                    negative_mean: axis(-0.5, 1.0),
                    spread: 1.0,
                },
            ],
            separation,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::domain("synthetic spec needs n >= 1 and p >= 1"));
        }
        if self.groups.is_empty() {
            return Err(Error::domain("synthetic spec needs at least one group"));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::domain("separation must be finite and >= 0"));
        }
        let total: f64 = self.groups.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("group proportions sum to {total}, not 1")));
        }
        for g in &self.groups {
            if !(g.proportion > 0.0) {
                return Err(Error::domain(format!("group {:?} has proportion {}", g.name, g.proportion)));
            }
            if !(0.0..=1.0).contains(&g.positive_rate) {
                return Err(Error::domain(format!("group {:?} positive rate outside [0, 1]", g.name)));
            }
            if !(g.spread > 0.0) || !g.spread.is_finite() {
                return Err(Error::domain(format!("group {:?} needs spread > 0", g.name)));
            }
            if g.positive_mean.len() != self.p || g.negative_mean.len() != self.p {
                return Err(Error::Shape {
                    expected: self.p,
                    got: g.positive_mean.len().min(g.negative_mean.len()),
                });
            }
            if g.name.is_empty() {
                return Err(Error::domain("group names must be nonempty"));
            }
        }
        Ok(())
    }
}

/// Draws `spec.n` i.i.d. rows; deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed);
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let group = spec
            .groups
            .iter()
            .find(|g| {
                acc += g.proportion;
                u < acc
            })
            .unwrap_or_else(|| spec.groups.last().expect("validated nonempty"));
        let label = if rng.gen::<f64>() < group.positive_rate {
            Label::Positive
        } else {
            Label::Negative
        };
        let mean = match label {
            Label::Positive => &group.positive_mean,
            Label::Negative => &group.negative_mean,
        };
        let z = standard_normals(&mut rng, spec.p);
        let x = mean
            .iter()
            .zip(&z)
            .map(|(m, z)| spec.separation * m + group.spread * z)
            .collect();
        rows.push((x, group.name.clone(), label));
    }
    LabeledDataset::from_raw(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec::two_groups(200, 3, (0.5, 0.5), 1.0, 9);
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn realized_proportions_within_band() {
        let n = 10_000;
        let d = generate_synthetic(&SyntheticSpec::two_groups(n, 2, (0.7, 0.3), 1.0, 1)).unwrap();
        let count_a = d.summary().group_counts["a"] as f64;
        let band = 4.0 * (0.7 * 0.3 / n as f64).sqrt();
        assert!((count_a / n as f64 - 0.7).abs() <= band);
    }

    #[test]
    fn rejects_degenerate_specs() {
        let good = SyntheticSpec::two_groups(10, 2, (0.5, 0.5), 1.0, 0);
        let mut bad = good.clone();
        bad.groups[0].proportion = 0.6;
        assert!(generate_synthetic(&bad).is_err());
        let mut bad = good.clone();
        bad.groups[1].spread = 0.0;
        assert!(generate_synthetic(&bad).is_err());
        let mut bad = good.clone();
        bad.groups[0].positive_mean = vec![1.0];
        assert!(generate_synthetic(&bad).is_err());
        assert!(generate_synthetic(&SyntheticSpec { n: 0, ..good }).is_err());
    }
}
