use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the finite-sample correction for one target group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleParams {
    pub n: usize,
    /// Estimated cell proportions `p_k'`, one per cell.
    pub proportions: Vec<f64>,
    /// `|C_k^{k'}|`, one per cell.
    pub coeff_abs: Vec<f64>,
    pub kappa: f64,
    /// Natarajan dimension of the model class.
    pub d_h: usize,
    pub b3: f64,
    pub b4: f64,
    /// Size of the label set.
    pub label_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleTerm {
    pub t: f64,
    /// Set when `n` is below the sample size the bound assumes; `t` is then
    /// computed anyway but carries no guarantee.
    pub warning: Option<String>,
}

/// Proof-constant deviation `t` between population and empirical fairness:
///
/// `sqrt(ln(B3 (2K+1)/kappa) / (B4 n))
///  + sum_k' 8 |C^{k'}| sqrt((d_H ln(n p_k'/2 + 2 ln|Y|) + ln(8 (2K+1)/kappa)) / (n p_k'))`.
pub fn finite_sample_correction(params: &FiniteSampleParams) -> Result<FiniteSampleTerm> {
    let FiniteSampleParams {
        n,
        ref proportions,
        ref coeff_abs,
        kappa,
        d_h,
        b3,
        b4,
        label_count,
    } = *params;
    let k = proportions.len();
    if k == 0 || coeff_abs.len() != k {
        return Err(Error::Shape {
            expected: k,
            got: coeff_abs.len(),
        });
    }
    if n == 0 {
        return Err(Error::domain("finite-sample term needs n >= 1"));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if !(b3 > 0.0 && b4 > 0.0) || !b3.is_finite() || !b4.is_finite() {
        return Err(Error::domain("B3 and B4 must be finite and > 0"));
    }
    if label_count < 2 {
        return Err(Error::domain("label set needs at least two labels"));
    }
    if let Some(p) = proportions.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::domain(format!("group proportions must lie in (0, 1], got {p}")));
    }
    if let Some(c) = coeff_abs.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
        return Err(Error::domain(format!("coefficient magnitudes must be finite and >= 0, got {c}")));
    }

    let nf = n as f64;
    let width = (2 * k + 1) as f64;
    let log_labels = (label_count as f64).ln();
    let mut t = ((b3 * width / kappa).ln() / (b4 * nf)).sqrt();
    for (c, p) in coeff_abs.iter().zip(proportions) {
        let np = nf * p;
        let numerator = d_h as f64 * (np / 2.0 + 2.0 * log_labels).ln() + (8.0 * width / kappa).ln();
        t += 8.0 * c * (numerator / np).sqrt();
    }

    let min_p = proportions.iter().copied().fold(f64::INFINITY, f64::min);
    let required = 8.0 * (width / kappa).ln() / min_p;
    let warning = (nf < required).then(|| {
        format!("n = {n} is below the sample size {required:.1} the finite-sample bound assumes")
    });
    Ok(FiniteSampleTerm { t, warning })
}
