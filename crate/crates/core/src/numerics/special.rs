//! Standard normal distribution and chi-square tail thresholds.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Standard normal CDF, unchecked.
///
/// Evaluated through `erfc`, which keeps full relative precision in the
/// lower tail. Infinite arguments map to 0 and 1; NaN propagates.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF with input validation.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal CDF needs a finite argument, got {x}")));
    }
    Ok(phi(x))
}

// Acklam's rational approximation, used as the starting point for Halley
// refinement against `phi`.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam(q: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if q < P_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else if q <= 1.0 - P_LOW {
        let r = q - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    } else {
        let r = (-2.0 * (1.0 - q).ln()).sqrt();
        -(((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    }
}

/// Inverse of the standard normal CDF.
pub fn std_normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("normal quantile needs 0 < q < 1, got {q}")));
    }
    if q == 0.5 {
        return Ok(0.0);
    }
    let mut x = acklam(q);
    for _ in 0..3 {
        // Work in whichever tail keeps the residual well conditioned.
        let e = if x < 0.0 {
            phi(x) - q
        } else {
            (1.0 - q) - phi(-x)
        };
        let u = e / std_normal_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// Laurent-Massart thresholds for the squared norm of a standard Gaussian
/// vector in `p` dimensions: `max(0, p - 2 sqrt(pt))` and
/// `p + 2 sqrt(pt) + 2t`. Each tail has probability at most `exp(-t)`.
pub fn chi_square_tail_thresholds(p: usize, t: f64) -> Result<(f64, f64)> {
    if p == 0 {
        return Err(Error::domain("chi-square thresholds need p >= 1"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("chi-square thresholds need finite t >= 0, got {t}")));
    }
    let p = p as f64;
    let root = 2.0 * (p * t).sqrt();
    Ok(((p - root).max(0.0), p + root + 2.0 * t))
}
