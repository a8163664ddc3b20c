use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use super::PrivacyBudget;
use crate::error::{Error, Result};
use crate::numerics::phi;

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 400;
const GRID_POINTS: usize = 100;
const REL_TOL: f64 = 1e-12;
// Rounding noise allowed between neighbouring grid values of g.
const MONOTONE_SLACK: f64 = 1e-14;

/// Result of noise calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma: f64,
    /// `g(sigma)`, guaranteed `<= delta`.
    pub condition_value: f64,
}

/// Analytic Gaussian mechanism condition
/// `g(sigma) = Phi(D/2s - e s/D) - exp(e) Phi(-D/2s - e s/D)`.
///
/// The mechanism is `(epsilon, delta)`-DP exactly when `g(sigma) <= delta`.
pub fn privacy_condition(sigma: f64, budget: &PrivacyBudget) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("privacy condition needs sigma > 0, got {sigma}")));
    }
    Ok(condition(sigma, budget))
}

fn condition(sigma: f64, budget: &PrivacyBudget) -> f64 {
    let (eps, delta_s) = (budget.epsilon(), budget.sensitivity());
    let a = delta_s / (2.0 * sigma) - eps * sigma / delta_s;
    let b = -delta_s / (2.0 * sigma) - eps * sigma / delta_s;
    // Phi(a) - Phi(b): through erf when the arguments straddle zero, through
    // the tail CDF when both are negative, so neither form cancels badly.
    let diff = if a <= 0.0 {
        phi(a) - phi(b)
    } else {
        0.5 * (libm::erf(a * FRAC_1_SQRT_2) - libm::erf(b * FRAC_1_SQRT_2))
    };
    diff - eps.exp_m1() * phi(b)
}

/// Smallest `sigma` satisfying the condition for `budget`.
///
/// The bracket grows geometrically from `sigma = sensitivity`; before
/// bisecting, `g` is checked to be nonincreasing on a grid across the
/// bracket so a non-monotone condition fails loudly.
pub fn calibrate_sigma(budget: &PrivacyBudget) -> Result<Calibration> {
    let delta = budget.delta();
    let g = |s: f64| condition(s, budget);
    let start = budget.sensitivity();

    let (mut lo, mut hi);
    if g(start) <= delta {
        hi = start;
        lo = start / 2.0;
        let mut n = 0;
        while g(lo) <= delta {
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::Calibration(format!(
                    "no infeasible lower end found: g({lo:e}) = {:e}, g({hi:e}) = {:e}",
                    g(lo),
                    g(hi)
                )));
            }
            hi = lo;
            lo /= 2.0;
        }
    } else {
        lo = start;
        hi = start * 2.0;
        let mut n = 0;
        while g(hi) > delta {
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::Calibration(format!(
                    "bracket expansion failed: g({lo:e}) = {:e}, g({hi:e}) = {:e}",
                    g(lo),
                    g(hi)
                )));
            }
            lo = hi;
            hi *= 2.0;
        }
    }

    check_monotone(&g, lo, hi)?;

    for _ in 0..MAX_BISECTIONS {
        if hi / lo - 1.0 <= REL_TOL {
            break;
        }
        let mid = (lo * hi).sqrt();
        if g(mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration {
        sigma: hi,
        condition_value: g(hi),
    })
}

fn check_monotone(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<()> {
    let ratio = (hi / lo).ln();
    let mut prev_s = lo;
    let mut prev = g(lo);
    for i in 1..=GRID_POINTS {
        let s = lo * (ratio * i as f64 / GRID_POINTS as f64).exp();
        let v = g(s);
        if v > prev + MONOTONE_SLACK {
            return Err(Error::Calibration(format!(
                "privacy condition is not decreasing on [{lo:e}, {hi:e}]: g({prev_s:e}) = {prev:e} < g({s:e}) = {v:e}"
            )));
        }
        prev = v;
        prev_s = s;
    }
    Ok(())
}
