//! Standard normal density, distribution and truncated moments.
//!
//! Interval masses are formed from whichever tail keeps them free of
//! cancellation. Intervals lying entirely in one tail are handled through the
//! Mills ratio `Q(x) / φ(x)`, so their moments stay finite even when the
//! mass itself underflows.

use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `P(a < Z < b)` for a standard normal `Z`.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        0.0
    } else if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - sf(b) - cdf(a)
    }
}

/// Mills ratio `Q(x) / φ(x)` for `x ≥ 0`.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x.is_infinite() {
        return 0.0;
    }
    if x < 5.0 {
        return sf(x) / pdf(x);
    }
    // 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))), evaluated backwards
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// Moments of a standard normal truncated to `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncated {
    /// `Φ(b) − Φ(a)`.
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    /// The mass underflowed; mean and variance come from the scaled form.
    pub degenerate: bool,
}

#[inline]
fn x_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * pdf(x)
    }
}

/// Truncated-normal moments on `(a, b)`, `a < b`.
pub fn truncated(a: f64, b: f64) -> Truncated {
    assert!(a < b, "empty truncation interval ({a}, {b})");
    if a >= 0.0 {
        upper_tail(a, b)
    } else if b <= 0.0 {
        let t = upper_tail(-b, -a);
        Truncated {
            mean: -t.mean,
            ..t
        }
    } else {
        let mass = interval_mass(a, b);
        let mean = (pdf(a) - pdf(b)) / mass;
        let variance = 1.0 + (x_pdf(a) - x_pdf(b)) / mass - mean * mean;
        Truncated {
            mass,
            mean,
            variance: variance.max(0.0),
            degenerate: false,
        }
    }
}

/// `0 ≤ a < b`: all quantities divided through by `φ(a)`.
fn upper_tail(a: f64, b: f64) -> Truncated {
    let ratio = if b.is_infinite() {
        0.0
    } else {
        (0.5 * (a * a - b * b)).exp()
    };
    let scaled_mass = mills_ratio(a) - ratio * mills_ratio(b);
    let mean = (1.0 - ratio) / scaled_mass;
    let b_ratio = if ratio == 0.0 { 0.0 } else { b * ratio };
    let variance = 1.0 + (a - b_ratio) / scaled_mass - mean * mean;
    let mass = interval_mass(a, b);
    Truncated {
        mass,
        mean,
        variance: variance.max(0.0),
        degenerate: mass < f64::MIN_POSITIVE,
    }
}
