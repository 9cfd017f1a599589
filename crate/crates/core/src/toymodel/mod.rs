//! Bias and variance of the 1×1-patch NLM estimator under NN and SNN selection.
//!
//! A noise-free value `μ` is observed through `N` replicas `μ + G(0, σ²)`.
//! The reference replica `μ_r` selects `N_n` of them and their plain mean is
//! the estimate. Selecting the `N_n` replicas closest to `μ_r` is modelled as
//! keeping the samples that fall into `[μ_r − d, μ_r + d]`, where `d` makes
//! the interval hold a fraction `N_n / N` of the Gaussian mass; the estimate
//! then follows a truncated Gaussian. SNN keeps samples around `μ_r ± oσ`
//! instead, giving a mixture of two truncated Gaussians.
//!
//! [`prediction_error`] integrates squared bias and variance against the
//! density of `μ_r`. [`oracle`] checks all of it by simulation.

pub mod gauss;
pub mod oracle;

use crate::error::{Error, Result};
use crate::search::Strategy;

pub use oracle::{mc_moments_at, mc_moments_sweep, mc_oracle, McMoments, McSweep};

/// Maximum bisection steps for the half-width.
const MAX_BISECTION: usize = 200;
/// Required accuracy of the selected mass.
const MASS_TOLERANCE: f64 = 1e-12;
/// Upper end of the half-width bracket, in units of σ.
const BRACKET_SIGMAS: f64 = 20.0;
/// Quadrature range around `μ`, in units of σ.
pub const QUADRATURE_SIGMAS: f64 = 8.0;
/// Simpson nodes over the quadrature range (odd).
pub const QUADRATURE_NODES: usize = 4001;

/// Configuration of the toy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyScenario {
    /// Noise-free value.
    pub mu: f64,
    pub sigma: f64,
    /// Replicas available, `N`.
    pub n_total: usize,
    /// Replicas averaged, `N_n`.
    pub n_neighbors: usize,
    /// SNN offset in units of σ.
    pub offset: f64,
}

impl ToyScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !self.mu.is_finite() {
            return bad(format!("mu = {} must be finite", self.mu));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma = {} must be > 0", self.sigma));
        }
        if self.n_neighbors == 0 || self.n_neighbors > self.n_total {
            return bad(format!(
                "need 1 <= n_neighbors ({}) <= n_total ({})",
                self.n_neighbors, self.n_total
            ));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return bad(format!("offset = {} must be >= 0", self.offset));
        }
        Ok(())
    }

    /// `N_n / N`.
    pub fn selected_fraction(&self) -> f64 {
        self.n_neighbors as f64 / self.n_total as f64
    }

    fn full_sample(&self) -> bool {
        self.n_neighbors == self.n_total
    }
}

/// Mean and variance of the estimate for a given reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorMoments {
    pub expectation: f64,
    pub variance: f64,
    /// Part of the selected mass underflowed; moments come from tail asymptotics.
    pub degenerate: bool,
}

impl EstimatorMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Expected squared error of the estimate, averaged over the reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionError {
    pub bias_sq: f64,
    pub variance: f64,
    /// Always `bias_sq + variance`.
    pub mse: f64,
}

impl PredictionError {
    pub fn new(bias_sq: f64, variance: f64) -> Self {
        Self {
            bias_sq,
            variance,
            mse: bias_sq + variance,
        }
    }

    /// The error divided by the selected fraction `N_n / N`, i.e. per unit of
    /// selected mass. This is the scale on which the classic toy-model
    /// figures (0.180 + 0.001 for NN at μ = 1, σ = 0.2, N = 100, N_n = 16)
    /// are quoted; the raw values are 16/100 of those.
    pub fn per_selected_fraction(&self, scn: &ToyScenario) -> Self {
        let k = 1.0 / scn.selected_fraction();
        Self::new(self.bias_sq * k, self.variance * k)
    }
}

/// Gaussian mass of `(lo, hi)` under `G(μ, σ²)`.
fn mass(scn: &ToyScenario, lo: f64, hi: f64) -> f64 {
    gauss::interval_mass((lo - scn.mu) / scn.sigma, (hi - scn.mu) / scn.sigma)
}

/// Intervals holding the selected samples for half-width `d`. One interval
/// for NN, or for SNN once the two around `μ_r ± oσ` overlap.
fn intervals(scn: &ToyScenario, strategy: Strategy, mu_r: f64, d: f64) -> Intervals {
    match strategy {
        Strategy::Nn => Intervals::One(mu_r - d, mu_r + d),
        Strategy::Snn => {
            let left = mu_r - scn.offset * scn.sigma;
            let right = mu_r + scn.offset * scn.sigma;
            if d >= scn.offset * scn.sigma {
                Intervals::One(left - d, right + d)
            } else {
                Intervals::Two((left - d, left + d), (right - d, right + d))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Intervals {
    One(f64, f64),
    Two((f64, f64), (f64, f64)),
}

fn selected_mass(scn: &ToyScenario, strategy: Strategy, mu_r: f64, d: f64) -> f64 {
    match intervals(scn, strategy, mu_r, d) {
        Intervals::One(lo, hi) => mass(scn, lo, hi),
        Intervals::Two((a, b), (c, e)) => mass(scn, a, b) + mass(scn, c, e),
    }
}

/// Half-width `d` such that the selection intervals hold `N_n / N` of the mass.
fn solve_d(scn: &ToyScenario, strategy: Strategy, mu_r: f64) -> Result<f64> {
    scn.validate()?;
    let target = scn.selected_fraction();
    let mut hi = BRACKET_SIGMAS * scn.sigma;
    let upper = selected_mass(scn, strategy, mu_r, hi);
    if target >= 1.0 || upper < target {
        return Err(Error::NoBracket { target, upper });
    }
    let mut lo = 0.0;
    let mut best = (f64::INFINITY, hi);
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = selected_mass(scn, strategy, mu_r, mid) - target;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() < MASS_TOLERANCE {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// NN half-width: `Φ((μ_r + d − μ)/σ) − Φ((μ_r − d − μ)/σ) = N_n / N`.
///
/// Fails with [`Error::NoBracket`] when `N_n = N` (the interval is unbounded).
pub fn solve_d_nn(scn: &ToyScenario, mu_r: f64) -> Result<f64> {
    solve_d(scn, Strategy::Nn, mu_r)
}

/// SNN half-width: the two intervals `μ_r ± oσ ± d` together hold `N_n / N`
/// of the mass. Overlapping intervals are merged before measuring.
pub fn solve_d_snn(scn: &ToyScenario, mu_r: f64) -> Result<f64> {
    solve_d(scn, Strategy::Snn, mu_r)
}

/// Mean and variance (per sample) of `G(μ, σ²)` restricted to `(lo, hi)`.
fn truncated_component(scn: &ToyScenario, lo: f64, hi: f64) -> (gauss::Truncated, f64, f64) {
    let t = gauss::truncated((lo - scn.mu) / scn.sigma, (hi - scn.mu) / scn.sigma);
    let mean = scn.mu + scn.sigma * t.mean;
    let var = scn.sigma * scn.sigma * t.variance;
    (t, mean, var)
}

/// Mean and variance of a two-component mixture with weights proportional to
/// `p_l` and `p_r`: `Σ pᵢ (Varᵢ + (Eᵢ − E)²)`.
pub fn mixture(p_l: f64, e_l: f64, var_l: f64, p_r: f64, e_r: f64, var_r: f64) -> (f64, f64) {
    let total = p_l + p_r;
    let (wl, wr) = (p_l / total, p_r / total);
    let e = wl * e_l + wr * e_r;
    let var = wl * (var_l + (e_l - e) * (e_l - e)) + wr * (var_r + (e_r - e) * (e_r - e));
    (e, var)
}

fn moments(scn: &ToyScenario, strategy: Strategy, mu_r: f64) -> Result<EstimatorMoments> {
    scn.validate()?;
    let n = scn.n_neighbors as f64;
    if scn.full_sample() {
        return Ok(EstimatorMoments {
            expectation: scn.mu,
            variance: scn.sigma * scn.sigma / n,
            degenerate: false,
        });
    }
    let d = solve_d(scn, strategy, mu_r)?;
    let (expectation, var, degenerate) = match intervals(scn, strategy, mu_r, d) {
        Intervals::One(lo, hi) => {
            let (t, e, v) = truncated_component(scn, lo, hi);
            (e, v, t.degenerate)
        }
        Intervals::Two((a, b), (c, f)) => {
            let (tl, el, vl) = truncated_component(scn, a, b);
            let (tr, er, vr) = truncated_component(scn, c, f);
            let (e, v) = if tl.mass + tr.mass > 0.0 {
                mixture(tl.mass, el, vl, tr.mass, er, vr)
            } else {
                // Both masses underflowed; the nearer interval dominates.
                let nearer_left = (el - scn.mu).abs() < (er - scn.mu).abs();
                if nearer_left {
                    (el, vl)
                } else {
                    (er, vr)
                }
            };
            (e, v, tl.degenerate || tr.degenerate)
        }
    };
    Ok(EstimatorMoments {
        expectation,
        variance: (var / n).max(0.0),
        degenerate,
    })
}

/// Expectation and variance of the NN estimate given the reference value.
pub fn nn_moments(scn: &ToyScenario, mu_r: f64) -> Result<EstimatorMoments> {
    moments(scn, Strategy::Nn, mu_r)
}

/// Expectation and variance of the SNN estimate given the reference value.
pub fn snn_moments(scn: &ToyScenario, mu_r: f64) -> Result<EstimatorMoments> {
    moments(scn, Strategy::Snn, mu_r)
}

pub fn estimator_moments(scn: &ToyScenario, strategy: Strategy, mu_r: f64) -> Result<EstimatorMoments> {
    moments(scn, strategy, mu_r)
}

/// Composite Simpson rule with `nodes` (odd, ≥ 3) equispaced nodes.
pub fn simpson(f: impl FnMut(f64) -> f64, a: f64, b: f64, nodes: usize) -> f64 {
    let h = (b - a) / (nodes - 1) as f64;
    let values: Vec<f64> = (0..nodes).map(|i| a + i as f64 * h).map(f).collect();
    simpson_sampled(&values, h)
}

/// Composite Simpson rule over samples taken at spacing `h`.
fn simpson_sampled(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count >= 3");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
    }
    s * h / 3.0
}

/// Squared bias and variance of the estimate, integrated against the density
/// of `μ_r ~ G(μ, σ²)` over `μ ± 8σ`.
pub fn prediction_error(scn: &ToyScenario, strategy: Strategy) -> Result<PredictionError> {
    scn.validate()?;
    let a = scn.mu - QUADRATURE_SIGMAS * scn.sigma;
    let b = scn.mu + QUADRATURE_SIGMAS * scn.sigma;
    let h = (b - a) / (QUADRATURE_NODES - 1) as f64;
    let mut bias = Vec::with_capacity(QUADRATURE_NODES);
    let mut var = Vec::with_capacity(QUADRATURE_NODES);
    for i in 0..QUADRATURE_NODES {
        let mu_r = a + i as f64 * h;
        let m = moments(scn, strategy, mu_r)?;
        let density = gauss::pdf((mu_r - scn.mu) / scn.sigma) / scn.sigma;
        let e = m.expectation - scn.mu;
        bias.push(e * e * density);
        var.push(m.variance * density);
    }
    Ok(PredictionError::new(simpson_sampled(&bias, h), simpson_sampled(&var, h)))
}

/// Square-root approximation of the expected distance between two noisy
/// replicas of a `p`-element patch, `σ √(2p − 1) / √p`; `σ` for `p = 1`.
///
/// The exact value for `p = 1` is `2σ / √π ≈ 1.128σ`: the approximation is
/// only asymptotically accurate.
pub fn expected_distance_approx(sigma: f64, p: usize) -> f64 {
    assert!(p >= 1, "patch must hold at least one element");
    let p = p as f64;
    sigma * (2.0 * p - 1.0).sqrt() / p.sqrt()
}

/// NN and SNN moments at one reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub mu_r: f64,
    pub nn: EstimatorMoments,
    pub snn: EstimatorMoments,
}

/// Moments of both strategies at `points` reference values spread evenly over
/// `μ ± span·σ`.
pub fn curve(scn: &ToyScenario, span: f64, points: usize) -> Result<Vec<CurvePoint>> {
    scn.validate()?;
    if points < 2 || !(span.is_finite() && span > 0.0) {
        return Err(Error::InvalidParams(format!(
            "curve needs >= 2 points and a positive span, got {points} and {span}"
        )));
    }
    let a = scn.mu - span * scn.sigma;
    let step = 2.0 * span * scn.sigma / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let mu_r = a + i as f64 * step;
            Ok(CurvePoint {
                mu_r,
                nn: nn_moments(scn, mu_r)?,
                snn: snn_moments(scn, mu_r)?,
            })
        })
        .collect()
}
