//! Monte-Carlo oracle for the toy model.
//!
//! Every quantity is simulated in standardized units (`μ = 0`, `σ = 1`) and
//! scaled back: selection by `|x − μ_r|` or `||x − μ_r| − oσ|` commutes with
//! the affine map `x ↦ μ + σx`, so one set of draws serves every `(μ, σ)`.
//!
//! Trials run in chunks of [`CHUNK`]. Chunk `i` draws from ChaCha8 seeded with
//! the user seed on stream `i`, and chunk statistics are merged in chunk
//! order, so results depend on the seed only, never on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{PredictionError, ToyScenario};
use crate::error::{Error, Result};
use crate::search::Strategy;

/// Trials per RNG stream.
pub const CHUNK: usize = 4096;
/// Reference values are binned over `μ ± BIN_RANGE·σ`.
const BIN_RANGE: f64 = 8.0;
/// Bins per σ.
const BINS_PER_SIGMA: f64 = 50.0;

/// Running central moments up to order four, mergeable in any split.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Stats {
    fn push(&mut self, x: f64) {
        self.merge(&Stats {
            n: 1.0,
            mean: x,
            ..Stats::default()
        });
    }

    fn merge(&mut self, o: &Stats) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        let m3 = self.m3 + o.m3 + d2 * d * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        *self = Stats {
            n,
            mean: self.mean + d * nb / n,
            m2,
            m3,
            m4,
        };
    }

    /// Sample statistics scaled by `σ` around `μ`.
    fn moments(&self, mu: f64, sigma: f64) -> McMoments {
        let n = self.n;
        let var = if n > 1.0 { self.m2 / (n - 1.0) } else { 0.0 };
        let pop_var = self.m2 / n;
        let kurt_term = (self.m4 / n - pop_var * pop_var).max(0.0);
        McMoments {
            trials: n as usize,
            mean: mu + sigma * self.mean,
            variance: sigma * sigma * var,
            mean_se: sigma * (var / n).sqrt(),
            variance_se: sigma * sigma * (kurt_term / n).sqrt(),
        }
    }
}

/// Simulated mean and variance of the estimate, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub trials: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

fn rng_for_chunk(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Standardized selection key: distance to the reference or, for SNN, the
/// gap between that distance and the offset.
#[inline]
fn key(z: f64, z_ref: f64, strategy: Strategy, offset: f64) -> f64 {
    let dist = (z - z_ref).abs();
    match strategy {
        Strategy::Nn => dist,
        Strategy::Snn => (dist - offset).abs(),
    }
}

/// Sorts the `count` smallest keys of `pairs` to the front.
fn select_front(pairs: &mut [(f64, f64)], count: usize) {
    let cmp = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0);
    if count < pairs.len() {
        pairs.select_nth_unstable_by(count - 1, cmp);
    }
    pairs[..count].sort_unstable_by(cmp);
}

fn chunk_trials(chunk: usize, trials: usize) -> usize {
    CHUNK.min(trials - chunk * CHUNK)
}

fn n_chunks(trials: usize) -> usize {
    trials.div_ceil(CHUNK)
}

/// Simulated moments at fixed reference values for several neighbour counts
/// and both strategies, all from shared draws. Indexed by
/// `[strategy][reference][neighbour count]`, in standardized units.
#[derive(Debug, Clone, PartialEq)]
pub struct McSweep {
    pub n_total: usize,
    pub offset: f64,
    /// Reference values in units of σ from `μ`.
    pub z_refs: Vec<f64>,
    pub n_neighbors: Vec<usize>,
    cells: Vec<Stats>,
}

impl McSweep {
    fn index(&self, strategy: Strategy, r: usize, k: usize) -> usize {
        let s = match strategy {
            Strategy::Nn => 0,
            Strategy::Snn => 1,
        };
        (s * self.z_refs.len() + r) * self.n_neighbors.len() + k
    }

    /// Moments for reference `z_refs[r]` and count `n_neighbors[k]`, mapped
    /// to noise level `sigma` around `mu`.
    pub fn moments(&self, strategy: Strategy, r: usize, k: usize, mu: f64, sigma: f64) -> McMoments {
        self.cells[self.index(strategy, r, k)].moments(mu, sigma)
    }
}

/// Draws `n_total` standard normals per trial and, for every reference value
/// in `z_refs`, averages the `N_n` samples chosen by each strategy for every
/// `N_n` in `n_neighbors`. The reference itself is not among the samples.
pub fn mc_moments_sweep(
    n_total: usize,
    offset: f64,
    z_refs: &[f64],
    n_neighbors: &[usize],
    trials: usize,
    seed: u64,
) -> Result<McSweep> {
    if trials == 0 || z_refs.is_empty() || n_neighbors.is_empty() {
        return Err(Error::InvalidParams("sweep needs trials, references and counts".into()));
    }
    if n_neighbors.iter().any(|&n| n == 0 || n > n_total) {
        return Err(Error::InvalidParams(format!(
            "neighbour counts {n_neighbors:?} must lie in 1..={n_total}"
        )));
    }
    if !(offset.is_finite() && offset >= 0.0) || z_refs.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidParams("offset and references must be finite".into()));
    }
    let max_n = *n_neighbors.iter().max().unwrap();
    let strategies = [Strategy::Nn, Strategy::Snn];
    let mut sweep = McSweep {
        n_total,
        offset,
        z_refs: z_refs.to_vec(),
        n_neighbors: n_neighbors.to_vec(),
        cells: Vec::new(),
    };
    let n_cells = 2 * z_refs.len() * n_neighbors.len();
    // (count, position) in increasing count, so one prefix sum serves all
    let mut by_count: Vec<(usize, usize)> = n_neighbors.iter().copied().zip(0..).collect();
    by_count.sort_unstable();

    let per_chunk: Vec<Vec<Stats>> = (0..n_chunks(trials))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng_for_chunk(seed, chunk);
            let mut cells = vec![Stats::default(); n_cells];
            let mut z = vec![0.0; n_total];
            let mut pairs = vec![(0.0, 0.0); n_total];
            for _ in 0..chunk_trials(chunk, trials) {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for (r, &z_ref) in z_refs.iter().enumerate() {
                    for strategy in strategies {
                        for (p, &v) in pairs.iter_mut().zip(&z) {
                            *p = (key(v, z_ref, strategy, offset), v);
                        }
                        select_front(&mut pairs, max_n);
                        let mut sum = 0.0;
                        let mut taken = 0;
                        for &(n, k) in &by_count {
                            while taken < n {
                                sum += pairs[taken].1;
                                taken += 1;
                            }
                            cells[sweep.index(strategy, r, k)].push(sum / n as f64);
                        }
                    }
                }
            }
            cells
        })
        .collect();

    let mut cells = vec![Stats::default(); n_cells];
    for chunk in &per_chunk {
        for (acc, c) in cells.iter_mut().zip(chunk) {
            acc.merge(c);
        }
    }
    sweep.cells = cells;
    Ok(sweep)
}

/// Simulated moments of the estimate at a fixed reference value `mu_r`:
/// draw `N` samples, keep the `N_n` selected by `strategy`, average.
pub fn mc_moments_at(scn: &ToyScenario, strategy: Strategy, mu_r: f64, trials: usize, seed: u64) -> Result<McMoments> {
    scn.validate()?;
    let z_ref = (mu_r - scn.mu) / scn.sigma;
    let sweep = mc_moments_sweep(scn.n_total, scn.offset, &[z_ref], &[scn.n_neighbors], trials, seed)?;
    Ok(sweep.moments(strategy, 0, 0, scn.mu, scn.sigma))
}

/// Simulated prediction error. Per trial the reference `μ_r ~ G(μ, σ²)` is
/// drawn together with `N − 1` further replicas; the `N_n` selected among all
/// `N` (the reference included) are averaged. Estimates are binned by `μ_r`
/// (width `σ/50` over `μ ± 8σ`) and the error is split into the spread of the
/// bin means around `μ` (squared bias) and the spread within bins (variance).
pub fn mc_oracle(scn: &ToyScenario, strategy: Strategy, trials: usize, seed: u64) -> Result<PredictionError> {
    scn.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("oracle needs at least one trial".into()));
    }
    let n_bins = (2.0 * BIN_RANGE * BINS_PER_SIGMA) as usize;
    let bin_of = |z: f64| -> usize {
        let b = ((z + BIN_RANGE) * BINS_PER_SIGMA).floor();
        b.clamp(0.0, (n_bins - 1) as f64) as usize
    };
    let n = scn.n_total;
    let nn = scn.n_neighbors;

    let per_chunk: Vec<Vec<Stats>> = (0..n_chunks(trials))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng_for_chunk(seed, chunk);
            let mut bins = vec![Stats::default(); n_bins];
            let mut pairs = vec![(0.0, 0.0); n];
            for _ in 0..chunk_trials(chunk, trials) {
                let z_ref: f64 = rng.sample(StandardNormal);
                pairs[0] = (key(z_ref, z_ref, strategy, scn.offset), z_ref);
                for p in pairs.iter_mut().skip(1) {
                    let v: f64 = rng.sample(StandardNormal);
                    *p = (key(v, z_ref, strategy, scn.offset), v);
                }
                select_front(&mut pairs, nn);
                let est = pairs[..nn].iter().map(|p| p.1).sum::<f64>() / nn as f64;
                bins[bin_of(z_ref)].push(est);
            }
            bins
        })
        .collect();

    let mut bins = vec![Stats::default(); n_bins];
    for chunk in &per_chunk {
        for (acc, b) in bins.iter_mut().zip(chunk) {
            acc.merge(b);
        }
    }
    let s2 = scn.sigma * scn.sigma;
    let total = trials as f64;
    let (mut bias_sq, mut variance) = (0.0, 0.0);
    for b in bins.iter().filter(|b| b.n > 0.0) {
        bias_sq += b.n * b.mean * b.mean;
        variance += b.m2;
    }
    Ok(PredictionError::new(s2 * bias_sq / total, s2 * variance / total))
}
