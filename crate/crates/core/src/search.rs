//! Neighbour collection inside a search window.
//!
//! Every pixel position of the window is a candidate (stride 1), scanned in
//! raster order. Candidates are ranked by a selection key and the `N_n`
//! smallest are kept; equal keys are resolved by raster order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::image::{patch_sq_distance, Image, PatchRef};
use crate::params::NlmParams;

/// Neighbour selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Smallest squared distance.
    Nn,
    /// Squared distance closest to `o · 2σ²`.
    Snn,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Nn => "nn",
            Strategy::Snn => "snn",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nn" => Ok(Strategy::Nn),
            "snn" => Ok(Strategy::Snn),
            other => Err(Error::Parse(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub patch: PatchRef,
    /// Raw squared distance to the reference patch.
    pub sq_distance: f64,
    /// Value the candidate was ranked by.
    pub key: f64,
}

/// Selected neighbours, ascending by key (ties in raster order).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub reference: PatchRef,
    pub entries: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, patch: PatchRef) -> bool {
        self.entries.iter().any(|n| n.patch == patch)
    }
}

/// Candidate patches around `reference`, in raster order of the window.
///
/// # Panics
/// If the window around `reference` does not fit inside `img`.
pub fn window_candidates(img: &Image, reference: PatchRef, params: &NlmParams) -> Vec<PatchRef> {
    let sr = params.search_radius();
    assert!(
        reference.x >= sr
            && reference.y >= sr
            && reference.x + sr + reference.side <= img.width()
            && reference.y + sr + reference.side <= img.height(),
        "search window around {reference:?} leaves the {}x{} image",
        img.width(),
        img.height()
    );
    let mut out = Vec::with_capacity(params.candidates());
    for y in reference.y - sr..=reference.y + sr {
        for x in reference.x - sr..=reference.x + sr {
            out.push(PatchRef::new(x, y, reference.side));
        }
    }
    out
}

/// Squared distance from `reference` to every candidate, in raster order.
pub fn window_sq_distances(img: &Image, reference: PatchRef, params: &NlmParams) -> Vec<f64> {
    window_candidates(img, reference, params)
        .into_iter()
        .map(|c| patch_sq_distance(img, reference, c))
        .collect()
}

/// Selection key of a candidate with squared distance `sq_distance`.
#[inline]
pub fn selection_key(sq_distance: f64, strategy: Strategy, target: f64) -> f64 {
    match strategy {
        Strategy::Nn => sq_distance,
        Strategy::Snn => (sq_distance - target).abs(),
    }
}

#[inline]
fn rank(keys: &[f64], a: usize, b: usize) -> Ordering {
    keys[a].total_cmp(&keys[b]).then(a.cmp(&b))
}

/// Indices of the `n` smallest keys, in unspecified order.
pub(crate) fn select_unordered(keys: &[f64], n: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(0..keys.len());
    let n = n.min(keys.len());
    if n < keys.len() {
        out.select_nth_unstable_by(n - 1, |&a, &b| rank(keys, a, b));
        out.truncate(n);
    }
}

/// Indices of the `n` smallest keys, ascending by key then index.
pub fn select_ranked(keys: &[f64], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    select_unordered(keys, n, &mut out);
    out.sort_unstable_by(|&a, &b| rank(keys, a, b));
    out
}

/// Collects neighbours of `reference` with the given strategy.
pub fn collect(
    img: &Image,
    reference: PatchRef,
    params: &NlmParams,
    strategy: Strategy,
) -> NeighborSet {
    let candidates = window_candidates(img, reference, params);
    let distances: Vec<f64> = candidates
        .iter()
        .map(|&c| patch_sq_distance(img, reference, c))
        .collect();
    let target = params.snn_target();
    let keys: Vec<f64> = distances
        .iter()
        .map(|&d| selection_key(d, strategy, target))
        .collect();
    let entries = select_ranked(&keys, params.n_neighbors)
        .into_iter()
        .map(|i| Neighbor {
            patch: candidates[i],
            sq_distance: distances[i],
            key: keys[i],
        })
        .collect();
    NeighborSet { reference, entries }
}

/// The `N_n` candidates with the smallest squared distance.
pub fn collect_nn(img: &Image, reference: PatchRef, params: &NlmParams) -> NeighborSet {
    collect(img, reference, params, Strategy::Nn)
}

/// The `N_n` candidates minimising `|δ² − o·2σ²|`.
pub fn collect_snn(img: &Image, reference: PatchRef, params: &NlmParams) -> NeighborSet {
    collect(img, reference, params, Strategy::Snn)
}
