//! NLM weights, per-patch estimates and whole-image denoising.
//!
//! [`denoise_image`] processes one reference patch per pixel. For every
//! reference row it computes the squared distances to all window offsets with
//! a column-sum kernel, selects neighbours per pixel, averages them, and the
//! overlapping patch estimates are then averaged per pixel.
//!
//! Rows are processed in parallel; their estimates are merged in row order so
//! the output does not depend on the number of threads.

use rayon::prelude::*;

use crate::error::Result;
use crate::image::{pad_mirror, Image, PatchRef};
use crate::params::NlmParams;
use crate::search::{select_unordered, selection_key, NeighborSet, Strategy};

/// Weight of a neighbour at squared distance `sq_dist`:
/// `exp(-max(0, δ² − 2σ²) / h²)`.
#[inline]
pub fn nlm_weight(sq_dist: f64, params: &NlmParams) -> f64 {
    let excess = (sq_dist - 2.0 * params.sigma * params.sigma).max(0.0);
    (-excess / (params.h * params.h)).exp()
}

/// Denoised values of one reference patch, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEstimate {
    pub reference: PatchRef,
    pub values: Vec<f64>,
}

/// Weighted mean of the neighbour patches.
///
/// Neighbours are accumulated in raster order of their position, not in
/// selection order, so two sets holding the same patches give bit-identical
/// estimates.
///
/// # Panics
/// If `neighbors` is empty.
pub fn denoise_patch(img: &Image, neighbors: &NeighborSet, params: &NlmParams) -> PatchEstimate {
    assert!(!neighbors.is_empty(), "empty neighbour set");
    let mut order: Vec<usize> = (0..neighbors.len()).collect();
    order.sort_by_key(|&i| {
        let p = neighbors.entries[i].patch;
        (p.y, p.x)
    });
    let len = neighbors.reference.len(img.channels());
    let mut acc = vec![0.0; len];
    let mut wsum = 0.0;
    for i in order {
        let n = &neighbors.entries[i];
        let w = nlm_weight(n.sq_distance, params);
        for (a, v) in acc.iter_mut().zip(n.patch.values(img)) {
            *a += w * v;
        }
        wsum += w;
    }
    for a in &mut acc {
        *a /= wsum;
    }
    PatchEstimate {
        reference: neighbors.reference,
        values: acc,
    }
}

/// Rows of reference patches handed to the thread pool at once.
const ROW_BLOCK: usize = 16;

/// Denoises `img` with one reference patch per pixel and uniform aggregation
/// of the overlapping estimates. Output has the input's shape.
pub fn denoise_image(img: &Image, params: &NlmParams, strategy: Strategy) -> Result<Image> {
    params.validate()?;
    let kernel = RowKernel::new(img, params, strategy);
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let ps = params.patch_side;
    let pr = params.patch_radius() as isize;

    let mut acc = vec![0.0; w * h * c];
    let mut count = vec![0u32; w * h];
    let mut start = 0;
    while start < h {
        let end = (start + ROW_BLOCK).min(h);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map_init(|| kernel.scratch(), |scratch, y| kernel.row_estimates(y, scratch))
            .collect();
        for (y, estimates) in (start..end).zip(rows) {
            for x in 0..w {
                let est = &estimates[x * ps * ps * c..(x + 1) * ps * ps * c];
                for ey in 0..ps {
                    let oy = y as isize - pr + ey as isize;
                    if oy < 0 || oy >= h as isize {
                        continue;
                    }
                    for ex in 0..ps {
                        let ox = x as isize - pr + ex as isize;
                        if ox < 0 || ox >= w as isize {
                            continue;
                        }
                        let pix = oy as usize * w + ox as usize;
                        let src = (ey * ps + ex) * c;
                        for ch in 0..c {
                            acc[pix * c + ch] += est[src + ch];
                        }
                        count[pix] += 1;
                    }
                }
            }
        }
        start = end;
    }
    for (pix, &n) in count.iter().enumerate() {
        for ch in 0..c {
            acc[pix * c + ch] /= n as f64;
        }
    }
    Image::new(w, h, c, acc)
}

/// Per-row distance, selection and averaging over a padded image.
struct RowKernel<'a> {
    params: &'a NlmParams,
    strategy: Strategy,
    padded: Image,
    width: usize,
    channels: usize,
    offsets: Vec<(isize, isize)>,
}

struct Scratch {
    /// Squared distances, `[x][offset]`.
    dist: Vec<f64>,
    cols: Vec<f64>,
    keys: Vec<f64>,
    picked: Vec<usize>,
}

impl<'a> RowKernel<'a> {
    fn new(img: &Image, params: &'a NlmParams, strategy: Strategy) -> Self {
        let sr = params.search_radius() as isize;
        let offsets = (-sr..=sr)
            .flat_map(|dy| (-sr..=sr).map(move |dx| (dy, dx)))
            .collect();
        Self {
            params,
            strategy,
            padded: pad_mirror(img, params.margin()),
            width: img.width(),
            channels: img.channels(),
            offsets,
        }
    }

    fn scratch(&self) -> Scratch {
        let k = self.offsets.len();
        Scratch {
            dist: vec![0.0; self.width * k],
            cols: vec![0.0; self.width + self.params.patch_side - 1],
            keys: vec![0.0; k],
            picked: Vec::with_capacity(k),
        }
    }

    /// Top-left corner, in padded coordinates, of the reference patch of pixel `(x, y)`.
    #[inline]
    fn origin(&self, x: usize, y: usize) -> (usize, usize) {
        let sr = self.params.search_radius();
        (x + sr, y + sr)
    }

    /// Squared distances from every reference patch of row `y` to every
    /// window offset. Same summation order as [`crate::image::patch_sq_distance`].
    fn row_distances(&self, y: usize, scratch: &mut Scratch) {
        let ps = self.params.patch_side;
        let c = self.channels;
        let pw = self.padded.width();
        let data = self.padded.data();
        let k_total = self.offsets.len();
        let norm = (ps * ps * c) as f64;
        let (x0, y0) = self.origin(0, y);
        for (k, &(dy, dx)) in self.offsets.iter().enumerate() {
            let ny0 = (y0 as isize + dy) as usize;
            let nx0 = (x0 as isize + dx) as usize;
            for (j, col) in scratch.cols.iter_mut().enumerate() {
                let mut s = 0.0;
                for ey in 0..ps {
                    let ia = ((y0 + ey) * pw + x0 + j) * c;
                    let ib = ((ny0 + ey) * pw + nx0 + j) * c;
                    for ch in 0..c {
                        let d = data[ia + ch] - data[ib + ch];
                        s += d * d;
                    }
                }
                *col = s;
            }
            for x in 0..self.width {
                let mut s = 0.0;
                for col in &scratch.cols[x..x + ps] {
                    s += col;
                }
                scratch.dist[x * k_total + k] = s / norm;
            }
        }
    }

    /// Patch estimates for every pixel of row `y`, concatenated.
    fn row_estimates(&self, y: usize, scratch: &mut Scratch) -> Vec<f64> {
        self.row_distances(y, scratch);
        let ps = self.params.patch_side;
        let c = self.channels;
        let plen = ps * ps * c;
        let pw = self.padded.width();
        let data = self.padded.data();
        let k_total = self.offsets.len();
        let target = self.params.snn_target();
        let mut out = vec![0.0; self.width * plen];
        for x in 0..self.width {
            let dist = &scratch.dist[x * k_total..(x + 1) * k_total];
            for (key, &d) in scratch.keys.iter_mut().zip(dist) {
                *key = selection_key(d, self.strategy, target);
            }
            select_unordered(&scratch.keys, self.params.n_neighbors, &mut scratch.picked);
            scratch.picked.sort_unstable();

            let est = &mut out[x * plen..(x + 1) * plen];
            let (x0, y0) = self.origin(x, y);
            let mut wsum = 0.0;
            for &k in &scratch.picked {
                let w = nlm_weight(dist[k], self.params);
                let (dy, dx) = self.offsets[k];
                let nx = (x0 as isize + dx) as usize;
                let ny = (y0 as isize + dy) as usize;
                for ey in 0..ps {
                    let src = &data[((ny + ey) * pw + nx) * c..][..ps * c];
                    for (e, v) in est[ey * ps * c..(ey + 1) * ps * c].iter_mut().zip(src) {
                        *e += w * v;
                    }
                }
                wsum += w;
            }
            for e in est.iter_mut() {
                *e /= wsum;
            }
        }
        out
    }
}
