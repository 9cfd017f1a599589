//! NLM configuration.

use crate::error::{Error, Result};

/// Default ratio `h / σ` of the filtering parameter to the noise level.
pub const DEFAULT_H_FACTOR: f64 = 0.75;

/// Parameters of one NLM run. Intensities (`h`, `sigma`) are on the same
/// scale as the image samples, i.e. `[0, 1]` for images loaded from disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmParams {
    /// Patch side in pixels (odd).
    pub patch_side: usize,
    /// Search window side in pixels (odd).
    pub search_side: usize,
    /// Number of neighbours averaged per reference patch.
    pub n_neighbors: usize,
    /// SNN offset `o`: 0 selects nearest neighbours, 1 targets `2σ²`.
    pub offset: f64,
    /// Filtering parameter of the exponential weight.
    pub h: f64,
    /// Standard deviation of the noise.
    pub sigma: f64,
}

impl NlmParams {
    /// 3×3 patches, 21×21 window, 16 neighbours, `o = 0.8`, `h = 0.75σ`.
    ///
    /// With `sigma == 0` the filtering parameter falls back to
    /// `0.75 / 255` so that it stays strictly positive.
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            patch_side: 3,
            search_side: 21,
            n_neighbors: 16,
            offset: 0.8,
            h: default_h(sigma),
            sigma,
        }
    }

    /// Patch size, window size and `h` from the standard NLM parameter table
    /// (Buades, Coll & Morel), indexed by the noise level on the 0–255 scale.
    /// `n_neighbors` and `offset` keep the [`NlmParams::with_sigma`] defaults.
    ///
    /// | channels | σ (0–255)  | patch | window | h     |
    /// |----------|------------|-------|--------|-------|
    /// | 1        | ≤ 15       | 3     | 21     | 0.40σ |
    /// | 1        | (15, 30]   | 5     | 21     | 0.40σ |
    /// | 1        | (30, 45]   | 7     | 35     | 0.35σ |
    /// | 1        | (45, 75]   | 9     | 35     | 0.35σ |
    /// | 1        | > 75       | 11    | 35     | 0.30σ |
    /// | 3        | ≤ 25       | 3     | 21     | 0.55σ |
    /// | 3        | (25, 55]   | 5     | 35     | 0.40σ |
    /// | 3        | > 55       | 7     | 35     | 0.35σ |
    pub fn reference_table(sigma: f64, channels: usize) -> Self {
        let s255 = sigma * 255.0;
        let (patch_side, search_side, factor) = if channels == 3 {
            match s255 {
                s if s <= 25.0 => (3, 21, 0.55),
                s if s <= 55.0 => (5, 35, 0.40),
                _ => (7, 35, 0.35),
            }
        } else {
            match s255 {
                s if s <= 15.0 => (3, 21, 0.40),
                s if s <= 30.0 => (5, 21, 0.40),
                s if s <= 45.0 => (7, 35, 0.35),
                s if s <= 75.0 => (9, 35, 0.35),
                _ => (11, 35, 0.30),
            }
        };
        let h = if sigma > 0.0 { factor * sigma } else { default_h(0.0) };
        Self {
            patch_side,
            search_side,
            h,
            ..Self::with_sigma(sigma)
        }
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_side / 2
    }

    pub fn search_radius(&self) -> usize {
        self.search_side / 2
    }

    /// Candidate positions in the search window.
    pub fn candidates(&self) -> usize {
        self.search_side * self.search_side
    }

    /// Padding needed so every pixel owns a full search window of full patches.
    pub fn margin(&self) -> usize {
        self.patch_radius() + self.search_radius()
    }

    /// The squared distance SNN ranks candidates against, `o · 2σ²`.
    pub fn snn_target(&self) -> f64 {
        self.offset * 2.0 * self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.patch_side % 2 == 0 || self.search_side % 2 == 0 {
            return bad(format!(
                "patch side {} and search side {} must be odd",
                self.patch_side, self.search_side
            ));
        }
        if self.patch_side > self.search_side {
            return bad(format!(
                "patch side {} exceeds search side {}",
                self.patch_side, self.search_side
            ));
        }
        if self.n_neighbors == 0 || self.n_neighbors > self.candidates() {
            return bad(format!(
                "neighbour count {} outside 1..={}",
                self.n_neighbors,
                self.candidates()
            ));
        }
        if !(0.0..=1.0).contains(&self.offset) {
            return bad(format!("offset {} outside [0, 1]", self.offset));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("filtering parameter h = {} must be > 0", self.h));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!("sigma = {} must be >= 0", self.sigma));
        }
        Ok(())
    }
}

fn default_h(sigma: f64) -> f64 {
    if sigma > 0.0 {
        DEFAULT_H_FACTOR * sigma
    } else {
        DEFAULT_H_FACTOR / 255.0
    }
}
