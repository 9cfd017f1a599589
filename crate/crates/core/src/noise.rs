//! Noise synthesis: white Gaussian noise and colored noise produced by
//! demosaicing a noisy Bayer raster.
//!
//! Noise levels in [`NoiseSpec`] and [`RgbSigma`] are on the 0–255 scale;
//! images are on `[0, 1]`. Nothing here clips, except the CFA clamp that
//! [`NoiseSpec::clip_cfa`] opts into.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{pad_mirror, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDomain {
    /// Independent noise on every sample.
    #[default]
    White,
    /// Noise added to a Bayer mosaic that is then demosaiced.
    Bayer,
}

impl FromStr for NoiseDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" | "rgb" => Ok(Self::White),
            "bayer" | "colored" => Ok(Self::Bayer),
            _ => Err(Error::Parse(format!("unknown noise domain '{s}' (white, bayer)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation on the 0–255 scale.
    pub sigma: f64,
    pub seed: u64,
    pub domain: NoiseDomain,
    /// Clamp the noisy mosaic to `[0, 1]` before demosaicing. Off by default.
    pub clip_cfa: bool,
}

impl NoiseSpec {
    pub fn white(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            seed,
            domain: NoiseDomain::White,
            clip_cfa: false,
        }
    }

    pub fn bayer(sigma: f64, seed: u64) -> Self {
        Self {
            domain: NoiseDomain::Bayer,
            ..Self::white(sigma, seed)
        }
    }

    /// Standard deviation on the `[0, 1]` image scale.
    pub fn unit_sigma(&self) -> f64 {
        self.sigma / 255.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_finite() && self.sigma >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("noise sigma {} must be >= 0", self.sigma)))
        }
    }
}

/// Adds `G(0, σ²)` to every sample of `data`, viewed as rows of `row_len`.
/// Row `y` draws from stream `y` of the seeded generator.
fn add_gaussian(data: &mut [f64], row_len: usize, sigma: f64, seed: u64) {
    if sigma == 0.0 {
        return;
    }
    data.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(y as u64);
        for v in row {
            *v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    });
}

/// Adds independent Gaussian noise to every sample. The result is not clipped.
pub fn add_white_noise(img: &Image, spec: &NoiseSpec) -> Result<Image> {
    spec.validate()?;
    if spec.domain != NoiseDomain::White {
        return Err(Error::InvalidParams("add_white_noise needs the white domain".into()));
    }
    let row_len = img.width() * img.channels();
    let mut data = img.data().to_vec();
    add_gaussian(&mut data, row_len, spec.unit_sigma(), spec.seed);
    Image::new(img.width(), img.height(), img.channels(), data)
}

/// 2×2 colour filter array layouts, named by the top-left 2×2 block in raster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CfaPattern {
    #[default]
    Rggb,
    Grbg,
    Gbrg,
    Bggr,
}

const R: usize = 0;
const G: usize = 1;
const B: usize = 2;

impl CfaPattern {
    pub const ALL: [CfaPattern; 4] = [Self::Rggb, Self::Grbg, Self::Gbrg, Self::Bggr];

    fn layout(self) -> [usize; 4] {
        match self {
            Self::Rggb => [R, G, G, B],
            Self::Grbg => [G, R, B, G],
            Self::Gbrg => [G, B, R, G],
            Self::Bggr => [B, G, G, R],
        }
    }

    /// Channel sampled at `(x, y)`.
    #[inline]
    pub fn color_at(self, x: usize, y: usize) -> usize {
        self.layout()[(y % 2) * 2 + x % 2]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rggb => "rggb",
            Self::Grbg => "grbg",
            Self::Gbrg => "gbrg",
            Self::Bggr => "bggr",
        }
    }
}

impl fmt::Display for CfaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown CFA pattern '{s}' (rggb, grbg, gbrg, bggr)")))
    }
}

fn check_even(img: &Image) -> Result<()> {
    if img.width() % 2 == 1 || img.height() % 2 == 1 {
        return Err(Error::OddDimensions {
            width: img.width(),
            height: img.height(),
        });
    }
    Ok(())
}

/// Samples one channel per pixel according to `pattern`.
pub fn mosaic_bayer(img: &Image, pattern: CfaPattern) -> Result<Image> {
    if img.channels() != 3 {
        return Err(Error::InvalidImage(format!(
            "mosaicing needs 3 channels, got {}",
            img.channels()
        )));
    }
    check_even(img)?;
    Image::from_fn(img.width(), img.height(), 1, |x, y, _| img.get(x, y, pattern.color_at(x, y)))
}

type Stencil = [[f64; 5]; 5];

/// G at an R or B site.
const G_AT_RB: Stencil = [
    [0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 2.0, 0.0, 0.0],
    [-1.0, 2.0, 4.0, 2.0, -1.0],
    [0.0, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0],
];

/// R or B at a G site whose horizontal neighbours carry that colour.
const RB_AT_G_ROW: Stencil = [
    [0.0, 0.0, 0.5, 0.0, 0.0],
    [0.0, -1.0, 0.0, -1.0, 0.0],
    [-1.0, 4.0, 5.0, 4.0, -1.0],
    [0.0, -1.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0],
];

/// R or B at a G site whose vertical neighbours carry that colour.
const RB_AT_G_COL: Stencil = [
    [0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, -1.0, 4.0, -1.0, 0.0],
    [0.5, 0.0, 5.0, 0.0, 0.5],
    [0.0, -1.0, 4.0, -1.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0],
];

/// B at an R site, or R at a B site.
const RB_AT_BR: Stencil = [
    [0.0, 0.0, -1.5, 0.0, 0.0],
    [0.0, 2.0, 0.0, 2.0, 0.0],
    [-1.5, 0.0, 6.0, 0.0, -1.5],
    [0.0, 2.0, 0.0, 2.0, 0.0],
    [0.0, 0.0, -1.5, 0.0, 0.0],
];

/// How channel `c` is obtained at `(x, y)`: `None` for the native sample,
/// otherwise the stencil (coefficients to be divided by 8).
fn stencil_for(pattern: CfaPattern, x: usize, y: usize, c: usize) -> Option<&'static Stencil> {
    let site = pattern.color_at(x, y);
    if site == c {
        None
    } else if c == G {
        Some(&G_AT_RB)
    } else if site == G {
        if pattern.color_at(x + 1, y) == c {
            Some(&RB_AT_G_ROW)
        } else {
            Some(&RB_AT_G_COL)
        }
    } else {
        Some(&RB_AT_BR)
    }
}

/// Malvar–He–Cutler gradient-corrected linear demosaicing with mirror
/// padding at the borders (which keeps the CFA phase).
pub fn demosaic_malvar(cfa: &Image, pattern: CfaPattern) -> Result<Image> {
    if cfa.channels() != 1 {
        return Err(Error::InvalidImage(format!(
            "demosaicing needs 1 channel, got {}",
            cfa.channels()
        )));
    }
    check_even(cfa)?;
    let (w, h) = (cfa.width(), cfa.height());
    let padded = pad_mirror(cfa, 2);
    let pw = padded.width();
    let pd = padded.data();
    let mut out = vec![0.0; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for c in 0..3 {
                row[x * 3 + c] = match stencil_for(pattern, x, y, c) {
                    None => pd[(y + 2) * pw + x + 2],
                    Some(k) => {
                        let mut s = 0.0;
                        for (dy, krow) in k.iter().enumerate() {
                            let base = (y + dy) * pw + x;
                            for (dx, &coef) in krow.iter().enumerate() {
                                if coef != 0.0 {
                                    s += coef * pd[base + dx];
                                }
                            }
                        }
                        s / 8.0
                    }
                };
            }
        }
    });
    Image::new(w, h, 3, out)
}

/// Per-channel noise level after demosaicing. Same scale as the input noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbSigma {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbSigma {
    /// Single noise level for filtering all three channels: the channel mean.
    pub fn effective(&self) -> f64 {
        (self.r + self.g + self.b) / 3.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// Sidecar text format: one `sigma_<channel>=<value>` line per channel.
impl fmt::Display for RgbSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sigma_r={}", self.r)?;
        writeln!(f, "sigma_g={}", self.g)?;
        writeln!(f, "sigma_b={}", self.b)
    }
}

/// Parses the sidecar format. Blank lines and `#` comments are skipped;
/// each channel must appear exactly once with a finite, non-negative value.
impl FromStr for RgbSigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 3] = [None; 3];
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let slot = match key.trim() {
                "sigma_r" => 0,
                "sigma_g" => 1,
                "sigma_b" => 2,
                _ => return Err(bad("unknown key")),
            };
            let v: f64 = value.trim().parse().map_err(|_| bad("invalid number"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad("sigma must be finite and >= 0"));
            }
            if vals[slot].replace(v).is_some() {
                return Err(bad("duplicate key"));
            }
        }
        match vals {
            [Some(r), Some(g), Some(b)] => Ok(Self { r, g, b }),
            _ => Err(Error::Parse("sigma_r, sigma_g and sigma_b are all required".into())),
        }
    }
}

/// Noise level of each demosaiced channel when every CFA sample carries
/// independent noise of level `sigma_bayer`: `σ · sqrt(mean Σ k²)`, the mean
/// running over the four sites of the 2×2 tile.
pub fn propagate_sigma_rgb(sigma_bayer: f64, pattern: CfaPattern) -> RgbSigma {
    let mut gain = [0.0; 3];
    for (c, g) in gain.iter_mut().enumerate() {
        for (x, y) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            *g += match stencil_for(pattern, x, y, c) {
                None => 1.0,
                Some(k) => k.iter().flatten().map(|v| v * v).sum::<f64>() / 64.0,
            };
        }
        *g /= 4.0;
    }
    RgbSigma {
        r: sigma_bayer * gain[R].sqrt(),
        g: sigma_bayer * gain[G].sqrt(),
        b: sigma_bayer * gain[B].sqrt(),
    }
}

/// Mosaic, add noise to the mosaic, demosaic. Returns the noisy RGB image and
/// the propagated per-channel noise level (0–255 scale).
pub fn colored_noise_pipeline(img: &Image, spec: &NoiseSpec, pattern: CfaPattern) -> Result<(Image, RgbSigma)> {
    spec.validate()?;
    if spec.domain != NoiseDomain::Bayer {
        return Err(Error::InvalidParams("colored_noise_pipeline needs the bayer domain".into()));
    }
    let cfa = mosaic_bayer(img, pattern)?;
    let (w, h) = (cfa.width(), cfa.height());
    let mut data = cfa.into_data();
    add_gaussian(&mut data, w, spec.unit_sigma(), spec.seed);
    if spec.clip_cfa {
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    let noisy = demosaic_malvar(&Image::new(w, h, 1, data)?, pattern)?;
    Ok((noisy, propagate_sigma_rgb(spec.sigma, pattern)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_rgb(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| {
            let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
            0.2 + 0.3 * fx + 0.2 * fy + 0.05 * c as f64 + 0.05 * fx * fy
        })
        .unwrap()
    }

    /// Lag-(dx, dy) autocorrelation of a single-channel residual.
    fn autocorr(r: &[f64], w: usize, h: usize, dx: usize, dy: usize) -> f64 {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64;
        let mut s = 0.0;
        let mut n = 0.0;
        for y in 0..h - dy {
            for x in 0..w - dx {
                s += (r[y * w + x] - mean) * (r[(y + dy) * w + x + dx] - mean);
                n += 1.0;
            }
        }
        s / n / var
    }

    fn channel_residual(a: &Image, b: &Image, c: usize) -> Vec<f64> {
        (0..a.height())
            .flat_map(|y| (0..a.width()).map(move |x| (x, y)))
            .map(|(x, y)| a.get(x, y, c) - b.get(x, y, c))
            .collect()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = smooth_rgb(8, 6);
        assert_eq!(add_white_noise(&img, &NoiseSpec::white(0.0, 1)).unwrap(), img);
    }

    #[test]
    fn white_noise_statistics() {
        let img = Image::filled(256, 256, 1, 0.5).unwrap();
        let noisy = add_white_noise(&img, &NoiseSpec::white(20.0, 3)).unwrap();
        let r: Vec<f64> = noisy.data().iter().map(|v| v - 0.5).collect();
        let sd = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
        assert!((sd * 255.0 / 20.0 - 1.0).abs() < 0.02, "{}", sd * 255.0);
        for (dx, dy) in [(1, 0), (0, 1), (1, 1), (2, 0)] {
            assert!(autocorr(&r, 256, 256, dx, dy).abs() < 0.02);
        }
    }

    #[test]
    fn white_noise_is_seeded() {
        let img = smooth_rgb(10, 10);
        let a = add_white_noise(&img, &NoiseSpec::white(10.0, 9)).unwrap();
        let b = add_white_noise(&img, &NoiseSpec::white(10.0, 9)).unwrap();
        let c = add_white_noise(&img, &NoiseSpec::white(10.0, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(add_white_noise(&img, &NoiseSpec::bayer(10.0, 9)).is_err());
        assert!(add_white_noise(&img, &NoiseSpec::white(-1.0, 9)).is_err());
    }

    #[test]
    fn pattern_read_off() {
        let px = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9], [0.15, 0.25, 0.35]];
        let img = Image::new(2, 2, 3, px.iter().flatten().copied().collect()).unwrap();
        let cases = [
            (CfaPattern::Rggb, [0.1, 0.5, 0.8, 0.35]),
            (CfaPattern::Grbg, [0.2, 0.4, 0.9, 0.25]),
            (CfaPattern::Gbrg, [0.2, 0.6, 0.7, 0.25]),
            (CfaPattern::Bggr, [0.3, 0.5, 0.8, 0.15]),
        ];
        for (p, want) in cases {
            assert_eq!(mosaic_bayer(&img, p).unwrap().data(), want, "{p}");
        }
    }

    #[test]
    fn mosaic_rejects_bad_input() {
        assert!(matches!(
            mosaic_bayer(&smooth_rgb(5, 4), CfaPattern::Rggb),
            Err(Error::OddDimensions { .. })
        ));
        assert!(mosaic_bayer(&Image::filled(4, 4, 1, 0.0).unwrap(), CfaPattern::Rggb).is_err());
        assert!(demosaic_malvar(&Image::filled(4, 3, 1, 0.0).unwrap(), CfaPattern::Rggb).is_err());
    }

    #[test]
    fn stencils_sum_to_one() {
        for k in [&G_AT_RB, &RB_AT_G_ROW, &RB_AT_G_COL, &RB_AT_BR] {
            assert_eq!(k.iter().flatten().sum::<f64>(), 8.0);
        }
        for (i, row) in RB_AT_G_ROW.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, RB_AT_G_COL[j][i]);
            }
        }
    }

    #[test]
    fn constant_cfa_gives_constant_rgb() {
        for p in CfaPattern::ALL {
            let out = demosaic_malvar(&Image::filled(8, 6, 1, 0.42).unwrap(), p).unwrap();
            assert!(out.data().iter().all(|v| (v - 0.42).abs() < 1e-15));
        }
    }

    #[test]
    fn hand_computed_fixture() {
        // Interior pixels of a 6×6 RGGB raster, written out term by term.
        let v = |x: i64, y: i64| ((x * 7 + y * 13) % 17) as f64 / 16.0;
        let cfa = Image::from_fn(6, 6, 1, |x, y, _| v(x as i64, y as i64)).unwrap();
        let out = demosaic_malvar(&cfa, CfaPattern::Rggb).unwrap();
        let cross = |x, y| v(x - 1, y) + v(x + 1, y) + v(x, y - 1) + v(x, y + 1);
        let far_cross = |x, y| v(x - 2, y) + v(x + 2, y) + v(x, y - 2) + v(x, y + 2);
        let diag = |x, y| v(x - 1, y - 1) + v(x + 1, y - 1) + v(x - 1, y + 1) + v(x + 1, y + 1);
        let horiz = |x, y| v(x - 1, y) + v(x + 1, y);
        let vert = |x, y| v(x, y - 1) + v(x, y + 1);
        let far_h = |x, y| v(x - 2, y) + v(x + 2, y);
        let far_v = |x, y| v(x, y - 2) + v(x, y + 2);
        for y in 2..4i64 {
            for x in 2..4i64 {
                let c = v(x, y);
                let g_at_rb = (4.0 * c + 2.0 * cross(x, y) - far_cross(x, y)) / 8.0;
                let rb_at_br = (6.0 * c + 2.0 * diag(x, y) - 1.5 * far_cross(x, y)) / 8.0;
                let row_nb = (5.0 * c + 4.0 * horiz(x, y) - diag(x, y) - far_h(x, y) + 0.5 * far_v(x, y)) / 8.0;
                let col_nb = (5.0 * c + 4.0 * vert(x, y) - diag(x, y) - far_v(x, y) + 0.5 * far_h(x, y)) / 8.0;
                let want = match (x % 2, y % 2) {
                    (0, 0) => [c, g_at_rb, rb_at_br],
                    (1, 0) => [row_nb, c, col_nb],
                    (0, 1) => [col_nb, c, row_nb],
                    _ => [rb_at_br, g_at_rb, c],
                };
                for (ch, w) in want.iter().enumerate() {
                    let got = out.get(x as usize, y as usize, ch);
                    assert!((got - w).abs() < 1e-12, "({x},{y}) c{ch}: {got} vs {w}");
                }
            }
        }
    }

    #[test]
    fn demosaic_is_linear() {
        let a = Image::from_fn(8, 8, 1, |x, y, _| ((x * 3 + y * 5) % 7) as f64 / 7.0).unwrap();
        let b = Image::from_fn(8, 8, 1, |x, y, _| ((x * x + y) % 5) as f64 / 5.0).unwrap();
        let combo = Image::new(8, 8, 1, a.data().iter().zip(b.data()).map(|(p, q)| 0.3 * p - 1.7 * q).collect()).unwrap();
        let (da, db) = (demosaic_malvar(&a, CfaPattern::Grbg).unwrap(), demosaic_malvar(&b, CfaPattern::Grbg).unwrap());
        let dc = demosaic_malvar(&combo, CfaPattern::Grbg).unwrap();
        for ((c, p), q) in dc.data().iter().zip(da.data()).zip(db.data()) {
            assert!((c - (0.3 * p - 1.7 * q)).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_on_smooth_gradient() {
        for p in CfaPattern::ALL {
            let img = smooth_rgb(64, 64);
            let back = demosaic_malvar(&mosaic_bayer(&img, p).unwrap(), p).unwrap();
            let err = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 2.0 / 255.0, "{p}: {err}");
        }
    }

    #[test]
    fn translation_by_two_commutes() {
        let cfa = Image::from_fn(16, 16, 1, |x, y, _| ((x * 11 + y * 7) % 13) as f64 / 13.0).unwrap();
        let shifted = cfa.crop(2, 2, 12, 12).unwrap();
        let full = demosaic_malvar(&cfa, CfaPattern::Rggb).unwrap();
        let part = demosaic_malvar(&shifted, CfaPattern::Rggb).unwrap();
        // away from both borders the outputs agree
        for y in 2..10 {
            for x in 2..10 {
                for c in 0..3 {
                    assert_eq!(part.get(x, y, c), full.get(x + 2, y + 2, c));
                }
            }
        }
    }

    #[test]
    fn sigma_propagation_values() {
        let s = propagate_sigma_rgb(1.0, CfaPattern::Rggb);
        assert!((s.r - (252.0f64 / 256.0).sqrt()).abs() < 1e-15);
        assert!((s.b - s.r).abs() < 1e-15);
        assert!((s.g - (200.0f64 / 256.0).sqrt()).abs() < 1e-15);
        for p in CfaPattern::ALL {
            assert_eq!(propagate_sigma_rgb(1.0, p), s);
            assert_eq!(propagate_sigma_rgb(0.0, p).as_array(), [0.0; 3]);
        }
    }

    #[test]
    fn sigma_propagation_matches_simulation() {
        let (w, h) = (320, 320);
        let clean = Image::filled(w, h, 1, 0.0).unwrap();
        let mut data = clean.data().to_vec();
        add_gaussian(&mut data, w, 1.0, 17);
        let noisy = demosaic_malvar(&Image::new(w, h, 1, data).unwrap(), CfaPattern::Rggb).unwrap();
        let want = propagate_sigma_rgb(1.0, CfaPattern::Rggb).as_array();
        for (c, want) in want.iter().enumerate() {
            let n = (w * h) as f64;
            let sd = ((0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| noisy.get(x, y, c).powi(2)).sum::<f64>() / n).sqrt();
            assert!((sd / want - 1.0).abs() < 0.03, "c{c}: {sd} vs {want}");
        }
    }

    #[test]
    fn colored_noise_is_correlated() {
        let img = Image::filled(128, 128, 3, 0.5).unwrap();
        let (noisy, sig) = colored_noise_pipeline(&img, &NoiseSpec::bayer(20.0, 4), CfaPattern::Rggb).unwrap();
        assert_eq!(sig, propagate_sigma_rgb(20.0, CfaPattern::Rggb));
        for c in 0..3 {
            let r = channel_residual(&noisy, &img, c);
            assert!(autocorr(&r, 128, 128, 1, 0) >= 0.1, "c{c}");
        }
        let white = add_white_noise(&img, &NoiseSpec::white(20.0, 4)).unwrap();
        assert!(autocorr(&channel_residual(&white, &img, 1), 128, 128, 1, 0).abs() < 0.02);
    }

    #[test]
    fn zero_sigma_pipeline_is_round_trip() {
        let img = smooth_rgb(16, 16);
        let (noisy, _) = colored_noise_pipeline(&img, &NoiseSpec::bayer(0.0, 1), CfaPattern::Bggr).unwrap();
        let rt = demosaic_malvar(&mosaic_bayer(&img, CfaPattern::Bggr).unwrap(), CfaPattern::Bggr).unwrap();
        assert_eq!(noisy, rt);
    }

    #[test]
    fn cfa_clip_flag() {
        let img = Image::filled(16, 16, 3, 0.99).unwrap();
        let spec = NoiseSpec {
            clip_cfa: true,
            ..NoiseSpec::bayer(40.0, 2)
        };
        let (clipped, _) = colored_noise_pipeline(&img, &spec, CfaPattern::Rggb).unwrap();
        let (free, _) = colored_noise_pipeline(&img, &NoiseSpec::bayer(40.0, 2), CfaPattern::Rggb).unwrap();
        assert!(free.min_max().1 > clipped.min_max().1);
    }

    #[test]
    fn sidecar_round_trip() {
        let s = propagate_sigma_rgb(20.0, CfaPattern::Rggb);
        let back: RgbSigma = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        let parsed: RgbSigma = "# noise\n sigma_b = 3\nsigma_r=1\n\nsigma_g=2.5\n".parse().unwrap();
        assert_eq!(parsed.as_array(), [1.0, 2.5, 3.0]);
        assert_eq!(parsed.effective(), 6.5 / 3.0);
        for bad in [
            "sigma_r=1\nsigma_g=2",
            "sigma_r=1\nsigma_g=2\nsigma_b=3\nsigma_r=1",
            "sigma_r=1\nsigma_g=2\nsigma_x=3",
            "sigma_r=-1\nsigma_g=2\nsigma_b=3",
            "sigma_r=nan\nsigma_g=2\nsigma_b=3",
            "sigma_r 1",
        ] {
            assert!(bad.parse::<RgbSigma>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("GRBG".parse::<CfaPattern>().unwrap(), CfaPattern::Grbg);
        assert!("rgbg".parse::<CfaPattern>().is_err());
        assert_eq!("bayer".parse::<NoiseDomain>().unwrap(), NoiseDomain::Bayer);
        assert!("pink".parse::<NoiseDomain>().is_err());
    }
}
