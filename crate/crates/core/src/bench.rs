//! Parameter sweeps over a set of images, with CSV output.
//!
//! Each image is corrupted once per noise level, then denoised with every
//! (offset, neighbour count) pair. Offset 0 runs plain NN selection, any
//! other offset runs SNN. Images are processed one at a time so `wall_ms`
//! measures a single denoising call; rows within an image run in parallel.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::filter::denoise_image;
use crate::image::Image;
use crate::io::load_image;
use crate::metrics::{psnr, ssim};
use crate::noise::{add_white_noise, colored_noise_pipeline, CfaPattern, NoiseDomain, NoiseSpec};
use crate::params::NlmParams;
use crate::search::Strategy;

/// Label of the per-configuration mean rows.
pub const AGGREGATE_LABEL: &str = "mean";

pub const CSV_HEADER: [&str; 8] = ["image", "sigma", "strategy", "n_neighbors", "offset", "psnr", "ssim", "wall_ms"];

/// How patch size, window size and `h` follow from the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// [`NlmParams::reference_table`].
    #[default]
    ReferenceTable,
    /// [`NlmParams::with_sigma`].
    Default,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Noise levels on the 0–255 scale.
    pub sigmas: Vec<f64>,
    pub offsets: Vec<f64>,
    pub n_neighbors: Vec<usize>,
    pub seed: u64,
    pub domain: NoiseDomain,
    pub pattern: CfaPattern,
    pub preset: Preset,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![5.0, 10.0, 20.0, 30.0, 40.0],
            offsets: vec![0.0, 0.8, 1.0],
            n_neighbors: vec![4, 8, 16, 32],
            seed: 0,
            domain: NoiseDomain::White,
            pattern: CfaPattern::Rggb,
            preset: Preset::ReferenceTable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub sigma: f64,
    pub strategy: Strategy,
    pub n_neighbors: usize,
    pub offset: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub wall_ms: f64,
}

/// Strategy used for a given offset.
pub fn strategy_for(offset: f64) -> Strategy {
    if offset == 0.0 {
        Strategy::Nn
    } else {
        Strategy::Snn
    }
}

/// Noisy copy of `img` and the noise level (0–255) the filter should assume.
pub fn corrupt(img: &Image, sigma: f64, seed: u64, domain: NoiseDomain, pattern: CfaPattern) -> Result<(Image, f64)> {
    match domain {
        NoiseDomain::White => Ok((add_white_noise(img, &NoiseSpec::white(sigma, seed))?, sigma)),
        NoiseDomain::Bayer => {
            let (noisy, rgb) = colored_noise_pipeline(img, &NoiseSpec::bayer(sigma, seed), pattern)?;
            Ok((noisy, rgb.effective()))
        }
    }
}

/// Filter parameters for noise level `sigma` (0–255).
pub fn params_for(preset: Preset, sigma: f64, channels: usize, n_neighbors: usize, offset: f64) -> NlmParams {
    let s = sigma / 255.0;
    let base = match preset {
        Preset::ReferenceTable => NlmParams::reference_table(s, channels),
        Preset::Default => NlmParams::with_sigma(s),
    };
    NlmParams {
        n_neighbors,
        offset,
        ..base
    }
}

/// Seed for the noise of image `i` at noise level `j`.
fn noise_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed.wrapping_add((i as u64) << 32).wrapping_add(j as u64)
}

/// Runs the sweep. Data rows come in input order (image, σ, offset, `N_n`),
/// followed by one [`AGGREGATE_LABEL`] row per configuration.
pub fn run(images: &[(String, Image)], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if images.is_empty() || cfg.sigmas.is_empty() || cfg.offsets.is_empty() || cfg.n_neighbors.is_empty() {
        return Err(Error::InvalidParams("bench needs images, sigmas, offsets and neighbour counts".into()));
    }
    let mut rows = Vec::new();
    for (i, (name, clean)) in images.iter().enumerate() {
        for (j, &sigma) in cfg.sigmas.iter().enumerate() {
            let (noisy, filter_sigma) = corrupt(clean, sigma, noise_seed(cfg.seed, i, j), cfg.domain, cfg.pattern)?;
            for &offset in &cfg.offsets {
                for &nn in &cfg.n_neighbors {
                    let p = params_for(cfg.preset, filter_sigma, clean.channels(), nn, offset);
                    let strategy = strategy_for(offset);
                    let start = Instant::now();
                    let out = denoise_image(&noisy, &p, strategy)?;
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    rows.push(BenchRow {
                        image: name.clone(),
                        sigma,
                        strategy,
                        n_neighbors: nn,
                        offset,
                        psnr: psnr(&out, clean, 1.0)?,
                        ssim: ssim(&out, clean)?,
                        wall_ms,
                    });
                }
            }
        }
    }
    let aggregates = aggregate(&rows);
    rows.extend(aggregates);
    Ok(rows)
}

/// Per-configuration means, in order of first appearance.
pub fn aggregate(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut out: Vec<(BenchRow, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.image != AGGREGATE_LABEL) {
        let same = |m: &BenchRow| {
            m.sigma == r.sigma && m.strategy == r.strategy && m.n_neighbors == r.n_neighbors && m.offset == r.offset
        };
        match out.iter_mut().find(|(m, _)| same(m)) {
            Some((m, n)) => {
                m.psnr += r.psnr;
                m.ssim += r.ssim;
                m.wall_ms += r.wall_ms;
                *n += 1;
            }
            None => out.push((
                BenchRow {
                    image: AGGREGATE_LABEL.to_string(),
                    ..r.clone()
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(mut m, n)| {
            m.psnr /= n as f64;
            m.ssim /= n as f64;
            m.wall_ms /= n as f64;
            m
        })
        .collect()
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.image.clone(),
            r.sigma.to_string(),
            r.strategy.to_string(),
            r.n_neighbors.to_string(),
            r.offset.to_string(),
            format!("{:.4}", r.psnr),
            format!("{:.6}", r.ssim),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// PNG / PGM / PPM files of `dir`, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, Image)>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pnm"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((name, load_image(&p)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Vec<(String, Image)> {
        let img = Image::from_fn(24, 24, 1, |x, y, _| if (x / 6 + y / 6) % 2 == 0 { 0.2 } else { 0.8 }).unwrap();
        vec![("checker".to_string(), img)]
    }

    #[test]
    fn single_config_gives_data_and_mean_row() {
        let cfg = BenchConfig {
            sigmas: vec![20.0],
            offsets: vec![0.8],
            n_neighbors: vec![8],
            ..BenchConfig::default()
        };
        let rows = run(&tiny(), &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].image, AGGREGATE_LABEL);
        assert_eq!(rows[0].psnr, rows[1].psnr);
        assert_eq!(rows[0].strategy, Strategy::Snn);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("image,sigma,strategy,n_neighbors,offset,psnr,ssim,wall_ms\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn aggregate_averages_per_configuration() {
        let row = |image: &str, nn, psnr| BenchRow {
            image: image.into(),
            sigma: 10.0,
            strategy: Strategy::Nn,
            n_neighbors: nn,
            offset: 0.0,
            psnr,
            ssim: 0.5,
            wall_ms: 1.0,
        };
        let agg = aggregate(&[row("a", 4, 30.0), row("a", 8, 31.0), row("b", 4, 32.0)]);
        assert_eq!(agg.len(), 2);
        assert_eq!((agg[0].n_neighbors, agg[0].psnr), (4, 31.0));
        assert_eq!((agg[1].n_neighbors, agg[1].psnr), (8, 31.0));
    }

    #[test]
    fn zero_offset_runs_nn() {
        assert_eq!(strategy_for(0.0), Strategy::Nn);
        assert_eq!(strategy_for(0.5), Strategy::Snn);
    }

    #[test]
    fn deterministic() {
        let cfg = BenchConfig {
            sigmas: vec![10.0],
            offsets: vec![0.0, 1.0],
            n_neighbors: vec![4],
            ..BenchConfig::default()
        };
        let strip = |mut v: Vec<BenchRow>| {
            v.iter_mut().for_each(|r| r.wall_ms = 0.0);
            v
        };
        assert_eq!(strip(run(&tiny(), &cfg).unwrap()), strip(run(&tiny(), &cfg).unwrap()));
    }

    #[test]
    fn rejects_empty_sweep() {
        let cfg = BenchConfig {
            offsets: vec![],
            ..BenchConfig::default()
        };
        assert!(run(&tiny(), &cfg).is_err());
    }
}
