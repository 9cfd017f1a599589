//! PSNR and SSIM.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::Image;

/// SSIM window side.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )))
    }
}

/// `10 log10(peak² / MSE)` over all samples; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    check_shapes(a, b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable Gaussian filter over valid positions only.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, c)| c * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), `K1 = 0.01`,
/// `K2 = 0.03`, dynamic range 1, averaged over the window positions that fit
/// inside the image. RGB inputs are compared on their BT.601 luma.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let (la, lb) = (a.to_luma(), b.to_luma());
    let (x, y) = (la.data(), lb.data());
    let k = gaussian_window();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| f(*p, *q)).collect() };
    let mu_x = filter_valid(x, w, h, &k);
    let mu_y = filter_valid(y, w, h, &k);
    let xx = filter_valid(&prod(&|p, _| p * p), w, h, &k);
    let yy = filter_valid(&prod(&|_, q| q * q), w, h, &k);
    let xy = filter_valid(&prod(&|p, q| p * q), w, h, &k);
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

/// PSNR (peak 1) and SSIM of an estimate against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compare(estimate: &Image, reference: &Image) -> Result<Self> {
        Ok(Self {
            psnr: psnr(estimate, reference, 1.0)?,
            ssim: ssim(estimate, reference)?,
        })
    }
}

/// Single-line `psnr=<dB> ssim=<value>`; identical images print `psnr=inf`.
impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.psnr.is_infinite() {
            write!(f, "psnr=inf ssim={:.6}", self.ssim)
        } else {
            write!(f, "psnr={:.4} ssim={:.6}", self.psnr, self.ssim)
        }
    }
}
