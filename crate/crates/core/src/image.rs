//! Raster type, mirror padding and patch distances.

use crate::error::{Error, Result};

/// Row-major raster with interleaved channels.
///
/// Samples are nominally in `[0, 1]`; values outside that range are kept
/// (noise may push them out) and only clipped when exporting to a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "data holds {} samples, {width}x{height}x{channels} needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// All channels of one row, interleaved.
    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Copies a `w`×`h` window starting at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidImage(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Image::new(w, h, c, data)
    }

    /// BT.601 luma for RGB images; single-channel images are returned as is.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Square patch addressed by its top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

impl PatchRef {
    pub fn new(x: usize, y: usize, side: usize) -> Self {
        Self { x, y, side }
    }

    /// Patch of side `side` centred on `(cx, cy)`; `side` must be odd and the
    /// centre at least `side / 2` away from the top and left borders.
    pub fn centered(cx: usize, cy: usize, side: usize) -> Self {
        let r = side / 2;
        Self {
            x: cx - r,
            y: cy - r,
            side,
        }
    }

    pub fn fits(&self, img: &Image) -> bool {
        self.side >= 1 && self.x + self.side <= img.width && self.y + self.side <= img.height
    }

    /// Number of elements over all channels.
    pub fn len(&self, channels: usize) -> usize {
        self.side * self.side * channels
    }

    /// Copies the patch samples in row-major, channel-interleaved order.
    pub fn values(&self, img: &Image) -> Vec<f64> {
        assert!(self.fits(img), "patch {self:?} outside image");
        let c = img.channels;
        let mut out = Vec::with_capacity(self.len(c));
        for y in self.y..self.y + self.side {
            let start = (y * img.width + self.x) * c;
            out.extend_from_slice(&img.data[start..start + self.side * c]);
        }
        out
    }
}

/// Reflects index `i` (which may lie outside `[0, n)`) back into range
/// without repeating the edge sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Mirror-pads `img` by `margin` pixels on every side.
///
/// Reflection does not repeat the edge pixel: the row `[a, b, c]` padded by
/// one becomes `[b, a, b, c, b]`. Margins larger than the image reflect
/// repeatedly.
pub fn pad_mirror(img: &Image, margin: usize) -> Image {
    if margin == 0 {
        return img.clone();
    }
    let (w, h, c) = (img.width, img.height, img.channels);
    let pw = w + 2 * margin;
    let ph = h + 2 * margin;
    let xs: Vec<usize> = (0..pw)
        .map(|x| reflect(x as isize - margin as isize, w))
        .collect();
    let mut data = Vec::with_capacity(pw * ph * c);
    for py in 0..ph {
        let src = img.row(reflect(py as isize - margin as isize, h));
        for &sx in &xs {
            data.extend_from_slice(&src[sx * c..(sx + 1) * c]);
        }
    }
    Image {
        width: pw,
        height: ph,
        channels: c,
        data,
    }
}

/// Mean squared difference between two equally sized patches, averaged over
/// every element of every channel.
///
/// Summation order is fixed: for each patch column, the column's squared
/// differences (rows, then channels) are summed first, then the column sums
/// are added left to right. The fast row kernel in [`crate::filter`]
/// reproduces this order exactly.
///
/// # Panics
/// If the patch sides differ or either patch leaves the image.
pub fn patch_sq_distance(img: &Image, a: PatchRef, b: PatchRef) -> f64 {
    assert_eq!(a.side, b.side, "patch sides differ");
    assert!(a.fits(img) && b.fits(img), "patch outside image");
    let c = img.channels;
    let w = img.width;
    let data = &img.data;
    let mut acc = 0.0;
    for ex in 0..a.side {
        let mut col = 0.0;
        for ey in 0..a.side {
            let ia = ((a.y + ey) * w + a.x + ex) * c;
            let ib = ((b.y + ey) * w + b.x + ex) * c;
            for ch in 0..c {
                let d = data[ia + ch] - data[ib + ch];
                col += d * d;
            }
        }
        acc += col;
    }
    acc / a.len(c) as f64
}
