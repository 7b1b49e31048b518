//! Classical image operations: ridge-image to binary mask post-processing,
//! canonical cropping, block orientation-field estimation, and placement of
//! the virtual-minutia grid.
//!
//! All operations are pure; batch application parallelizes per image with no
//! shared state.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::template::{Minutia, MinutiaKind, VIRTUAL_GRID_OFFSET, VIRTUAL_GRID_SPACING};

/// Canonical crop side at 500 ppi.
pub const CANONICAL_SIZE: usize = 512;
/// Foreground area below which the binarized mask falls back to all-ones.
pub const MIN_MASK_AREA: usize = 10_000;
/// Binarization threshold on blurred ridge pixel values.
pub const RIDGE_THRESHOLD: u8 = 150;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height);
        GrayImage { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Clamped (replicate-border) access.
    #[inline]
    fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(x, y)
    }
}

/// Binary segmentation mask, values 0/1, same dimensions as its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<u8>,
}

impl SegmentationMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        SegmentationMask {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        SegmentationMask {
            width,
            height,
            bits: vec![1; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.bits[y * self.width + x] = v;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Foreground centroid; center of the frame when the mask is empty.
    pub fn centroid(&self) -> (f64, f64) {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut count = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) != 0 {
                    sx += x as f64;
                    sy += y as f64;
                    count += 1.0;
                }
            }
        }
        if count == 0.0 {
            ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
        } else {
            (sx / count, sy / count)
        }
    }
}

/// Per-block dominant ridge orientation in [0, π) with coherence in [0, 1].
#[derive(Debug, Clone)]
pub struct OrientationField {
    pub block_size: usize,
    /// ceil(height / block) rows by ceil(width / block) columns, row-major.
    pub cols: usize,
    pub rows: usize,
    pub angles: Vec<f64>,
    pub coherence: Vec<f64>,
}

impl OrientationField {
    /// Orientation of the block containing pixel (x, y).
    pub fn angle_at(&self, x: usize, y: usize) -> f64 {
        let bx = (x / self.block_size).min(self.cols - 1);
        let by = (y / self.block_size).min(self.rows - 1);
        self.angles[by * self.cols + bx]
    }

    pub fn coherence_at(&self, x: usize, y: usize) -> f64 {
        let bx = (x / self.block_size).min(self.cols - 1);
        let by = (y / self.block_size).min(self.rows - 1);
        self.coherence[by * self.cols + bx]
    }

    /// Builds a field by evaluating `f(x, y) -> (angle, coherence)` at each
    /// block center. Angles are reduced into [0, π).
    pub fn from_fn(
        width: usize,
        height: usize,
        block_size: usize,
        mut f: impl FnMut(f64, f64) -> (f64, f64),
    ) -> Self {
        let cols = width.div_ceil(block_size);
        let rows = height.div_ceil(block_size);
        let mut angles = Vec::with_capacity(cols * rows);
        let mut coherence = Vec::with_capacity(cols * rows);
        for by in 0..rows {
            for bx in 0..cols {
                let cx = (bx * block_size) as f64 + block_size as f64 / 2.0;
                let cy = (by * block_size) as f64 + block_size as f64 / 2.0;
                let (a, c) = f(cx, cy);
                angles.push(a.rem_euclid(PI));
                coherence.push(c);
            }
        }
        OrientationField {
            block_size,
            cols,
            rows,
            angles,
            coherence,
        }
    }
}

/// Gaussian blur with a 5×5 kernel, σ = 0.3·((k−1)/2 − 1) + 0.8, replicate
/// border, rounded back to u8.
pub fn gaussian_blur_5x5(img: &GrayImage) -> GrayImage {
    const K: usize = 5;
    let sigma = 0.3 * ((K as f64 - 1.0) / 2.0 - 1.0) + 0.8;
    let mut kernel = [0.0f64; K];
    let half = (K / 2) as i64;
    for (i, w) in kernel.iter_mut().enumerate() {
        let d = i as f64 - half as f64;
        *w = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }

    // horizontal pass in f64, then vertical
    let mut tmp = vec![0.0f64; img.width * img.height];
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for (i, w) in kernel.iter().enumerate() {
                acc += w * img.get_clamped(x as i64 + i as i64 - half, y as i64) as f64;
            }
            tmp[y * img.width + x] = acc;
        }
    }
    let mut out = GrayImage::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for (i, w) in kernel.iter().enumerate() {
                let yy = (y as i64 + i as i64 - half).clamp(0, img.height as i64 - 1) as usize;
                acc += w * tmp[yy * img.width + x];
            }
            out.set(x, y, acc.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

// Rectangular SEs are separable: a row pass followed by a column pass.
fn rect_pass(
    mask: &SegmentationMask,
    radius: i64,
    horizontal: bool,
    border: u8,
    hit: u8,
) -> SegmentationMask {
    let mut out = SegmentationMask::zeros(mask.width, mask.height);
    for y in 0..mask.height as i64 {
        for x in 0..mask.width as i64 {
            let mut v = 1 - hit;
            for d in -radius..=radius {
                let (xx, yy) = if horizontal { (x + d, y) } else { (x, y + d) };
                let sample = if xx >= 0 && yy >= 0 && xx < mask.width as i64 && yy < mask.height as i64 {
                    mask.get(xx as usize, yy as usize)
                } else {
                    border
                };
                if sample == hit {
                    v = hit;
                    break;
                }
            }
            out.set(x as usize, y as usize, v);
        }
    }
    out
}

/// Dilation with a rectangular SE; out-of-bounds counts as background.
pub fn dilate(mask: &SegmentationMask, radius: usize) -> SegmentationMask {
    let h = rect_pass(mask, radius as i64, true, 0, 1);
    rect_pass(&h, radius as i64, false, 0, 1)
}

/// Erosion with a rectangular SE; out-of-bounds counts as foreground, so an
/// all-ones mask is a fixed point.
pub fn erode(mask: &SegmentationMask, radius: usize) -> SegmentationMask {
    let h = rect_pass(mask, radius as i64, true, 1, 0);
    rect_pass(&h, radius as i64, false, 1, 0)
}

pub fn close(mask: &SegmentationMask, radius: usize) -> SegmentationMask {
    erode(&dilate(mask, radius), radius)
}

pub fn open(mask: &SegmentationMask, radius: usize) -> SegmentationMask {
    dilate(&erode(mask, radius), radius)
}

/// Ridge image to binary mask: 5×5 Gaussian blur, threshold > 150, 3×
/// morphological closing (9×9), 3× opening (9×9). If the resulting foreground
/// area is below 10,000 px the mask defaults to the entire image.
pub fn binarize_ridge_image(ridge: &GrayImage) -> SegmentationMask {
    let blurred = gaussian_blur_5x5(ridge);
    let mut mask = SegmentationMask::zeros(ridge.width, ridge.height);
    for (b, p) in mask.bits.iter_mut().zip(&blurred.pixels) {
        *b = (*p > RIDGE_THRESHOLD) as u8;
    }
    for _ in 0..3 {
        mask = close(&mask, 4);
    }
    for _ in 0..3 {
        mask = open(&mask, 4);
    }
    if mask.area() < MIN_MASK_AREA {
        return SegmentationMask::ones(ridge.width, ridge.height);
    }
    mask
}

/// Crops a `size × size` window centered at `center` (rounded to the nearest
/// pixel), zero-padding where the window exceeds the source bounds.
pub fn crop_centered(img: &GrayImage, center: (f64, f64), size: usize) -> GrayImage {
    let x0 = center.0.round() as i64 - (size / 2) as i64;
    let y0 = center.1.round() as i64 - (size / 2) as i64;
    let mut out = GrayImage::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let sx = x0 + x as i64;
            let sy = y0 + y as i64;
            if sx >= 0 && sy >= 0 && (sx as usize) < img.width && (sy as usize) < img.height {
                out.set(x, y, img.get(sx as usize, sy as usize));
            }
        }
    }
    out
}

/// Mask counterpart of [`crop_centered`].
pub fn crop_mask_centered(mask: &SegmentationMask, center: (f64, f64), size: usize) -> SegmentationMask {
    let x0 = center.0.round() as i64 - (size / 2) as i64;
    let y0 = center.1.round() as i64 - (size / 2) as i64;
    let mut out = SegmentationMask::zeros(size, size);
    for y in 0..size {
        for x in 0..size {
            let sx = x0 + x as i64;
            let sy = y0 + y as i64;
            if sx >= 0 && sy >= 0 && (sx as usize) < mask.width && (sy as usize) < mask.height {
                out.set(x, y, mask.get(sx as usize, sy as usize));
            }
        }
    }
    out
}

/// Crops an image to the canonical 512×512 frame centered at the mask centroid.
pub fn crop_to_canonical(img: &GrayImage, mask: &SegmentationMask) -> GrayImage {
    crop_centered(img, mask.centroid(), CANONICAL_SIZE)
}

/// Block orientation field from averaged squared Sobel gradients:
/// θ = ½·atan2(2·ΣGxGy, Σ(Gx²−Gy²)) + π/2, reduced into [0, π).
pub fn estimate_orientation_field(img: &GrayImage, block_size: usize) -> OrientationField {
    assert!(block_size >= 4, "block size must be at least 4");
    let cols = img.width.div_ceil(block_size);
    let rows = img.height.div_ceil(block_size);

    // Sobel gradients with replicate border
    let mut gx = vec![0.0f64; img.width * img.height];
    let mut gy = vec![0.0f64; img.width * img.height];
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let p = |dx: i64, dy: i64| img.get_clamped(x + dx, y + dy) as f64;
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gx[y as usize * img.width + x as usize] = sx;
            gy[y as usize * img.width + x as usize] = sy;
        }
    }

    let mut angles = vec![0.0f64; cols * rows];
    let mut coherence = vec![0.0f64; cols * rows];
    for by in 0..rows {
        for bx in 0..cols {
            let mut gxx = 0.0;
            let mut gyy = 0.0;
            let mut gxy = 0.0;
            let y_end = ((by + 1) * block_size).min(img.height);
            let x_end = ((bx + 1) * block_size).min(img.width);
            for y in by * block_size..y_end {
                for x in bx * block_size..x_end {
                    let a = gx[y * img.width + x];
                    let b = gy[y * img.width + x];
                    gxx += a * a;
                    gyy += b * b;
                    gxy += a * b;
                }
            }
            let total = gxx + gyy;
            let idx = by * cols + bx;
            if total > 1e-12 {
                let theta = 0.5 * (2.0 * gxy).atan2(gxx - gyy) + PI / 2.0;
                angles[idx] = theta.rem_euclid(PI);
                coherence[idx] = ((gxx - gyy).powi(2) + 4.0 * gxy * gxy).sqrt() / total;
            }
        }
    }
    OrientationField {
        block_size,
        cols,
        rows,
        angles,
        coherence,
    }
}

/// Places virtual minutiae on the 16 px grid (centers at 8+16i, 8+16j) where
/// the mask is foreground; each point carries the block orientation as its
/// direction and kind `virtual`.
pub fn place_virtual_minutiae(
    mask: &SegmentationMask,
    field: &OrientationField,
    spacing: usize,
) -> Vec<Minutia> {
    assert!(spacing > 0);
    let offset = (spacing / 2) as f32;
    debug_assert!(
        spacing != VIRTUAL_GRID_SPACING as usize || offset == VIRTUAL_GRID_OFFSET
    );
    let mut points = Vec::new();
    let mut y = offset;
    while (y as usize) < mask.height {
        let mut x = offset;
        while (x as usize) < mask.width {
            if mask.get(x as usize, y as usize) != 0 {
                let theta = field.angle_at(x as usize, y as usize);
                points.push(Minutia::new(x, y, theta as f32, MinutiaKind::Virtual));
            }
            x += spacing as f32;
        }
        y += spacing as f32;
    }
    points
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PGM: {0}")]
    Malformed(&'static str),
}

/// Writes a binary (P5) PGM image.
pub fn write_pgm(w: &mut impl Write, img: &GrayImage) -> Result<(), PgmError> {
    writeln!(w, "P5")?;
    writeln!(w, "{} {}", img.width, img.height)?;
    writeln!(w, "255")?;
    w.write_all(&img.pixels)?;
    Ok(())
}

/// Reads a binary (P5) PGM image with maxval 255.
pub fn read_pgm(r: &mut impl BufRead) -> Result<GrayImage, PgmError> {
    let mut tokens = Vec::new();
    let mut byte = [0u8; 1];
    // header: magic, width, height, maxval, with '#' comments allowed
    while tokens.len() < 4 {
        let mut tok = Vec::new();
        loop {
            if r.read(&mut byte)? == 0 {
                return Err(PgmError::Malformed("unexpected end of header"));
            }
            match byte[0] {
                b'#' => {
                    let mut line = String::new();
                    r.read_line(&mut line)?;
                }
                b if b.is_ascii_whitespace() => {
                    if !tok.is_empty() {
                        break;
                    }
                }
                b => tok.push(b),
            }
        }
        tokens.push(String::from_utf8(tok).map_err(|_| PgmError::Malformed("non-ascii header"))?);
    }
    if tokens[0] != "P5" {
        return Err(PgmError::Malformed("not a P5 PGM"));
    }
    let width: usize = tokens[1].parse().map_err(|_| PgmError::Malformed("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| PgmError::Malformed("bad height"))?;
    if tokens[3] != "255" {
        return Err(PgmError::Malformed("maxval must be 255"));
    }
    let mut pixels = vec![0u8; width * height];
    r.read_exact(&mut pixels)
        .map_err(|_| PgmError::Malformed("truncated pixel data"))?;
    Ok(GrayImage::from_pixels(width, height, pixels))
}

/// Converts a mask to a {0, 255} grayscale image for PGM output.
pub fn mask_to_image(mask: &SegmentationMask) -> GrayImage {
    GrayImage::from_pixels(
        mask.width,
        mask.height,
        mask.bits.iter().map(|&b| if b != 0 { 255 } else { 0 }).collect(),
    )
}

/// Interprets a grayscale image as a mask (non-zero = foreground).
pub fn image_to_mask(img: &GrayImage) -> SegmentationMask {
    SegmentationMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&p| (p != 0) as u8).collect(),
    }
}
