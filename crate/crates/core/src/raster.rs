//! Raster input: grayscale loading, contrast equalization, narrow-band
//! extraction and the per-pixel tangent data the frame field is fit to.

use std::path::Path;

use image::DynamicImage;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default darkness threshold as a fraction of the maximum intensity.
pub const DEFAULT_THRESHOLD: f64 = 0.35;

/// Gradients at or below this fraction of `I_max` carry no direction.
const ZERO_GRADIENT: f64 = 1e-9;

/// Below this magnitude the neighborhood average of `tau^2` is degenerate.
const DEGENERATE_AVERAGE: f64 = 1e-8;

/// Weights below this are rounding noise from a constant tangent field.
const NEGLIGIBLE_WEIGHT: f64 = 1e-9;

/// Half-size of the window used for the seed orientation estimate.
const ORIENTATION_RADIUS: isize = 3;

/// A grayscale image with intensities in `[0, max_value]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    max_value: f64,
}

impl IntensityGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>, max_value: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroSize);
        }
        if values.len() != width * height {
            return Err(Error::GridShape {
                width,
                height,
                expected: width * height,
                actual: values.len(),
            });
        }
        if !(max_value > 0.0 && max_value.is_finite()) {
            return Err(Error::IntensityRange {
                value: max_value,
                max: max_value,
            });
        }
        if let Some(&bad) = values
            .iter()
            .find(|v| !(v.is_finite() && **v >= 0.0 && **v <= max_value))
        {
            return Err(Error::IntensityRange {
                value: bad,
                max: max_value,
            });
        }
        Ok(Self {
            width,
            height,
            values,
            max_value,
        })
    }

    /// A grid with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: f64, max_value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], max_value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Sets a pixel, clamping the value into `[0, max_value]`.
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.values[row * self.width + col] = value.clamp(0.0, self.max_value);
    }

    /// Reads with replicated borders.
    #[inline]
    fn get_clamped(&self, col: isize, row: isize) -> f64 {
        let c = col.clamp(0, self.width as isize - 1) as usize;
        let r = row.clamp(0, self.height as isize - 1) as usize;
        self.get(c, r)
    }

    /// Pixels strictly darker than `threshold * max_value`, in row-major order.
    pub fn dark_pixels(&self, threshold: f64) -> Vec<(usize, usize)> {
        let cut = threshold * self.max_value;
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(col, row) < cut {
                    out.push((col, row));
                }
            }
        }
        out
    }

    /// 3x3 Sobel gradient `gx + i gy` with replicated borders.
    pub fn sobel(&self, col: usize, row: usize) -> Complex64 {
        let (c, r) = (col as isize, row as isize);
        let p = |dc: isize, dr: isize| self.get_clamped(c + dc, r + dr);
        let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        Complex64::new(gx, gy)
    }
}

/// Loads an image file as luminance.
///
/// Gray images keep their codes; color images use Rec. 601 luma weights.
/// Alpha is composited over white. `I_max` is the largest code of the
/// decoded sample type (255, 65535, or 1.0 for float images).
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<IntensityGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    grid_from_image(&img)
}

/// Converts a decoded image to an intensity grid (see [`load_grayscale`]).
pub fn grid_from_image(img: &DynamicImage) -> Result<IntensityGrid> {
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroSize);
    }
    let color = img.color();
    let gray = !color.has_color();
    let (max_value, rgba): (f64, Vec<[f64; 4]>) = match img {
        DynamicImage::ImageRgb32F(_) | DynamicImage::ImageRgba32F(_) => (
            1.0,
            img.to_rgba32f()
                .pixels()
                .map(|p| p.0.map(|c| c.clamp(0.0, 1.0) as f64))
                .collect(),
        ),
        _ if color.bytes_per_pixel() / color.channel_count() >= 2 => (
            65535.0,
            img.to_rgba16()
                .pixels()
                .map(|p| p.0.map(|c| c as f64))
                .collect(),
        ),
        _ => (
            255.0,
            img.to_rgba8().pixels().map(|p| p.0.map(|c| c as f64)).collect(),
        ),
    };
    let values = rgba
        .into_iter()
        .map(|[r, g, b, a]| {
            let luma = if gray {
                r
            } else {
                0.299 * r + 0.587 * g + 0.114 * b
            };
            let alpha = a / max_value;
            (luma * alpha + max_value * (1.0 - alpha)).clamp(0.0, max_value)
        })
        .collect();
    IntensityGrid::new(width, height, values, max_value)
}

/// Histogram equalization onto the full `[0, I_max]` range.
///
/// The mapping is monotone; constant images are returned unchanged.
pub fn equalize_contrast(grid: &IntensityGrid) -> IntensityGrid {
    let max = grid.max_value;
    let levels = if max.fract() == 0.0 && max <= 65535.0 {
        max as usize + 1
    } else {
        256
    };
    let top = (levels - 1) as f64;
    let bin = |v: f64| ((v / max) * top).round() as usize;

    let mut hist = vec![0usize; levels];
    for &v in &grid.values {
        hist[bin(v)] += 1;
    }
    let mut cdf = hist.clone();
    for i in 1..levels {
        cdf[i] += cdf[i - 1];
    }
    let total = grid.values.len();
    let cdf_min = hist.iter().copied().find(|&h| h > 0).unwrap_or(0);
    if total == cdf_min {
        return grid.clone();
    }
    let span = (total - cdf_min) as f64;
    let values = grid
        .values
        .iter()
        .map(|&v| {
            let level = ((cdf[bin(v)] - cdf_min) as f64 / span * top).round();
            level / top * max
        })
        .collect();
    IntensityGrid {
        values,
        ..grid.clone()
    }
}

/// The dark pixels the frame field lives on, with their tangent data.
#[derive(Debug, Clone)]
pub struct NarrowBand {
    width: usize,
    height: usize,
    pixels: Vec<(usize, usize)>,
    lookup: Vec<u32>,
    gradient: Vec<Complex64>,
    tangent: Vec<Complex64>,
    weight: Vec<f64>,
    align_weight: Vec<f64>,
    smooth_weight: Vec<f64>,
    orientation: Vec<Complex64>,
}

const NOT_IN_BAND: u32 = u32::MAX;

impl NarrowBand {
    /// Builds a band over an explicit pixel set; tangents and weights come
    /// from `grid`. Pixels are sorted into row-major order.
    pub fn from_pixels(grid: &IntensityGrid, pixels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (width, height) = (grid.width, grid.height);
        let mut pixels: Vec<(usize, usize)> = pixels
            .into_iter()
            .filter(|&(c, r)| c < width && r < height)
            .collect();
        pixels.sort_by_key(|&(c, r)| (r, c));
        pixels.dedup();

        let mut lookup = vec![NOT_IN_BAND; width * height];
        for (i, &(c, r)) in pixels.iter().enumerate() {
            lookup[r * width + c] = i as u32;
        }

        let zero = ZERO_GRADIENT * grid.max_value;
        // tau^2 over the whole image, needed for neighborhood averages.
        let mut grad_img = vec![Complex64::new(0.0, 0.0); width * height];
        let mut tau2_img: Vec<Option<Complex64>> = vec![None; width * height];
        for r in 0..height {
            for c in 0..width {
                let g = grid.sobel(c, r);
                grad_img[r * width + c] = g;
                if g.norm() > zero {
                    let t = Complex64::i() * g / g.norm();
                    tau2_img[r * width + c] = Some(t * t);
                }
            }
        }

        let n = pixels.len();
        let mut gradient = Vec::with_capacity(n);
        let mut tangent = Vec::with_capacity(n);
        let mut raw_weight: Vec<Option<f64>> = Vec::with_capacity(n);
        let mut orientation = Vec::with_capacity(n);
        for &(c, r) in &pixels {
            let g = grad_img[r * width + c];
            gradient.push(g);
            let tau2 = tau2_img[r * width + c];
            tangent.push(match tau2 {
                Some(_) => Complex64::i() * g / g.norm(),
                None => Complex64::new(0.0, 0.0),
            });

            let mut sum = Complex64::new(0.0, 0.0);
            let mut count = 0usize;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nc, nr) = (c as isize + dc, r as isize + dr);
                    if nc < 0 || nr < 0 || nc >= width as isize || nr >= height as isize {
                        continue;
                    }
                    if let Some(t2) = tau2_img[nr as usize * width + nc as usize] {
                        sum += t2;
                        count += 1;
                    }
                }
            }
            raw_weight.push(match tau2 {
                Some(t2) if count > 0 => {
                    let avg = sum / count as f64;
                    if avg.norm() < DEGENERATE_AVERAGE {
                        None
                    } else {
                        let w = (avg / avg.norm() - t2).norm();
                        Some(if w < NEGLIGIBLE_WEIGHT { 0.0 } else { w })
                    }
                }
                _ => None,
            });

            // Structure-tensor style dominant tangent, in doubled-angle form.
            let mut acc = Complex64::new(0.0, 0.0);
            let mut energy = 0.0;
            for dr in -ORIENTATION_RADIUS..=ORIENTATION_RADIUS {
                for dc in -ORIENTATION_RADIUS..=ORIENTATION_RADIUS {
                    let (nc, nr) = (c as isize + dc, r as isize + dr);
                    if nc < 0 || nr < 0 || nc >= width as isize || nr >= height as isize {
                        continue;
                    }
                    let g = grad_img[nr as usize * width + nc as usize];
                    acc -= g * g;
                    energy += g.norm_sqr();
                }
            }
            orientation.push(if energy > 0.0 && acc.norm() > 0.0 {
                acc / acc.norm() * (acc.norm() / energy)
            } else {
                Complex64::new(0.0, 0.0)
            });
        }

        let max_w = raw_weight.iter().flatten().copied().fold(0.0, f64::max);
        let mut weight = Vec::with_capacity(n);
        let mut align_weight = Vec::with_capacity(n);
        let mut smooth_weight = Vec::with_capacity(n);
        for i in 0..n {
            let s = match raw_weight[i] {
                Some(w) if max_w > 0.0 => w / max_w,
                Some(_) => 0.0,
                None => 1.0,
            };
            weight.push(raw_weight[i].unwrap_or(max_w));
            smooth_weight.push(s);
            align_weight.push(1.0 - s);
        }

        Self {
            width,
            height,
            pixels,
            lookup,
            gradient,
            tangent,
            weight,
            align_weight,
            smooth_weight,
            orientation,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> (usize, usize) {
        self.pixels[index]
    }

    /// Band index of pixel `(col, row)`.
    #[inline]
    pub fn index_of(&self, col: usize, row: usize) -> Option<usize> {
        if col >= self.width || row >= self.height {
            return None;
        }
        match self.lookup[row * self.width + col] {
            NOT_IN_BAND => None,
            i => Some(i as usize),
        }
    }

    #[inline]
    pub fn contains(&self, col: usize, row: usize) -> bool {
        self.index_of(col, row).is_some()
    }

    /// Band index of the pixel containing `p`.
    #[inline]
    pub fn index_at(&self, p: crate::geom::Point) -> Option<usize> {
        crate::geom::pixel_of(p, self.width, self.height).and_then(|(c, r)| self.index_of(c, r))
    }

    /// Unnormalized Sobel gradient.
    pub fn gradient(&self) -> &[Complex64] {
        &self.gradient
    }

    /// Unit tangent (gradient rotated by a quarter turn); zero where the
    /// gradient vanishes.
    pub fn tangent(&self) -> &[Complex64] {
        &self.tangent
    }

    /// Whether pixel `i` carries a usable tangent direction.
    #[inline]
    pub fn has_tangent(&self, i: usize) -> bool {
        self.tangent[i].norm_sqr() > 0.0
    }

    /// Unnormalized junction weight `w(x)`.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn align_weight(&self) -> &[f64] {
        &self.align_weight
    }

    pub fn smooth_weight(&self) -> &[f64] {
        &self.smooth_weight
    }

    /// Dominant local tangent in doubled-angle form; the magnitude is the
    /// coherence in `[0, 1]`.
    pub fn orientation(&self) -> &[Complex64] {
        &self.orientation
    }

    /// Copy of the band with the alignment weight of `pixels` set to zero.
    pub fn with_alignment_zeroed(&self, pixels: impl IntoIterator<Item = usize>) -> Self {
        let mut out = self.clone();
        for i in pixels {
            out.align_weight[i] = 0.0;
        }
        out
    }

    /// Number of pixels with a nonzero alignment weight.
    pub fn aligned_count(&self) -> usize {
        self.align_weight.iter().filter(|&&a| a > 0.0).count()
    }
}

/// Thresholds `grid` and computes tangents and weights on the dark pixels.
pub fn extract_narrow_band(grid: &IntensityGrid, threshold: f64) -> Result<NarrowBand> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let pixels = grid.dark_pixels(threshold);
    if pixels.is_empty() {
        return Err(Error::EmptyBand);
    }
    Ok(NarrowBand::from_pixels(grid, pixels))
}

/// Applies a paint-style edit mask: value 0 removes a pixel from the band,
/// the mask's maximum value adds it, anything else leaves it alone.
pub fn apply_mask_edit(band: &NarrowBand, grid: &IntensityGrid, mask: &IntensityGrid) -> Result<NarrowBand> {
    if mask.width != band.width || mask.height != band.height {
        return Err(Error::MaskDimensions {
            width: band.width,
            height: band.height,
            mask_width: mask.width,
            mask_height: mask.height,
        });
    }
    let mut keep = vec![false; band.width * band.height];
    for &(c, r) in &band.pixels {
        keep[r * band.width + c] = true;
    }
    let mut changed = false;
    for r in 0..mask.height {
        for c in 0..mask.width {
            let m = mask.get(c, r);
            let slot = &mut keep[r * band.width + c];
            if m == 0.0 && *slot {
                *slot = false;
                changed = true;
            } else if m == mask.max_value && !*slot {
                *slot = true;
                changed = true;
            }
        }
    }
    if !changed {
        return Ok(band.clone());
    }
    let pixels = (0..band.height)
        .flat_map(|r| (0..band.width).map(move |c| (c, r)))
        .filter(|&(c, r)| keep[r * band.width + c]);
    Ok(NarrowBand::from_pixels(grid, pixels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bar_image() -> IntensityGrid {
        // Vertical 3-px black bar at columns 10..=12 on a 24x24 white image.
        let mut g = IntensityGrid::filled(24, 24, 255.0, 255.0).unwrap();
        for r in 0..24 {
            for c in 10..=12 {
                g.set(c, r, 0.0);
            }
        }
        g
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(matches!(IntensityGrid::new(0, 3, vec![], 255.0), Err(Error::ZeroSize)));
        assert!(matches!(
            IntensityGrid::new(2, 2, vec![0.0; 3], 255.0),
            Err(Error::GridShape { .. })
        ));
        assert!(matches!(
            IntensityGrid::new(1, 1, vec![300.0], 255.0),
            Err(Error::IntensityRange { .. })
        ));
    }

    #[test]
    fn vertical_bar_band_and_tangents() {
        let g = bar_image();
        let band = extract_narrow_band(&g, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(band.len(), 3 * 24);
        for (i, &(c, _)) in band.pixels().iter().enumerate() {
            assert!((10..=12).contains(&c));
            if c == 11 {
                // Both horizontal neighbors are dark: no gradient.
                assert!(!band.has_tangent(i));
                assert_eq!(band.align_weight()[i], 0.0);
                assert_eq!(band.smooth_weight()[i], 1.0);
            } else {
                let t = band.tangent()[i];
                assert_relative_eq!(t.norm(), 1.0, epsilon = 1e-12);
                assert!(t.re.abs() < 1e-12, "tangent should be vertical, got {t}");
            }
        }
    }

    #[test]
    fn constant_tangent_has_zero_weight() {
        let band = extract_narrow_band(&bar_image(), DEFAULT_THRESHOLD).unwrap();
        for i in 0..band.len() {
            if band.has_tangent(i) {
                assert_relative_eq!(band.weight()[i], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weights_are_normalized() {
        let mut g = IntensityGrid::filled(20, 20, 255.0, 255.0).unwrap();
        for k in 2..18 {
            g.set(k, 9, 0.0);
            g.set(k, 10, 0.0);
            g.set(9, k, 0.0);
            g.set(k, k, 0.0);
        }
        let band = extract_narrow_band(&g, 0.5).unwrap();
        for i in 0..band.len() {
            let (a, s) = (band.align_weight()[i], band.smooth_weight()[i]);
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&s));
            assert_relative_eq!(a + s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_band_is_reported() {
        let g = IntensityGrid::filled(4, 4, 255.0, 255.0).unwrap();
        assert!(matches!(extract_narrow_band(&g, 0.35), Err(Error::EmptyBand)));
        assert!(matches!(extract_narrow_band(&g, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn equalize_constant_and_two_level() {
        let c = IntensityGrid::filled(3, 3, 77.0, 255.0).unwrap();
        assert_eq!(equalize_contrast(&c), c);

        let two = IntensityGrid::new(2, 2, vec![64.0, 192.0, 192.0, 64.0], 255.0).unwrap();
        let eq = equalize_contrast(&two);
        assert_eq!(eq.values(), &[0.0, 255.0, 255.0, 0.0]);
    }

    #[test]
    fn equalize_keeps_uniform_ramp() {
        let ramp = IntensityGrid::new(256, 1, (0..256).map(|v| v as f64).collect(), 255.0).unwrap();
        assert_eq!(equalize_contrast(&ramp), ramp);
    }

    #[test]
    fn mask_edits_band() {
        let g = bar_image();
        let band = extract_narrow_band(&g, DEFAULT_THRESHOLD).unwrap();

        let noop = IntensityGrid::filled(24, 24, 128.0, 255.0).unwrap();
        assert_eq!(apply_mask_edit(&band, &g, &noop).unwrap().pixels(), band.pixels());

        let mut remove = noop.clone();
        for r in 0..4 {
            for c in 10..=12 {
                remove.set(c, r, 0.0);
            }
        }
        assert_eq!(apply_mask_edit(&band, &g, &remove).unwrap().len(), band.len() - 12);

        let mut add = noop.clone();
        add.set(3, 3, 255.0);
        let edited = apply_mask_edit(&band, &g, &add).unwrap();
        assert!(edited.contains(3, 3));
        assert_eq!(edited.len(), band.len() + 1);

        let small = IntensityGrid::filled(5, 5, 128.0, 255.0).unwrap();
        assert!(matches!(
            apply_mask_edit(&band, &g, &small),
            Err(Error::MaskDimensions { .. })
        ));
    }
}
