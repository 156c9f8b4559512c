//! Binary rasterization of simple shapes, for building test drawings.
//!
//! A pixel is inked when its center lies within half the stroke width of
//! the shape. Ink is black (0) on a white (255) background.

use crate::error::Result;
use crate::geom::{dot, pixel_center, pt, Point};
use crate::raster::IntensityGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    Round,
    Butt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    width: usize,
    height: usize,
    ink: Vec<bool>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ink: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_inked(&self, col: usize, row: usize) -> bool {
        self.ink[row * self.width + col]
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|&&b| b).count()
    }

    pub fn set(&mut self, col: usize, row: usize, on: bool) -> &mut Self {
        if col < self.width && row < self.height {
            self.ink[row * self.width + col] = on;
        }
        self
    }

    fn paint(&mut self, lo: Point, hi: Point, mut inside: impl FnMut(Point) -> bool) {
        let c0 = lo.re.floor().max(0.0) as usize;
        let r0 = lo.im.floor().max(0.0) as usize;
        let c1 = (hi.re.ceil().max(0.0) as usize).min(self.width);
        let r1 = (hi.im.ceil().max(0.0) as usize).min(self.height);
        for r in r0..r1 {
            for c in c0..c1 {
                if inside(pixel_center(c, r)) {
                    self.ink[r * self.width + c] = true;
                }
            }
        }
    }

    pub fn segment(&mut self, a: Point, b: Point, width: f64, cap: Cap) -> &mut Self {
        let half = width / 2.0;
        let pad = pt(half + 1.0, half + 1.0);
        let lo = pt(a.re.min(b.re), a.im.min(b.im)) - pad;
        let hi = pt(a.re.max(b.re), a.im.max(b.im)) + pad;
        let d = b - a;
        let len2 = d.norm_sqr();
        self.paint(lo, hi, |p| {
            let t = if len2 == 0.0 { 0.0 } else { dot(p - a, d) / len2 };
            match cap {
                Cap::Round => (a + d * t.clamp(0.0, 1.0) - p).norm() <= half,
                Cap::Butt => (0.0..=1.0).contains(&t) && (a + d * t - p).norm() <= half,
            }
        });
        self
    }

    pub fn polyline(&mut self, points: &[Point], width: f64) -> &mut Self {
        for w in points.windows(2) {
            self.segment(w[0], w[1], width, Cap::Round);
        }
        self
    }

    /// Ring of the given radius and stroke width.
    pub fn circle(&mut self, center: Point, radius: f64, width: f64) -> &mut Self {
        let half = width / 2.0;
        let reach = pt(radius + half + 1.0, radius + half + 1.0);
        self.paint(center - reach, center + reach, |p| ((p - center).norm() - radius).abs() <= half);
        self
    }

    /// Filled disk.
    pub fn disk(&mut self, center: Point, radius: f64) -> &mut Self {
        let reach = pt(radius + 1.0, radius + 1.0);
        self.paint(center - reach, center + reach, |p| (p - center).norm() <= radius);
        self
    }

    /// Black-on-white 8-bit grid.
    pub fn to_grid(&self) -> Result<IntensityGrid> {
        let values = self.ink.iter().map(|&b| if b { 0.0 } else { 255.0 }).collect();
        IntensityGrid::new(self.width, self.height, values, 255.0)
    }
}
