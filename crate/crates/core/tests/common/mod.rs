//! Synthetic drawings and geometric oracles shared by the integration tests.
//! Everything here is written independently of the library's own geometry.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use pvtrace::embed::VectorDrawing;
use pvtrace::pipeline::{vectorize, Output, Params};
use pvtrace::raster::IntensityGrid;
use pvtrace::synth::{Canvas, Cap};

pub type P = Complex64;

pub fn p(x: f64, y: f64) -> P {
    P::new(x, y)
}

pub const X_CENTER: (f64, f64) = (32.0, 32.0);
pub const T_CONTACT: (f64, f64) = (32.5, 16.5);
pub const Y_CENTER: (f64, f64) = (32.0, 30.0);

/// Two perpendicular 3-px strokes crossing at the image center.
pub fn x_shape() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.segment(p(12.0, 12.0), p(52.0, 52.0), 3.0, Cap::Butt);
    c.segment(p(12.0, 52.0), p(52.0, 12.0), 3.0, Cap::Butt);
    c
}

pub fn t_shape() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.segment(p(8.0, 16.5), p(56.0, 16.5), 3.0, Cap::Butt);
    c.segment(p(32.5, 16.5), p(32.5, 56.0), 3.0, Cap::Butt);
    c
}

/// Three 24-px arms at 120 degrees.
pub fn y_shape() -> Canvas {
    let mut c = Canvas::new(64, 64);
    let o = p(Y_CENTER.0, Y_CENTER.1);
    for deg in [90f64, 210.0, 330.0] {
        let a = deg.to_radians();
        c.segment(o, o + p(a.cos(), -a.sin()) * 24.0, 3.0, Cap::Round);
    }
    c
}

/// Two horizontal 3-px strokes with two white rows between them.
pub fn parallel_gap() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.segment(p(8.0, 28.5), p(56.0, 28.5), 3.0, Cap::Butt);
    c.segment(p(8.0, 33.5), p(56.0, 33.5), 3.0, Cap::Butt);
    c
}

/// Two strokes that run side by side, touching, along their middle part.
pub fn parallel_touching() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.polyline(&[p(6.0, 12.0), p(22.0, 29.0), p(42.0, 29.0), p(58.0, 12.0)], 3.0);
    c.polyline(&[p(6.0, 50.0), p(22.0, 32.0), p(42.0, 32.0), p(58.0, 50.0)], 3.0);
    c
}

pub const BAR_CENTERLINE: [(f64, f64); 2] = [(8.0, 32.0), (56.0, 32.0)];

pub fn wide_bar() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.segment(p(8.0, 32.0), p(56.0, 32.0), 5.0, Cap::Butt);
    c
}

pub fn ring() -> Canvas {
    let mut c = Canvas::new(64, 64);
    c.circle(p(32.0, 32.0), 20.0, 3.0);
    c
}

pub fn run(canvas: &Canvas, params: &Params) -> Output {
    vectorize(&canvas.to_grid().unwrap(), None, params).expect("pipeline runs")
}

/// `canvas` with additive Gaussian noise of standard deviation `sigma`
/// (fraction of the maximum intensity), clamped to the valid range.
pub fn noisy(canvas: &Canvas, sigma: f64, seed: u64) -> IntensityGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma * 255.0).unwrap();
    let mut values = Vec::with_capacity(canvas.width() * canvas.height());
    for r in 0..canvas.height() {
        for c in 0..canvas.width() {
            let base = if canvas.is_inked(c, r) { 0.0 } else { 255.0 };
            values.push((base + noise.sample(&mut rng)).clamp(0.0, 255.0));
        }
    }
    IntensityGrid::new(canvas.width(), canvas.height(), values, 255.0).unwrap()
}

/// Random smooth 3-px strokes on a `width` x `height` canvas until at least
/// `ink` pixels are dark.
pub fn random_sketch(width: usize, height: usize, ink: usize, seed: u64) -> Canvas {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Canvas::new(width, height);
    let (w, h) = (width as f64, height as f64);
    while c.ink_count() < ink {
        let mut q = p(rng.random_range(40.0..w - 40.0), rng.random_range(40.0..h - 40.0));
        let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut pts = vec![q];
        for _ in 0..rng.random_range(8..30) {
            heading += rng.random_range(-0.35..0.35);
            q += p(heading.cos(), heading.sin()) * 6.0;
            if q.re < 10.0 || q.im < 10.0 || q.re > w - 10.0 || q.im > h - 10.0 {
                break;
            }
            pts.push(q);
        }
        c.polyline(&pts, 3.0);
    }
    c
}

// Geometry oracles.

pub fn cross2(a: P, b: P) -> f64 {
    a.re * b.im - a.im * b.re
}

pub fn seg_dist(q: P, a: P, b: P) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (q - a).norm();
    }
    let t = ((q - a).re * d.re + (q - a).im * d.im) / len2;
    (a + d * t.clamp(0.0, 1.0) - q).norm()
}

pub fn polyline_dist(q: P, pts: &[P]) -> f64 {
    if pts.len() == 1 {
        return (q - pts[0]).norm();
    }
    pts.windows(2).map(|w| seg_dist(q, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Intersection of two closed segments with its parameters on each.
pub fn seg_cross_at(a: P, b: P, c: P, d: P) -> Option<(f64, f64, P)> {
    let (r, s) = (b - a, d - c);
    let den = cross2(r, s);
    if den.abs() < 1e-14 {
        return None;
    }
    let t = cross2(c - a, s) / den;
    let u = cross2(c - a, r) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then(|| (t, u, a + r * t))
}

pub fn seg_cross(a: P, b: P, c: P, d: P) -> Option<P> {
    seg_cross_at(a, b, c, d).map(|(.., x)| x)
}

pub fn crossings(a: &[P], b: &[P]) -> Vec<P> {
    let mut out = Vec::new();
    for s in a.windows(2) {
        for t in b.windows(2) {
            if let Some(x) = seg_cross(s[0], s[1], t[0], t[1]) {
                out.push(x);
            }
        }
    }
    out
}

/// Points every `step` along the polyline, ends included.
pub fn resample(pts: &[P], step: f64) -> Vec<P> {
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out
}

/// Symmetric Hausdorff distance between two polylines, sampled at 0.05 px.
pub fn hausdorff(a: &[P], b: &[P]) -> f64 {
    let one = |x: &[P], y: &[P]| resample(x, 0.05).iter().map(|&q| polyline_dist(q, y)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

pub fn length(pts: &[P]) -> f64 {
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Angle in degrees between two undirected lines.
pub fn line_angle_deg(a: P, b: P) -> f64 {
    let c = ((a.re * b.re + a.im * b.im).abs() / (a.norm() * b.norm())).min(1.0);
    c.acos().to_degrees()
}

/// Largest deviation, in degrees, of any segment of at least `min_len`
/// from the line through the stroke's ends.
pub fn max_bend(pts: &[P], min_len: f64) -> f64 {
    let chord = *pts.last().unwrap() - pts[0];
    pts.windows(2)
        .filter(|w| (w[1] - w[0]).norm() >= min_len)
        .map(|w| line_angle_deg(w[1] - w[0], chord))
        .fold(0.0, f64::max)
}

/// Stroke ends that no other stroke touches (within `tol`).
pub fn loose_ends(d: &VectorDrawing, tol: f64) -> usize {
    let mut n = 0;
    for (i, s) in d.strokes.iter().enumerate() {
        if s.closed {
            continue;
        }
        for e in [s.points[0], *s.points.last().unwrap()] {
            let touched = d
                .strokes
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && polyline_dist(e, &o.points) <= tol);
            if !touched {
                n += 1;
            }
        }
    }
    n
}

/// Minimum distance between two polylines.
pub fn polyline_gap(a: &[P], b: &[P]) -> f64 {
    if !crossings(a, b).is_empty() {
        return 0.0;
    }
    let one = |x: &[P], y: &[P]| x.iter().map(|&q| polyline_dist(q, y)).fold(f64::INFINITY, f64::min);
    one(a, b).min(one(b, a))
}
