//! Planar geometry on complex numbers.
//!
//! The image plane is identified with the complex plane: `x + i y`, with
//! `y` growing downwards as in raster coordinates. Pixel `(col, row)`
//! covers `[col, col + 1) x [row, row + 1)` and has its center at
//! `(col + 0.5, row + 0.5)`.

use num_complex::Complex64;

/// A position or direction in the image plane.
pub type Point = Complex64;

pub const ORIGIN: Point = Complex64::new(0.0, 0.0);

#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Complex64::new(x, y)
}

/// Center of pixel `(col, row)`.
#[inline]
pub fn pixel_center(col: usize, row: usize) -> Point {
    pt(col as f64 + 0.5, row as f64 + 0.5)
}

/// Pixel containing `p`, or `None` when `p` lies outside a `width x height` grid.
#[inline]
pub fn pixel_of(p: Point, width: usize, height: usize) -> Option<(usize, usize)> {
    let (x, y) = (p.re.floor(), p.im.floor());
    if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
        return None;
    }
    Some((x as usize, y as usize))
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a.re * b.re + a.im * b.im
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Unit vector in the direction of `v`, or `None` for (near) zero vectors.
#[inline]
pub fn normalized(v: Point) -> Option<Point> {
    let n = v.norm();
    if n > 1e-300 && n.is_finite() {
        Some(v / n)
    } else {
        None
    }
}

/// Angle in `[0, pi/2]` between the lines spanned by `a` and `b`.
pub fn line_angle(a: Point, b: Point) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let c = (dot(a, b).abs() / (na * nb)).min(1.0);
    c.acos()
}

/// Angle in `[0, pi]` between the oriented directions `a` and `b`.
pub fn direction_angle(a: Point, b: Point) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::PI;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Closest point on segment `[a, b]` to `p` and its parameter in `[0, 1]`.
pub fn project_on_segment(p: Point, a: Point, b: Point) -> (Point, f64) {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = (dot(p - a, d) / len2).clamp(0.0, 1.0);
    (a + d * t, t)
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    (project_on_segment(p, a, b).0 - p).norm()
}

/// Proper or touching intersection of segments `[a, b]` and `[c, d]`.
///
/// Returns the parameters along each segment and the intersection point.
/// Parallel (including collinear) segments report no intersection.
pub fn segment_intersection(a: Point, b: Point, c: Point, d: Point) -> Option<(f64, f64, Point)> {
    let r = b - a;
    let s = d - c;
    let denom = cross(r, s);
    let scale = r.norm() * s.norm();
    if scale == 0.0 || denom.abs() <= 1e-14 * scale {
        return None;
    }
    let qp = c - a;
    let t = cross(qp, s) / denom;
    let u = cross(qp, r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u, a + r * t))
    } else {
        None
    }
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Distance from `p` to the polyline (a single point counts as a polyline).
pub fn point_polyline_distance(p: Point, points: &[Point]) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => (points[0] - p).norm(),
        _ => points
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, evaluated on the
/// vertices of each against the segments of the other after densifying
/// both to the given spacing.
pub fn hausdorff(a: &[Point], b: &[Point], spacing: f64) -> f64 {
    let da = densify(a, spacing);
    let db = densify(b, spacing);
    let ab = da
        .iter()
        .map(|&p| point_polyline_distance(p, b))
        .fold(0.0, f64::max);
    let ba = db
        .iter()
        .map(|&p| point_polyline_distance(p, a))
        .fold(0.0, f64::max);
    ab.max(ba)
}

/// Inserts points so that no segment is longer than `spacing`.
pub fn densify(points: &[Point], spacing: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(points.len());
    if let Some(&first) = points.first() {
        out.push(first);
    }
    for w in points.windows(2) {
        let len = (w[1] - w[0]).norm();
        let n = (len / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, polygon: &[Point]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
