//! Streamline tracing of frame fields, orthogonal test curves, and
//! segment intersection queries through a per-pixel index.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;

use crate::geom::{self, direction_angle, line_angle, normalized, pixel_center, Point};
use crate::polyvector::{Frame, PolyVectorField};
use crate::raster::NarrowBand;

/// Integration and stopping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceParams {
    /// Euler step, in pixels.
    pub step: f64,
    /// A curve stops when it comes this close to another curve with a
    /// similar tangent.
    pub proximity: f64,
    /// Line angle below which two tangents count as the same (radians).
    pub same_tangent: f64,
    /// A curve closes on itself when it returns this close to its own
    /// earlier points, moving the same way.
    pub closure_radius: f64,
    /// Minimum arc length between a point and the own-curve segment it may
    /// close on, in steps.
    pub closure_steps: f64,
    /// Seeds this close to an existing curve with the seed's tangent are
    /// skipped.
    pub cover_radius: f64,
    /// Upper bound on a test curve's half length.
    pub test_length: f64,
    /// Coherence above which the seed direction follows the local stroke
    /// orientation instead of the largest root.
    pub coherence: f64,
    /// A curve about to leave the band may back up and continue along the
    /// other root if that turns it by less than this from its recent
    /// heading (radians).
    pub corner_turn: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            step: 0.1,
            proximity: 0.01,
            same_tangent: 20f64.to_radians(),
            closure_radius: 0.5,
            closure_steps: 10.0,
            cover_radius: 0.1,
            test_length: 50.0,
            coherence: 0.3,
            corner_turn: 52.5f64.to_radians(),
        }
    }
}

/// An oriented polyline following one root family of the frame field.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedCurve {
    pub points: Vec<Point>,
    /// Pixel the curve was seeded from.
    pub seed: (usize, usize),
    /// Which root of the seed pixel's frame was followed (0 for `u`, 1 for `v`).
    pub direction_id: u8,
    /// Whether tracing ended by returning onto the curve's own start.
    pub closed: bool,
}

impl TracedCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn segment(&self, k: usize) -> (Point, Point) {
        (self.points[k], self.points[k + 1])
    }

    /// Unit direction of segment `k`.
    pub fn segment_direction(&self, k: usize) -> Point {
        let (a, b) = self.segment(k);
        normalized(b - a).unwrap_or(geom::ORIGIN)
    }

    /// Unit tangent at a fractional position `t` (segment index plus offset).
    pub fn tangent_at(&self, t: f64) -> Point {
        if self.segment_count() == 0 {
            return geom::ORIGIN;
        }
        let k = (t.floor() as usize).min(self.segment_count() - 1);
        self.segment_direction(k)
    }

    /// Point at a fractional position along the polyline.
    pub fn point_at(&self, t: f64) -> Point {
        if self.segment_count() == 0 {
            return self.points[0];
        }
        let k = (t.floor().max(0.0) as usize).min(self.segment_count() - 1);
        let (a, b) = self.segment(k);
        a + (b - a) * (t - k as f64).clamp(0.0, 1.0)
    }

    pub fn length(&self) -> f64 {
        geom::polyline_length(&self.points)
    }

    /// Cumulative arc length at each point.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut s = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            s += (w[1] - w[0]).norm();
            out.push(s);
        }
        out
    }

    /// Arc length at a fractional position, given [`Self::arc_lengths`].
    pub fn arc_at(&self, arcs: &[f64], t: f64) -> f64 {
        if self.segment_count() == 0 {
            return 0.0;
        }
        let k = (t.floor().max(0.0) as usize).min(self.segment_count() - 1);
        arcs[k] + (arcs[k + 1] - arcs[k]) * (t - k as f64).clamp(0.0, 1.0)
    }

    /// The piece of the polyline between fractional positions `from` and
    /// `to`, oriented from `from` to `to`.
    pub fn sub_polyline(&self, from: f64, to: f64) -> Vec<Point> {
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        let mut out = vec![self.point_at(lo)];
        let first = lo.floor() as usize + 1;
        let last = hi.ceil() as usize;
        for k in first..last.min(self.points.len()) {
            if (k as f64) > lo && (k as f64) < hi {
                out.push(self.points[k]);
            }
        }
        out.push(self.point_at(hi));
        if from > to {
            out.reverse();
        }
        out
    }
}

/// Reference to segment `segment` of curve `curve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentRef {
    pub curve: u32,
    pub segment: u32,
}

/// Per-pixel buckets of the curve segments overlapping each pixel.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    width: usize,
    height: usize,
    buckets: Vec<Vec<SegmentRef>>,
}

impl SpatialIndex {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            buckets: vec![Vec::new(); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel range covering the box around `a`, `b` grown by `pad`.
    fn cover(&self, a: Point, b: Point, pad: f64) -> Option<(usize, usize, usize, usize)> {
        let x0 = (a.re.min(b.re) - pad).floor().max(0.0);
        let y0 = (a.im.min(b.im) - pad).floor().max(0.0);
        let x1 = (a.re.max(b.re) + pad).floor().min(self.width as f64 - 1.0);
        let y1 = (a.im.max(b.im) + pad).floor().min(self.height as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            return None;
        }
        Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
    }

    pub fn insert(&mut self, seg: SegmentRef, a: Point, b: Point) {
        if let Some((c0, r0, c1, r1)) = self.cover(a, b, 0.0) {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    self.buckets[r * self.width + c].push(seg);
                }
            }
        }
    }

    pub fn insert_curve(&mut self, id: usize, curve: &TracedCurve) {
        for k in 0..curve.segment_count() {
            let (a, b) = curve.segment(k);
            self.insert(
                SegmentRef {
                    curve: id as u32,
                    segment: k as u32,
                },
                a,
                b,
            );
        }
    }

    pub fn bucket(&self, col: usize, row: usize) -> &[SegmentRef] {
        &self.buckets[row * self.width + col]
    }

    /// Segments registered in any pixel touched by the box around `a`, `b`
    /// grown by `pad`. May contain duplicates.
    pub fn near_segment(&self, a: Point, b: Point, pad: f64) -> impl Iterator<Item = SegmentRef> + '_ {
        let range = self.cover(a, b, pad);
        let (c0, r0, c1, r1) = range.unwrap_or((1, 1, 0, 0));
        (r0..=r1).flat_map(move |r| (c0..=c1).flat_map(move |c| self.buckets[r * self.width + c].iter().copied()))
    }

    pub fn near(&self, p: Point, radius: f64) -> impl Iterator<Item = SegmentRef> + '_ {
        self.near_segment(p, p, radius)
    }
}

/// Largest-magnitude root, ties broken by the smaller polar angle in
/// `[0, pi)`. The returned representative has its angle in `[0, pi)`.
pub fn principal_root(frame: &Frame) -> Complex64 {
    let canon = |z: Complex64| {
        let a = z.arg();
        if a < 0.0 || a >= std::f64::consts::PI {
            -z
        } else {
            z
        }
    };
    let (u, v) = (canon(frame.u), canon(frame.v));
    let (nu, nv) = (u.norm(), v.norm());
    let tie = (nu - nv).abs() <= 1e-12 * nu.max(nv);
    if tie {
        let au = u.arg().rem_euclid(std::f64::consts::PI);
        let av = v.arg().rem_euclid(std::f64::consts::PI);
        if av < au {
            v
        } else {
            u
        }
    } else if nv > nu {
        v
    } else {
        u
    }
}

/// Frame data cached per band pixel.
#[derive(Debug, Clone)]
pub struct FrameCache {
    frames: Vec<Frame>,
    /// Unit roots `u`, `v`, or `None` when a root vanishes.
    units: Vec<Option<[Point; 2]>>,
    singular: Vec<bool>,
}

impl FrameCache {
    pub fn new(field: &PolyVectorField, singular: &BTreeSet<usize>) -> Self {
        let frames = field.frames();
        let units = frames
            .iter()
            .map(|f| Some([normalized(f.u)?, normalized(f.v)?]))
            .collect();
        let mut flags = vec![false; field.len()];
        for &i in singular {
            if i < flags.len() {
                flags[i] = true;
            }
        }
        Self {
            frames,
            units,
            singular: flags,
        }
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn units(&self, i: usize) -> Option<[Point; 2]> {
        self.units[i]
    }

    pub fn is_singular(&self, i: usize) -> bool {
        self.singular[i]
    }

    /// Unit root at pixel `i` closest in angle to `dir`, oriented along it,
    /// with the family index.
    pub fn matched(&self, i: usize, dir: Point) -> Option<(Point, usize)> {
        let [u, v] = self.units[i]?;
        let (du, dv) = (geom::dot(u, dir), geom::dot(v, dir));
        Some(if du.abs() >= dv.abs() {
            (if du < 0.0 { -u } else { u }, 0)
        } else {
            (if dv < 0.0 { -v } else { v }, 1)
        })
    }
}

/// Bilinear interpolation of the unit roots matched to `dir` at the four
/// pixel centers surrounding `p`. Corners outside the band are skipped.
pub fn interpolate_direction(p: Point, dir: Point, band: &NarrowBand, cache: &FrameCache) -> Option<Point> {
    let gx = p.re - 0.5;
    let gy = p.im - 0.5;
    let (cx, cy) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - cx, gy - cy);
    let mut acc = geom::ORIGIN;
    let mut total = 0.0;
    for (dx, dy, w) in [
        (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
        (1.0, 0.0, fx * (1.0 - fy)),
        (0.0, 1.0, (1.0 - fx) * fy),
        (1.0, 1.0, fx * fy),
    ] {
        if w <= 0.0 {
            continue;
        }
        let (c, r) = (cx + dx, cy + dy);
        if c < 0.0 || r < 0.0 {
            continue;
        }
        let Some(i) = band.index_of(c as usize, r as usize) else {
            continue;
        };
        if let Some((root, _)) = cache.matched(i, dir) {
            acc += root * w;
            total += w;
        }
    }
    if total <= 0.0 {
        return None;
    }
    normalized(acc)
}

/// Why a half-trace ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    LeftBand,
    Singular,
    NearCurve,
    Closed,
    NoDirection,
    StepLimit,
}

/// Tracing state shared across seeds.
pub struct Tracer<'a> {
    band: &'a NarrowBand,
    cache: &'a FrameCache,
    params: &'a TraceParams,
    curves: Vec<TracedCurve>,
    index: SpatialIndex,
    max_steps: usize,
}

struct Half {
    points: Vec<Point>,
    reason: StopReason,
}

/// Own-curve segments in progress, bucketed per pixel.
#[derive(Default)]
struct OwnSegments {
    points: Vec<(Point, Point, Point, f64)>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl OwnSegments {
    fn add(&mut self, a: Point, b: Point, oriented: Point, arc: f64) {
        let k = self.points.len();
        self.points.push((a, b, oriented, arc));
        let (x0, x1) = (a.re.min(b.re).floor() as i64, a.re.max(b.re).floor() as i64);
        let (y0, y1) = (a.im.min(b.im).floor() as i64, a.im.max(b.im).floor() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.buckets.entry((x, y)).or_default().push(k);
            }
        }
    }

    fn closes(&self, p: Point, oriented: Point, arc: f64, params: &TraceParams) -> bool {
        let r = params.closure_radius;
        let min_arc = params.closure_steps * params.step;
        let (x0, x1) = ((p.re - r).floor() as i64, (p.re + r).floor() as i64);
        let (y0, y1) = ((p.im - r).floor() as i64, (p.im + r).floor() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let Some(list) = self.buckets.get(&(x, y)) else {
                    continue;
                };
                for &k in list {
                    let (a, b, d, s) = self.points[k];
                    if (arc - s).abs() <= min_arc {
                        continue;
                    }
                    if direction_angle(d, oriented) < params.same_tangent
                        && geom::point_segment_distance(p, a, b) < r
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

impl<'a> Tracer<'a> {
    pub fn new(band: &'a NarrowBand, cache: &'a FrameCache, params: &'a TraceParams) -> Self {
        let max_steps = ((20 * band.len() + 200) as f64 / params.step.max(1e-6)) as usize;
        Self {
            band,
            cache,
            params,
            curves: Vec::new(),
            index: SpatialIndex::new(band.width(), band.height()),
            max_steps,
        }
    }

    pub fn curves(&self) -> &[TracedCurve] {
        &self.curves
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn finish(self) -> (Vec<TracedCurve>, SpatialIndex) {
        (self.curves, self.index)
    }

    /// Whether an existing curve passes within `radius` of `p` with a
    /// tangent within the same-tangent angle of `dir`.
    pub fn near_curve(&self, p: Point, dir: Point, radius: f64) -> bool {
        self.index.near(p, radius).any(|s| {
            let c = &self.curves[s.curve as usize];
            let (a, b) = c.segment(s.segment as usize);
            line_angle(b - a, dir) < self.params.same_tangent && geom::point_segment_distance(p, a, b) < radius
        })
    }

    /// Distance along the ray from `p` in direction `dir` that stays in the
    /// band, up to `limit`.
    fn ink_ahead(&self, p: Point, dir: Point, limit: f64) -> f64 {
        let step = 0.25;
        let mut run = 0.0;
        while run < limit && self.band.index_at(p + dir * (run + step)).is_some() {
            run += step;
        }
        run
    }

    /// Where a curve is about to leave the band at the end of `points`,
    /// looks back up to `CORNER_BACKTRACK` pixels for a point whose other
    /// root keeps it in the ink and turns it by less than the corner angle
    /// from the chord of the `CORNER_CHORD` pixels leading to that point. At a 45 degree
    /// corner the field can hand a diagonal curve to the wrong root a few
    /// pixels before the edge. Returns the index to resume from and the
    /// new direction.
    fn corner_exit(&self, points: &[Point]) -> Option<(usize, Point)> {
        const CORNER_BACKTRACK: f64 = 3.0;
        const CORNER_CHORD: f64 = 8.0;
        const CORNER_SKIP: f64 = 2.0;
        const MIN_INK: f64 = 2.0;
        let h = self.params.step;
        let n = points.len();
        let last = n.checked_sub(1)?;
        let reach = (CORNER_CHORD / h).round() as usize;
        let skip = (CORNER_SKIP / h).round() as usize;
        let back = (CORNER_BACKTRACK / h).round() as usize;
        for k in (last.saturating_sub(back).max(reach)..=last).rev() {
            let at = points[k];
            let chord = points[k - skip] - points[k - reach];
            if chord.norm() < 0.5 * (CORNER_CHORD - CORNER_SKIP) {
                continue;
            }
            let heading = points[k] - points[k - 1];
            let Some([u, v]) = self.band.index_at(at).and_then(|i| self.cache.units(i)) else {
                continue;
            };
            let other = if geom::dot(u, heading).abs() < geom::dot(v, heading).abs() { u } else { v };
            let other = if geom::dot(other, chord) < 0.0 { -other } else { other };
            let turn = (geom::dot(other, chord) / chord.norm()).clamp(-1.0, 1.0).acos();
            if turn < self.params.corner_turn && self.ink_ahead(at, other, MIN_INK) >= MIN_INK {
                return Some((k, other));
            }
        }
        None
    }

    fn half_trace(&self, seed: Point, dir: Point, sign: f64, own: &mut OwnSegments) -> Half {
        const MAX_CORNERS: usize = 4;
        let h = self.params.step;
        let mut points = vec![seed];
        let mut p = seed;
        let mut d = dir;
        let mut arc = 0.0;
        let mut corners = 0;
        let reason = loop {
            if points.len() > self.max_steps {
                break StopReason::StepLimit;
            }
            let Some(next_dir) = interpolate_direction(p, d, self.band, self.cache) else {
                break StopReason::NoDirection;
            };
            let q = p + next_dir * h;
            let (Some(mid), Some(end)) = (self.band.index_at((p + q) * 0.5), self.band.index_at(q)) else {
                if corners < MAX_CORNERS {
                    if let Some((k, dir)) = self.corner_exit(&points) {
                        corners += 1;
                        points.truncate(k + 1);
                        p = points[k];
                        d = dir;
                        arc = k as f64 * h;
                        continue;
                    }
                }
                break StopReason::LeftBand;
            };
            if self.cache.is_singular(end) || self.cache.is_singular(mid) {
                break StopReason::Singular;
            }
            if self.near_curve(q, next_dir, self.params.proximity) {
                break StopReason::NearCurve;
            }
            let oriented = next_dir * sign;
            if own.closes(q, oriented, sign * (arc + h), self.params) {
                break StopReason::Closed;
            }
            own.add(p, q, oriented, sign * (arc + 0.5 * h));
            arc += h;
            points.push(q);
            p = q;
            d = next_dir;
        };
        Half { points, reason }
    }

    /// Seed direction at band pixel `i`: the root aligned with a coherent
    /// local orientation, or the principal root otherwise.
    pub fn seed_direction(&self, i: usize) -> Option<(Point, u8)> {
        let [u, v] = self.cache.units(i)?;
        let o = self.band.orientation()[i];
        if o.norm() >= self.params.coherence {
            let score = |r: Point| (r * r * o.conj()).re;
            return Some(if score(v) > score(u) { (v, 1) } else { (u, 0) });
        }
        let frame = self.cache.frame(i);
        let p = principal_root(frame);
        let pu = normalized(p)?;
        Some(if line_angle(pu, u) <= line_angle(pu, v) { (pu, 0) } else { (pu, 1) })
    }

    /// Traces from the center of band pixel `i` and records the curve.
    /// Returns the new curve's id, or `None` when the seed is skipped.
    pub fn trace_from(&mut self, i: usize) -> Option<usize> {
        let (col, row) = self.band.pixel(i);
        if self.cache.is_singular(i) {
            return None;
        }
        let Some((dir, family)) = self.seed_direction(i) else {
            log::debug!("trace: seed ({col}, {row}) has a vanishing root; skipped");
            return None;
        };
        let seed = pixel_center(col, row);
        if self.near_curve(seed, dir, self.params.cover_radius) {
            return None;
        }
        let curve = self.trace_streamline(seed, dir, (col, row), family);
        let id = self.curves.len();
        self.index.insert_curve(id, &curve);
        self.curves.push(curve);
        Some(id)
    }

    /// Traces both halves from `seed` along `±dir` without recording.
    pub fn trace_streamline(&self, seed: Point, dir: Point, pixel: (usize, usize), family: u8) -> TracedCurve {
        let mut own = OwnSegments::default();
        let fwd = self.half_trace(seed, dir, 1.0, &mut own);
        let bwd = if fwd.reason == StopReason::Closed {
            None
        } else {
            Some(self.half_trace(seed, -dir, -1.0, &mut own))
        };
        let mut points: Vec<Point> = match &bwd {
            Some(b) => b.points.iter().rev().copied().collect(),
            None => vec![seed],
        };
        points.extend_from_slice(&fwd.points[1..]);
        let closed = fwd.reason == StopReason::Closed || bwd.as_ref().is_some_and(|b| b.reason == StopReason::Closed);
        // A curve that never leaves its seed pixel carries no direction.
        if points.iter().all(|&p| geom::pixel_of(p, self.band.width(), self.band.height()) == Some(pixel)) {
            points = vec![seed];
        }
        TracedCurve {
            points,
            seed: pixel,
            direction_id: family,
            closed,
        }
    }
}

/// Traces one curve attempt per band pixel in row-major order.
pub fn trace_all(
    band: &NarrowBand,
    field: &PolyVectorField,
    singular: &BTreeSet<usize>,
    params: &TraceParams,
) -> (Vec<TracedCurve>, SpatialIndex) {
    let cache = FrameCache::new(field, singular);
    let mut tracer = Tracer::new(band, &cache, params);
    for i in 0..band.len() {
        tracer.trace_from(i);
    }
    tracer.finish()
}

/// A test curve with the frame roots it was traced against.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCurve {
    pub points: Vec<Point>,
    /// Per segment: the matched root the test curve crosses, and the other root.
    pub roots: Vec<(Point, Point)>,
    /// Index of the seed in `points`.
    pub seed_index: usize,
}

impl TestCurve {
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut s = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            s += (w[1] - w[0]).norm();
            out.push(s);
        }
        out
    }
}

/// Traces a curve across the stroke through `seed`, perpendicular to the
/// root family matching `tangent`, in both normal directions.
///
/// Roots are carried pixel to pixel by least-angle matching; each half stops
/// when it leaves the band or reaches the length cap.
pub fn trace_orthogonal_test_curve(
    seed: Point,
    tangent: Point,
    band: &NarrowBand,
    cache: &FrameCache,
    params: &TraceParams,
) -> Option<TestCurve> {
    let start = band.index_at(seed)?;
    let [u, v] = cache.units(start)?;
    let (r0, other0) = if line_angle(u, tangent) <= line_angle(v, tangent) { (u, v) } else { (v, u) };
    let h = params.step;
    let steps = (params.test_length / h).ceil() as usize;

    let half = |sign: f64| -> (Vec<Point>, Vec<(Point, Point)>) {
        let mut pts = vec![seed];
        let mut roots = Vec::new();
        let (mut r, mut other) = (r0, other0);
        let mut normal = Complex64::i() * r * sign;
        let mut pixel = start;
        let mut p = seed;
        for _ in 0..steps {
            let q = p + normal * h;
            let (Some(_), Some(end)) = (band.index_at((p + q) * 0.5), band.index_at(q)) else {
                break;
            };
            pts.push(q);
            roots.push((r, other));
            p = q;
            if end != pixel {
                pixel = end;
                let Some(units) = cache.units(end) else {
                    break;
                };
                let frame = Frame::new(units[0], units[1]);
                let (a, b) = crate::polyvector::match_frame(r, other, &frame);
                r = a;
                other = b;
                let n = Complex64::i() * r;
                normal = if geom::dot(n, normal) < 0.0 { -n } else { n };
            }
        }
        (pts, roots)
    };
    let (fwd, fwd_roots) = half(1.0);
    let (bwd, bwd_roots) = half(-1.0);
    let seed_index = bwd.len() - 1;
    let mut points: Vec<Point> = bwd.into_iter().rev().collect();
    points.extend_from_slice(&fwd[1..]);
    let mut roots: Vec<(Point, Point)> = bwd_roots.into_iter().rev().collect();
    roots.extend(fwd_roots);
    Some(TestCurve {
        points,
        roots,
        seed_index,
    })
}

/// A crossing between a test curve and a traced curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub curve: usize,
    /// Fractional position on the curve (segment index plus offset).
    pub param: f64,
    pub position: Point,
    /// Arc length along the test curve.
    pub test_arc: f64,
}

/// Whether a traced-curve tangent belongs to the family of root `r` rather
/// than `other`.
#[inline]
pub fn family_matches(tangent: Point, r: Point, other: Point) -> bool {
    line_angle(tangent, r) < line_angle(tangent, other)
}

/// Crossings of `test` with indexed curves whose tangent belongs to the
/// family the test curve crosses, sorted by arc length on the test curve.
pub fn intersections(test: &TestCurve, curves: &[TracedCurve], index: &SpatialIndex) -> Vec<Intersection> {
    let arcs = test.arc_lengths();
    let nseg = test.points.len().saturating_sub(1);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for k in 0..nseg {
        let (a, b) = (test.points[k], test.points[k + 1]);
        let (r, other) = test.roots[k];
        seen.clear();
        for s in index.near_segment(a, b, 0.0) {
            if !seen.insert(s) {
                continue;
            }
            let curve = &curves[s.curve as usize];
            let j = s.segment as usize;
            let (c, d) = curve.segment(j);
            if !family_matches(d - c, r, other) {
                continue;
            }
            if let Some((t, u, pos)) = geom::segment_intersection(a, b, c, d) {
                if (t == 1.0 && k + 1 < nseg) || (u == 1.0 && j + 1 < curve.segment_count()) {
                    continue;
                }
                out.push(Intersection {
                    curve: s.curve as usize,
                    param: j as f64 + u,
                    position: pos,
                    test_arc: arcs[k] + t * (arcs[k + 1] - arcs[k]),
                });
            }
        }
    }
    out.sort_by(|x, y| {
        x.test_arc
            .total_cmp(&y.test_arc)
            .then(x.curve.cmp(&y.curve))
            .then(x.param.total_cmp(&y.param))
    });
    out
}

/// All-pairs version of [`intersections`] without the index.
pub fn intersections_brute_force(test: &TestCurve, curves: &[TracedCurve]) -> Vec<Intersection> {
    let arcs = test.arc_lengths();
    let nseg = test.points.len().saturating_sub(1);
    let mut out = Vec::new();
    for k in 0..nseg {
        let (a, b) = (test.points[k], test.points[k + 1]);
        let (r, other) = test.roots[k];
        for (ci, curve) in curves.iter().enumerate() {
            for j in 0..curve.segment_count() {
                let (c, d) = curve.segment(j);
                if !family_matches(d - c, r, other) {
                    continue;
                }
                if let Some((t, u, pos)) = geom::segment_intersection(a, b, c, d) {
                    if (t == 1.0 && k + 1 < nseg) || (u == 1.0 && j + 1 < curve.segment_count()) {
                        continue;
                    }
                    out.push(Intersection {
                        curve: ci,
                        param: j as f64 + u,
                        position: pos,
                        test_arc: arcs[k] + t * (arcs[k + 1] - arcs[k]),
                    });
                }
            }
        }
    }
    out.sort_by(|x, y| {
        x.test_arc
            .total_cmp(&y.test_arc)
            .then(x.curve.cmp(&y.curve))
            .then(x.param.total_cmp(&y.param))
    });
    out
}
