//! Curve bundles and the topology graph built from them, with the
//! simplification passes: loop contraction, branch pruning, unzipping of
//! merged parallel strokes, and repair of gaps left by singularities.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::geom::{self, cross, pixel_center, point_in_polygon, Point};
use crate::raster::NarrowBand;
use crate::trace::{self, FrameCache, SpatialIndex, TraceParams, TracedCurve};

/// One crossing of a traced curve, as a member of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    pub curve: usize,
    /// Fractional position along the curve.
    pub param: f64,
    #[serde(serialize_with = "ser_point")]
    pub position: Point,
}

fn ser_point<S: serde::Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
    [p.re, p.im].serialize(s)
}

/// A group of adjacent curve crossings on one test curve: a cross-section
/// of a stroke.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveBundle {
    #[serde(serialize_with = "ser_point")]
    pub seed: Point,
    pub members: Vec<Member>,
    #[serde(serialize_with = "ser_point")]
    pub barycenter: Point,
    /// Largest distance between two members.
    pub width: f64,
    /// Created by unzipping or vertex splitting.
    pub split: bool,
}

impl CurveBundle {
    pub fn new(seed: Point, members: Vec<Member>) -> Self {
        let n = members.len().max(1) as f64;
        let barycenter = if members.is_empty() {
            seed
        } else {
            members.iter().map(|m| m.position).sum::<Point>() / n
        };
        let mut width: f64 = 0.0;
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                width = width.max((a.position - b.position).norm());
            }
        }
        Self {
            seed,
            members,
            barycenter,
            width,
            split: false,
        }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.width
    }

    /// Half the width of the inked stroke: member curves sit on pixel
    /// centers, so the ink extends half a pixel past the outer ones.
    pub fn stroke_radius(&self) -> f64 {
        0.5 * (self.width + 1.0)
    }

    pub fn curves(&self) -> BTreeSet<usize> {
        self.members.iter().map(|m| m.curve).collect()
    }

    /// Copy restricted to members on `curves`; keeps all members when none
    /// would remain.
    pub fn restricted(&self, curves: &BTreeSet<usize>) -> Self {
        let kept: Vec<Member> = self.members.iter().copied().filter(|m| curves.contains(&m.curve)).collect();
        let mut out = if kept.is_empty() {
            self.clone()
        } else {
            CurveBundle::new(self.seed, kept)
        };
        out.split = true;
        out
    }

    /// Members on curve `c`.
    pub fn on_curve(&self, c: usize) -> impl Iterator<Item = &Member> + '_ {
        self.members.iter().filter(move |m| m.curve == c)
    }

    fn key(&self) -> Vec<(usize, u64)> {
        let mut k: Vec<(usize, u64)> = self.members.iter().map(|m| (m.curve, m.param.to_bits())).collect();
        k.sort_unstable();
        k
    }
}

/// Bundle grouping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleParams {
    /// Adjacent crossings closer than this along the test curve are grouped.
    pub gap: f64,
    /// Arc-length spacing of bundle seeds along curve interiors.
    pub spacing: f64,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self { gap: 1.25, spacing: 1.0 }
    }
}

/// Builds bundles from test curves seeded at curve endpoints and at regular
/// arc-length intervals along each curve. Bundles with identical member
/// sets are kept once.
pub fn build_bundles(
    curves: &[TracedCurve],
    index: &SpatialIndex,
    band: &NarrowBand,
    cache: &FrameCache,
    trace_params: &TraceParams,
    params: &BundleParams,
) -> Vec<CurveBundle> {
    let arcs: Vec<Vec<f64>> = curves.iter().map(|c| c.arc_lengths()).collect();
    // Arc positions already covered by a bundle, per curve.
    let mut covered: Vec<Vec<f64>> = vec![Vec::new(); curves.len()];
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();

    let mut seeds: Vec<(usize, f64, bool)> = Vec::new();
    for (ci, c) in curves.iter().enumerate() {
        // Endpoints sit on the band boundary, where a test curve cannot
        // start; seed one step inside instead.
        let total = *arcs[ci].last().unwrap_or(&0.0);
        let inset = trace_params.step.min(0.5 * total);
        seeds.push((ci, param_at_arc(c, &arcs[ci], inset), true));
        if c.segment_count() > 0 {
            seeds.push((ci, param_at_arc(c, &arcs[ci], total - inset), true));
        }
    }
    for (ci, c) in curves.iter().enumerate() {
        let total = *arcs[ci].last().unwrap_or(&0.0);
        let steps = (total / params.spacing).floor() as usize;
        for k in 1..=steps {
            let s = k as f64 * params.spacing;
            if s >= total {
                break;
            }
            seeds.push((ci, param_at_arc(c, &arcs[ci], s), false));
        }
    }

    for (ci, t, endpoint) in seeds {
        let curve = &curves[ci];
        let s = curve.arc_at(&arcs[ci], t);
        if !endpoint && covered[ci].iter().any(|&a| (a - s).abs() < 0.5 * params.spacing) {
            continue;
        }
        let seed = curve.point_at(t);
        let tangent = curve.tangent_at(t);
        let mut members = bundle_members(curves, index, band, cache, trace_params, params, ci, t, seed, tangent);
        if endpoint {
            members.extend(ends_on(curves, index, trace_params, &members, seed));
        }
        let bundle = CurveBundle::new(seed, members);
        if !seen.insert(bundle.key()) {
            continue;
        }
        for m in &bundle.members {
            covered[m.curve].push(curves[m.curve].arc_at(&arcs[m.curve], m.param));
        }
        out.push(bundle);
    }
    out
}

/// Points of other curves within two steps of the curve end `seed` that are
/// not among `members` yet. A curve that ends on another one, by running
/// into it or by leaving the ink where the other one hugs the edge, is
/// often collinear with the other curve's cross-section there, so the
/// orthogonal test curve cannot see the contact.
fn ends_on(
    curves: &[TracedCurve],
    index: &SpatialIndex,
    trace_params: &TraceParams,
    members: &[Member],
    seed: Point,
) -> Vec<Member> {
    let radius = 2.0 * trace_params.step;
    let mut best: BTreeMap<usize, (f64, Member)> = BTreeMap::new();
    for s in index.near(seed, radius) {
        let (ci, k) = (s.curve as usize, s.segment as usize);
        if members.iter().any(|m| m.curve == ci) {
            continue;
        }
        let (a, b) = curves[ci].segment(k);
        let (q, u) = geom::project_on_segment(seed, a, b);
        let dist = (q - seed).norm();
        if dist < radius && best.get(&ci).is_none_or(|(d, _)| dist < *d) {
            best.insert(ci, (dist, Member { curve: ci, param: k as f64 + u, position: q }));
        }
    }
    best.into_values().map(|(_, m)| m).collect()
}

fn param_at_arc(curve: &TracedCurve, arcs: &[f64], s: f64) -> f64 {
    if curve.segment_count() == 0 {
        return 0.0;
    }
    let k = arcs.partition_point(|&a| a <= s).saturating_sub(1).min(curve.segment_count().saturating_sub(1));
    let len = arcs[k + 1] - arcs[k];
    if len <= 0.0 {
        return k as f64;
    }
    k as f64 + ((s - arcs[k]) / len).clamp(0.0, 1.0)
}

#[allow(clippy::too_many_arguments)]
fn bundle_members(
    curves: &[TracedCurve],
    index: &SpatialIndex,
    band: &NarrowBand,
    cache: &FrameCache,
    trace_params: &TraceParams,
    params: &BundleParams,
    ci: usize,
    t: f64,
    seed: Point,
    tangent: Point,
) -> Vec<Member> {
    let own = Member {
        curve: ci,
        param: t,
        position: seed,
    };
    let tangent = if tangent.norm() > 0.0 { tangent } else { Point::new(1.0, 0.0) };
    let Some(test) = trace::trace_orthogonal_test_curve(seed, tangent, band, cache, trace_params) else {
        return vec![own];
    };
    let seed_arc = test.arc_lengths()[test.seed_index];
    let mut hits: Vec<(f64, Member)> = trace::intersections(&test, curves, index)
        .into_iter()
        .map(|h| {
            (
                h.test_arc,
                Member {
                    curve: h.curve,
                    param: h.param,
                    position: h.position,
                },
            )
        })
        .collect();
    // The seed itself, unless the test curve already found it.
    let tol = 2.0 * trace_params.step;
    match hits
        .iter()
        .position(|(a, m)| m.curve == ci && (a - seed_arc).abs() <= tol && (m.position - seed).norm() <= tol)
    {
        Some(_) => {}
        None => {
            let at = hits.partition_point(|(a, _)| *a < seed_arc);
            hits.insert(at, (seed_arc, own));
        }
    }
    let center = hits
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| m.curve == ci)
        .min_by(|(_, (a, _)), (_, (b, _))| (a - seed_arc).abs().total_cmp(&(b - seed_arc).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut lo = center;
    while lo > 0 && hits[lo].0 - hits[lo - 1].0 < params.gap {
        lo -= 1;
    }
    let mut hi = center;
    while hi + 1 < hits.len() && hits[hi + 1].0 - hits[hi].0 < params.gap {
        hi += 1;
    }
    hits[lo..=hi].iter().map(|(_, m)| *m).collect()
}

/// Graph whose vertices are curve bundles; edges record the curves along
/// which two bundles are adjacent.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TopologyGraph {
    vertices: BTreeMap<usize, CurveBundle>,
    adjacency: BTreeMap<usize, BTreeMap<usize, BTreeSet<usize>>>,
    next_id: usize,
}

impl TopologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, bundle: CurveBundle) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.vertices.insert(id, bundle);
        self.adjacency.insert(id, BTreeMap::new());
        id
    }

    pub fn remove_vertex(&mut self, v: usize) -> Option<CurveBundle> {
        let nbrs = self.adjacency.remove(&v)?;
        for n in nbrs.keys() {
            if let Some(a) = self.adjacency.get_mut(n) {
                a.remove(&v);
            }
        }
        self.vertices.remove(&v)
    }

    /// Adds an edge or merges `curves` into an existing one. Self-loops are
    /// ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, curves: impl IntoIterator<Item = usize> + Clone) {
        if a == b || !self.vertices.contains_key(&a) || !self.vertices.contains_key(&b) {
            return;
        }
        self.adjacency.get_mut(&a).unwrap().entry(b).or_default().extend(curves.clone());
        self.adjacency.get_mut(&b).unwrap().entry(a).or_default().extend(curves);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> Option<BTreeSet<usize>> {
        self.adjacency.get_mut(&b)?.remove(&a);
        self.adjacency.get_mut(&a)?.remove(&b)
    }

    pub fn vertex(&self, v: usize) -> &CurveBundle {
        &self.vertices[&v]
    }

    pub fn vertex_mut(&mut self, v: usize) -> &mut CurveBundle {
        self.vertices.get_mut(&v).expect("vertex exists")
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains_key(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = (usize, &CurveBundle)> + '_ {
        self.vertices.iter().map(|(k, v)| (*k, v))
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        self.vertices.keys().copied().collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&v).into_iter().flat_map(|a| a.keys().copied())
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.get(&v).map_or(0, |a| a.len())
    }

    pub fn edge_curves(&self, a: usize, b: usize) -> Option<&BTreeSet<usize>> {
        self.adjacency.get(&a)?.get(&b)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_curves(a, b).is_some()
    }

    /// Edges `(a, b, curves)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &BTreeSet<usize>)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(a, m)| m.iter().filter(move |(b, _)| a < *b).map(move |(b, c)| (*a, *b, c)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(|m| m.len()).sum::<usize>() / 2
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        (self.vertex(a).barycenter - self.vertex(b).barycenter).norm()
    }

    /// Connected components, each sorted, in order of smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &v in self.vertices.keys() {
            if !seen.insert(v) {
                continue;
            }
            let mut comp = vec![v];
            let mut stack = vec![v];
            while let Some(x) = stack.pop() {
                for n in self.neighbors(x) {
                    if seen.insert(n) {
                        comp.push(n);
                        stack.push(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Union of all edge annotations.
    pub fn annotated_curves(&self) -> BTreeSet<usize> {
        self.edges().flat_map(|(_, _, c)| c.iter().copied()).collect()
    }

    /// Shortest path from `from` to `to` by barycenter distance, avoiding
    /// the direct edge between them, with total length at most `bound`.
    fn shortest_detour(&self, from: usize, to: usize, bound: f64) -> Option<Vec<usize>> {
        let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(from, 0.0);
        heap.push(HeapItem { cost: 0.0, node: from });
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if cost > dist.get(&node).copied().unwrap_or(f64::INFINITY) {
                continue;
            }
            if node == to {
                let mut path = vec![to];
                let mut x = to;
                while let Some(&p) = prev.get(&x) {
                    path.push(p);
                    x = p;
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(node) {
                if (node == from && n == to) || (node == to && n == from) {
                    continue;
                }
                let c = cost + self.edge_length(node, n);
                if c > bound {
                    continue;
                }
                if c < dist.get(&n).copied().unwrap_or(f64::INFINITY) {
                    dist.insert(n, c);
                    prev.insert(n, node);
                    heap.push(HeapItem { cost: c, node: n });
                }
            }
        }
        None
    }

    /// Replaces `group` by one vertex holding the union of their members.
    pub fn contract(&mut self, group: &[usize]) -> usize {
        let set: BTreeSet<usize> = group.iter().copied().collect();
        let mut members: Vec<Member> = Vec::new();
        let mut keys = BTreeSet::new();
        let mut split = false;
        let mut outer: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        let seed = self.vertex(group[0]).seed;
        for &v in &set {
            let b = self.vertex(v);
            split |= b.split;
            for m in &b.members {
                if keys.insert((m.curve, m.param.to_bits())) {
                    members.push(*m);
                }
            }
            for (n, c) in &self.adjacency[&v] {
                if !set.contains(n) {
                    outer.entry(*n).or_default().extend(c.iter().copied());
                }
            }
        }
        for &v in &set {
            self.remove_vertex(v);
        }
        let mut bundle = CurveBundle::new(seed, members);
        bundle.split = split;
        let id = self.add_vertex(bundle);
        for (n, c) in outer {
            self.add_edge(id, n, c);
        }
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Connects bundles that are consecutive along some curve.
pub fn build_graph(bundles: &[CurveBundle]) -> TopologyGraph {
    let mut g = TopologyGraph::new();
    let ids: Vec<usize> = bundles.iter().map(|b| g.add_vertex(b.clone())).collect();
    let mut along: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for (i, b) in bundles.iter().enumerate() {
        for m in &b.members {
            along.entry(m.curve).or_default().push((m.param, ids[i]));
        }
    }
    for (curve, mut list) in along {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for w in list.windows(2) {
            if w[0].1 != w[1].1 {
                g.add_edge(w[0].1, w[1].1, [curve]);
            }
        }
    }
    g
}

/// The curve piece realizing edge `(a, b)`: the shared curve whose crossings
/// are closest to both barycenters, or a straight segment for edges without
/// curves.
pub fn edge_polyline(g: &TopologyGraph, curves: &[TracedCurve], a: usize, b: usize) -> Vec<Point> {
    let (va, vb) = (g.vertex(a), g.vertex(b));
    let mut best: Option<(f64, f64, f64, usize)> = None;
    if let Some(shared) = g.edge_curves(a, b) {
        for &c in shared {
            for ma in va.on_curve(c) {
                for mb in vb.on_curve(c) {
                    let cost = (ma.position - va.barycenter).norm()
                        + (mb.position - vb.barycenter).norm()
                        + 1e-3 * (ma.param - mb.param).abs();
                    if best.is_none_or(|(bc, ..)| cost < bc) {
                        best = Some((cost, ma.param, mb.param, c));
                    }
                }
            }
        }
    }
    match best {
        Some((_, ta, tb, c)) => curves[c].sub_polyline(ta, tb),
        None => vec![va.barycenter, vb.barycenter],
    }
}

/// Induced vectorization of a vertex sequence: edge pieces joined by
/// straight ligaments.
pub fn induced_polyline(g: &TopologyGraph, curves: &[TracedCurve], path: &[usize], closed: bool) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    let n = path.len();
    let count = if closed { n } else { n.saturating_sub(1) };
    for k in 0..count {
        let piece = edge_polyline(g, curves, path[k], path[(k + 1) % n]);
        out.extend(piece);
    }
    if out.is_empty() {
        out.extend(path.iter().map(|&v| g.vertex(v).barycenter));
    }
    out
}

/// Number of pixels outside the band whose centers lie inside `polygon`.
pub fn enclosed_white_pixels(polygon: &[Point], band: &NarrowBand) -> usize {
    if polygon.len() < 3 {
        return 0;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in polygon {
        x0 = x0.min(p.re);
        y0 = y0.min(p.im);
        x1 = x1.max(p.re);
        y1 = y1.max(p.im);
    }
    let c0 = (x0 - 0.5).floor().max(0.0) as usize;
    let r0 = (y0 - 0.5).floor().max(0.0) as usize;
    let c1 = ((x1 - 0.5).ceil().max(0.0) as usize).min(band.width().saturating_sub(1));
    let r1 = ((y1 - 0.5).ceil().max(0.0) as usize).min(band.height().saturating_sub(1));
    let mut count = 0;
    for r in r0..=r1 {
        for c in c0..=c1 {
            if !band.contains(c, r) && point_in_polygon(pixel_center(c, r), polygon) {
                count += 1;
            }
        }
    }
    count
}

/// Simplification parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifyParams {
    /// Loops enclosing fewer white pixels than this are contracted.
    pub n_hole: usize,
    /// Longest loop perimeter considered for contraction, in pixels.
    pub loop_perimeter: f64,
    /// A leaf this close to a singular pixel is a repair candidate.
    pub singular_radius: f64,
    /// Longest repair connection.
    pub repair_radius: f64,
}

impl Default for SimplifyParams {
    fn default() -> Self {
        Self {
            n_hole: 4,
            loop_perimeter: 40.0,
            singular_radius: 2.0,
            repair_radius: 10.0,
        }
    }
}

/// Contracts every cycle whose induced vectorization encloses fewer than
/// `n_hole` white pixels, until none is left.
pub fn contract_small_loops(
    g: &mut TopologyGraph,
    curves: &[TracedCurve],
    band: &NarrowBand,
    params: &SimplifyParams,
) -> usize {
    let mut contracted = 0;
    loop {
        let mut changed = false;
        let edges: Vec<(usize, usize)> = g.edges().map(|(a, b, _)| (a, b)).collect();
        for (a, b) in edges {
            if !g.has_edge(a, b) {
                continue;
            }
            let bound = params.loop_perimeter - g.edge_length(a, b);
            let Some(path) = g.shortest_detour(a, b, bound) else {
                continue;
            };
            let polygon = induced_polyline(g, curves, &path, true);
            if enclosed_white_pixels(&polygon, band) < params.n_hole {
                g.contract(&path);
                contracted += 1;
                changed = true;
            }
        }
        if !changed {
            return contracted;
        }
    }
}

/// The branch starting at `v` through neighbor `first`: a chain of
/// degree-2 vertices ending in a leaf. Returns `None` if the chain reaches
/// a vertex of another degree (or loops).
pub fn branch_from(g: &TopologyGraph, v: usize, first: usize) -> Option<Vec<usize>> {
    let mut path = vec![first];
    let (mut prev, mut cur) = (v, first);
    loop {
        match g.degree(cur) {
            1 => return Some(path),
            2 => {
                let next = g.neighbors(cur).find(|&n| n != prev)?;
                if next == v || path.contains(&next) {
                    return None;
                }
                path.push(next);
                prev = cur;
                cur = next;
            }
            _ => return None,
        }
    }
}

/// Full and outside-the-other-strokes lengths of `branch` hanging off `v`.
fn branch_lengths(g: &TopologyGraph, v: usize, branch: &[usize]) -> (f64, f64) {
    let in_branch: BTreeSet<usize> = branch.iter().copied().collect();
    let others: Vec<(Point, f64)> = g
        .vertices()
        .filter(|(id, _)| !in_branch.contains(id))
        .map(|(_, b)| (b.barycenter, b.stroke_radius()))
        .collect();
    let mut full = 0.0;
    let mut outside = 0.0;
    let mut prev = v;
    for &x in branch {
        let len = g.edge_length(prev, x);
        full += len;
        let bx = g.vertex(x);
        let inside = others
            .iter()
            .any(|(p, r)| (p - bx.barycenter).norm() < r + bx.stroke_radius());
        if !inside {
            outside += len;
        }
        prev = x;
    }
    (full, outside)
}

/// Removes short branches that mostly lie inside the strokes of the other
/// branches at the same vertex, and leaf stubs narrower than the stroke
/// they sit inside. Returns the number of removals.
pub fn prune_branches(g: &mut TopologyGraph) -> usize {
    let mut pruned = 0;
    loop {
        let mut changed = false;
        for v in g.vertex_ids() {
            if g.contains(v) && g.degree(v) == 1 {
                let n = g.neighbors(v).next().unwrap();
                let (leaf, nb) = (g.vertex(v), g.vertex(n));
                let inside = (leaf.barycenter - nb.barycenter).norm() < nb.stroke_radius();
                if inside && leaf.width + 0.5 < nb.width && g.degree(n) <= 2 {
                    g.remove_vertex(v);
                    pruned += 1;
                    changed = true;
                }
            }
        }
        for v in g.vertex_ids() {
            while g.contains(v) && g.degree(v) > 2 {
                let mut best: Option<(f64, Vec<usize>)> = None;
                for n in g.neighbors(v).collect::<Vec<_>>() {
                    if let Some(b) = branch_from(g, v, n) {
                        let len = path_length(g, v, &b);
                        if best.as_ref().is_none_or(|(l, _)| len < *l) {
                            best = Some((len, b));
                        }
                    }
                }
                let Some((_, branch)) = best else { break };
                let (full, outside) = branch_lengths(g, v, &branch);
                if outside < (full / 4.0).max(1.0) {
                    for x in branch {
                        g.remove_vertex(x);
                    }
                    pruned += 1;
                    changed = true;
                } else {
                    break;
                }
            }
        }
        if !changed {
            return pruned;
        }
    }
}

fn path_length(g: &TopologyGraph, start: usize, path: &[usize]) -> f64 {
    let mut prev = start;
    let mut total = 0.0;
    for &x in path {
        total += g.edge_length(prev, x);
        prev = x;
    }
    total
}

/// Splits high-valence vertices and duplicates degree-2 paths joining two
/// degree-3 vertices, so merged parallel strokes come apart.
pub fn unzip_parallel(g: &mut TopologyGraph) -> usize {
    let mut count = 0;
    for v in g.vertex_ids() {
        while g.contains(v) && g.degree(v) >= 4 {
            peel_pair(g, v);
            count += 1;
        }
    }
    while let Some(path) = find_unzip_path(g) {
        unzip_path(g, &path);
        count += 1;
    }
    count
}

/// Detaches the two neighbors of `v` that best continue each other onto a
/// copy of `v`.
fn peel_pair(g: &mut TopologyGraph, v: usize) {
    let nbrs: Vec<usize> = g.neighbors(v).collect();
    let bv = g.vertex(v).barycenter;
    let mut best: Option<((usize, f64), (usize, usize))> = None;
    for i in 0..nbrs.len() {
        for j in i + 1..nbrs.len() {
            let (a, b) = (nbrs[i], nbrs[j]);
            let shared = g.edge_curves(v, a).unwrap().intersection(g.edge_curves(v, b).unwrap()).count();
            let da = g.vertex(a).barycenter - bv;
            let db = g.vertex(b).barycenter - bv;
            // More opposite is straighter.
            let straight = -geom::dot(da, db) / (da.norm() * db.norm()).max(1e-300);
            let better = match &best {
                None => true,
                Some(((s, st), _)) => shared > *s || (shared == *s && straight > *st + 1e-12),
            };
            if better {
                best = Some(((shared, straight), (a, b)));
            }
        }
    }
    let Some((_, (a, b))) = best else { return };
    let ca = g.remove_edge(v, a).unwrap_or_default();
    let cb = g.remove_edge(v, b).unwrap_or_default();
    let set: BTreeSet<usize> = ca.union(&cb).copied().collect();
    let copy = g.vertex(v).restricted(&set);
    let id = g.add_vertex(copy);
    g.add_edge(id, a, ca);
    g.add_edge(id, b, cb);
    let rest: BTreeSet<usize> = g
        .neighbors(v)
        .collect::<Vec<_>>()
        .into_iter()
        .flat_map(|n| g.edge_curves(v, n).cloned().unwrap_or_default())
        .collect();
    let restricted = g.vertex(v).restricted(&rest);
    *g.vertex_mut(v) = restricted;
}

fn find_unzip_path(g: &TopologyGraph) -> Option<Vec<usize>> {
    for a in g.vertex_ids() {
        if g.degree(a) != 3 {
            continue;
        }
        for first in g.neighbors(a).collect::<Vec<_>>() {
            let mut path = vec![a, first];
            let (mut prev, mut cur) = (a, first);
            while g.degree(cur) == 2 {
                let Some(next) = g.neighbors(cur).find(|&n| n != prev) else { break };
                if path.contains(&next) {
                    break;
                }
                path.push(next);
                prev = cur;
                cur = next;
            }
            if cur != a && g.degree(cur) == 3 && !path[1..path.len() - 1].contains(&cur) {
                return Some(path);
            }
        }
    }
    None
}

fn unzip_path(g: &mut TopologyGraph, path: &[usize]) {
    let (a, b) = (path[0], *path.last().unwrap());
    let (pa, pb) = (path[1], path[path.len() - 2]);
    let outer_a: Vec<usize> = g.neighbors(a).filter(|&n| n != pa).collect();
    let outer_b: Vec<usize> = g.neighbors(b).filter(|&n| n != pb).collect();
    if outer_a.len() != 2 || outer_b.len() != 2 {
        return;
    }
    let curves_a: Vec<BTreeSet<usize>> = outer_a.iter().map(|&n| g.edge_curves(a, n).unwrap().clone()).collect();
    let curves_b: Vec<BTreeSet<usize>> = outer_b.iter().map(|&n| g.edge_curves(b, n).unwrap().clone()).collect();
    let shared = |i: usize, j: usize| curves_a[i].intersection(&curves_b[j]).count();
    let straight_score = shared(0, 0) + shared(1, 1);
    let cross_score = shared(0, 1) + shared(1, 0);
    let keep_order = if straight_score != cross_score {
        straight_score > cross_score
    } else {
        let ta = g.vertex(pa).barycenter - g.vertex(a).barycenter;
        let tb = g.vertex(b).barycenter - g.vertex(pb).barycenter;
        let side = |p: Point, at: Point, t: Point| cross(t, p - at).signum();
        let ba = g.vertex(a).barycenter;
        let bb = g.vertex(b).barycenter;
        let sa: Vec<f64> = outer_a.iter().map(|&n| side(g.vertex(n).barycenter, ba, ta)).collect();
        let sb: Vec<f64> = outer_b.iter().map(|&n| side(g.vertex(n).barycenter, bb, tb)).collect();
        if sa[0] != sa[1] && sb[0] != sb[1] {
            sa[0] == sb[0]
        } else {
            let d = |i: usize, j: usize| (g.vertex(outer_a[i]).barycenter - g.vertex(outer_b[j]).barycenter).norm();
            d(0, 0) + d(1, 1) <= d(0, 1) + d(1, 0)
        }
    };
    let pairs = if keep_order { [(0, 0), (1, 1)] } else { [(0, 1), (1, 0)] };

    let sets: Vec<BTreeSet<usize>> = pairs.iter().map(|&(i, j)| curves_a[i].union(&curves_b[j]).copied().collect()).collect();
    let path_edges: Vec<BTreeSet<usize>> = path.windows(2).map(|w| g.edge_curves(w[0], w[1]).unwrap().clone()).collect();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let set = &sets[k];
        let other = &sets[1 - k];
        let copies: Vec<usize> = path.iter().map(|&v| g.vertex(v).restricted(set)).collect::<Vec<_>>().into_iter().map(|b| g.add_vertex(b)).collect();
        g.add_edge(copies[0], outer_a[i], curves_a[i].clone());
        g.add_edge(*copies.last().unwrap(), outer_b[j], curves_b[j].clone());
        for (e, w) in copies.windows(2).enumerate() {
            let orig = &path_edges[e];
            let mut ann: BTreeSet<usize> = orig.iter().copied().filter(|c| set.contains(c) || !other.contains(c)).collect();
            if ann.is_empty() {
                ann = orig.clone();
            }
            g.add_edge(w[0], w[1], ann);
        }
    }
    for &v in path {
        g.remove_vertex(v);
    }
}

/// Connects leaves next to singular pixels to the closest vertex that is
/// not already close to them through the graph. Returns the number of new
/// edges, which carry no curves.
pub fn repair_singularity_gaps(
    g: &mut TopologyGraph,
    band: &NarrowBand,
    singular: &BTreeSet<usize>,
    params: &SimplifyParams,
) -> usize {
    if singular.is_empty() {
        return 0;
    }
    let spots: Vec<Point> = singular.iter().map(|&i| {
        let (c, r) = band.pixel(i);
        pixel_center(c, r)
    }).collect();
    let leaves: Vec<usize> = g
        .vertex_ids()
        .into_iter()
        .filter(|&v| g.degree(v) <= 1)
        .filter(|&v| {
            let b = g.vertex(v).barycenter;
            spots.iter().any(|s| (s - b).norm() <= params.singular_radius)
        })
        .collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for &l in &leaves {
        let bl = g.vertex(l).barycenter;
        let graph_dist = graph_distances(g, l, 3.0 * params.repair_radius + 2.0);
        for (v, b) in g.vertices() {
            if v == l || g.has_edge(l, v) {
                continue;
            }
            let d = (b.barycenter - bl).norm();
            if d > params.repair_radius {
                continue;
            }
            if graph_dist.get(&v).is_some_and(|&gd| gd <= 2.0 * d + 2.0) {
                continue;
            }
            candidates.push((d, l, v));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut done = BTreeSet::new();
    let mut added = 0;
    for (_, l, v) in candidates {
        if done.contains(&l) || g.has_edge(l, v) {
            continue;
        }
        g.add_edge(l, v, []);
        done.insert(l);
        if leaves.contains(&v) {
            done.insert(v);
        }
        added += 1;
    }
    added
}

fn graph_distances(g: &TopologyGraph, from: usize, bound: f64) -> BTreeMap<usize, f64> {
    let mut dist = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(from, 0.0);
    heap.push(HeapItem { cost: 0.0, node: from });
    while let Some(HeapItem { cost, node }) = heap.pop() {
        if cost > dist.get(&node).copied().unwrap_or(f64::INFINITY) {
            continue;
        }
        for n in g.neighbors(node) {
            let c = cost + g.edge_length(node, n);
            if c <= bound && c < dist.get(&n).copied().unwrap_or(f64::INFINITY) {
                dist.insert(n, c);
                heap.push(HeapItem { cost: c, node: n });
            }
        }
    }
    dist
}
