//! Embedding of the topology graph as polylines.
//!
//! Each chain of valence-2 vertices between two terminals is realized by a
//! shortest path over the bundle intersection points, weighted by how well
//! consecutive points follow a shared traced curve and how close they stay
//! to the bundle barycenters.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::geom::{self, direction_angle, point_polyline_distance, segment_intersection, Point};
use crate::topology::{CurveBundle, TopologyGraph};
use crate::trace::TracedCurve;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedParams {
    /// Weight of the centering term.
    pub eta: f64,
    /// A free stroke end this close to another stroke's ink is attached to it.
    pub contact_gap: f64,
    /// A host stroke is split at a contact when it turns by more than this
    /// many degrees there.
    pub corner_angle: f64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            eta: 0.07,
            contact_gap: 0.5,
            corner_angle: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothParams {
    /// Douglas-Peucker tolerance in pixels; 0 disables simplification.
    pub tolerance: f64,
    pub rounds: usize,
    pub factor: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        Self {
            tolerance: 0.75,
            rounds: 3,
            factor: 0.5,
        }
    }
}

/// Where a stroke segment comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentSource {
    Curve(usize),
    Ligament,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
    /// One entry per segment.
    pub sources: Vec<SegmentSource>,
    pub closed: bool,
    /// Graph vertices of the chain this stroke realizes, terminal to terminal.
    pub chain: Vec<usize>,
    /// Whether each end is free (not at a junction or contact).
    pub free: [bool; 2],
    /// Half the typical ink width along the stroke.
    pub radius: f64,
}

impl Stroke {
    pub fn length(&self) -> f64 {
        geom::polyline_length(&self.points)
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().expect("nonempty stroke")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JunctionKind {
    /// Strokes ending at a common point.
    Branch,
    /// A stroke ending on the interior of another.
    Contact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub position: Point,
    pub strokes: Vec<usize>,
    pub kind: JunctionKind,
    /// Graph vertex the junction came from, if any.
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorDrawing {
    pub width: usize,
    pub height: usize,
    pub strokes: Vec<Stroke>,
    pub junctions: Vec<Junction>,
}

impl VectorDrawing {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn closed_count(&self) -> usize {
        self.strokes.iter().filter(|s| s.closed).count()
    }

    /// Free stroke ends.
    pub fn endpoints(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for s in &self.strokes {
            if s.free[0] {
                out.push(s.start());
            }
            if s.free[1] {
                out.push(s.end());
            }
        }
        out
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(|s| s.points.len()).sum()
    }
}

/// Aux edge weight between intersection point `p` of bundle `a` and `q` of
/// bundle `b`. `None` when the bundles share no curve.
pub fn edge_weight(p: Point, q: Point, a: &CurveBundle, b: &CurveBundle, shared: &BTreeSet<usize>, eta: f64) -> Option<f64> {
    let connection = closest_shared(p, q, a, b, shared).map(|(d, ..)| d)?;
    Some(connection + eta * centering(p, q, a, b))
}

fn centering(p: Point, q: Point, a: &CurveBundle, b: &CurveBundle) -> f64 {
    let w = a.width + b.width;
    if w <= 0.0 {
        return 0.0;
    }
    ((p - a.barycenter).norm() + (q - b.barycenter).norm()) / w
}

/// Best shared curve and member pair for `p`, `q`: (distance, curve,
/// member index in `a`, member index in `b`).
fn closest_shared(
    p: Point,
    q: Point,
    a: &CurveBundle,
    b: &CurveBundle,
    shared: &BTreeSet<usize>,
) -> Option<(f64, usize, usize, usize)> {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for (i, ma) in a.members.iter().enumerate() {
        if !shared.contains(&ma.curve) {
            continue;
        }
        let da = (ma.position - p).norm();
        for (j, mb) in b.members.iter().enumerate() {
            if mb.curve != ma.curve {
                continue;
            }
            let d = da + (mb.position - q).norm();
            if best.is_none_or(|(bd, ..)| d < bd) {
                best = Some((d, ma.curve, i, j));
            }
        }
    }
    best
}

#[cfg(test)]
/// Weight used between consecutive layers: the aux edge weight, or a
/// straight-ligament cost for edges without shared curves.
fn layer_weight(g: &TopologyGraph, a: usize, i: usize, b: usize, j: usize, eta: f64) -> f64 {
    let (va, vb) = (g.vertex(a), g.vertex(b));
    let (p, q) = (va.members[i].position, vb.members[j].position);
    let empty = BTreeSet::new();
    let shared = g.edge_curves(a, b).unwrap_or(&empty);
    edge_weight(p, q, va, vb, shared, eta).unwrap_or_else(|| (p - q).norm() + eta * centering(p, q, va, vb))
}

/// All `layer_weight` values between the members of `a` and `b`, indexed
/// `[i][j]`. The connection term separates per curve, so each entry is a
/// minimum over shared curves of two precomputed distances.
fn layer_weights(g: &TopologyGraph, a: usize, b: usize, eta: f64) -> Vec<Vec<f64>> {
    let (va, vb) = (g.vertex(a), g.vertex(b));
    let nearest = |bundle: &CurveBundle, c: usize| -> Vec<f64> {
        bundle
            .members
            .iter()
            .map(|m| bundle.on_curve(c).map(|x| (x.position - m.position).norm()).fold(f64::INFINITY, f64::min))
            .collect()
    };
    let per_curve: Vec<(Vec<f64>, Vec<f64>)> = g
        .edge_curves(a, b)
        .into_iter()
        .flatten()
        .filter(|&&c| va.on_curve(c).next().is_some() && vb.on_curve(c).next().is_some())
        .map(|&c| (nearest(va, c), nearest(vb, c)))
        .collect();
    va.members
        .iter()
        .enumerate()
        .map(|(i, ma)| {
            vb.members
                .iter()
                .enumerate()
                .map(|(j, mb)| {
                    let (p, q) = (ma.position, mb.position);
                    let connection = per_curve.iter().map(|(da, db)| da[i] + db[j]).fold(f64::INFINITY, f64::min);
                    let connection = if connection.is_finite() { connection } else { (p - q).norm() };
                    connection + eta * centering(p, q, va, vb)
                })
                .collect()
        })
        .collect()
}

/// Cost of entering bundle `b` at member `i` from its barycenter.
fn terminal_cost(b: &CurveBundle, i: usize, eta: f64) -> f64 {
    if b.width <= 0.0 {
        return 0.0;
    }
    eta * (b.members[i].position - b.barycenter).norm() / b.width
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxNode {
    pub vertex: usize,
    pub member: usize,
    pub position: Point,
}

/// Graph over all bundle intersection points, with complete bipartite
/// connections across each topology edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxGraph {
    nodes: Vec<AuxNode>,
    adjacency: Vec<Vec<(usize, f64)>>,
    first: BTreeMap<usize, usize>,
}

impl AuxGraph {
    pub fn build(g: &TopologyGraph, eta: f64) -> Self {
        let mut nodes = Vec::new();
        let mut first = BTreeMap::new();
        for (v, b) in g.vertices() {
            first.insert(v, nodes.len());
            for (k, m) in b.members.iter().enumerate() {
                nodes.push(AuxNode {
                    vertex: v,
                    member: k,
                    position: m.position,
                });
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (a, b, _) in g.edges() {
            let weights = layer_weights(g, a, b, eta);
            for (i, row) in weights.iter().enumerate() {
                for (j, &w) in row.iter().enumerate() {
                    let (x, y) = (first[&a] + i, first[&b] + j);
                    adjacency[x].push((y, w));
                    adjacency[y].push((x, w));
                }
            }
        }
        Self { nodes, adjacency, first }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[AuxNode] {
        &self.nodes
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    /// Node index of member `member` of vertex `vertex`.
    pub fn node_of(&self, vertex: usize, member: usize) -> Option<usize> {
        let i = self.first.get(&vertex)? + member;
        (i < self.nodes.len() && self.nodes[i].vertex == vertex).then_some(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub prev: Vec<Option<usize>>,
}

impl ShortestPaths {
    /// Node sequence from a source to `target`.
    pub fn path_to(&self, target: usize) -> Option<Vec<usize>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = vec![target];
        let mut x = target;
        while let Some(p) = self.prev[x] {
            path.push(p);
            x = p;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item {
    cost: f64,
    node: usize,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from several weighted sources; ties settle the lower node id
/// first.
pub fn dijkstra(adjacency: &[Vec<(usize, f64)>], sources: &[(usize, f64)]) -> ShortestPaths {
    let n = adjacency.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &(s, c) in sources {
        if c < dist[s] {
            dist[s] = c;
            heap.push(Item { cost: c, node: s });
        }
    }
    let mut done = vec![false; n];
    while let Some(Item { cost, node }) = heap.pop() {
        if done[node] || cost > dist[node] {
            continue;
        }
        done[node] = true;
        for &(m, w) in &adjacency[node] {
            let c = cost + w;
            if c < dist[m] {
                dist[m] = c;
                prev[m] = Some(node);
                heap.push(Item { cost: c, node: m });
            }
        }
    }
    ShortestPaths { dist, prev }
}

/// How a layered path starts or ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// At the bundle barycenter, entering through any member.
    Barycenter,
    /// Through one given member.
    Member(usize),
}

/// Minimum-cost choice of one member per vertex along `seq`, with
/// `fixed` pinning some layers to a member. Returns the cost and the chosen
/// members.
pub fn layered_path(
    g: &TopologyGraph,
    seq: &[usize],
    start: Terminal,
    end: Terminal,
    fixed: &BTreeMap<usize, usize>,
    eta: f64,
) -> Option<(f64, Vec<usize>)> {
    if seq.is_empty() {
        return None;
    }
    let mut offsets = Vec::with_capacity(seq.len() + 1);
    let mut n = 0;
    for &v in seq {
        offsets.push(n);
        n += g.vertex(v).members.len();
    }
    let (source, sink) = (n, n + 1);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 2];
    let allowed = |layer: usize, k: usize| fixed.get(&layer).is_none_or(|&f| f == k);
    let last = seq.len() - 1;
    for k in 0..g.vertex(seq[0]).members.len() {
        if !allowed(0, k) {
            continue;
        }
        let c = match start {
            Terminal::Barycenter => terminal_cost(g.vertex(seq[0]), k, eta),
            Terminal::Member(m) if m == k => 0.0,
            Terminal::Member(_) => continue,
        };
        adj[source].push((offsets[0] + k, c));
    }
    for layer in 0..last {
        let weights = layer_weights(g, seq[layer], seq[layer + 1], eta);
        for (i, row) in weights.iter().enumerate() {
            if !allowed(layer, i) {
                continue;
            }
            for (j, &w) in row.iter().enumerate() {
                if !allowed(layer + 1, j) {
                    continue;
                }
                adj[offsets[layer] + i].push((offsets[layer + 1] + j, w));
            }
        }
    }
    for k in 0..g.vertex(seq[last]).members.len() {
        if !allowed(last, k) {
            continue;
        }
        let c = match end {
            Terminal::Barycenter => terminal_cost(g.vertex(seq[last]), k, eta),
            Terminal::Member(m) if m == k => 0.0,
            Terminal::Member(_) => continue,
        };
        adj[offsets[last] + k].push((sink, c));
    }
    let sp = dijkstra(&adj, &[(source, 0.0)]);
    let path = sp.path_to(sink)?;
    let choice: Vec<usize> = path[1..path.len() - 1]
        .iter()
        .enumerate()
        .map(|(layer, &node)| node - offsets[layer])
        .collect();
    Some((sp.dist[sink], choice))
}

/// Removes immediate back-and-forth steps (`x, y, x` becomes `x`).
fn reduce_walk(seq: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(seq.len());
    for v in seq {
        if out.last() == Some(&v) {
            continue;
        }
        if out.len() >= 2 && out[out.len() - 2] == v {
            out.pop();
            continue;
        }
        out.push(v);
    }
    out
}

/// Polyline realizing the chosen members along `seq`.
fn realize(
    g: &TopologyGraph,
    curves: &[TracedCurve],
    seq: &[usize],
    choice: &[usize],
    start: Terminal,
    end: Terminal,
) -> (Vec<Point>, Vec<SegmentSource>) {
    let mut pts: Vec<Point> = Vec::new();
    let mut src: Vec<SegmentSource> = Vec::new();
    let push = |p: Point, s: SegmentSource, pts: &mut Vec<Point>, src: &mut Vec<SegmentSource>| {
        if let Some(&last) = pts.last() {
            if (p - last).norm() <= 1e-9 {
                return;
            }
            src.push(s);
        }
        pts.push(p);
    };
    let pos = |layer: usize| g.vertex(seq[layer]).members[choice[layer]].position;
    if start == Terminal::Barycenter {
        push(g.vertex(seq[0]).barycenter, SegmentSource::Ligament, &mut pts, &mut src);
    }
    push(pos(0), SegmentSource::Ligament, &mut pts, &mut src);
    for layer in 0..seq.len() - 1 {
        let (a, b) = (seq[layer], seq[layer + 1]);
        let (va, vb) = (g.vertex(a), g.vertex(b));
        let (p, q) = (pos(layer), pos(layer + 1));
        let empty = BTreeSet::new();
        let shared = g.edge_curves(a, b).unwrap_or(&empty);
        if let Some((_, c, i, j)) = closest_shared(p, q, va, vb, shared) {
            let (r1, r2) = (va.members[i], vb.members[j]);
            let piece = curves[c].sub_polyline(r1.param, r2.param);
            let direct = (r1.position - r2.position).norm();
            if geom::polyline_length(&piece) <= 3.0 * direct + 2.0 {
                push(r1.position, SegmentSource::Ligament, &mut pts, &mut src);
                for &x in &piece[1..] {
                    push(x, SegmentSource::Curve(c), &mut pts, &mut src);
                }
            }
        }
        push(q, SegmentSource::Ligament, &mut pts, &mut src);
    }
    if end == Terminal::Barycenter {
        push(g.vertex(*seq.last().unwrap()).barycenter, SegmentSource::Ligament, &mut pts, &mut src);
    }
    (pts, src)
}

/// Chains of valence-2 vertices between terminals (vertices of valence
/// other than 2), then pure cycles starting at their smallest vertex, then
/// isolated vertices. Each chain lists its vertices terminal to terminal.
pub fn chains(g: &TopologyGraph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut used_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut covered = BTreeSet::new();
    for v in g.vertex_ids() {
        if g.degree(v) == 2 {
            continue;
        }
        covered.insert(v);
        if g.degree(v) == 0 {
            out.push(vec![v]);
            continue;
        }
        for first in g.neighbors(v).collect::<Vec<_>>() {
            if used_edges.contains(&key(v, first)) {
                continue;
            }
            let mut chain = vec![v, first];
            used_edges.insert(key(v, first));
            let (mut prev, mut cur) = (v, first);
            while g.degree(cur) == 2 {
                let next = g
                    .neighbors(cur)
                    .find(|&n| n != prev && !used_edges.contains(&key(cur, n)))
                    .or_else(|| g.neighbors(cur).find(|&n| !used_edges.contains(&key(cur, n))));
                let Some(next) = next else { break };
                used_edges.insert(key(cur, next));
                chain.push(next);
                prev = cur;
                cur = next;
            }
            covered.extend(chain.iter().copied());
            out.push(chain);
        }
    }
    for v in g.vertex_ids() {
        if covered.contains(&v) {
            continue;
        }
        let mut chain = vec![v];
        covered.insert(v);
        let (mut prev, mut cur) = (usize::MAX, v);
        loop {
            let Some(next) = g.neighbors(cur).find(|&n| n != prev && !used_edges.contains(&key(cur, n))) else {
                break;
            };
            used_edges.insert(key(cur, next));
            chain.push(next);
            if next == v {
                break;
            }
            covered.insert(next);
            prev = cur;
            cur = next;
        }
        out.push(chain);
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Embedding state: the drawing plus the per-stroke member choices needed
/// by junction refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub drawing: VectorDrawing,
    /// Per stroke: the embedded vertex sequence and the chosen members.
    pub layers: Vec<(Vec<usize>, Vec<usize>)>,
    /// Junction position per junction vertex (a vertex whose barycenter it sits at).
    pub placement: BTreeMap<usize, usize>,
}

fn embed_chain(
    g: &TopologyGraph,
    curves: &[TracedCurve],
    chain: &[usize],
    placement: &BTreeMap<usize, usize>,
    legs: &BTreeMap<usize, Vec<Vec<usize>>>,
    fixed: &BTreeMap<usize, usize>,
    eta: f64,
) -> Result<(Stroke, Vec<usize>, Vec<usize>)> {
    let s = chain[0];
    let t = *chain.last().unwrap();
    let closed = chain.len() > 2 && s == t && g.degree(s) == 2;
    let radius = median(chain.iter().map(|&v| g.vertex(v).stroke_radius()).collect());
    if chain.len() == 1 {
        let b = g.vertex(s).barycenter;
        let stroke = Stroke {
            points: vec![b, b],
            sources: vec![SegmentSource::Ligament],
            closed: false,
            chain: chain.to_vec(),
            free: [true, true],
            radius,
        };
        return Ok((stroke, vec![s], Vec::new()));
    }
    let mut seq = Vec::new();
    seq.extend(walk_to_terminal(placement, legs, s).into_iter().rev());
    seq.extend_from_slice(chain);
    seq.extend(walk_to_terminal(placement, legs, t));
    let seq = if closed { chain.to_vec() } else { reduce_walk(seq) };
    let fixed_layers: BTreeMap<usize, usize> = seq
        .iter()
        .enumerate()
        .filter_map(|(layer, v)| fixed.get(v).map(|&m| (layer, m)))
        .filter(|&(layer, _)| layer != 0 && layer != seq.len() - 1)
        .collect();
    let (_, choice) = layered_path(g, &seq, Terminal::Barycenter, Terminal::Barycenter, &fixed_layers, eta)
        .ok_or_else(|| Error::Embedding(format!("no path along chain from vertex {s} to {t}")))?;
    let (points, sources) = if seq.len() == 1 {
        let b = g.vertex(seq[0]).barycenter;
        (vec![b, b], vec![SegmentSource::Ligament])
    } else {
        realize(g, curves, &seq, &choice, Terminal::Barycenter, Terminal::Barycenter)
    };
    let (points, sources) = if points.len() < 2 {
        (vec![points[0], points[0]], vec![SegmentSource::Ligament])
    } else {
        (points, sources)
    };
    let stroke = Stroke {
        points,
        sources,
        closed,
        chain: chain.to_vec(),
        free: [g.degree(s) == 1, g.degree(t) == 1],
        radius,
    };
    Ok((stroke, seq, choice))
}

/// Walk `v, ..., placement(v)` along the leg holding the placement; empty
/// when the junction sits at its own vertex.
fn walk_to_terminal(placement: &BTreeMap<usize, usize>, legs: &BTreeMap<usize, Vec<Vec<usize>>>, v: usize) -> Vec<usize> {
    let Some(&u) = placement.get(&v) else {
        return Vec::new();
    };
    if u == v {
        return Vec::new();
    }
    legs.get(&v)
        .into_iter()
        .flatten()
        .find_map(|leg| leg.iter().position(|&x| x == u).map(|k| leg[..=k].to_vec()))
        .unwrap_or_default()
}

fn junctions_for(g: &TopologyGraph, strokes: &[Stroke], placement: &BTreeMap<usize, usize>) -> Vec<Junction> {
    let mut out = Vec::new();
    for v in g.vertex_ids() {
        if g.degree(v) < 3 {
            continue;
        }
        let u = placement.get(&v).copied().unwrap_or(v);
        let incident: Vec<usize> = strokes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.chain.first() == Some(&v) || s.chain.last() == Some(&v))
            .map(|(i, _)| i)
            .collect();
        out.push(Junction {
            position: g.vertex(u).barycenter,
            strokes: incident,
            kind: JunctionKind::Branch,
            vertex: Some(v),
        });
    }
    out
}

/// Embeds every chain of `g` by a shortest path between its terminals'
/// barycenters.
pub fn initial_embedding(g: &TopologyGraph, curves: &[TracedCurve], width: usize, height: usize, eta: f64) -> Result<Embedding> {
    let placement: BTreeMap<usize, usize> = BTreeMap::new();
    embed_all(g, curves, width, height, &placement, &BTreeMap::new(), &BTreeMap::new(), eta)
}

#[allow(clippy::too_many_arguments)]
fn embed_all(
    g: &TopologyGraph,
    curves: &[TracedCurve],
    width: usize,
    height: usize,
    placement: &BTreeMap<usize, usize>,
    legs: &BTreeMap<usize, Vec<Vec<usize>>>,
    fixed: &BTreeMap<usize, usize>,
    eta: f64,
) -> Result<Embedding> {
    let mut drawing = VectorDrawing::new(width, height);
    let mut layers = Vec::new();
    for chain in chains(g) {
        let (stroke, seq, choice) = embed_chain(g, curves, &chain, placement, legs, fixed, eta)?;
        drawing.strokes.push(stroke);
        layers.push((seq, choice));
    }
    drawing.junctions = junctions_for(g, &drawing.strokes, placement);
    Ok(Embedding {
        drawing,
        layers,
        placement: placement.clone(),
    })
}

/// Index of the vertex closest to the arc-length middle of `chain`'s
/// interior among those not created by splitting; the exact middle when
/// all were split. `None` for chains without interior vertices.
pub fn chain_middle(g: &TopologyGraph, chain: &[usize]) -> Option<usize> {
    if chain.len() < 3 {
        return None;
    }
    let mut arc = vec![0.0];
    for w in chain.windows(2) {
        arc.push(arc.last().unwrap() + g.edge_length(w[0], w[1]));
    }
    let half = arc.last().unwrap() / 2.0;
    let pick = |filter: &dyn Fn(usize) -> bool| {
        (1..chain.len() - 1)
            .filter(|&k| filter(chain[k]))
            .min_by(|&a, &b| (arc[a] - half).abs().total_cmp(&(arc[b] - half).abs()).then(a.cmp(&b)))
    };
    pick(&|v| !g.vertex(v).split).or_else(|| pick(&|_| true))
}

/// Moves each valence-3 junction to the barycenter along its chains that
/// minimizes the summed shortest-path distance to its anchors, then
/// re-embeds all chains.
pub fn refine_junctions(g: &TopologyGraph, curves: &[TracedCurve], initial: &Embedding, eta: f64) -> Result<Embedding> {
    let mut fixed: BTreeMap<usize, usize> = BTreeMap::new();
    let mut legs: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    let mut placement = BTreeMap::new();
    for v in g.vertex_ids() {
        let Some(star) = star_of(g, initial, v) else { continue };
        for (leg, anchor) in &star {
            if let Terminal::Member(m) = anchor {
                fixed.insert(*leg.last().unwrap(), *m);
            }
        }
        let (at_v, costs) = star_costs(g, &star, eta);
        // The cost is nearly flat along legs that follow one curve, so a
        // move has to save more than a pixel's worth of centering.
        let mut best = (at_v - eta, v);
        for (i, (leg, _)) in star.iter().enumerate() {
            for k in 1..leg.len() {
                if costs[i][k] < best.0 {
                    best = (costs[i][k], leg[k]);
                }
            }
        }
        placement.insert(v, best.1);
        legs.insert(v, star.into_iter().map(|(leg, _)| leg).collect());
    }
    embed_all(g, curves, initial.drawing.width, initial.drawing.height, &placement, &legs, &fixed, eta)
}

/// Per-member cost of reaching the end of `walk` from each of its layers,
/// where `walk[0]` is the anchor vertex reached through `anchor`.
fn costs_to_anchor(g: &TopologyGraph, walk: &[usize], anchor: Terminal, eta: f64) -> Vec<Vec<f64>> {
    let first = g.vertex(walk[0]);
    let start: Vec<f64> = (0..first.members.len())
        .map(|m| match anchor {
            Terminal::Barycenter => terminal_cost(first, m, eta),
            Terminal::Member(a) if a == m => 0.0,
            Terminal::Member(_) => f64::INFINITY,
        })
        .collect();
    let mut out = vec![start];
    for w in walk.windows(2) {
        let next = extend_costs(g, w[1], w[0], out.last().unwrap(), eta);
        out.push(next);
    }
    out
}

/// One DP step: costs at `to` given costs at its neighbour `from`.
fn extend_costs(g: &TopologyGraph, to: usize, from: usize, d: &[f64], eta: f64) -> Vec<f64> {
    layer_weights(g, to, from, eta)
        .iter()
        .map(|row| row.iter().zip(d).map(|(w, x)| w + x).fold(f64::INFINITY, f64::min))
        .collect()
}

fn enter_cost(g: &TopologyGraph, u: usize, d: &[f64], eta: f64) -> f64 {
    let b = g.vertex(u);
    d.iter()
        .enumerate()
        .map(|(m, x)| terminal_cost(b, m, eta) + x)
        .fold(f64::INFINITY, f64::min)
}

/// [`star_cost`] for every candidate at once: the cost at the junction
/// vertex itself, and per leg the cost at each of its vertices (index 0
/// unused). One backward pass per anchor.
fn star_costs(g: &TopologyGraph, star: &[(Vec<usize>, Terminal)], eta: f64) -> (f64, Vec<Vec<f64>>) {
    let mut at_v = 0.0;
    let mut costs: Vec<Vec<f64>> = star.iter().map(|(leg, _)| vec![0.0; leg.len()]).collect();
    for (j, (leg_j, anchor)) in star.iter().enumerate() {
        let walk: Vec<usize> = leg_j.iter().rev().copied().collect();
        let d = costs_to_anchor(g, &walk, *anchor, eta);
        let at_center = d.last().unwrap();
        at_v += enter_cost(g, leg_j[0], at_center, eta);
        for (i, (leg_i, _)) in star.iter().enumerate() {
            if i == j {
                for k in 1..leg_i.len() {
                    costs[i][k] += enter_cost(g, leg_i[k], &d[leg_i.len() - 1 - k], eta);
                }
                continue;
            }
            let mut cur = at_center.clone();
            for k in 1..leg_i.len() {
                cur = extend_costs(g, leg_i[k], leg_i[k - 1], &cur, eta);
                costs[i][k] += enter_cost(g, leg_i[k], &cur, eta);
            }
        }
    }
    (at_v, costs)
}

/// Summed distance from the barycenter of vertex `star[leg_i].0[k]` to
/// every anchor of the star.
fn star_cost(g: &TopologyGraph, star: &[(Vec<usize>, Terminal)], leg_i: usize, k: usize, eta: f64) -> f64 {
    let prefix: Vec<usize> = star[leg_i].0[..=k].iter().rev().copied().collect();
    let mut total = 0.0;
    for (leg, anchor) in star {
        let mut seq = prefix.clone();
        seq.extend_from_slice(&leg[1..]);
        match layered_path(g, &reduce_walk(seq), Terminal::Barycenter, *anchor, &BTreeMap::new(), eta) {
            Some((c, _)) => total += c,
            None => return f64::INFINITY,
        }
    }
    total
}

/// Sum of shortest-path distances from the barycenter of `u` to the anchors
/// of junction `v`, as minimized by [`refine_junctions`].
pub fn junction_cost(g: &TopologyGraph, initial: &Embedding, v: usize, u: usize, eta: f64) -> Option<f64> {
    let star = star_of(g, initial, v)?;
    let (leg_i, k) = star
        .iter()
        .enumerate()
        .find_map(|(i, (leg, _))| leg.iter().position(|&x| x == u).map(|k| (i, k)))?;
    Some(star_cost(g, &star, leg_i, k, eta))
}

/// The legs of junction `v` (vertex lists from `v` to their anchor vertex)
/// with the anchor terminal of each.
pub fn star_of(g: &TopologyGraph, initial: &Embedding, v: usize) -> Option<Vec<(Vec<usize>, Terminal)>> {
    if g.degree(v) != 3 {
        return None;
    }
    let mut out = Vec::new();
    for (si, stroke) in initial.drawing.strokes.iter().enumerate() {
        let chain = &stroke.chain;
        let (s, t) = (chain[0], *chain.last().unwrap());
        if chain.len() < 2 || (s != v && t != v) {
            continue;
        }
        let (seq, choice) = &initial.layers[si];
        let both = g.degree(s) == 3 && g.degree(t) == 3;
        let mid = if both { chain_middle(g, chain) } else { None };
        let anchor_for = |m: usize| {
            seq.iter()
                .position(|&x| x == m)
                .map_or(Terminal::Barycenter, |k| Terminal::Member(choice[k]))
        };
        if s == v {
            match mid {
                Some(k) => out.push((chain[..=k].to_vec(), anchor_for(chain[k]))),
                None => out.push((chain.clone(), Terminal::Barycenter)),
            }
        }
        if t == v {
            let mut rev = chain.clone();
            rev.reverse();
            match mid {
                Some(k) => {
                    let k = chain.len() - 1 - k;
                    out.push((rev[..=k].to_vec(), anchor_for(rev[k])));
                }
                None => out.push((rev, Terminal::Barycenter)),
            }
        }
    }
    Some(out)
}

/// Uniform-grid index over stroke segments.
struct SegmentGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<(usize, usize)>>,
}

impl SegmentGrid {
    fn new(strokes: &[Stroke], cell: f64) -> Self {
        let mut grid = Self {
            cell,
            buckets: HashMap::new(),
        };
        for (si, s) in strokes.iter().enumerate() {
            for k in 0..s.points.len().saturating_sub(1) {
                let (a, b) = (s.points[k], s.points[k + 1]);
                for key in grid.cells(a, b, 0.0) {
                    grid.buckets.entry(key).or_default().push((si, k));
                }
            }
        }
        grid
    }

    fn cells(&self, a: Point, b: Point, pad: f64) -> Vec<(i64, i64)> {
        let x0 = ((a.re.min(b.re) - pad) / self.cell).floor() as i64;
        let x1 = ((a.re.max(b.re) + pad) / self.cell).floor() as i64;
        let y0 = ((a.im.min(b.im) - pad) / self.cell).floor() as i64;
        let y1 = ((a.im.max(b.im) + pad) / self.cell).floor() as i64;
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.push((x, y));
            }
        }
        out
    }

    fn near(&self, a: Point, b: Point, pad: f64) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for key in self.cells(a, b, pad) {
            if let Some(v) = self.buckets.get(&key) {
                out.extend(v.iter().copied());
            }
        }
        out
    }
}

/// A crossing of stroke `stroke`'s end fragment with `host`.
#[derive(Debug, Clone, Copy)]
struct Crossing {
    /// Arc length from the free end.
    arc: f64,
    host: usize,
    host_segment: usize,
    point: Point,
}

fn first_crossing(strokes: &[Stroke], grid: &SegmentGrid, si: usize, from_end: bool) -> Option<Crossing> {
    let s = &strokes[si];
    let n = s.points.len();
    let order: Vec<usize> = if from_end { (0..n - 1).rev().collect() } else { (0..n - 1).collect() };
    let mut arc = 0.0;
    for k in order {
        let (mut a, mut b) = (s.points[k], s.points[k + 1]);
        if from_end {
            std::mem::swap(&mut a, &mut b);
        }
        let mut best: Option<(f64, usize, usize, Point)> = None;
        for (hi, hk) in grid.near(a, b, 0.0) {
            if hi == si {
                continue;
            }
            let (c, d) = (strokes[hi].points[hk], strokes[hi].points[hk + 1]);
            if let Some((t, _, p)) = segment_intersection(a, b, c, d) {
                // Crossings right at the free end point do not count.
                let at = arc + t * (b - a).norm();
                if at <= 1e-9 {
                    continue;
                }
                if best.is_none_or(|(bt, bh, bk, _)| (t, hi, hk) < (bt, bh, bk)) {
                    best = Some((t, hi, hk, p));
                }
            }
        }
        if let Some((t, hi, hk, p)) = best {
            return Some(Crossing {
                arc: arc + t * (b - a).norm(),
                host: hi,
                host_segment: hk,
                point: p,
            });
        }
        arc += (b - a).norm();
    }
    None
}

/// Length of the fragment `pts` lying outside the ink of `host`, sampled at
/// quarter-pixel spacing.
fn outside_length(pts: &[Point], host: &Stroke) -> f64 {
    let dense = geom::densify(pts, 0.25);
    if dense.len() < 2 {
        return 0.0;
    }
    let mut out = 0.0;
    for w in dense.windows(2) {
        let mid = (w[0] + w[1]) * 0.5;
        if point_polyline_distance(mid, &host.points) > host.radius {
            out += (w[1] - w[0]).norm();
        }
    }
    out
}

/// Turning angle at index `k` between the chords spanning arc lengths
/// `near..far` on either side. `None` when either side is shorter than
/// `far`.
fn turn_at(pts: &[Point], k: usize, near: f64, far: f64) -> Option<f64> {
    let back: Vec<Point> = pts[..=k].iter().rev().copied().collect();
    let fwd = &pts[k..];
    let (b0, b1) = (at_arc(&back, near)?, at_arc(&back, far)?);
    let (f0, f1) = (at_arc(fwd, near)?, at_arc(fwd, far)?);
    Some(direction_angle(b0 - b1, f1 - f0).to_degrees())
}

/// Point at arc length `s` along `pts`.
fn at_arc(pts: &[Point], s: f64) -> Option<Point> {
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let d = (w[1] - w[0]).norm();
        if d > 0.0 && acc + d >= s {
            return Some(w[0] + (w[1] - w[0]) * ((s - acc) / d));
        }
        acc += d;
    }
    None
}

/// Point on `points` closest to `p`: (segment index, point).
fn closest_on(points: &[Point], p: Point) -> (usize, Point) {
    let mut best = (0, points[0], f64::INFINITY);
    for k in 0..points.len().saturating_sub(1) {
        let (q, _) = geom::project_on_segment(p, points[k], points[k + 1]);
        let d = (q - p).norm();
        if d < best.2 {
            best = (k, q, d);
        }
    }
    (best.0, best.1)
}

/// Removes free-end fragments that extend past the point where a stroke
/// meets another one while staying inside its ink, and records the meeting
/// as a contact. Free ends that stop just short of another stroke are
/// extended onto it. A host that turns sharply at the contact is split
/// there into two strokes meeting the first at a common junction.
pub fn prune_overshoot(drawing: &VectorDrawing, params: &EmbedParams) -> VectorDrawing {
    let mut out = drawing.clone();
    drop_buried_stubs(&mut out);
    for _round in 0..8 {
        let mut changed = false;
        let ends: Vec<(usize, bool)> = (0..out.strokes.len())
            .flat_map(|i| [(i, false), (i, true)])
            .collect();
        let mut grid: Option<SegmentGrid> = None;
        for (si, at_end) in ends {
            let free_idx = usize::from(at_end);
            let s = &out.strokes[si];
            if s.closed || !s.free[free_idx] || s.length() <= 0.0 {
                continue;
            }
            let index = grid.get_or_insert_with(|| SegmentGrid::new(&out.strokes, 2.0));
            let contact = match first_crossing(&out.strokes, index, si, at_end) {
                Some(c) => {
                    let frag = fragment(&out.strokes[si].points, at_end, c.arc, c.point);
                    let outside = outside_length(&frag, &out.strokes[c.host]);
                    let full = geom::polyline_length(&frag);
                    if outside < (full / 4.0).max(1.0) && full < out.strokes[si].length() {
                        cut_end(&mut out.strokes[si], at_end, c.arc, c.point);
                        Some((c.host, c.host_segment, c.point))
                    } else {
                        None
                    }
                }
                None => near_contact(&out, si, at_end, params),
            };
            if let Some((host, seg, p)) = contact {
                attach(&mut out, si, at_end, host, seg, p, params);
                changed = true;
                grid = None;
            }
        }
        if !changed {
            break;
        }
    }
    out
}

/// Removes free-standing strokes that lie inside the ink of a longer, wider
/// stroke, with the same slack as overshoot trimming. These come from
/// cross-section curves traced across the butt end of a wide stroke.
fn drop_buried_stubs(d: &mut VectorDrawing) {
    let mut si = 0;
    while si < d.strokes.len() {
        let s = &d.strokes[si];
        let len = s.length();
        let buried = !s.closed
            && s.free == [true, true]
            && d.strokes.iter().enumerate().any(|(hi, host)| {
                hi != si
                    && host.length() > len
                    && s.radius <= host.radius
                    && outside_length(&s.points, host) < (len / 4.0).max(1.0)
            });
        if !buried {
            si += 1;
            continue;
        }
        d.strokes.remove(si);
        for j in &mut d.junctions {
            j.strokes.retain(|&k| k != si);
            for k in &mut j.strokes {
                if *k > si {
                    *k -= 1;
                }
            }
        }
        d.junctions.retain(|j| !j.strokes.is_empty());
    }
}

/// Points of a stroke from its free end (start or end) to arc `arc`, ending
/// at `point`.
fn fragment(points: &[Point], at_end: bool, arc: f64, point: Point) -> Vec<Point> {
    let ordered: Vec<Point> = if at_end { points.iter().rev().copied().collect() } else { points.to_vec() };
    let mut out = vec![ordered[0]];
    let mut acc = 0.0;
    for w in ordered.windows(2) {
        let d = (w[1] - w[0]).norm();
        if acc + d >= arc {
            break;
        }
        acc += d;
        out.push(w[1]);
    }
    out.push(point);
    out
}

fn cut_end(stroke: &mut Stroke, at_end: bool, arc: f64, point: Point) {
    if at_end {
        stroke.points.reverse();
        stroke.sources.reverse();
    }
    let mut acc = 0.0;
    let mut k = 0;
    while k + 1 < stroke.points.len() {
        let d = (stroke.points[k + 1] - stroke.points[k]).norm();
        if acc + d >= arc {
            break;
        }
        acc += d;
        k += 1;
    }
    // Segment k holds the cut point.
    let mut pts = vec![point];
    pts.extend_from_slice(&stroke.points[k + 1..]);
    let mut src = vec![stroke.sources.get(k).copied().unwrap_or(SegmentSource::Ligament)];
    src.extend_from_slice(&stroke.sources[(k + 1).min(stroke.sources.len())..]);
    if (pts[1] - pts[0]).norm() <= 1e-9 && pts.len() > 2 {
        pts.remove(0);
        src.remove(0);
    }
    stroke.points = pts;
    stroke.sources = src;
    if at_end {
        stroke.points.reverse();
        stroke.sources.reverse();
    }
}

fn near_contact(d: &VectorDrawing, si: usize, at_end: bool, params: &EmbedParams) -> Option<(usize, usize, Point)> {
    let s = &d.strokes[si];
    let e = if at_end { s.end() } else { s.start() };
    let mut best: Option<(f64, usize, usize, Point)> = None;
    for (hi, h) in d.strokes.iter().enumerate() {
        if hi == si {
            continue;
        }
        let (k, q) = closest_on(&h.points, e);
        let dist = (q - e).norm();
        if dist <= h.radius + params.contact_gap && dist > 1e-9 && best.is_none_or(|(bd, ..)| dist < bd) {
            best = Some((dist, hi, k, q));
        }
    }
    let (_, hi, k, q) = best?;
    let stroke = &d.strokes[si];
    // Only extend ends pointing towards the host, judged over a short run
    // so a last jittery step does not decide it. Touching ends always join.
    let back = point_back(&stroke.points, at_end, 2.0);
    let touching = (q - e).norm() <= params.contact_gap;
    (touching || geom::dot(e - back, q - e) > 0.0).then_some((hi, k, q))
}

/// The point `dist` of arc back from the start or end of `points`.
fn point_back(points: &[Point], at_end: bool, dist: f64) -> Point {
    let mut acc = 0.0;
    let mut prev = if at_end { points[points.len() - 1] } else { points[0] };
    let mut walk = |q: Point| {
        acc += (q - prev).norm();
        prev = q;
        acc >= dist
    };
    if at_end {
        points.iter().rev().skip(1).copied().find(|&q| walk(q)).unwrap_or(points[0])
    } else {
        points.iter().skip(1).copied().find(|&q| walk(q)).unwrap_or(points[points.len() - 1])
    }
}

fn attach(d: &mut VectorDrawing, si: usize, at_end: bool, host: usize, seg: usize, p: Point, params: &EmbedParams) {
    {
        let s = &mut d.strokes[si];
        let e = if at_end { s.end() } else { s.start() };
        if (e - p).norm() > 1e-9 {
            if at_end {
                s.points.push(p);
                s.sources.push(SegmentSource::Ligament);
            } else {
                s.points.insert(0, p);
                s.sources.insert(0, SegmentSource::Ligament);
            }
        }
        s.free[usize::from(at_end)] = false;
    }
    let k = insert_point(&mut d.strokes[host], seg, p);
    let h = &d.strokes[host];
    let interior = k > 0 && k + 1 < h.points.len();
    let reach = h.radius.max(1.0);
    let bends = interior && turn_at(&h.points, k, 2.0 * reach, 4.0 * reach).is_some_and(|a| a > params.corner_angle);
    if bends {
        let new_id = d.strokes.len();
        let h = &mut d.strokes[host];
        let tail_pts = h.points[k..].to_vec();
        let tail_src = h.sources[k..].to_vec();
        let tail_free = h.free[1];
        let old_end = h.end();
        h.points.truncate(k + 1);
        h.sources.truncate(k);
        h.free[1] = false;
        let tail = Stroke {
            points: tail_pts,
            sources: tail_src,
            closed: false,
            chain: h.chain.clone(),
            free: [false, tail_free],
            radius: h.radius,
        };
        d.strokes.push(tail);
        for j in &mut d.junctions {
            if (j.position - old_end).norm() <= 1e-9 {
                for s in &mut j.strokes {
                    if *s == host {
                        *s = new_id;
                    }
                }
            }
        }
        d.junctions.push(Junction {
            position: p,
            strokes: vec![host, new_id, si],
            kind: JunctionKind::Branch,
            vertex: None,
        });
    } else {
        d.junctions.push(Junction {
            position: p,
            strokes: vec![si, host],
            kind: JunctionKind::Contact,
            vertex: None,
        });
    }
}

/// Inserts `p` into segment `seg` of `stroke` unless it coincides with an
/// existing point; returns its index.
fn insert_point(stroke: &mut Stroke, seg: usize, p: Point) -> usize {
    let seg = seg.min(stroke.points.len().saturating_sub(2));
    for k in [seg, seg + 1] {
        if (stroke.points[k] - p).norm() <= 1e-9 {
            return k;
        }
    }
    stroke.points.insert(seg + 1, p);
    let s = stroke.sources[seg];
    stroke.sources.insert(seg, s);
    seg + 1
}

/// Douglas-Peucker simplification keeping the endpoints. Returns kept
/// indices.
pub fn douglas_peucker(points: &[Point], tol: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((a, b)) = stack.pop() {
        let mut best = (0.0, a);
        for k in a + 1..b {
            let d = geom::point_segment_distance(points[k], points[a], points[b]);
            if d > best.0 {
                best = (d, k);
            }
        }
        if best.0 > tol {
            keep[best.1] = true;
            stack.push((a, best.1));
            stack.push((best.1, b));
        }
    }
    (0..n).filter(|&k| keep[k]).collect()
}

/// Douglas-Peucker per stroke, then Laplacian smoothing with endpoints and
/// junction points held fixed. With a positive tolerance, smoothing never
/// moves a point farther than the tolerance from the original stroke.
pub fn simplify_smooth(drawing: &VectorDrawing, params: &SmoothParams) -> VectorDrawing {
    let mut out = drawing.clone();
    let pins: Vec<Point> = drawing.junctions.iter().map(|j| j.position).collect();
    for s in &mut out.strokes {
        let original = s.points.clone();
        let n = original.len();
        let pinned: Vec<usize> = (0..n)
            .filter(|&k| k == 0 || k == n - 1 || pins.iter().any(|p| (p - original[k]).norm() <= 1e-9))
            .collect();
        let mut keep: Vec<usize> = Vec::new();
        if params.tolerance > 0.0 {
            for w in pinned.windows(2) {
                let idx = douglas_peucker(&original[w[0]..=w[1]], params.tolerance);
                for i in idx {
                    if keep.last() != Some(&(w[0] + i)) {
                        keep.push(w[0] + i);
                    }
                }
            }
            if keep.is_empty() {
                keep = (0..n).collect();
            }
        } else {
            keep = (0..n).collect();
        }
        let sources: Vec<SegmentSource> = keep
            .windows(2)
            .map(|w| {
                let first = original_source(&s.sources, w[0]);
                if (w[0]..w[1]).all(|k| original_source(&s.sources, k) == first) {
                    first
                } else {
                    SegmentSource::Ligament
                }
            })
            .collect();
        let fixed: BTreeSet<usize> = keep
            .iter()
            .enumerate()
            .filter(|(_, k)| pinned.contains(k))
            .map(|(i, _)| i)
            .collect();
        let mut pts: Vec<Point> = keep.iter().map(|&k| original[k]).collect();
        for _ in 0..params.rounds {
            let prev = pts.clone();
            for i in 1..pts.len().saturating_sub(1) {
                if fixed.contains(&i) {
                    continue;
                }
                let avg = (prev[i - 1] + prev[i + 1]) * 0.5;
                let mut q = prev[i] + (avg - prev[i]) * params.factor;
                if params.tolerance > 0.0 {
                    let (_, on) = closest_on(&original, q);
                    let d = (q - on).norm();
                    if d > params.tolerance {
                        q = on + (q - on) * (params.tolerance / d);
                    }
                }
                pts[i] = q;
            }
        }
        s.points = pts;
        s.sources = if sources.is_empty() { vec![SegmentSource::Ligament] } else { sources };
        if s.points.len() == 1 {
            let p = s.points[0];
            s.points.push(p);
        }
    }
    out
}

fn original_source(sources: &[SegmentSource], k: usize) -> SegmentSource {
    sources.get(k).copied().unwrap_or(SegmentSource::Ligament)
}
