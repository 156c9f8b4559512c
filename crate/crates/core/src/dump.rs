//! Debug dumps of intermediate results.

use std::fmt::Write as _;

use serde::Serialize;

use crate::polyvector::PolyVectorField;
use crate::raster::NarrowBand;
use crate::topology::TopologyGraph;

/// One CSV row per band pixel: position, coefficients and decoded roots.
pub fn field_csv(band: &NarrowBand, field: &PolyVectorField) -> String {
    let mut out = String::from("x,y,c0_re,c0_im,c2_re,c2_im,u_re,u_im,v_re,v_im\n");
    for (i, &(x, y)) in band.pixels().iter().enumerate() {
        let (c0, c2) = (field.c0()[i], field.c2()[i]);
        let f = field.frame(i);
        let _ = writeln!(
            out,
            "{x},{y},{},{},{},{},{},{},{},{}",
            c0.re, c0.im, c2.re, c2.im, f.u.re, f.u.im, f.v.re, f.v.im
        );
    }
    out
}

#[derive(Serialize)]
struct VertexDump<'a> {
    id: usize,
    barycenter: [f64; 2],
    width: f64,
    split: bool,
    members: &'a [crate::topology::Member],
}

#[derive(Serialize)]
struct EdgeDump {
    a: usize,
    b: usize,
    curves: Vec<usize>,
}

#[derive(Serialize)]
struct GraphDump<'a> {
    vertices: Vec<VertexDump<'a>>,
    edges: Vec<EdgeDump>,
}

/// The graph as JSON: vertices with barycenters, widths and members, and
/// edges with their shared curve ids.
pub fn graph_json(g: &TopologyGraph) -> String {
    let dump = GraphDump {
        vertices: g
            .vertices()
            .map(|(id, b)| VertexDump {
                id,
                barycenter: [b.barycenter.re, b.barycenter.im],
                width: b.width,
                split: b.split,
                members: &b.members,
            })
            .collect(),
        edges: g
            .edges()
            .map(|(a, b, c)| EdgeDump {
                a,
                b,
                curves: c.iter().copied().collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dump).expect("graph dump serializes")
}
