//! SVG output for drawings and traced curves.

use std::fmt::Write as _;
use std::path::Path;

use crate::embed::VectorDrawing;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::trace::TracedCurve;

fn header(out: &mut String, width: usize, height: usize) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
}

fn path_data(points: &[Point], closed: bool) -> String {
    let pts = if closed && points.len() > 2 && points.first() == points.last() {
        &points[..points.len() - 1]
    } else {
        points
    };
    let mut d = String::new();
    for (k, p) in pts.iter().enumerate() {
        if k > 0 {
            d.push(' ');
        }
        let _ = write!(d, "{} {} {}", if k == 0 { 'M' } else { 'L' }, p.re, p.im);
    }
    if closed {
        d.push_str(" Z");
    }
    d
}

/// SVG document with one path per stroke, in stroke order, in pixel
/// coordinates with y pointing down.
pub fn svg_document(drawing: &VectorDrawing) -> String {
    let mut out = String::new();
    header(&mut out, drawing.width, drawing.height);
    let _ = writeln!(out, r#"<g fill="none" stroke="black" stroke-width="1" stroke-linecap="round" stroke-linejoin="round">"#);
    for (i, s) in drawing.strokes.iter().enumerate() {
        let _ = writeln!(out, r#"<path id="stroke{i}" d="{}"/>"#, path_data(&s.points, s.closed));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub fn write_svg(drawing: &VectorDrawing, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &svg_document(drawing))
}

/// Traced curves as thin polylines, for inspecting the tracing stage.
pub fn curves_svg(curves: &[TracedCurve], width: usize, height: usize) -> String {
    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(out, r#"<g fill="none" stroke="black" stroke-width="0.05">"#);
    for (i, c) in curves.iter().enumerate() {
        let mut pts = String::new();
        for (k, p) in c.points.iter().enumerate() {
            if k > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{},{}", p.re, p.im);
        }
        let _ = writeln!(out, r#"<polyline id="curve{i}" data-family="{}" points="{pts}"/>"#, c.direction_id);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

pub(crate) fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}
