//! End-to-end vectorization: raster in, drawing out, with per-stage timing.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::embed::{self, EmbedParams, SmoothParams, VectorDrawing};
use crate::error::{Error, Result};
use crate::polyvector::{self, PolyVectorField, SolverParams};
use crate::raster::{self, IntensityGrid, NarrowBand};
use crate::topology::{self, BundleParams, SimplifyParams, TopologyGraph};
use crate::trace::{self, FrameCache, TraceParams, TracedCurve};
use crate::{dump, svg};

/// Every numeric knob of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Pixels darker than this fraction of the maximum intensity are ink.
    pub threshold: f64,
    pub equalize: bool,
    pub solver: SolverParams,
    pub trace: TraceParams,
    pub bundle: BundleParams,
    pub simplify: SimplifyParams,
    pub embed: EmbedParams,
    pub smooth: SmoothParams,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            threshold: 0.35,
            equalize: false,
            solver: SolverParams::default(),
            trace: TraceParams::default(),
            bundle: BundleParams::default(),
            simplify: SimplifyParams::default(),
            embed: EmbedParams::default(),
            smooth: SmoothParams::default(),
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        self.solver.validate()?;
        if !(self.trace.step > 0.0 && self.trace.step.is_finite()) {
            return bad("step must be positive");
        }
        if !(self.embed.eta >= 0.0 && self.embed.eta.is_finite()) {
            return bad("eta must be non-negative");
        }
        if !(self.smooth.tolerance >= 0.0 && self.smooth.tolerance.is_finite()) {
            return bad("simplify tolerance must be non-negative");
        }
        if self.simplify.n_hole == 0 {
            return bad("nhole must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub elapsed: Duration,
}

pub const STAGES: [&str; 6] = ["load", "band", "field", "trace", "topology", "embed"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub width: usize,
    pub height: usize,
    pub dark_pixels: usize,
    pub singular_pixels: usize,
    pub zeroed_pixels: usize,
    pub relax_rounds: usize,
    pub curves: usize,
    pub bundles: usize,
    pub vertices: usize,
    pub edges: usize,
    pub strokes: usize,
    pub junctions: usize,
    pub timings: Vec<StageTiming>,
}

impl Stats {
    fn time(&mut self, stage: &'static str, since: Instant) {
        self.timings.push(StageTiming {
            stage,
            elapsed: since.elapsed(),
        });
    }

    pub fn elapsed(&self, stage: &str) -> Duration {
        self.timings.iter().filter(|t| t.stage == stage).map(|t| t.elapsed).sum()
    }

    pub fn total(&self) -> Duration {
        self.timings.iter().map(|t| t.elapsed).sum()
    }

    pub fn csv_header() -> String {
        let mut h = String::from("name,width,height,dark_pixels");
        for s in STAGES {
            h.push_str(&format!(",time_ms_{s}"));
        }
        h
    }

    pub fn csv_row(&self, name: &str) -> String {
        let mut row = format!("{name},{},{},{}", self.width, self.height, self.dark_pixels);
        for s in STAGES {
            row.push_str(&format!(",{:.3}", self.elapsed(s).as_secs_f64() * 1e3));
        }
        row
    }

    /// Human-readable summary, one item per line.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "image {}x{}\ndark pixels {}\nsingular pixels {}\nalignment zeroed {} ({} rounds)\ncurves {}\nbundles {}\ngraph {} vertices, {} edges\nstrokes {}, junctions {}\n",
            self.width,
            self.height,
            self.dark_pixels,
            self.singular_pixels,
            self.zeroed_pixels,
            self.relax_rounds,
            self.curves,
            self.bundles,
            self.vertices,
            self.edges,
            self.strokes,
            self.junctions
        );
        for t in &self.timings {
            out.push_str(&format!("time {} {:.1} ms\n", t.stage, t.elapsed.as_secs_f64() * 1e3));
        }
        out
    }
}

/// Intermediate and final results of one run.
#[derive(Debug, Clone)]
pub struct Output {
    pub band: NarrowBand,
    pub field: Option<PolyVectorField>,
    pub singular: BTreeSet<usize>,
    pub curves: Vec<TracedCurve>,
    pub graph: TopologyGraph,
    pub drawing: VectorDrawing,
    pub stats: Stats,
}

/// Runs every stage on an in-memory image. An image without ink yields an
/// empty drawing.
pub fn vectorize(grid: &IntensityGrid, mask: Option<&IntensityGrid>, params: &Params) -> Result<Output> {
    params.validate()?;
    let mut stats = Stats {
        width: grid.width(),
        height: grid.height(),
        ..Stats::default()
    };

    let t = Instant::now();
    let equalized;
    let grid = if params.equalize {
        equalized = raster::equalize_contrast(grid);
        &equalized
    } else {
        grid
    };
    let mut band = match raster::extract_narrow_band(grid, params.threshold) {
        Ok(b) => b,
        Err(Error::EmptyBand) => NarrowBand::from_pixels(grid, Vec::new()),
        Err(e) => return Err(e),
    };
    if let Some(mask) = mask {
        band = raster::apply_mask_edit(&band, grid, mask)?;
    }
    stats.dark_pixels = band.len();
    stats.time("band", t);

    let empty = |band: NarrowBand, stats: Stats| Output {
        band,
        field: None,
        singular: BTreeSet::new(),
        curves: Vec::new(),
        graph: TopologyGraph::new(),
        drawing: VectorDrawing::new(grid.width(), grid.height()),
        stats,
    };
    if band.is_empty() {
        log::warn!("no dark pixels below threshold {}; the drawing is empty", params.threshold);
        return Ok(empty(band, stats));
    }

    let t = Instant::now();
    let relax = polyvector::relax_singularities(&band, &params.solver)?;
    stats.singular_pixels = relax.singular.len();
    stats.zeroed_pixels = relax.zeroed.len();
    stats.relax_rounds = relax.rounds;
    stats.time("field", t);

    let t = Instant::now();
    let (curves, index) = trace::trace_all(&band, &relax.field, &relax.singular, &params.trace);
    stats.curves = curves.len();
    stats.time("trace", t);

    let t = Instant::now();
    let cache = FrameCache::new(&relax.field, &relax.singular);
    let bundles = topology::build_bundles(&curves, &index, &band, &cache, &params.trace, &params.bundle);
    stats.bundles = bundles.len();
    let mut graph = topology::build_graph(&bundles);
    topology::contract_small_loops(&mut graph, &curves, &band, &params.simplify);
    topology::prune_branches(&mut graph);
    topology::unzip_parallel(&mut graph);
    topology::repair_singularity_gaps(&mut graph, &band, &relax.singular, &params.simplify);
    stats.vertices = graph.vertex_count();
    stats.edges = graph.edge_count();
    stats.time("topology", t);

    let t = Instant::now();
    let eta = params.embed.eta;
    let initial = embed::initial_embedding(&graph, &curves, grid.width(), grid.height(), eta)?;
    let refined = embed::refine_junctions(&graph, &curves, &initial, eta)?;
    let pruned = embed::prune_overshoot(&refined.drawing, &params.embed);
    let drawing = embed::simplify_smooth(&pruned, &params.smooth);
    stats.strokes = drawing.strokes.len();
    stats.junctions = drawing.junctions.len();
    stats.time("embed", t);

    Ok(Output {
        band,
        field: Some(relax.field),
        singular: relax.singular,
        curves,
        graph,
        drawing,
        stats,
    })
}

/// File-level configuration of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub mask: Option<PathBuf>,
    pub params: Params,
    pub dump_field: Option<PathBuf>,
    pub dump_curves: Option<PathBuf>,
    pub dump_graph: Option<PathBuf>,
    /// Appends a statistics CSV row (with a header for new files).
    pub stats_csv: Option<PathBuf>,
}

/// Loads the input, vectorizes it and writes the SVG plus any requested
/// dumps.
pub fn run(config: &PipelineConfig) -> Result<Output> {
    config.params.validate()?;
    let t = Instant::now();
    let grid = raster::load_grayscale(&config.input)?;
    let mask = config.mask.as_ref().map(raster::load_grayscale).transpose()?;
    let load = StageTiming {
        stage: "load",
        elapsed: t.elapsed(),
    };
    let mut out = vectorize(&grid, mask.as_ref(), &config.params)?;
    out.stats.timings.insert(0, load);

    svg::write_svg(&out.drawing, &config.output)?;
    if let Some(path) = &config.dump_field {
        let text = match &out.field {
            Some(f) => dump::field_csv(&out.band, f),
            None => dump::field_csv(&out.band, &PolyVectorField::axis_aligned(0)),
        };
        svg::write_text(path, &text)?;
    }
    if let Some(path) = &config.dump_curves {
        svg::write_text(path, &svg::curves_svg(&out.curves, grid.width(), grid.height()))?;
    }
    if let Some(path) = &config.dump_graph {
        svg::write_text(path, &dump::graph_json(&out.graph))?;
    }
    if let Some(path) = &config.stats_csv {
        let name = config.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut text = if path.exists() {
            std::fs::read_to_string(path).map_err(|source| Error::Write {
                path: path.clone(),
                source,
            })?
        } else {
            Stats::csv_header() + "\n"
        };
        text.push_str(&out.stats.csv_row(&name));
        text.push('\n');
        svg::write_text(path, &text)?;
    }
    Ok(out)
}
