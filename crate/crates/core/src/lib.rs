//! Vectorization of raster line drawings through PolyVector frame fields.
//!
//! The pipeline fits a smooth two-direction frame field to the dark pixels
//! of a drawing, traces its streamlines, groups them into a topology graph
//! of stroke cross-sections, and embeds that graph as centered polylines.

pub mod dump;
pub mod embed;
pub mod error;
pub mod geom;
pub mod optim;
pub mod pipeline;
pub mod polyvector;
pub mod raster;
pub mod svg;
pub mod synth;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
