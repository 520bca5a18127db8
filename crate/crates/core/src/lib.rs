//! Glyph outline toolkit built around the 4-point command representation.
//!
//! The crate parses SVG path data into glyphs, extracts continuity (C0, G1,
//! C1) and axis-alignment (H, V, none) labels at junctions and lines, repairs
//! outlines to match predicted labels, and exposes the same repairs as
//! differentiable straight-through operators on a small reverse-mode tape.
//! Loss terms and raster evaluation metrics complete the toolkit.
//!
//! Geometry, refinement and losses are written once over [`scalar::Scalar`],
//! so the plain `f64` path and the differentiable path share their code.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod continuity;
pub mod corpus;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod refine;
pub mod scalar;
pub mod svg_io;

use thiserror::Error;

/// Union of the module error types, for callers that do not care which
/// stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Parse(#[from] svg_io::ParseError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Refine(#[from] refine::RefineError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::AdError),
    #[error(transparent)]
    Loss(#[from] losses::LossError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
