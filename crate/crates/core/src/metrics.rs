//! Evaluation metrics: raster IoU and ℓ₁, Chamfer reconstruction error and
//! label accuracies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuity::{AlignLabel, ContinuityLabel};
use crate::geometry::{sample_segment, sample_segment_arclength, GeometryError};
use crate::model::Glyph;
use crate::raster::RasterGrid;
use crate::scalar::Point;

pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("resolution must be at least 8, got {0}")]
    Resolution(usize),
    #[error("view box must have positive finite area")]
    InvalidViewBox,
    #[error("grids differ in resolution or view box")]
    GridMismatch,
    #[error("glyph has no visible segments to sample")]
    EmptyGlyph,
    #[error("label lists must be non-empty and equal in length ({0} vs {1})")]
    Labels(usize, usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn iou(a: &RasterGrid, b: &RasterGrid) -> Result<f64, MetricError> {
    if !a.same_frame(b) {
        return Err(MetricError::GridMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.coverage.iter().zip(&b.coverage) {
        inter += (x & y) as usize;
        union += (x | y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean absolute per-pixel difference.
pub fn l1_image(a: &RasterGrid, b: &RasterGrid) -> Result<f64, MetricError> {
    if !a.same_frame(b) {
        return Err(MetricError::GridMismatch);
    }
    let diff = a.coverage.iter().zip(&b.coverage).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.coverage.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Parameter,
    Arclength,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NeighborSearch {
    #[default]
    Grid,
    /// Exhaustive search, kept as a reference implementation.
    BruteForce,
}

/// Samples every visible drawing segment of `glyph`.
pub fn glyph_point_cloud(glyph: &Glyph, n_per_segment: usize, sampling: Sampling) -> Result<Vec<Point>, MetricError> {
    let mut out = Vec::new();
    for path in glyph.paths.iter().filter(|p| p.visible) {
        for cmd in &path.commands {
            if let Some(seg) = cmd.segment() {
                let pts = match sampling {
                    Sampling::Parameter => sample_segment(&seg, n_per_segment)?,
                    Sampling::Arclength => sample_segment_arclength(&seg, n_per_segment)?,
                };
                out.extend(pts);
            }
        }
    }
    Ok(out)
}

/// Uniform bucket grid over a point set for exact nearest-neighbor queries.
struct PointGrid<'a> {
    points: &'a [Point],
    origin: Point,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Point]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
        let side = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = extent / side;
        let nx = (((hi.x - lo.x) / cell).floor() as i64 + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as i64 + 1).max(1);
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        let mut grid = PointGrid { points, origin: lo, cell, nx, ny, buckets: Vec::new() };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = grid.cell_of(*p);
            buckets[(cy * nx + cx) as usize].push(i as u32);
        }
        grid.buckets = buckets;
        grid
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        let cx = ((p.x - self.origin.x) / self.cell).floor() as i64;
        let cy = ((p.y - self.origin.y) / self.cell).floor() as i64;
        (cx.clamp(0, self.nx - 1), cy.clamp(0, self.ny - 1))
    }

    fn nearest_distance(&self, q: Point) -> f64 {
        let (cx, cy) = self.cell_of(q);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for r in 0..=max_ring {
            for y in (cy - r)..=(cy + r) {
                if y < 0 || y >= self.ny {
                    continue;
                }
                let on_edge_row = y == cy - r || y == cy + r;
                let mut x = cx - r;
                while x <= cx + r {
                    if x >= 0 && x < self.nx {
                        for &i in &self.buckets[(y * self.nx + x) as usize] {
                            best = best.min(q.distance(self.points[i as usize]));
                        }
                    }
                    x += if on_edge_row || r == 0 { 1 } else { 2 * r };
                }
            }
            // Everything outside the visited block is at least this far away.
            let bx0 = self.origin.x + (cx - r) as f64 * self.cell;
            let bx1 = self.origin.x + (cx + r + 1) as f64 * self.cell;
            let by0 = self.origin.y + (cy - r) as f64 * self.cell;
            let by1 = self.origin.y + (cy + r + 1) as f64 * self.cell;
            let bound = (q.x - bx0).min(bx1 - q.x).min(q.y - by0).min(by1 - q.y).max(0.0);
            if best <= bound {
                break;
            }
        }
        best
    }
}

fn mean_nearest(from: &[Point], to: &[Point], search: NeighborSearch) -> f64 {
    let sum: f64 = match search {
        NeighborSearch::BruteForce => from
            .iter()
            .map(|p| to.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
            .sum(),
        NeighborSearch::Grid => {
            let grid = PointGrid::new(to);
            from.iter().map(|p| grid.nearest_distance(*p)).sum()
        }
    };
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: mean nearest-neighbor distance from `a` to `b`
/// plus the reverse. Distances are unsquared.
pub fn chamfer_distance(a: &[Point], b: &[Point], search: NeighborSearch) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyGlyph);
    }
    Ok(mean_nearest(a, b, search) + mean_nearest(b, a, search))
}

/// Chamfer reconstruction error between the outlines of two glyphs.
pub fn chamfer_re(a: &Glyph, b: &Glyph, n_per_segment: usize, sampling: Sampling) -> Result<f64, MetricError> {
    let pa = glyph_point_cloud(a, n_per_segment, sampling)?;
    let pb = glyph_point_cloud(b, n_per_segment, sampling)?;
    chamfer_distance(&pa, &pb, NeighborSearch::Grid)
}

fn accuracy<T: PartialEq>(preds: &[T], gts: &[T]) -> Result<f64, MetricError> {
    if preds.is_empty() || preds.len() != gts.len() {
        return Err(MetricError::Labels(preds.len(), gts.len()));
    }
    let hits = preds.iter().zip(gts).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

pub fn accuracy_continuity(preds: &[ContinuityLabel], gts: &[ContinuityLabel]) -> Result<f64, MetricError> {
    accuracy(preds, gts)
}

pub fn accuracy_alignment(preds: &[AlignLabel], gts: &[AlignLabel]) -> Result<f64, MetricError> {
    accuracy(preds, gts)
}

/// One line of a metrics report. Accuracies are absent when the glyphs do
/// not expose the same number of sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub font_id: String,
    pub glyph_id: String,
    pub iou: f64,
    pub l1: f64,
    pub re: f64,
    pub acc_cont: Option<f64>,
    pub acc_align: Option<f64>,
}

impl MetricsRow {
    /// Corpus-level mean row; accuracies average over rows that have them.
    pub fn mean(rows: &[MetricsRow]) -> MetricsRow {
        let n = rows.len().max(1) as f64;
        let opt_mean = |f: fn(&MetricsRow) -> Option<f64>| {
            let vals: Vec<f64> = rows.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        MetricsRow {
            font_id: "*".into(),
            glyph_id: "mean".into(),
            iou: rows.iter().map(|r| r.iou).sum::<f64>() / n,
            l1: rows.iter().map(|r| r.l1).sum::<f64>() / n,
            re: rows.iter().map(|r| r.re).sum::<f64>() / n,
            acc_cont: opt_mean(|r| r.acc_cont),
            acc_align: opt_mean(|r| r.acc_align),
        }
    }
}
