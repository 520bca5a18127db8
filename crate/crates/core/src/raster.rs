//! Binary scanline rasterization of glyph outlines.
//!
//! Coverage is sampled at pixel centers. Cubics are flattened adaptively until
//! control points lie within a quarter pixel of the chord. Every visible path
//! is implicitly closed.

use serde::{Deserialize, Serialize};

use crate::geometry::Segment;
use crate::metrics::MetricError;
use crate::model::{CommandKind, Glyph};
use crate::scalar::Point;

/// Chordal flattening tolerance in pixels.
pub const FLATTEN_TOLERANCE: f64 = 0.25;
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillRule {
    #[default]
    NonZero,
    EvenOdd,
}

/// EM-unit rectangle mapped onto the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for ViewBox {
    fn default() -> Self {
        ViewBox { min: [-0.7, -0.7], max: [0.7, 0.7] }
    }
}

impl ViewBox {
    pub fn new(min: Point, max: Point) -> Self {
        ViewBox { min: [min.x, min.y], max: [max.x, max.y] }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = self.width() > 0.0 && self.height() > 0.0 && self.width().is_finite() && self.height().is_finite();
        if ok {
            Ok(())
        } else {
            Err(MetricError::InvalidViewBox)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    pub resolution: usize,
    pub view_box: ViewBox,
    pub fill_rule: FillRule,
    /// Row-major, row 0 at the view box's minimum y; values are 0 or 1.
    pub coverage: Vec<u8>,
}

impl RasterGrid {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.coverage[row * self.resolution + col]
    }

    pub fn filled(&self) -> usize {
        self.coverage.iter().filter(|&&c| c != 0).count()
    }

    pub fn filled_fraction(&self) -> f64 {
        self.filled() as f64 / self.coverage.len() as f64
    }

    /// Halves the resolution; a pixel is set when at least two of its four
    /// sub-pixels are set.
    pub fn downsample2(&self) -> RasterGrid {
        let r = self.resolution / 2;
        let mut coverage = vec![0u8; r * r];
        for row in 0..r {
            for col in 0..r {
                let n = self.get(2 * row, 2 * col) as u32
                    + self.get(2 * row, 2 * col + 1) as u32
                    + self.get(2 * row + 1, 2 * col) as u32
                    + self.get(2 * row + 1, 2 * col + 1) as u32;
                coverage[row * r + col] = (n >= 2) as u8;
            }
        }
        RasterGrid { resolution: r, view_box: self.view_box, fill_rule: self.fill_rule, coverage }
    }

    pub fn same_frame(&self, other: &RasterGrid) -> bool {
        self.resolution == other.resolution && self.view_box == other.view_box
    }
}

struct Edge {
    a: Point,
    b: Point,
}

fn flatten_cubic(p: [Point; 4], out: &mut Vec<Point>, depth: u32) {
    let chord = p[3] - p[0];
    let len = chord.norm();
    let dist = |q: Point| {
        if len < 1e-12 {
            q.distance(p[0])
        } else {
            let v = q - p[0];
            (v.x * chord.y - v.y * chord.x).abs() / len
        }
    };
    if depth >= 16 || (dist(p[1]) <= FLATTEN_TOLERANCE && dist(p[2]) <= FLATTEN_TOLERANCE) {
        out.push(p[3]);
        return;
    }
    let ab = p[0].lerp(p[1], 0.5);
    let bc = p[1].lerp(p[2], 0.5);
    let cd = p[2].lerp(p[3], 0.5);
    let abc = ab.lerp(bc, 0.5);
    let bcd = bc.lerp(cd, 0.5);
    let m = abc.lerp(bcd, 0.5);
    flatten_cubic([p[0], ab, abc, m], out, depth + 1);
    flatten_cubic([m, bcd, cd, p[3]], out, depth + 1);
}

fn build_edges(glyph: &Glyph, to_px: impl Fn(Point) -> Point) -> Vec<Edge> {
    let mut edges = Vec::new();
    for path in glyph.paths.iter().filter(|p| p.visible) {
        let mut poly: Vec<Point> = Vec::new();
        let mut close = |poly: &mut Vec<Point>| {
            if poly.len() >= 2 {
                for w in poly.windows(2) {
                    edges.push(Edge { a: w[0], b: w[1] });
                }
                edges.push(Edge { a: poly[poly.len() - 1], b: poly[0] });
            }
            poly.clear();
        };
        for cmd in &path.commands {
            match cmd.kind {
                CommandKind::MoveTo => {
                    close(&mut poly);
                    poly.push(to_px(cmd.end()));
                }
                CommandKind::LineFromTo | CommandKind::CurveFromTo => {
                    if poly.is_empty() {
                        poly.push(to_px(cmd.start()));
                    }
                    match cmd.segment().expect("drawing command") {
                        Segment::Line(_, b) => poly.push(to_px(b)),
                        Segment::Cubic(p) => flatten_cubic(p.map(&to_px), &mut poly, 0),
                    }
                }
                CommandKind::Eos => {}
            }
        }
        close(&mut poly);
    }
    edges.retain(|e| e.a.y != e.b.y);
    edges
}

pub fn rasterize(
    glyph: &Glyph,
    resolution: usize,
    fill_rule: FillRule,
    view_box: ViewBox,
) -> Result<RasterGrid, MetricError> {
    if resolution < MIN_RESOLUTION {
        return Err(MetricError::Resolution(resolution));
    }
    view_box.validate()?;
    let r = resolution as f64;
    let sx = r / view_box.width();
    let sy = r / view_box.height();
    let (ox, oy) = (view_box.min[0], view_box.min[1]);
    let edges = build_edges(glyph, |p| Point::new((p.x - ox) * sx, (p.y - oy) * sy));

    let mut coverage = vec![0u8; resolution * resolution];
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for row in 0..resolution {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for e in &edges {
            let (lo, hi, dir) = if e.a.y < e.b.y { (e.a, e.b, 1) } else { (e.b, e.a, -1) };
            if lo.y <= yc && yc < hi.y {
                let x = lo.x + (yc - lo.y) * (hi.x - lo.x) / (hi.y - lo.y);
                crossings.push((x, dir));
            }
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut winding = 0;
        for i in 0..crossings.len() {
            winding += crossings[i].1;
            let inside = match fill_rule {
                FillRule::NonZero => winding != 0,
                FillRule::EvenOdd => winding % 2 != 0,
            };
            if !inside || i + 1 == crossings.len() {
                continue;
            }
            // columns whose centers lie in [x_i, x_{i+1})
            let c0 = (crossings[i].0 - 0.5).ceil().max(0.0);
            let c1 = (crossings[i + 1].0 - 0.5).ceil().min(r);
            if c1 > c0 {
                let base = row * resolution;
                coverage[base + c0 as usize..base + c1 as usize].fill(1);
            }
        }
    }
    Ok(RasterGrid { resolution, view_box, fill_rule, coverage })
}
