//! Segment evaluation, sampling and junction tangents.

use thiserror::Error;

use crate::model::EPS_JOIN;
use crate::scalar::{Point, Scalar, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("segments do not meet: gap {gap} exceeds {tolerance}")]
    EndpointMismatch { gap: f64, tolerance: f64 },
}

/// A drawable segment. `S` is `f64` for plain geometry or a tape variable for
/// differentiable geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment<S = f64> {
    Line(Vec2<S>, Vec2<S>),
    Cubic([Vec2<S>; 4]),
}

impl<S: Scalar> Segment<S> {
    pub fn start(&self) -> Vec2<S> {
        match self {
            Segment::Line(a, _) => *a,
            Segment::Cubic(p) => p[0],
        }
    }

    pub fn end(&self) -> Vec2<S> {
        match self {
            Segment::Line(_, b) => *b,
            Segment::Cubic(p) => p[3],
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, Segment::Line(..))
    }

    /// Travel-direction tangent at the end point.
    pub fn end_tangent(&self) -> Vec2<S> {
        match self {
            Segment::Line(a, b) => *b - *a,
            Segment::Cubic(p) => p[3] - p[2],
        }
    }

    /// Travel-direction tangent at the start point.
    pub fn start_tangent(&self) -> Vec2<S> {
        match self {
            Segment::Line(a, b) => *b - *a,
            Segment::Cubic(p) => p[1] - p[0],
        }
    }

    /// Evaluates without range checking; see [`bezier_point`].
    pub fn eval(&self, t: f64) -> Vec2<S> {
        match self {
            Segment::Line(a, b) => *a + (*b - *a) * t,
            Segment::Cubic(p) => {
                // de Casteljau
                let ab = p[0] + (p[1] - p[0]) * t;
                let bc = p[1] + (p[2] - p[1]) * t;
                let cd = p[2] + (p[3] - p[2]) * t;
                let abc = ab + (bc - ab) * t;
                let bcd = bc + (cd - bc) * t;
                abc + (bcd - abc) * t
            }
        }
    }

    pub fn points(&self) -> Vec<Vec2<S>> {
        match self {
            Segment::Line(a, b) => vec![*a, *b],
            Segment::Cubic(p) => p.to_vec(),
        }
    }

    pub fn values(&self) -> Segment<f64> {
        match self {
            Segment::Line(a, b) => Segment::Line(a.values(), b.values()),
            Segment::Cubic(p) => Segment::Cubic(p.map(|q| q.values())),
        }
    }
}

impl Segment<f64> {
    pub fn translate(&self, d: Point) -> Self {
        match self {
            Segment::Line(a, b) => Segment::Line(*a + d, *b + d),
            Segment::Cubic(p) => Segment::Cubic(p.map(|q| q + d)),
        }
    }

    pub fn reversed(&self) -> Self {
        match self {
            Segment::Line(a, b) => Segment::Line(*b, *a),
            Segment::Cubic(p) => Segment::Cubic([p[3], p[2], p[1], p[0]]),
        }
    }

    /// Polyline length from `n` parameter-uniform samples.
    pub fn approx_length(&self, n: usize) -> f64 {
        match self {
            Segment::Line(a, b) => a.distance(*b),
            Segment::Cubic(_) => (1..n)
                .map(|i| {
                    let t0 = (i - 1) as f64 / (n - 1) as f64;
                    let t1 = i as f64 / (n - 1) as f64;
                    self.eval(t0).distance(self.eval(t1))
                })
                .sum(),
        }
    }
}

/// Point on a segment at parameter `t ∈ [0, 1]`; endpoints are returned exactly.
pub fn bezier_point<S: Scalar>(seg: &Segment<S>, t: f64) -> Result<Vec2<S>, GeometryError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GeometryError::ParameterOutOfRange(t));
    }
    Ok(if t == 0.0 {
        seg.start()
    } else if t == 1.0 {
        seg.end()
    } else {
        seg.eval(t)
    })
}

/// `n` points at `t = 0, 1/(n-1), …, 1`.
pub fn sample_segment<S: Scalar>(seg: &Segment<S>, n: usize) -> Result<Vec<Vec2<S>>, GeometryError> {
    if n < 2 {
        return Err(GeometryError::TooFewSamples(n));
    }
    let last = (n - 1) as f64;
    (0..n).map(|i| bezier_point(seg, i as f64 / last)).collect()
}

/// `n` points spaced uniformly by arclength, using a dense polyline to invert
/// the length function.
pub fn sample_segment_arclength(seg: &Segment, n: usize) -> Result<Vec<Point>, GeometryError> {
    if n < 2 {
        return Err(GeometryError::TooFewSamples(n));
    }
    if seg.is_line() {
        return sample_segment(seg, n);
    }
    const DENSE: usize = 256;
    let ts: Vec<f64> = (0..=DENSE).map(|i| i as f64 / DENSE as f64).collect();
    let pts: Vec<Point> = ts.iter().map(|&t| seg.eval(t)).collect();
    let mut cum = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        cum[i] = cum[i - 1] + pts[i].distance(pts[i - 1]);
    }
    let total = cum[DENSE];
    if total == 0.0 {
        return sample_segment(seg, n);
    }
    let mut out = Vec::with_capacity(n);
    let mut j = 1;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while j < DENSE && cum[j] < target {
            j += 1;
        }
        let span = cum[j] - cum[j - 1];
        let f = if span > 0.0 { ((target - cum[j - 1]) / span).clamp(0.0, 1.0) } else { 0.0 };
        let t = ts[j - 1] + f * (ts[j] - ts[j - 1]);
        out.push(bezier_point(seg, t.clamp(0.0, 1.0))?);
    }
    Ok(out)
}

/// Travel-direction tangents on both sides of a junction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionTangents<S = f64> {
    /// Incoming: `p4 - p3` of a cubic, `b - a` of a line.
    pub u_minus: Vec2<S>,
    /// Outgoing: `p2 - p1` of a cubic, `b - a` of a line.
    pub u_plus: Vec2<S>,
}

pub fn junction_tangents<S: Scalar>(
    prev: &Segment<S>,
    next: &Segment<S>,
) -> Result<JunctionTangents<S>, GeometryError> {
    let gap = prev.end().values().distance(next.start().values());
    if gap > EPS_JOIN || gap.is_nan() {
        return Err(GeometryError::EndpointMismatch { gap, tolerance: EPS_JOIN });
    }
    Ok(JunctionTangents { u_minus: prev.end_tangent(), u_plus: next.start_tangent() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn bernstein(p: &[Point; 4], t: f64) -> Point {
        let s = 1.0 - t;
        let w = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
        p.iter().zip(w).fold(Point::ZERO, |acc, (q, w)| acc + *q * w)
    }

    #[test]
    fn endpoints_exact() {
        let c = Segment::Cubic([pt(0.1, 0.2), pt(3.0, -1.0), pt(2.0, 5.0), pt(0.7, 0.3)]);
        assert_eq!(bezier_point(&c, 0.0).unwrap(), pt(0.1, 0.2));
        assert_eq!(bezier_point(&c, 1.0).unwrap(), pt(0.7, 0.3));
        assert!(bezier_point(&c, 1.5).is_err());
        assert!(bezier_point(&c, -0.1).is_err());
    }

    #[test]
    fn cubic_midpoint() {
        let p = [pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0), pt(1.0, 0.0)];
        let m = bezier_point(&Segment::Cubic(p), 0.5).unwrap();
        assert_eq!(bernstein(&p, 0.5), pt(0.5, 0.75));
        assert!((m.x - 0.5).abs() < 1e-15 && (m.y - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampling() {
        let l = Segment::Line(pt(0.0, 0.0), pt(2.0, 0.0));
        assert_eq!(sample_segment(&l, 3).unwrap(), vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(2.0, 0.0)]);
        assert_eq!(sample_segment(&l, 2).unwrap(), vec![pt(0.0, 0.0), pt(2.0, 0.0)]);
        assert_eq!(sample_segment(&l, 1), Err(GeometryError::TooFewSamples(1)));
        let c = Segment::Cubic([pt(0.0, 0.0), pt(0.0, 1.0), pt(1.0, 1.0), pt(1.0, 0.0)]);
        let s = sample_segment(&c, 3).unwrap();
        assert!((s[1].x - 0.5).abs() < 1e-15 && (s[1].y - 0.75).abs() < 1e-15);
    }

    #[test]
    fn arclength_sampling_is_even() {
        let c = Segment::Cubic([pt(0.0, 0.0), pt(0.1, 1.5), pt(0.5, 1.5), pt(3.0, 0.0)]);
        let s = sample_segment_arclength(&c, 33).unwrap();
        assert_eq!(s[0], pt(0.0, 0.0));
        assert_eq!(s[32], pt(3.0, 0.0));
        let spread = |pts: &[Point]| {
            let gaps: Vec<f64> = pts.windows(2).map(|w| w[0].distance(w[1])).collect();
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            gaps.iter().map(|g| (g - mean).abs() / mean).fold(0.0, f64::max)
        };
        assert!(spread(&s) < 0.01, "{}", spread(&s));
        assert!(spread(&sample_segment(&c, 33).unwrap()) > 0.1);
    }

    #[test]
    fn tangents() {
        let t = junction_tangents(
            &Segment::Line(pt(-1.0, 0.0), pt(0.0, 0.0)),
            &Segment::Line(pt(0.0, 0.0), pt(1.0, 0.0)),
        )
        .unwrap();
        assert_eq!((t.u_minus, t.u_plus), (pt(1.0, 0.0), pt(1.0, 0.0)));

        let prev = Segment::Cubic([pt(-5.0, 1.0), pt(-4.0, 1.0), pt(-2.0, 0.0), pt(0.0, 0.0)]);
        let next = Segment::Cubic([pt(0.0, 0.0), pt(0.6, 0.8), pt(2.0, 2.0), pt(3.0, 1.0)]);
        let t = junction_tangents(&prev, &next).unwrap();
        assert_eq!((t.u_minus, t.u_plus), (pt(2.0, 0.0), pt(0.6, 0.8)));

        let flat = Segment::Cubic([pt(-5.0, 1.0), pt(-4.0, 1.0), pt(0.0, 0.0), pt(0.0, 0.0)]);
        assert_eq!(junction_tangents(&flat, &next).unwrap().u_minus, Point::ZERO);

        let apart = Segment::Line(pt(0.1, 0.0), pt(1.0, 0.0));
        assert!(matches!(
            junction_tangents(&prev, &apart),
            Err(GeometryError::EndpointMismatch { .. })
        ));
    }
}
