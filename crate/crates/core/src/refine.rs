//! Deterministic geometric refinement: continuity repair at junctions and
//! axis snapping of lines, plus confidence-gated refinement of whole glyphs.
//!
//! The operators are generic over [`Scalar`] so that the differentiable
//! versions in [`crate::autodiff`] run the identical arithmetic on a tape.

use thiserror::Error;

use crate::continuity::{
    junction_sites, line_sites, AlignLabel, ContinuityLabel, EPS_TANGENT,
};
use crate::geometry::{junction_tangents, GeometryError, Segment};
use crate::model::{CommandKind, Glyph, Path, EPS_JOIN};
use crate::scalar::{Point, Scalar, Vec2};

/// Default confidence gate: a prediction must exceed 75% to be applied.
pub const DEFAULT_CONFIDENCE: f64 = 0.75;

/// Below this the bisector of two unit tangents is undefined (cusp).
pub const EPS_BISECTOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("lines are C0 by construction")]
    LinesAreC0,
    #[error("undefined bisector: tangents are anti-parallel")]
    UndefinedBisector,
    #[error("degenerate tangent: zero-length tangent cannot be re-directed")]
    DegenerateTangent,
    #[error("segment is not a line")]
    NotALine,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("expected {expected} {what} predictions, got {actual}")]
    PredictionCount { what: &'static str, expected: usize, actual: usize },
    #[error("invalid probability vector {0:?}")]
    InvalidProbabilities([f64; 3]),
}

fn unit_or_zero<S: Scalar>(u: Vec2<S>) -> (Vec2<S>, S) {
    let n = u.norm();
    if n.value() < EPS_TANGENT {
        (Vec2::new(n.lift(0.0), n.lift(0.0)), n)
    } else {
        (Vec2::new(u.x / n, u.y / n), n)
    }
}

fn with_end_handle<S: Scalar>(seg: &Segment<S>, p3: Vec2<S>) -> Segment<S> {
    match seg {
        Segment::Cubic(p) => Segment::Cubic([p[0], p[1], p3, p[3]]),
        Segment::Line(..) => *seg,
    }
}

fn with_start_handle<S: Scalar>(seg: &Segment<S>, p2: Vec2<S>) -> Segment<S> {
    match seg {
        Segment::Cubic(p) => Segment::Cubic([p[0], p2, p[2], p[3]]),
        Segment::Line(..) => *seg,
    }
}

/// Moves the control points adjacent to the junction between `prev` and
/// `next` so the junction satisfies `label`. End points never move.
///
/// Curve–curve junctions use the normalized bisector `d` of the two unit
/// travel tangents: G1 keeps each tangent's length, C1 sets both to their
/// mean. Line–curve junctions only move the curve's handle, aligning it with
/// the line; for C1 its length becomes the line's length.
pub fn refine_continuity_junction<S: Scalar>(
    prev: &Segment<S>,
    next: &Segment<S>,
    label: ContinuityLabel,
) -> Result<(Segment<S>, Segment<S>), RefineError> {
    let t = junction_tangents(prev, next)?;
    if label == ContinuityLabel::C0 {
        return Ok((*prev, *next));
    }
    let j_prev = prev.end();
    let j_next = next.start();
    let (um, nm) = unit_or_zero(t.u_minus);
    let (up, np) = unit_or_zero(t.u_plus);
    match (prev, next) {
        (Segment::Line(..), Segment::Line(..)) => Err(RefineError::LinesAreC0),
        (Segment::Cubic(_), Segment::Cubic(_)) => {
            if label == ContinuityLabel::G1 && (nm.value() < EPS_TANGENT || np.value() < EPS_TANGENT) {
                return Err(RefineError::DegenerateTangent);
            }
            let sum = um + up;
            let sn = sum.norm();
            if sn.value() < EPS_BISECTOR {
                return Err(RefineError::UndefinedBisector);
            }
            let d = Vec2::new(sum.x / sn, sum.y / sn);
            let (lm, lp) = match label {
                ContinuityLabel::G1 => (nm, np),
                _ => {
                    let s = (np + nm) / 2.0;
                    (s, s)
                }
            };
            Ok((
                with_end_handle(prev, j_prev - d.scale(lm)),
                with_start_handle(next, j_next + d.scale(lp)),
            ))
        }
        (Segment::Line(..), Segment::Cubic(_)) => {
            if nm.value() < EPS_TANGENT {
                return Err(RefineError::DegenerateTangent);
            }
            let len = match label {
                ContinuityLabel::G1 if np.value() < EPS_TANGENT => return Err(RefineError::DegenerateTangent),
                ContinuityLabel::G1 => np,
                _ => nm,
            };
            Ok((*prev, with_start_handle(next, j_next + um.scale(len))))
        }
        (Segment::Cubic(_), Segment::Line(..)) => {
            if np.value() < EPS_TANGENT {
                return Err(RefineError::DegenerateTangent);
            }
            let len = match label {
                ContinuityLabel::G1 if nm.value() < EPS_TANGENT => return Err(RefineError::DegenerateTangent),
                ContinuityLabel::G1 => nm,
                _ => np,
            };
            Ok((with_end_handle(prev, j_prev - up.scale(len)), *next))
        }
    }
}

/// Snaps line end points onto their mean y (H) or mean x (V).
pub fn snap_points<S: Scalar>(a: Vec2<S>, b: Vec2<S>, label: AlignLabel) -> (Vec2<S>, Vec2<S>) {
    match label {
        AlignLabel::H => {
            let y = (a.y + b.y) / 2.0;
            (Vec2::new(a.x, y), Vec2::new(b.x, y))
        }
        AlignLabel::V => {
            let x = (a.x + b.x) / 2.0;
            (Vec2::new(x, a.y), Vec2::new(x, b.y))
        }
        AlignLabel::None => (a, b),
    }
}

pub fn snap_alignment<S: Scalar>(line: &Segment<S>, label: AlignLabel) -> Result<Segment<S>, RefineError> {
    match line {
        Segment::Line(a, b) => {
            let (a, b) = snap_points(*a, *b, label);
            Ok(Segment::Line(a, b))
        }
        Segment::Cubic(_) => Err(RefineError::NotALine),
    }
}

/// A probability distribution over three classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassProbs(pub [f64; 3]);

/// Distribution over `{C0, G1, C1}`.
pub type JunctionPrediction = ClassProbs;
/// Distribution over `{H, V, None}`.
pub type AlignPrediction = ClassProbs;

impl ClassProbs {
    pub fn new(p: [f64; 3]) -> Result<Self, RefineError> {
        let ok = p.iter().all(|v| (0.0..=1.0).contains(v)) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(ClassProbs(p))
        } else {
            Err(RefineError::InvalidProbabilities(p))
        }
    }

    pub fn uniform() -> Self {
        ClassProbs([1.0 / 3.0; 3])
    }

    pub fn one_hot(class: usize) -> Self {
        let mut p = [0.0; 3];
        p[class] = 1.0;
        ClassProbs(p)
    }

    /// Class holding `p` with the remainder split evenly over the others.
    pub fn peaked(class: usize, p: f64) -> Self {
        let mut out = [(1.0 - p) / 2.0; 3];
        out[class] = p;
        ClassProbs(out)
    }

    /// Index and probability of the most likely class (first on ties).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        (best, self.0[best])
    }

    /// The argmax class if its probability exceeds `confidence`.
    pub fn gated(&self, confidence: f64) -> Option<usize> {
        let (c, p) = self.argmax();
        (p > confidence).then_some(c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedSite {
    pub junction: usize,
    pub error: RefineError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOutcome {
    pub glyph: Glyph,
    /// Junction indices where a repair was applied.
    pub repaired: Vec<usize>,
    /// Line indices that were snapped.
    pub snapped: Vec<usize>,
    /// Junctions that passed the gate but could not be repaired.
    pub skipped: Vec<SkippedSite>,
}

fn near(a: Point, b: Point) -> bool {
    a.distance(b) <= EPS_JOIN
}

/// Writes a snapped line back and moves the duplicated copies of its end
/// points held by neighbouring commands (including across a closing seam) so
/// the contour stays joined.
fn write_snapped_line(path: &mut Path, ci: usize, a: Point, b: Point) {
    let cmds = &mut path.commands;
    let (old_a, old_b) = (cmds[ci].start(), cmds[ci].end());
    cmds[ci].args[0] = a;
    cmds[ci].args[3] = b;

    let mut first = ci;
    while first > 0 && cmds[first - 1].kind.is_drawing() {
        first -= 1;
    }
    let mut last = ci;
    while last + 1 < cmds.len() && cmds[last + 1].kind.is_drawing() {
        last += 1;
    }

    if ci > 0 && near(cmds[ci - 1].end(), old_a) {
        cmds[ci - 1].args[3] = a;
        if cmds[ci - 1].kind == CommandKind::MoveTo {
            cmds[ci - 1].args[0] = a;
        }
    }
    if ci + 1 < cmds.len() && cmds[ci + 1].kind.is_drawing() && near(cmds[ci + 1].start(), old_b) {
        cmds[ci + 1].args[0] = b;
    }
    if ci == first && last != ci && near(cmds[last].end(), old_a) {
        cmds[last].args[3] = a;
    }
    if ci == last && first != ci && near(cmds[first].start(), old_b) {
        cmds[first].args[0] = b;
        if first > 0 && cmds[first - 1].kind == CommandKind::MoveTo && near(cmds[first - 1].end(), old_b) {
            cmds[first - 1].args[0] = b;
            cmds[first - 1].args[3] = b;
        }
    }
}

/// Applies every gated snap (in line order), then every gated continuity
/// repair (in junction order) to the current geometry.
///
/// Predictions are indexed like [`junction_sites`] and [`line_sites`].
pub fn refine_glyph(
    glyph: &Glyph,
    junction_preds: &[JunctionPrediction],
    align_preds: &[AlignPrediction],
    confidence: f64,
) -> Result<RefineOutcome, RefineError> {
    let junctions = junction_sites(glyph);
    let lines = line_sites(glyph);
    if junction_preds.len() != junctions.len() {
        return Err(RefineError::PredictionCount {
            what: "junction",
            expected: junctions.len(),
            actual: junction_preds.len(),
        });
    }
    if align_preds.len() != lines.len() {
        return Err(RefineError::PredictionCount {
            what: "line",
            expected: lines.len(),
            actual: align_preds.len(),
        });
    }

    let mut out = glyph.clone();
    let mut snapped = Vec::new();
    for (i, (site, pred)) in lines.iter().zip(align_preds).enumerate() {
        let Some(class) = pred.gated(confidence) else { continue };
        let label = AlignLabel::ALL[class];
        if label == AlignLabel::None {
            continue;
        }
        let cmd = out.paths[site.path].commands[site.command];
        let (a, b) = snap_points(cmd.start(), cmd.end(), label);
        write_snapped_line(&mut out.paths[site.path], site.command, a, b);
        snapped.push(i);
    }

    let mut repaired = Vec::new();
    let mut skipped = Vec::new();
    for (i, (site, pred)) in junctions.iter().zip(junction_preds).enumerate() {
        let Some(class) = pred.gated(confidence) else { continue };
        let label = ContinuityLabel::ALL[class];
        if label == ContinuityLabel::C0 {
            continue;
        }
        let (prev, next) = site.segments(&out);
        match refine_continuity_junction(&prev, &next, label) {
            Ok((p, n)) => {
                let cmds = &mut out.paths[site.path].commands;
                cmds[site.prev].set_segment(&p);
                cmds[site.next].set_segment(&n);
                repaired.push(i);
            }
            Err(error) => skipped.push(SkippedSite { junction: i, error }),
        }
    }
    Ok(RefineOutcome { glyph: out, repaired, snapped, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuity::{classify_junction, label_glyph, Thresholds};
    use crate::svg_io::parse_path_data;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    fn example_pair() -> (Segment, Segment) {
        (
            Segment::Cubic([pt(-4.0, 2.0), pt(-3.0, 1.0), pt(-2.0, 0.0), pt(0.0, 0.0)]),
            Segment::Cubic([pt(0.0, 0.0), pt(0.6, 0.8), pt(2.0, 1.0), pt(3.0, 0.0)]),
        )
    }

    fn label_of(p: &Segment, n: &Segment) -> ContinuityLabel {
        let t = junction_tangents(p, n).unwrap();
        let kinds = |s: &Segment| if s.is_line() { CommandKind::LineFromTo } else { CommandKind::CurveFromTo };
        classify_junction(&t, (kinds(p), kinds(n)), &Thresholds::default())
    }

    #[test]
    fn g1_repair_example() {
        let (p, n) = example_pair();
        let (p2, n2) = refine_continuity_junction(&p, &n, ContinuityLabel::G1).unwrap();
        let Segment::Cubic(a) = p2 else { unreachable!() };
        let Segment::Cubic(b) = n2 else { unreachable!() };
        assert!(close(a[2], pt(-1.788854, -0.894427), 1e-6), "{:?}", a[2]);
        assert!(close(b[1], pt(0.894427, 0.447214), 1e-6), "{:?}", b[1]);
        assert_eq!(label_of(&p2, &n2), ContinuityLabel::G1);
        // everything else untouched
        assert_eq!([a[0], a[1], a[3]], [pt(-4.0, 2.0), pt(-3.0, 1.0), pt(0.0, 0.0)]);
        assert_eq!([b[0], b[2], b[3]], [pt(0.0, 0.0), pt(2.0, 1.0), pt(3.0, 0.0)]);
    }

    #[test]
    fn c1_repair_example() {
        let (p, n) = example_pair();
        let (p2, n2) = refine_continuity_junction(&p, &n, ContinuityLabel::C1).unwrap();
        let Segment::Cubic(a) = p2 else { unreachable!() };
        let Segment::Cubic(b) = n2 else { unreachable!() };
        assert!(close(a[2], pt(-1.341641, -0.670820), 1e-6), "{:?}", a[2]);
        assert!(close(b[1], pt(1.341641, 0.670820), 1e-6), "{:?}", b[1]);
        assert_eq!(label_of(&p2, &n2), ContinuityLabel::C1);
    }

    #[test]
    fn c1_fixed_point() {
        let p = Segment::Cubic([pt(-3.0, 0.0), pt(-2.0, 0.0), pt(-1.0, 0.0), pt(0.0, 0.0)]);
        let n = Segment::Cubic([pt(0.0, 0.0), pt(1.0, 0.0), pt(2.0, 1.0), pt(3.0, 0.0)]);
        let (p2, n2) = refine_continuity_junction(&p, &n, ContinuityLabel::C1).unwrap();
        assert_eq!((p2, n2), (p, n));
    }

    #[test]
    fn c0_is_identity() {
        let (p, n) = example_pair();
        assert_eq!(refine_continuity_junction(&p, &n, ContinuityLabel::C0).unwrap(), (p, n));
    }

    #[test]
    fn line_curve_moves_only_the_handle() {
        let line = Segment::Line(pt(-2.0, 0.0), pt(0.0, 0.0));
        let curve = Segment::Cubic([pt(0.0, 0.0), pt(0.3, 0.4), pt(1.0, 1.0), pt(2.0, 0.0)]);
        let (l2, c2) = refine_continuity_junction(&line, &curve, ContinuityLabel::G1).unwrap();
        assert_eq!(l2, line);
        let Segment::Cubic(c) = c2 else { unreachable!() };
        assert!(close(c[1], pt(0.5, 0.0), 1e-15));
        assert_eq!(label_of(&l2, &c2), ContinuityLabel::G1);

        let (_, c2) = refine_continuity_junction(&line, &curve, ContinuityLabel::C1).unwrap();
        let Segment::Cubic(c) = c2 else { unreachable!() };
        assert!(close(c[1], pt(2.0, 0.0), 1e-15));

        // curve into line
        let rc = curve.reversed();
        let rl = line.reversed();
        let (c3, l3) = refine_continuity_junction(&rc, &rl, ContinuityLabel::C1).unwrap();
        assert_eq!(l3, rl);
        let Segment::Cubic(c) = c3 else { unreachable!() };
        assert!(close(c[2], pt(2.0, 0.0), 1e-15));
        assert_eq!(label_of(&c3, &l3), ContinuityLabel::C1);
    }

    #[test]
    fn repair_errors() {
        let a = Segment::Line(pt(-1.0, 0.0), pt(0.0, 0.0));
        let b = Segment::Line(pt(0.0, 0.0), pt(0.0, 1.0));
        assert_eq!(refine_continuity_junction(&a, &b, ContinuityLabel::G1), Err(RefineError::LinesAreC0));
        assert_eq!(refine_continuity_junction(&a, &b, ContinuityLabel::C0), Ok((a, b)));

        let p = Segment::Cubic([pt(-3.0, 1.0), pt(-2.0, 1.0), pt(-1.0, 0.0), pt(0.0, 0.0)]);
        let cusp = Segment::Cubic([pt(0.0, 0.0), pt(-1.0, 0.0), pt(-2.0, 1.0), pt(-3.0, 2.0)]);
        assert_eq!(refine_continuity_junction(&p, &cusp, ContinuityLabel::G1), Err(RefineError::UndefinedBisector));

        let flat = Segment::Cubic([pt(0.0, 0.0), pt(0.0, 0.0), pt(2.0, 1.0), pt(3.0, 0.0)]);
        assert_eq!(refine_continuity_junction(&p, &flat, ContinuityLabel::G1), Err(RefineError::DegenerateTangent));
        // C1 can still repair a single missing handle
        let (p2, n2) = refine_continuity_junction(&p, &flat, ContinuityLabel::C1).unwrap();
        assert_eq!(label_of(&p2, &n2), ContinuityLabel::C1);

        let apart = Segment::Cubic([pt(0.5, 0.0), pt(1.0, 0.0), pt(2.0, 1.0), pt(3.0, 0.0)]);
        assert!(matches!(
            refine_continuity_junction(&p, &apart, ContinuityLabel::G1),
            Err(RefineError::Geometry(_))
        ));
    }

    #[test]
    fn snapping() {
        let l = Segment::Line(pt(0.0, 1.0), pt(10.0, 3.0));
        assert_eq!(snap_alignment(&l, AlignLabel::H).unwrap(), Segment::Line(pt(0.0, 2.0), pt(10.0, 2.0)));
        let l = Segment::Line(pt(4.0, 0.0), pt(6.0, 9.0));
        assert_eq!(snap_alignment(&l, AlignLabel::V).unwrap(), Segment::Line(pt(5.0, 0.0), pt(5.0, 9.0)));
        assert_eq!(snap_alignment(&l, AlignLabel::None).unwrap(), l);
        let c = Segment::Cubic([Point::ZERO; 4]);
        assert_eq!(snap_alignment(&c, AlignLabel::H), Err(RefineError::NotALine));
    }

    #[test]
    fn probs() {
        assert!(ClassProbs::new([0.5, 0.5, 0.0]).is_ok());
        assert!(ClassProbs::new([0.5, 0.6, 0.0]).is_err());
        assert!(ClassProbs::new([1.5, -0.5, 0.0]).is_err());
        assert_eq!(ClassProbs::uniform().gated(0.75), None);
        assert_eq!(ClassProbs::peaked(2, 0.76).gated(0.75), Some(2));
        assert_eq!(ClassProbs::peaked(2, 0.75).gated(0.75), None);
    }

    fn skewed_glyph() -> Glyph {
        // a "D": stem, bowl made of two cubics; slightly off-axis stem and bars
        Glyph::normalized(
            parse_path_data("M 0 0 L 0.3 0.001 C 0.6 0 0.8 0.2 0.8 0.5 C 0.8 0.9 0.5 1 0.3 1.002 L 0.001 1 Z").unwrap(),
        )
    }

    #[test]
    fn uniform_predictions_leave_glyph_alone() {
        let g = skewed_glyph();
        let nj = junction_sites(&g).len();
        let nl = line_sites(&g).len();
        let out = refine_glyph(&g, &vec![ClassProbs::uniform(); nj], &vec![ClassProbs::uniform(); nl], 0.75).unwrap();
        assert_eq!(out.glyph, g);
        assert!(out.repaired.is_empty() && out.snapped.is_empty());
    }

    #[test]
    fn single_gated_junction_is_local() {
        let g = skewed_glyph();
        let sites = junction_sites(&g);
        let nl = line_sites(&g).len();
        // junction between the two cubics
        let k = sites
            .iter()
            .position(|s| s.kinds(&g) == (CommandKind::CurveFromTo, CommandKind::CurveFromTo))
            .unwrap();
        let mut preds = vec![ClassProbs::uniform(); sites.len()];
        preds[k] = ClassProbs::peaked(2, 0.9);
        let out = refine_glyph(&g, &preds, &vec![ClassProbs::uniform(); nl], 0.75).unwrap();
        assert_eq!(out.repaired, vec![k]);
        let (p, n) = sites[k].segments(&g);
        let (ep, en) = refine_continuity_junction(&p, &n, ContinuityLabel::C1).unwrap();
        let mut expected = g.clone();
        expected.paths[0].commands[sites[k].prev].set_segment(&ep);
        expected.paths[0].commands[sites[k].next].set_segment(&en);
        assert_eq!(out.glyph, expected);
    }

    #[test]
    fn snapping_keeps_contour_joined() {
        let g = skewed_glyph();
        let nj = junction_sites(&g).len();
        let labels = label_glyph(&g, &Thresholds::default());
        assert_eq!(labels.alignment, vec![AlignLabel::None, AlignLabel::None, AlignLabel::None]);
        let align = vec![ClassProbs::one_hot(0), ClassProbs::one_hot(0), ClassProbs::one_hot(1)];
        let out = refine_glyph(&g, &vec![ClassProbs::uniform(); nj], &align, 0.75).unwrap();
        assert_eq!(out.snapped, vec![0, 1, 2]);
        assert!(crate::model::validate_glyph(&out.glyph).is_valid());
        let relabeled = label_glyph(&out.glyph, &Thresholds::default());
        assert_eq!(relabeled.alignment, vec![AlignLabel::H, AlignLabel::H, AlignLabel::V]);
        assert_eq!(junction_sites(&out.glyph).len(), nj);
    }

    #[test]
    fn prediction_count_mismatch() {
        let g = skewed_glyph();
        assert!(matches!(
            refine_glyph(&g, &[], &[], 0.75),
            Err(RefineError::PredictionCount { what: "junction", .. })
        ));
    }
}
