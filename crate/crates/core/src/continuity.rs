//! Ground-truth continuity labels at junctions and alignment labels for lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{junction_tangents, JunctionTangents, Segment};
use crate::model::{CommandKind, Glyph, EPS_JOIN};
use crate::scalar::Scalar;

/// Tangents shorter than this are treated as absent.
pub const EPS_TANGENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContinuityLabel {
    C0 = 0,
    G1 = 1,
    C1 = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlignLabel {
    H = 0,
    V = 1,
    None = 2,
}

impl ContinuityLabel {
    pub const ALL: [ContinuityLabel; 3] = [ContinuityLabel::C0, ContinuityLabel::G1, ContinuityLabel::C1];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl AlignLabel {
    pub const ALL: [AlignLabel; 3] = [AlignLabel::H, AlignLabel::V, AlignLabel::None];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("threshold `{0}` must be strictly positive")]
pub struct ThresholdError(pub &'static str);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Cosine slack for the direction test.
    pub eps_a: f64,
    /// Absolute tangent-length slack, EM units.
    pub eps_b: f64,
    /// Coordinate slack for H/V detection, EM units.
    pub eps_align: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eps_a: 1e-3, eps_b: 1e-2, eps_align: 1e-3 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        for (name, v) in [("eps_a", self.eps_a), ("eps_b", self.eps_b), ("eps_align", self.eps_align)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ThresholdError(name));
            }
        }
        Ok(())
    }
}

/// Which command kinds meet at a junction.
pub type JunctionKinds = (CommandKind, CommandKind);

pub fn classify_junction<S: Scalar>(
    tangents: &JunctionTangents<S>,
    kinds: JunctionKinds,
    th: &Thresholds,
) -> ContinuityLabel {
    if kinds.0 == CommandKind::LineFromTo && kinds.1 == CommandKind::LineFromTo {
        return ContinuityLabel::C0;
    }
    let um = tangents.u_minus.values();
    let up = tangents.u_plus.values();
    let (nm, np) = (um.norm(), up.norm());
    if nm < EPS_TANGENT || np < EPS_TANGENT {
        return ContinuityLabel::C0;
    }
    let cos = um.dot(up) / (nm * np);
    if cos > 1.0 - th.eps_a {
        if (nm - np).abs() < th.eps_b {
            ContinuityLabel::C1
        } else {
            ContinuityLabel::G1
        }
    } else {
        ContinuityLabel::C0
    }
}

/// H if the end points share a y (within slack), else V if they share an x.
pub fn classify_alignment<S: Scalar>(a: crate::scalar::Vec2<S>, b: crate::scalar::Vec2<S>, th: &Thresholds) -> AlignLabel {
    let (a, b) = (a.values(), b.values());
    if (a.y - b.y).abs() < th.eps_align {
        AlignLabel::H
    } else if (a.x - b.x).abs() < th.eps_align {
        AlignLabel::V
    } else {
        AlignLabel::None
    }
}

/// A junction between two drawing commands of one path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JunctionSite {
    pub path: usize,
    pub prev: usize,
    pub next: usize,
}

/// A line command eligible for snapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineSite {
    pub path: usize,
    pub command: usize,
}

/// Junction sites in traversal order: consecutive drawing commands of each
/// visible path (not separated by a `MoveTo`), followed by the closing seam
/// when the contour's last drawing command ends on the first one's start.
pub fn junction_sites(glyph: &Glyph) -> Vec<JunctionSite> {
    let mut out = Vec::new();
    for (pi, path) in glyph.paths.iter().enumerate().filter(|(_, p)| p.visible) {
        let cmds = &path.commands;
        // runs of drawing commands between moves
        let mut run: Vec<usize> = Vec::new();
        let flush = |run: &mut Vec<usize>, out: &mut Vec<JunctionSite>| {
            for w in run.windows(2) {
                out.push(JunctionSite { path: pi, prev: w[0], next: w[1] });
            }
            if run.len() >= 2 {
                let (first, last) = (run[0], run[run.len() - 1]);
                if cmds[last].end().distance(cmds[first].start()) <= EPS_JOIN {
                    out.push(JunctionSite { path: pi, prev: last, next: first });
                }
            }
            run.clear();
        };
        for (ci, c) in cmds.iter().enumerate() {
            if c.kind.is_drawing() {
                run.push(ci);
            } else {
                flush(&mut run, &mut out);
            }
        }
        flush(&mut run, &mut out);
    }
    out
}

pub fn line_sites(glyph: &Glyph) -> Vec<LineSite> {
    glyph
        .paths
        .iter()
        .enumerate()
        .filter(|(_, p)| p.visible)
        .flat_map(|(pi, p)| {
            p.commands
                .iter()
                .enumerate()
                .filter(|(_, c)| c.kind == CommandKind::LineFromTo)
                .map(move |(ci, _)| LineSite { path: pi, command: ci })
        })
        .collect()
}

impl JunctionSite {
    pub fn segments(&self, glyph: &Glyph) -> (Segment, Segment) {
        let p = &glyph.paths[self.path];
        (
            p.commands[self.prev].segment().expect("drawing command"),
            p.commands[self.next].segment().expect("drawing command"),
        )
    }

    pub fn kinds(&self, glyph: &Glyph) -> JunctionKinds {
        let p = &glyph.paths[self.path];
        (p.commands[self.prev].kind, p.commands[self.next].kind)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlyphLabels {
    pub continuity: Vec<ContinuityLabel>,
    pub alignment: Vec<AlignLabel>,
}

impl GlyphLabels {
    pub fn continuity_codes(&self) -> Vec<u8> {
        self.continuity.iter().map(|l| l.code()).collect()
    }

    pub fn alignment_codes(&self) -> Vec<u8> {
        self.alignment.iter().map(|l| l.code()).collect()
    }
}

/// Labels every junction and every line of a glyph in EM units. Junctions whose
/// end points do not meet are labeled C0.
pub fn label_glyph(glyph: &Glyph, th: &Thresholds) -> GlyphLabels {
    let continuity = junction_sites(glyph)
        .iter()
        .map(|site| {
            let (prev, next) = site.segments(glyph);
            match junction_tangents(&prev, &next) {
                Ok(t) => classify_junction(&t, site.kinds(glyph), th),
                Err(_) => ContinuityLabel::C0,
            }
        })
        .collect();
    let alignment = line_sites(glyph)
        .iter()
        .map(|s| {
            let c = &glyph.paths[s.path].commands[s.command];
            classify_alignment(c.start(), c.end(), th)
        })
        .collect();
    GlyphLabels { continuity, alignment }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Command, Path};
    use crate::scalar::Point;
    use crate::svg_io::parse_path_data;

    const CC: JunctionKinds = (CommandKind::CurveFromTo, CommandKind::CurveFromTo);

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn tangents(a: Point, b: Point) -> JunctionTangents {
        JunctionTangents { u_minus: a, u_plus: b }
    }

    #[test]
    fn junction_classes() {
        let th = Thresholds::default();
        assert_eq!(classify_junction(&tangents(pt(2.0, 0.0), pt(2.0, 0.0)), CC, &th), ContinuityLabel::C1);
        assert_eq!(classify_junction(&tangents(pt(2.0, 0.0), pt(1.0, 0.0)), CC, &th), ContinuityLabel::G1);
        assert_eq!(classify_junction(&tangents(pt(1.0, 0.0), pt(0.0, 1.0)), CC, &th), ContinuityLabel::C0);
        assert_eq!(classify_junction(&tangents(Point::ZERO, pt(1.0, 0.0)), CC, &th), ContinuityLabel::C0);
        let ll = (CommandKind::LineFromTo, CommandKind::LineFromTo);
        assert_eq!(classify_junction(&tangents(pt(1.0, 0.0), pt(1.0, 0.0)), ll, &th), ContinuityLabel::C0);
        let lc = (CommandKind::LineFromTo, CommandKind::CurveFromTo);
        assert_eq!(classify_junction(&tangents(pt(1.0, 0.0), pt(1.0, 0.0)), lc, &th), ContinuityLabel::C1);
    }

    #[test]
    fn alignment_classes() {
        let th = Thresholds::default();
        assert_eq!(classify_alignment(pt(0.0, 0.0), pt(10.0, 0.0), &th), AlignLabel::H);
        assert_eq!(classify_alignment(pt(3.0, 0.0), pt(3.0, 7.0), &th), AlignLabel::V);
        assert_eq!(classify_alignment(pt(0.0, 0.0), pt(1.0, 1.0), &th), AlignLabel::None);
        // sub-threshold segment: H wins the tie
        assert_eq!(classify_alignment(pt(0.0, 0.0), pt(1e-4, 1e-4), &th), AlignLabel::H);
    }

    #[test]
    fn square_labels() {
        let g = Glyph::normalized(parse_path_data("M0 0 L1 0 L1 1 L0 1 Z").unwrap());
        let l = label_glyph(&g, &Thresholds::default());
        assert_eq!(l.continuity, vec![ContinuityLabel::C0; 4]);
        assert_eq!(l.alignment, vec![AlignLabel::H, AlignLabel::V, AlignLabel::H, AlignLabel::V]);
    }

    #[test]
    fn circle_labels() {
        let k = 0.552_284_749_830_793_4;
        let d = format!(
            "M 1 0 C 1 {k} {k} 1 0 1 C -{k} 1 -1 {k} -1 0 C -1 -{k} -{k} -1 0 -1 C {k} -1 1 -{k} 1 0 Z"
        );
        let g = Glyph::normalized(parse_path_data(&d).unwrap());
        let l = label_glyph(&g, &Thresholds::default());
        assert_eq!(l.continuity, vec![ContinuityLabel::C1; 4]);
        assert!(l.alignment.is_empty());
    }

    #[test]
    fn single_command_and_open_paths() {
        let g = Glyph::normalized(parse_path_data("M0 0 L1 0").unwrap());
        assert!(label_glyph(&g, &Thresholds::default()).continuity.is_empty());
        let g = Glyph::normalized(parse_path_data("M0 0 L1 0 L1 1").unwrap());
        assert_eq!(junction_sites(&g).len(), 1);
    }

    #[test]
    fn hidden_paths_are_skipped() {
        let mut g = Glyph::normalized(parse_path_data("M0 0 L1 0 L1 1 Z").unwrap());
        g.paths[0].visible = false;
        assert!(junction_sites(&g).is_empty());
        assert!(line_sites(&g).is_empty());
    }

    #[test]
    fn moveto_breaks_runs() {
        let g = Glyph::normalized(vec![Path::new(vec![
            Command::move_to(pt(0.0, 0.0)),
            Command::line(pt(0.0, 0.0), pt(1.0, 0.0)),
            Command::move_to(pt(1.0, 0.0)),
            Command::line(pt(1.0, 0.0), pt(2.0, 0.0)),
        ])]);
        assert!(junction_sites(&g).is_empty());
    }

    #[test]
    fn thresholds_validate() {
        assert!(Thresholds::default().validate().is_ok());
        let bad = Thresholds { eps_b: 0.0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ThresholdError("eps_b")));
    }
}
