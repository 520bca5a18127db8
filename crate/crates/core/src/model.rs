//! Canonical glyph model.
//!
//! A glyph is a list of contour paths; each path is a list of commands in the
//! 4-point form `(p1, p2, p3, p4)`. Lines and moves only use `p1` and `p4`,
//! curves use all four. `p1` of a command duplicates `p4` of its predecessor so
//! that every command is self-contained.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Segment;
use crate::scalar::Point;

/// Tolerance for the `p1[k] == p4[k-1]` redundancy, in EM units.
pub const EPS_JOIN: f64 = 1e-6;

/// Maximum number of paths per glyph used for padding.
pub const NP_MAX: usize = 4;
/// Maximum number of commands per path used for padding.
pub const NC_MAX: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty glyph")]
    EmptyGlyph,
    #[error("glyph is already normalized")]
    AlreadyNormalized,
    #[error("units per EM must be positive and finite, got {0}")]
    InvalidUnitsPerEm(f64),
    #[error("glyph has {actual} paths, capacity is {max}")]
    TooManyPaths { actual: usize, max: usize },
    #[error("path {path} has {actual} commands, capacity is {max}")]
    TooManyCommands { path: usize, actual: usize, max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    MoveTo,
    LineFromTo,
    CurveFromTo,
    Eos,
}

impl CommandKind {
    pub const ALL: [CommandKind; 4] = [
        CommandKind::MoveTo,
        CommandKind::LineFromTo,
        CommandKind::CurveFromTo,
        CommandKind::Eos,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical argument mask for this kind, one `[x, y]` pair per point.
    pub fn mask(self) -> ArgMask {
        match self {
            CommandKind::MoveTo | CommandKind::LineFromTo => {
                ArgMask([[true; 2], [false; 2], [false; 2], [true; 2]])
            }
            CommandKind::CurveFromTo => ArgMask([[true; 2]; 4]),
            CommandKind::Eos => ArgMask([[false; 2]; 4]),
        }
    }

    pub fn is_drawing(self) -> bool {
        matches!(self, CommandKind::LineFromTo | CommandKind::CurveFromTo)
    }
}

/// 4×2 binary mask over command arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArgMask(pub [[bool; 2]; 4]);

impl ArgMask {
    pub fn count(&self) -> usize {
        self.0.iter().flatten().filter(|&&m| m).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Command {
    pub kind: CommandKind,
    pub args: [Point; 4],
    pub mask: ArgMask,
}

impl Command {
    /// Move with `p1 = p4 = to`.
    pub fn move_to(to: Point) -> Self {
        Self::with_kind(CommandKind::MoveTo, [to, Point::ZERO, Point::ZERO, to])
    }

    pub fn line(from: Point, to: Point) -> Self {
        Self::with_kind(CommandKind::LineFromTo, [from, Point::ZERO, Point::ZERO, to])
    }

    pub fn curve(p1: Point, p2: Point, p3: Point, p4: Point) -> Self {
        Self::with_kind(CommandKind::CurveFromTo, [p1, p2, p3, p4])
    }

    pub fn eos() -> Self {
        Self::with_kind(CommandKind::Eos, [Point::ZERO; 4])
    }

    /// Builds a command with the canonical mask, zeroing masked-out arguments.
    pub fn with_kind(kind: CommandKind, mut args: [Point; 4]) -> Self {
        let mask = kind.mask();
        for (p, m) in args.iter_mut().zip(mask.0.iter()) {
            if !m[0] {
                p.x = 0.0;
            }
            if !m[1] {
                p.y = 0.0;
            }
        }
        Command { kind, args, mask }
    }

    pub fn start(&self) -> Point {
        self.args[0]
    }

    pub fn end(&self) -> Point {
        self.args[3]
    }

    /// The drawable segment for lines and curves.
    pub fn segment(&self) -> Option<Segment> {
        match self.kind {
            CommandKind::LineFromTo => Some(Segment::Line(self.args[0], self.args[3])),
            CommandKind::CurveFromTo => Some(Segment::Cubic(self.args)),
            _ => None,
        }
    }

    /// Replaces the arguments from a segment of the same kind.
    pub fn set_segment(&mut self, seg: &Segment) {
        match (self.kind, seg) {
            (CommandKind::LineFromTo, Segment::Line(a, b)) => {
                self.args[0] = *a;
                self.args[3] = *b;
            }
            (CommandKind::CurveFromTo, Segment::Cubic(p)) => self.args = *p,
            _ => panic!("segment kind does not match command kind {:?}", self.kind),
        }
    }

    fn map_points(&mut self, f: impl Fn(Point) -> Point) {
        for (p, m) in self.args.iter_mut().zip(self.mask.0) {
            if m[0] || m[1] {
                *p = f(*p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub commands: Vec<Command>,
    pub visible: bool,
}

impl Path {
    pub fn new(commands: Vec<Command>) -> Self {
        Path { commands, visible: true }
    }

    /// Indices of the drawing commands (lines and curves).
    pub fn drawing_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.commands
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind.is_drawing())
            .map(|(i, _)| i)
    }

    /// First `MoveTo` point, if any.
    pub fn start_point(&self) -> Option<Point> {
        self.commands
            .iter()
            .find(|c| c.kind == CommandKind::MoveTo)
            .map(|c| c.end())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    pub paths: Vec<Path>,
    /// Design-grid size; `None` once normalized.
    pub units_per_em: Option<f64>,
    pub normalized: bool,
}

impl Glyph {
    pub fn new(paths: Vec<Path>, units_per_em: f64) -> Self {
        Glyph { paths, units_per_em: Some(units_per_em), normalized: false }
    }

    /// A glyph whose coordinates are already in EM units.
    pub fn normalized(paths: Vec<Path>) -> Self {
        Glyph { paths, units_per_em: None, normalized: true }
    }

    pub fn visible_points(&self) -> impl Iterator<Item = Point> + '_ {
        self.paths
            .iter()
            .filter(|p| p.visible)
            .flat_map(|p| p.commands.iter())
            .flat_map(|c| {
                c.args
                    .iter()
                    .zip(c.mask.0)
                    .filter(|(_, m)| m[0] || m[1])
                    .map(|(p, _)| *p)
            })
    }

    /// Bounding box `(min, max)` of all visible geometry, control points included.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        self.visible_points().fold(None, |acc, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            )),
        })
    }

    pub fn map_points(&mut self, f: impl Fn(Point) -> Point + Copy) {
        for c in self.paths.iter_mut().flat_map(|p| p.commands.iter_mut()) {
            c.map_points(f);
        }
    }

    /// Divides every coordinate by `units_per_em` without recentering.
    pub fn to_em_units(&self) -> Result<Glyph, ModelError> {
        if self.normalized {
            return Ok(self.clone());
        }
        let upm = self.upm()?;
        let mut out = self.clone();
        out.map_points(|p| p / upm);
        out.units_per_em = None;
        out.normalized = true;
        Ok(out)
    }

    /// Inverse of [`Glyph::to_em_units`].
    pub fn from_em_units(&self, units_per_em: f64) -> Glyph {
        let mut out = self.clone();
        out.map_points(|p| p * units_per_em);
        out.units_per_em = Some(units_per_em);
        out.normalized = false;
        out
    }

    fn upm(&self) -> Result<f64, ModelError> {
        match self.units_per_em {
            Some(u) if u > 0.0 && u.is_finite() => Ok(u),
            Some(u) => Err(ModelError::InvalidUnitsPerEm(u)),
            None => Err(ModelError::InvalidUnitsPerEm(f64::NAN)),
        }
    }
}

/// Scales by `1 / units_per_em` and recenters the bounding box of visible
/// geometry on the origin.
pub fn normalize_glyph(glyph: &Glyph) -> Result<Glyph, ModelError> {
    if glyph.normalized {
        return Err(ModelError::AlreadyNormalized);
    }
    let upm = glyph.upm()?;
    let (lo, hi) = glyph.bounds().ok_or(ModelError::EmptyGlyph)?;
    let center = Point::new((lo.x + hi.x) / 2.0 / upm, (lo.y + hi.y) / 2.0 / upm);
    let mut out = glyph.clone();
    out.map_points(|p| p / upm - center);
    out.units_per_em = None;
    out.normalized = true;
    Ok(out)
}

/// Fixed-shape tensor view of a glyph, `(np_max, nc_max, 4, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedGlyphTensor {
    pub np_max: usize,
    pub nc_max: usize,
    /// Row-major `[path][command]` arguments.
    pub coords: Vec<[Point; 4]>,
    pub kinds: Vec<CommandKind>,
    pub visible: Vec<bool>,
    pub units_per_em: Option<f64>,
    pub normalized: bool,
}

impl PaddedGlyphTensor {
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.np_max, self.nc_max, 4, 2)
    }

    pub fn slot(&self, path: usize, command: usize) -> usize {
        path * self.nc_max + command
    }

    pub fn masks(&self) -> Vec<ArgMask> {
        self.kinds.iter().map(|k| k.mask()).collect()
    }

    /// Flattened coordinates in `(np, nc, 4, 2)` order.
    pub fn flat_coords(&self) -> Vec<f64> {
        self.coords
            .iter()
            .flat_map(|a| a.iter().flat_map(|p| [p.x, p.y]))
            .collect()
    }

    pub fn eos_count(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == CommandKind::Eos).count()
    }

    /// Drops padding and rebuilds the glyph.
    pub fn to_glyph(&self) -> Glyph {
        let mut paths = Vec::new();
        for p in 0..self.np_max {
            let commands: Vec<Command> = (0..self.nc_max)
                .map(|c| self.slot(p, c))
                .take_while(|&s| self.kinds[s] != CommandKind::Eos)
                .map(|s| Command::with_kind(self.kinds[s], self.coords[s]))
                .collect();
            if commands.is_empty() && !self.visible[p] {
                continue;
            }
            paths.push(Path { commands, visible: self.visible[p] });
        }
        Glyph { paths, units_per_em: self.units_per_em, normalized: self.normalized }
    }
}

pub fn pad_glyph(glyph: &Glyph, np_max: usize, nc_max: usize) -> Result<PaddedGlyphTensor, ModelError> {
    if glyph.paths.len() > np_max {
        return Err(ModelError::TooManyPaths { actual: glyph.paths.len(), max: np_max });
    }
    if let Some((i, p)) = glyph.paths.iter().enumerate().find(|(_, p)| p.commands.len() > nc_max) {
        return Err(ModelError::TooManyCommands { path: i, actual: p.commands.len(), max: nc_max });
    }
    let mut t = PaddedGlyphTensor {
        np_max,
        nc_max,
        coords: vec![[Point::ZERO; 4]; np_max * nc_max],
        kinds: vec![CommandKind::Eos; np_max * nc_max],
        visible: vec![false; np_max],
        units_per_em: glyph.units_per_em,
        normalized: glyph.normalized,
    };
    for (pi, path) in glyph.paths.iter().enumerate() {
        t.visible[pi] = path.visible;
        for (ci, cmd) in path.commands.iter().enumerate() {
            let s = t.slot(pi, ci);
            t.coords[s] = cmd.args;
            t.kinds[s] = cmd.kind;
        }
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    MissingMoveTo,
    BrokenJoin { gap: f64 },
    MaskMismatch,
    EosInPath,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub path: usize,
    pub command: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "path {} command {}: ", self.path, self.command)?;
        match &self.kind {
            ViolationKind::MissingMoveTo => write!(f, "path must start with MoveTo"),
            ViolationKind::BrokenJoin { gap } => {
                write!(f, "start point deviates from previous end point by {gap}")
            }
            ViolationKind::MaskMismatch => write!(f, "argument mask does not match command kind"),
            ViolationKind::EosInPath => write!(f, "EOS inside a path"),
            ViolationKind::NonFinite => write!(f, "non-finite coordinate"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_glyph(glyph: &Glyph) -> ValidationReport {
    validate_glyph_with(glyph, EPS_JOIN)
}

pub fn validate_glyph_with(glyph: &Glyph, eps_join: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |path, command, kind| violations.push(Violation { path, command, kind });
    for (pi, path) in glyph.paths.iter().enumerate().filter(|(_, p)| p.visible) {
        if let Some(first) = path.commands.first() {
            if first.kind != CommandKind::MoveTo {
                push(pi, 0, ViolationKind::MissingMoveTo);
            }
        }
        for (ci, cmd) in path.commands.iter().enumerate() {
            if cmd.mask != cmd.kind.mask() {
                push(pi, ci, ViolationKind::MaskMismatch);
            }
            if cmd.kind == CommandKind::Eos {
                push(pi, ci, ViolationKind::EosInPath);
            }
            if !cmd.args.iter().all(Point::is_finite) {
                push(pi, ci, ViolationKind::NonFinite);
            }
            if ci > 0 && cmd.kind.is_drawing() {
                let gap = cmd.start().distance(path.commands[ci - 1].end());
                if gap > eps_join || gap.is_nan() {
                    push(pi, ci, ViolationKind::BrokenJoin { gap });
                }
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn square(size: f64) -> Glyph {
        let c = [pt(0.0, 0.0), pt(size, 0.0), pt(size, size), pt(0.0, size)];
        let mut cmds = vec![Command::move_to(c[0])];
        for i in 0..4 {
            cmds.push(Command::line(c[i], c[(i + 1) % 4]));
        }
        Glyph::new(vec![Path::new(cmds)], 1000.0)
    }

    #[test]
    fn masks_follow_kind() {
        assert_eq!(CommandKind::LineFromTo.mask().count(), 4);
        assert_eq!(CommandKind::CurveFromTo.mask().count(), 8);
        assert_eq!(CommandKind::Eos.mask().count(), 0);
        let l = Command::with_kind(CommandKind::LineFromTo, [pt(1.0, 1.0); 4]);
        assert_eq!(l.args[1], Point::ZERO);
        assert_eq!(l.args[2], Point::ZERO);
    }

    #[test]
    fn normalize_square() {
        let g = normalize_glyph(&square(1000.0)).unwrap();
        let (lo, hi) = g.bounds().unwrap();
        assert_eq!(lo, pt(-0.5, -0.5));
        assert_eq!(hi, pt(0.5, 0.5));
        assert!(g.normalized);
    }

    #[test]
    fn normalize_centered_identity() {
        let mut g = normalize_glyph(&square(1000.0)).unwrap();
        let before = g.clone();
        g.normalized = false;
        g.units_per_em = Some(1.0);
        let again = normalize_glyph(&g).unwrap();
        assert_eq!(again.paths, before.paths);
    }

    #[test]
    fn normalize_single_point() {
        let g = Glyph::new(vec![Path::new(vec![Command::move_to(pt(250.0, 250.0))])], 1000.0);
        let n = normalize_glyph(&g).unwrap();
        assert_eq!(n.paths[0].commands[0].end(), Point::ZERO);
    }

    #[test]
    fn normalize_errors() {
        let empty = Glyph::new(vec![], 1000.0);
        assert_eq!(normalize_glyph(&empty), Err(ModelError::EmptyGlyph));
        let mut hidden = square(10.0);
        hidden.paths[0].visible = false;
        assert_eq!(normalize_glyph(&hidden), Err(ModelError::EmptyGlyph));
        let bad = Glyph::new(square(1.0).paths, 0.0);
        assert!(matches!(normalize_glyph(&bad), Err(ModelError::InvalidUnitsPerEm(_))));
    }

    #[test]
    fn pad_counts() {
        let g = Glyph::new(
            vec![Path::new(vec![
                Command::move_to(pt(0.0, 0.0)),
                Command::line(pt(0.0, 0.0), pt(1.0, 0.0)),
                Command::line(pt(1.0, 0.0), pt(1.0, 1.0)),
            ])],
            1.0,
        );
        let t = pad_glyph(&g, NP_MAX, NC_MAX).unwrap();
        assert_eq!(t.shape(), (4, 32, 4, 2));
        assert_eq!(t.eos_count(), 125);
        assert_eq!(t.visible, vec![true, false, false, false]);
        assert_eq!(t.flat_coords().len(), 4 * 32 * 4 * 2);
        assert!(t.coords[t.slot(0, 3)].iter().all(|p| *p == Point::ZERO));
    }

    #[test]
    fn pad_empty_and_capacity() {
        let t = pad_glyph(&Glyph::normalized(vec![]), 4, 32).unwrap();
        assert_eq!(t.eos_count(), 128);
        assert!(t.visible.iter().all(|v| !v));

        let g = square(1.0);
        assert_eq!(
            pad_glyph(&g, 4, 3),
            Err(ModelError::TooManyCommands { path: 0, actual: 5, max: 3 })
        );
        let many = Glyph::new(vec![g.paths[0].clone(); 5], 1.0);
        assert_eq!(pad_glyph(&many, 4, 32), Err(ModelError::TooManyPaths { actual: 5, max: 4 }));
    }

    #[test]
    fn validation_reports() {
        assert!(validate_glyph(&square(1.0)).is_valid());

        let mut g = square(1.0);
        g.paths[0].commands.remove(0);
        let r = validate_glyph(&g);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::MissingMoveTo);
        assert!(r.violations[0].to_string().contains("path must start with MoveTo"));

        let mut g = square(1.0);
        g.paths[0].commands[2].args[0].x += 0.1;
        let r = validate_glyph(&g);
        assert_eq!(r.violations.len(), 1);
        assert!(matches!(r.violations[0].kind, ViolationKind::BrokenJoin { .. }));

        let mut g = square(1.0);
        g.paths[0].commands[1].mask = CommandKind::CurveFromTo.mask();
        assert_eq!(validate_glyph(&g).violations[0].kind, ViolationKind::MaskMismatch);
    }
}
