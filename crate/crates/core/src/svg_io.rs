//! SVG path data (`d` attribute) parsing and serialization.
//!
//! Supported opcodes are `M L H V C S Q Z` and their relative forms. Arcs and
//! smooth quadratics are rejected. Every `M`/`m` opens a new [`Path`];
//! quadratics are degree-elevated to cubics.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Command, CommandKind, Path};
use crate::scalar::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("unknown opcode '{0}'")]
    UnknownOpcode(char),
    #[error("unsupported opcode '{0}' (arcs and smooth quadratics have no command analogue)")]
    UnsupportedOpcode(char),
    #[error("opcode '{opcode}' takes operands in groups of {arity}, got {count}")]
    Arity { opcode: char, arity: usize, count: usize },
    #[error("path data must begin with a moveto")]
    MissingMoveTo,
    #[error("invalid number")]
    InvalidNumber,
    #[error("non-finite number")]
    NonFinite,
    #[error("number without an opcode")]
    OrphanNumber,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

/// Cubic control points `(c1, c2)` tracing the same curve as the quadratic
/// `(p0, q, p2)`.
pub fn elevate_quadratic(p0: Point, q: Point, p2: Point) -> (Point, Point) {
    let c1 = p0 + (q - p0) * (2.0 / 3.0);
    let c2 = p2 + (q - p2) * (2.0 / 3.0);
    (c1, c2)
}

fn arity(op: char) -> Option<usize> {
    Some(match op.to_ascii_uppercase() {
        'M' | 'L' => 2,
        'H' | 'V' => 1,
        'C' => 6,
        'S' | 'Q' => 4,
        'Z' => 0,
        _ => return None,
    })
}

struct Lexer<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.s.len() && matches!(self.s[self.pos], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b',') {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn at_number(&self) -> bool {
        matches!(self.peek(), Some(b'0'..=b'9' | b'.' | b'-' | b'+'))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let err = |kind| ParseError { offset: start, kind };
        let digits = |l: &mut Self| {
            let s = l.pos;
            while matches!(l.peek(), Some(b'0'..=b'9')) {
                l.pos += 1;
            }
            l.pos - s
        };
        if matches!(self.peek(), Some(b'-' | b'+')) {
            self.pos += 1;
        }
        let int = digits(self);
        let mut frac = 0;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            frac = digits(self);
        }
        if int + frac == 0 {
            return Err(err(ParseErrorKind::InvalidNumber));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'-' | b'+')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| err(ParseErrorKind::InvalidNumber))?;
        if !v.is_finite() {
            return Err(err(ParseErrorKind::NonFinite));
        }
        Ok(v)
    }
}

#[derive(Default)]
struct Builder {
    paths: Vec<Path>,
    current: Vec<Command>,
    cursor: Point,
    start: Point,
    /// Second control point of the previous cubic, for `S` reflection.
    last_ctrl: Option<Point>,
}

impl Builder {
    fn flush(&mut self) {
        if !self.current.is_empty() {
            self.paths.push(Path::new(std::mem::take(&mut self.current)));
        }
    }

    fn move_to(&mut self, p: Point) {
        self.flush();
        self.current.push(Command::move_to(p));
        self.cursor = p;
        self.start = p;
        self.last_ctrl = None;
    }

    fn ensure_open(&mut self) {
        if self.current.is_empty() {
            // drawing after a closepath continues from the subpath start
            let s = self.start;
            self.current.push(Command::move_to(s));
        }
    }

    fn line_to(&mut self, p: Point) {
        self.ensure_open();
        self.current.push(Command::line(self.cursor, p));
        self.cursor = p;
        self.last_ctrl = None;
    }

    fn curve_to(&mut self, c1: Point, c2: Point, p: Point) {
        self.ensure_open();
        self.current.push(Command::curve(self.cursor, c1, c2, p));
        self.cursor = p;
        self.last_ctrl = Some(c2);
    }

    fn close(&mut self) {
        if !self.current.is_empty() && self.cursor != self.start {
            self.current.push(Command::line(self.cursor, self.start));
        }
        self.flush();
        self.cursor = self.start;
        self.last_ctrl = None;
    }
}

pub fn parse_path_data(text: &str) -> Result<Vec<Path>, ParseError> {
    let mut lx = Lexer { s: text.as_bytes(), pos: 0 };
    let mut b = Builder::default();
    let mut first = true;
    loop {
        lx.skip_separators();
        let Some(c) = lx.peek() else { break };
        let op_offset = lx.pos;
        if lx.at_number() {
            return Err(ParseError { offset: op_offset, kind: ParseErrorKind::OrphanNumber });
        }
        let op = text[op_offset..].chars().next().expect("non-empty");
        lx.pos += op.len_utf8();
        let Some(n) = arity(op) else {
            let kind = if matches!(c, b'A' | b'a' | b'T' | b't') {
                ParseErrorKind::UnsupportedOpcode(op)
            } else {
                ParseErrorKind::UnknownOpcode(op)
            };
            return Err(ParseError { offset: op_offset, kind });
        };
        if first && !matches!(op, 'M' | 'm') {
            return Err(ParseError { offset: op_offset, kind: ParseErrorKind::MissingMoveTo });
        }
        first = false;

        let mut operands = Vec::new();
        loop {
            lx.skip_separators();
            if !lx.at_number() {
                break;
            }
            operands.push(lx.number()?);
        }
        if n == 0 {
            if !operands.is_empty() {
                return Err(ParseError {
                    offset: op_offset,
                    kind: ParseErrorKind::Arity { opcode: op, arity: 0, count: operands.len() },
                });
            }
            b.close();
            continue;
        }
        if operands.is_empty() || operands.len() % n != 0 {
            return Err(ParseError {
                offset: op_offset,
                kind: ParseErrorKind::Arity { opcode: op, arity: n, count: operands.len() },
            });
        }
        let rel = op.is_ascii_lowercase();
        for (i, g) in operands.chunks(n).enumerate() {
            let base = if rel { b.cursor } else { Point::ZERO };
            let at = |k: usize| Point::new(g[2 * k], g[2 * k + 1]) + base;
            match op.to_ascii_uppercase() {
                'M' if i == 0 => b.move_to(at(0)),
                'M' | 'L' => b.line_to(at(0)),
                'H' => {
                    let x = if rel { b.cursor.x + g[0] } else { g[0] };
                    b.line_to(Point::new(x, b.cursor.y));
                }
                'V' => {
                    let y = if rel { b.cursor.y + g[0] } else { g[0] };
                    b.line_to(Point::new(b.cursor.x, y));
                }
                'C' => b.curve_to(at(0), at(1), at(2)),
                'S' => {
                    let c1 = match b.last_ctrl {
                        Some(c) => b.cursor + (b.cursor - c),
                        None => b.cursor,
                    };
                    b.curve_to(c1, at(0), at(1));
                }
                'Q' => {
                    let (c1, c2) = elevate_quadratic(b.cursor, at(0), at(1));
                    b.curve_to(c1, c2, at(1));
                }
                _ => unreachable!("arity table covers all opcodes"),
            }
        }
    }
    b.flush();
    Ok(b.paths)
}

fn fmt_num(out: &mut String, v: f64, precision: usize) {
    let mut s = format!("{v:.precision$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    out.push_str(&s);
}

fn fmt_point(out: &mut String, p: Point, precision: usize) {
    out.push(' ');
    fmt_num(out, p.x, precision);
    out.push(' ');
    fmt_num(out, p.y, precision);
}

/// Absolute `M`/`L`/`C`/`Z` path data. A contour whose last drawing command ends
/// on its start point is written with a trailing `Z`; a closing line is folded
/// into the `Z`.
pub fn serialize_path_data(paths: &[Path], precision: usize) -> String {
    let mut out = String::new();
    for path in paths {
        let Some(start) = path.start_point() else { continue };
        let last_drawing = path.commands.iter().rposition(|c| c.kind.is_drawing());
        let closed = last_drawing.is_some_and(|i| path.commands[i].end() == start);
        for (i, cmd) in path.commands.iter().enumerate() {
            let folded = closed
                && Some(i) == last_drawing
                && cmd.kind == CommandKind::LineFromTo
                && cmd.start() != start;
            if folded {
                continue;
            }
            let head = if out.is_empty() { "" } else { " " };
            match cmd.kind {
                CommandKind::MoveTo => {
                    let _ = write!(out, "{head}M");
                    fmt_point(&mut out, cmd.end(), precision);
                }
                CommandKind::LineFromTo => {
                    let _ = write!(out, "{head}L");
                    fmt_point(&mut out, cmd.end(), precision);
                }
                CommandKind::CurveFromTo => {
                    let _ = write!(out, "{head}C");
                    for p in &cmd.args[1..] {
                        fmt_point(&mut out, *p, precision);
                    }
                }
                CommandKind::Eos => {}
            }
        }
        if closed {
            out.push_str(" Z");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn quad(p0: Point, q: Point, p2: Point, t: f64) -> Point {
        let s = 1.0 - t;
        p0 * (s * s) + q * (2.0 * s * t) + p2 * (t * t)
    }

    fn cubic(p: [Point; 4], t: f64) -> Point {
        let s = 1.0 - t;
        p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t) + p[3] * (t * t * t)
    }

    #[test]
    fn simple_line() {
        let paths = parse_path_data("M 0 0 L 10 0").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(
            paths[0].commands,
            vec![Command::move_to(pt(0.0, 0.0)), Command::line(pt(0.0, 0.0), pt(10.0, 0.0))]
        );
    }

    #[test]
    fn elevation_matches_samples() {
        let cases = [
            (pt(0.0, 0.0), pt(0.0, 0.0), pt(0.0, 0.0)),
            (pt(0.0, 0.0), pt(3.0, 0.0), pt(6.0, 0.0)),
            (pt(0.0, 0.0), pt(1.0, 2.0), pt(2.0, 0.0)),
        ];
        for (p0, q, p2) in cases {
            let (c1, c2) = elevate_quadratic(p0, q, p2);
            for i in 0..100 {
                let t = i as f64 / 99.0;
                let d = quad(p0, q, p2, t).distance(cubic([p0, c1, c2, p2], t));
                assert!(d < 1e-12, "t={t} d={d}");
            }
        }
        let (c1, c2) = elevate_quadratic(pt(0.0, 0.0), pt(3.0, 0.0), pt(6.0, 0.0));
        assert_eq!((c1, c2), (pt(2.0, 0.0), pt(4.0, 0.0)));
    }

    #[test]
    fn quadratic_is_elevated() {
        let paths = parse_path_data("M 0 0 Q 1 2 2 0").unwrap();
        let c = paths[0].commands[1];
        assert_eq!(c.kind, CommandKind::CurveFromTo);
        assert!(c.args[1].distance(pt(2.0 / 3.0, 4.0 / 3.0)) < 1e-15);
        assert!(c.args[2].distance(pt(4.0 / 3.0, 4.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn close_emits_line_when_open() {
        let p = parse_path_data("M 0 0 L 1 0 Z").unwrap();
        assert_eq!(p[0].commands.last().unwrap(), &Command::line(pt(1.0, 0.0), pt(0.0, 0.0)));
        let p = parse_path_data("M 0 0 L 1 0 L 0 0 Z").unwrap();
        assert_eq!(p[0].commands.len(), 3);
    }

    #[test]
    fn relative_and_shorthand() {
        let p = parse_path_data("m1 1 h2 v3 H0 V-1 l1,1 2 2").unwrap();
        let ends: Vec<Point> = p[0].commands.iter().map(|c| c.end()).collect();
        assert_eq!(
            ends,
            vec![pt(1.0, 1.0), pt(3.0, 1.0), pt(3.0, 4.0), pt(0.0, 4.0), pt(0.0, -1.0), pt(1.0, 0.0), pt(3.0, 2.0)]
        );
        // implicit lineto after moveto
        let p = parse_path_data("M0 0 1 0 1 1").unwrap();
        assert_eq!(p[0].commands.len(), 3);
        assert_eq!(p[0].commands[2].kind, CommandKind::LineFromTo);
    }

    #[test]
    fn smooth_cubic_reflects() {
        let p = parse_path_data("M0 0 C 0 1 1 2 2 2 S 4 1 4 0").unwrap();
        let s = p[0].commands[2];
        assert_eq!(s.args[1], pt(3.0, 2.0));
        let p = parse_path_data("M0 0 L 1 1 s 1 1 2 0").unwrap();
        assert_eq!(p[0].commands[2].args[1], pt(1.0, 1.0));
    }

    #[test]
    fn compact_numbers() {
        let p = parse_path_data("M.5.5L-1-2e1").unwrap();
        assert_eq!(p[0].commands[0].end(), pt(0.5, 0.5));
        assert_eq!(p[0].commands[1].end(), pt(-1.0, -20.0));
    }

    #[test]
    fn each_moveto_starts_a_path() {
        let p = parse_path_data("M0 0 L1 0 Z M 5 5 L 6 5 z l 1 1").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[2].commands[0], Command::move_to(pt(5.0, 5.0)));
        assert_eq!(p[2].commands[1].end(), pt(6.0, 6.0));
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse_path_data("M0 0 X 1").unwrap_err();
        assert_eq!(e, ParseError { offset: 5, kind: ParseErrorKind::UnknownOpcode('X') });
        let e = parse_path_data("M0 0 A 1 1 0 0 1 2 2").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnsupportedOpcode('A'));
        let e = parse_path_data("M0 0 L 1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity { opcode: 'L', arity: 2, count: 1 });
        let e = parse_path_data("L 1 1").unwrap_err();
        assert_eq!(e, ParseError { offset: 0, kind: ParseErrorKind::MissingMoveTo });
        let e = parse_path_data("M 0 1e999").unwrap_err();
        assert_eq!(e, ParseError { offset: 4, kind: ParseErrorKind::NonFinite });
        let e = parse_path_data("M 0 0 Z 3").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
        assert!(parse_path_data("").unwrap().is_empty());
    }

    #[test]
    fn serialize_examples() {
        let paths = vec![Path::new(vec![
            Command::move_to(pt(0.0, 0.0)),
            Command::line(pt(0.0, 0.0), pt(10.0, 0.0)),
        ])];
        assert_eq!(serialize_path_data(&paths, 6), "M 0 0 L 10 0");

        let sq = parse_path_data("M0 0 L1 0 L1 1 L0 1 Z").unwrap();
        let s = serialize_path_data(&sq, 6);
        assert_eq!(s, "M 0 0 L 1 0 L 1 1 L 0 1 Z");
        assert_eq!(parse_path_data(&s).unwrap(), sq);

        let c = vec![Path::new(vec![
            Command::move_to(pt(0.0, 0.0)),
            Command::curve(pt(0.0, 0.0), pt(0.25, -0.5), pt(1.0 / 3.0, 1.0), pt(-2.0, 0.0)),
        ])];
        assert_eq!(serialize_path_data(&c, 3), "M 0 0 C 0.25 -0.5 0.333 1 -2 0");
    }
}
