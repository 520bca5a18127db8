//! Generators and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use outline_refine::corpus::{load_corpus, CorpusRecord};
use outline_refine::geometry::Segment;
use outline_refine::model::{Command, Glyph, Path};
use outline_refine::scalar::Point;
use rand::Rng;

pub fn bundled_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/bundled.jsonl")
}

pub fn bundled() -> Vec<CorpusRecord> {
    load_corpus(bundled_path()).expect("bundled corpus loads")
}

/// Bundled glyphs in EM units, keyed by glyph id.
pub fn bundled_em() -> Vec<(String, Glyph)> {
    bundled()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.glyph_id.clone(), r.glyph(i).unwrap().to_em_units().unwrap()))
        .collect()
}

pub fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

pub fn random_point(rng: &mut impl Rng, r: f64) -> Point {
    pt(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// A random joined contour of 1 to `max_cmds` lines and cubics, closed about
/// half the time.
pub fn random_path(rng: &mut impl Rng, max_cmds: usize, r: f64) -> Path {
    let start = random_point(rng, r);
    let mut cmds = vec![Command::move_to(start)];
    let n = rng.gen_range(1..=max_cmds);
    let close = n >= 2 && rng.gen_bool(0.5);
    let mut cur = start;
    for i in 0..n {
        let end = if close && i == n - 1 { start } else { random_point(rng, r) };
        let cmd = if rng.gen_bool(0.5) {
            Command::line(cur, end)
        } else {
            Command::curve(cur, random_point(rng, r), random_point(rng, r), end)
        };
        cmds.push(cmd);
        cur = end;
    }
    Path::new(cmds)
}

pub fn random_glyph(rng: &mut impl Rng) -> Glyph {
    let n = rng.gen_range(1..=4);
    Glyph::new((0..n).map(|_| random_path(rng, 10, 1000.0)).collect(), 1000.0)
}

/// Curve–curve junction whose travel tangents are at least 0.05 long and not
/// close to opposed, so every repair is defined.
pub fn random_curve_junction(rng: &mut impl Rng) -> (Segment, Segment) {
    loop {
        let j = random_point(rng, 1.0);
        let prev = Segment::Cubic([random_point(rng, 1.0), random_point(rng, 1.0), random_point(rng, 1.0), j]);
        let next = Segment::Cubic([j, random_point(rng, 1.0), random_point(rng, 1.0), random_point(rng, 1.0)]);
        let (a, b) = (prev.end_tangent(), next.start_tangent());
        if a.norm() > 0.05 && b.norm() > 0.05 && a.dot(b) / (a.norm() * b.norm()) > -0.95 {
            return (prev, next);
        }
    }
}

pub fn max_coord_diff(a: &Segment, b: &Segment) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p.x - q.x).abs().max((p.y - q.y).abs()))
        .fold(0.0, f64::max)
}

pub fn paths_close(a: &[Path], b: &[Path], tol: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("path count {} vs {}", a.len(), b.len()));
    }
    for (pi, (p, q)) in a.iter().zip(b).enumerate() {
        if p.commands.len() != q.commands.len() {
            return Err(format!("path {pi}: command count {} vs {}", p.commands.len(), q.commands.len()));
        }
        for (ci, (c, d)) in p.commands.iter().zip(&q.commands).enumerate() {
            if c.kind != d.kind {
                return Err(format!("path {pi} command {ci}: {:?} vs {:?}", c.kind, d.kind));
            }
            for (u, v) in c.args.iter().zip(&d.args) {
                if (u.x - v.x).abs() > tol || (u.y - v.y).abs() > tol {
                    return Err(format!("path {pi} command {ci}: {u:?} vs {v:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Bundled glyphs after full normalization (scaled and centered).
pub fn bundled_normalized() -> Vec<(String, Glyph)> {
    bundled()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let g = outline_refine::model::normalize_glyph(&r.glyph(i).unwrap()).unwrap();
            (r.glyph_id.clone(), g)
        })
        .collect()
}
