//! Randomized gradient verification of the differentiable refinement
//! operators and every loss term.
//!
//! Each case draws a random smooth point (resampling near argmax ties, cusps,
//! degenerate tangents and the kink of the absolute error) and compares the
//! tape gradient against central finite differences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gradcheck::{gradcheck, gradcheck_with_reference};
use super::ste::{diff_refine_junction, diff_snap_line, flatten, hard_argmax, softmax, GeometryGradient, StePolicy};
use super::tape::{Tape, Var};
use super::AdError;
use crate::continuity::{AlignLabel, ContinuityLabel};
use crate::geometry::Segment;
use crate::losses::{
    consistency_loss, kl_gaussian, loss_alignment, loss_args, loss_aux_render, loss_cmd, loss_continuity,
    loss_visibility, total_loss, ArgLoss, CostMatrix, LossComponents, LossWeights,
};
use crate::model::CommandKind;
use crate::refine::{refine_continuity_junction, snap_alignment, RefineError};
use crate::scalar::{Point, Scalar, Vec2};

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;

/// Minimum gap between the two largest logits of a sampled case.
const LOGIT_GAP: f64 = 0.05;
const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    CurveCurveJunction,
    LineCurveJunction,
    CurveLineJunction,
    SnapLine,
    /// Junction repair followed by the auxiliary rendering loss.
    RefineThenRender,
    LossContinuity,
    LossAlignment,
    LossCommand,
    LossVisibility,
    LossArgs,
    LossConsistency,
    LossAuxRender,
    KlGaussian,
    TotalLoss,
}

impl CaseKind {
    pub const ALL: [CaseKind; 14] = [
        CaseKind::CurveCurveJunction,
        CaseKind::LineCurveJunction,
        CaseKind::CurveLineJunction,
        CaseKind::SnapLine,
        CaseKind::RefineThenRender,
        CaseKind::LossContinuity,
        CaseKind::LossAlignment,
        CaseKind::LossCommand,
        CaseKind::LossVisibility,
        CaseKind::LossArgs,
        CaseKind::LossConsistency,
        CaseKind::LossAuxRender,
        CaseKind::KlGaussian,
        CaseKind::TotalLoss,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseResult {
    pub kind: CaseKind,
    pub passed: bool,
    pub max_rel_error: f64,
    /// Set when the case could not be evaluated at all.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub cases: Vec<CaseResult>,
    /// Draws rejected for being too close to a tie or non-smooth point.
    pub resampled: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.passed).count()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.cases.is_empty() {
            return 1.0;
        }
        self.passed() as f64 / self.cases.len() as f64
    }

    /// `(kind, passed, total)` for every kind that occurred.
    pub fn by_kind(&self) -> Vec<(CaseKind, usize, usize)> {
        CaseKind::ALL
            .iter()
            .filter_map(|&k| {
                let total = self.cases.iter().filter(|c| c.kind == k).count();
                let ok = self.cases.iter().filter(|c| c.kind == k && c.passed).count();
                (total > 0).then_some((k, ok, total))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    CurveCurve,
    LineCurve,
    CurveLine,
}

impl Shape {
    fn inputs(self) -> usize {
        match self {
            Shape::CurveCurve => 14,
            Shape::LineCurve | Shape::CurveLine => 10,
        }
    }

    fn build<S: Scalar>(self, x: &[S]) -> (Segment<S>, Segment<S>) {
        let p = |i: usize| Vec2::new(x[2 * i], x[2 * i + 1]);
        match self {
            Shape::CurveCurve => (Segment::Cubic([p(0), p(1), p(2), p(3)]), Segment::Cubic([p(3), p(4), p(5), p(6)])),
            Shape::LineCurve => (Segment::Line(p(0), p(1)), Segment::Cubic([p(1), p(2), p(3), p(4)])),
            Shape::CurveLine => (Segment::Cubic([p(0), p(1), p(2), p(3)]), Segment::Line(p(3), p(4))),
        }
    }
}

fn project<S: Scalar>(v: &[S], w: &[f64]) -> S {
    let mut acc = v[0] * w[0];
    for i in 1..v.len() {
        acc = acc + v[i] * w[i];
    }
    acc
}

fn softmax_s<S: Scalar>(l: &[S]) -> Vec<S> {
    let m = l.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<S> = l.iter().map(|v| (*v - m).exp()).collect();
    let mut z = e[0];
    for v in &e[1..] {
        z = z + *v;
    }
    e.into_iter().map(|v| v / z).collect()
}

fn sigmoid<S: Scalar>(z: S) -> S {
    z.lift(1.0) / ((-z).exp() + 1.0)
}

fn junction_branches(shape: Shape, g: &[f64]) -> Result<Vec<Vec<f64>>, AdError> {
    let (p, n) = shape.build(g);
    ContinuityLabel::ALL
        .into_iter()
        .map(|label| match refine_continuity_junction(&p, &n, label) {
            Ok((a, b)) => Ok(flatten(&[a, b])),
            Err(RefineError::Geometry(e)) => Err(RefineError::Geometry(e).into()),
            Err(_) => Ok(flatten(&[p, n])),
        })
        .collect()
}

fn snap_branches(g: &[f64]) -> Result<Vec<Vec<f64>>, AdError> {
    let line = Segment::Line(Point::new(g[0], g[1]), Point::new(g[2], g[3]));
    AlignLabel::ALL
        .into_iter()
        .map(|label| Ok(flatten(&[snap_alignment(&line, label)?])))
        .collect()
}

/// Value the geometry gradient of a straight-through output differentiates:
/// the chosen branch, or the soft mixture under [`GeometryGradient::Soft`].
fn geometry_reference(branches: &[Vec<f64>], logits: &[f64], w: &[f64], policy: &StePolicy) -> Result<f64, AdError> {
    match policy.geometry_gradient {
        GeometryGradient::Selected => Ok(project(&branches[hard_argmax(logits)?], w)),
        GeometryGradient::Soft => Ok(mixture(branches, logits, w, policy)),
    }
}

fn mixture(branches: &[Vec<f64>], logits: &[f64], w: &[f64], policy: &StePolicy) -> f64 {
    let s = softmax(logits, policy.temperature);
    branches.iter().zip(&s).map(|(b, sc)| sc * project(b, w)).sum()
}

type Forward = for<'t> fn(&'t Tape, &[Var<'t>], &[Var<'t>; 3], &StePolicy) -> Result<Vec<Var<'t>>, AdError>;
type Branches = fn(&[f64]) -> Result<Vec<Vec<f64>>, AdError>;

/// Checks a straight-through operator twice: geometry gradients with the
/// logits held fixed, then logit gradients against the softmax mixture.
fn check_ste(
    geom: &[f64],
    logits: [f64; 3],
    w: &[f64],
    policy: &StePolicy,
    forward: Forward,
    branches: Branches,
) -> Result<(bool, f64), AdError> {
    let geo = gradcheck_with_reference(
        |t, x| {
            let l = logits.map(|v| t.constant(v));
            Ok(project(&forward(t, x, &l, policy)?, w))
        },
        |x| geometry_reference(&branches(x)?, &logits, w, policy),
        geom,
        STEP,
        TOLERANCE,
    )?;
    let at_geom = branches(geom)?;
    let lg = gradcheck_with_reference(
        |t, l| {
            let g: Vec<Var> = geom.iter().map(|v| t.constant(*v)).collect();
            Ok(project(&forward(t, &g, &[l[0], l[1], l[2]], policy)?, w))
        },
        |l| Ok(mixture(&at_geom, l, w, policy)),
        &logits,
        STEP,
        TOLERANCE,
    )?;
    Ok((geo.passed && lg.passed, geo.max_rel_error.max(lg.max_rel_error)))
}

fn forward_cc<'t>(_: &'t Tape, g: &[Var<'t>], l: &[Var<'t>; 3], p: &StePolicy) -> Result<Vec<Var<'t>>, AdError> {
    let (a, b) = Shape::CurveCurve.build(g);
    let (a, b) = diff_refine_junction(&a, &b, l, p)?;
    Ok(flatten(&[a, b]))
}

fn forward_lc<'t>(_: &'t Tape, g: &[Var<'t>], l: &[Var<'t>; 3], p: &StePolicy) -> Result<Vec<Var<'t>>, AdError> {
    let (a, b) = Shape::LineCurve.build(g);
    let (a, b) = diff_refine_junction(&a, &b, l, p)?;
    Ok(flatten(&[a, b]))
}

fn forward_cl<'t>(_: &'t Tape, g: &[Var<'t>], l: &[Var<'t>; 3], p: &StePolicy) -> Result<Vec<Var<'t>>, AdError> {
    let (a, b) = Shape::CurveLine.build(g);
    let (a, b) = diff_refine_junction(&a, &b, l, p)?;
    Ok(flatten(&[a, b]))
}

fn forward_snap<'t>(_: &'t Tape, g: &[Var<'t>], l: &[Var<'t>; 3], p: &StePolicy) -> Result<Vec<Var<'t>>, AdError> {
    let line = Segment::Line(Vec2::new(g[0], g[1]), Vec2::new(g[2], g[3]));
    Ok(flatten(&[diff_snap_line(&line, l, p)?]))
}

struct Sampler {
    rng: ChaCha8Rng,
    resampled: usize,
}

impl Sampler {
    fn coords(&mut self, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-r..r)).collect()
    }

    fn logits(&mut self) -> [f64; 3] {
        loop {
            let l: [f64; 3] = [0; 3].map(|_| self.rng.gen_range(-2.0..2.0));
            let mut s = l;
            s.sort_by(|a, b| b.total_cmp(a));
            if s[0] - s[1] > LOGIT_GAP {
                return l;
            }
            self.resampled += 1;
        }
    }

    /// Junction geometry with well-defined, non-opposed tangents.
    fn junction(&mut self, shape: Shape) -> Vec<f64> {
        loop {
            let g = self.coords(shape.inputs(), 1.0);
            let (p, n) = shape.build(&g);
            let (um, up) = (p.end_tangent(), n.start_tangent());
            let (a, b) = (um.norm(), up.norm());
            if a > 0.1 && b > 0.1 && um.dot(up) / (a * b) > -0.9 {
                return g;
            }
            self.resampled += 1;
        }
    }

    fn labels<T: Copy>(&mut self, all: &[T], n: usize) -> Vec<T> {
        (0..n).map(|_| *all.choose(&mut self.rng).unwrap()).collect()
    }
}

fn ste_case(s: &mut Sampler, kind: CaseKind, policy: &StePolicy) -> Result<(bool, f64), AdError> {
    let (shape, forward, branches): (Option<Shape>, Forward, Branches) = match kind {
        CaseKind::CurveCurveJunction => (Some(Shape::CurveCurve), forward_cc, |g| junction_branches(Shape::CurveCurve, g)),
        CaseKind::LineCurveJunction => (Some(Shape::LineCurve), forward_lc, |g| junction_branches(Shape::LineCurve, g)),
        CaseKind::CurveLineJunction => (Some(Shape::CurveLine), forward_cl, |g| junction_branches(Shape::CurveLine, g)),
        _ => (None, forward_snap, snap_branches),
    };
    let geom = match shape {
        Some(sh) => s.junction(sh),
        None => s.coords(4, 1.0),
    };
    let logits = s.logits();
    let dim = branches(&geom)?[0].len();
    let w = s.coords(dim, 1.0);
    check_ste(&geom, logits, &w, policy, forward, branches)
}

fn refine_then_render(s: &mut Sampler) -> Result<(bool, f64), AdError> {
    // The composite is only a finite-difference target when geometry
    // gradients follow the selected branch.
    let policy = StePolicy { geometry_gradient: GeometryGradient::Selected, ..StePolicy::default() };
    let geom = s.junction(Shape::CurveCurve);
    let logits = s.logits();
    let t1 = s.coords(8, 1.0);
    let t2 = s.coords(8, 1.0);
    let cubic = |v: &[f64]| Segment::Cubic([0, 1, 2, 3].map(|i| Point::new(v[2 * i], v[2 * i + 1])));
    let (g1, g2) = (cubic(&t1), cubic(&t2));
    let r = gradcheck(
        |t, x| {
            let l = logits.map(|v| t.constant(v));
            let (a, b) = Shape::CurveCurve.build(x);
            let (a, b) = diff_refine_junction(&a, &b, &l, &policy)?;
            Ok(loss_aux_render(&a, &g1, 8).map_err(other)? + loss_aux_render(&b, &g2, 8).map_err(other)?)
        },
        &geom,
        STEP,
        TOLERANCE,
    )?;
    Ok((r.passed, r.max_rel_error))
}

fn other(e: impl ToString) -> AdError {
    AdError::Other(e.to_string())
}

fn rows3<S: Scalar>(x: &[S]) -> Vec<[S; 3]> {
    x.chunks(3).map(|c| {
        let p = softmax_s(c);
        [p[0], p[1], p[2]]
    }).collect()
}

fn loss_case(s: &mut Sampler, kind: CaseKind) -> Result<(bool, f64), AdError> {
    let report = match kind {
        CaseKind::LossContinuity => {
            let x = s.coords(9, 2.0);
            let labels = s.labels(&ContinuityLabel::ALL, 3);
            let w = CostMatrix::default();
            gradcheck(|_, v| Ok(loss_continuity(&rows3(v), &labels, &w).map_err(other)?.value), &x, STEP, TOLERANCE)?
        }
        CaseKind::LossAlignment => {
            let x = s.coords(9, 2.0);
            let labels = s.labels(&AlignLabel::ALL, 3);
            gradcheck(|_, v| Ok(loss_alignment(&rows3(v), &labels).map_err(other)?.value), &x, STEP, TOLERANCE)?
        }
        CaseKind::LossCommand => {
            let x = s.coords(16, 2.0);
            let kinds = s.labels(&CommandKind::ALL, 4);
            gradcheck(
                |_, v| {
                    let probs: Vec<[Var; 4]> = v
                        .chunks(4)
                        .map(|c| {
                            let p = softmax_s(c);
                            [p[0], p[1], p[2], p[3]]
                        })
                        .collect();
                    Ok(loss_cmd(&probs, &kinds).map_err(other)?.value)
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::LossVisibility => {
            let x = s.coords(4, 3.0);
            let vis: Vec<bool> = (0..4).map(|_| s.rng.gen()).collect();
            gradcheck(
                |_, v| {
                    let p: Vec<Var> = v.iter().map(|z| sigmoid(*z)).collect();
                    Ok(loss_visibility(&p, &vis).map_err(other)?.value)
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::LossArgs => {
            let kinds = s.labels(&CommandKind::ALL, 3);
            let masks: Vec<_> = kinds.iter().map(|k| k.mask()).collect();
            let mode = if s.rng.gen() { ArgLoss::Mae } else { ArgLoss::Mse };
            let gt: Vec<[Point; 4]> = (0..3)
                .map(|_| [0; 4].map(|_| Point::new(s.rng.gen_range(-1.0..1.0), s.rng.gen_range(-1.0..1.0))))
                .collect();
            let x = loop {
                let x = s.coords(24, 1.0);
                let kink = gt.iter().flatten().zip(x.chunks(2)).any(|(g, p)| {
                    (p[0] - g.x).abs() < 1e-3 || (p[1] - g.y).abs() < 1e-3
                });
                if mode == ArgLoss::Mse || !kink {
                    break x;
                }
                s.resampled += 1;
            };
            gradcheck(
                |_, v| {
                    let pred: Vec<[Vec2<Var>; 4]> = v
                        .chunks(8)
                        .map(|c| [0, 1, 2, 3].map(|i| Vec2::new(c[2 * i], c[2 * i + 1])))
                        .collect();
                    loss_args(&pred, &gt, &masks, mode).map_err(other)
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::LossConsistency => {
            let x = s.coords(16, 1.0);
            gradcheck(
                |_, v| {
                    let pairs: Vec<_> = v
                        .chunks(4)
                        .map(|c| (Vec2::new(c[0], c[1]), Vec2::new(c[2], c[3])))
                        .collect();
                    Ok(consistency_loss(&pairs, v[0]))
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::LossAuxRender => {
            let x = s.coords(8, 1.0);
            let t = s.coords(8, 1.0);
            let gt = Segment::Cubic([0, 1, 2, 3].map(|i| Point::new(t[2 * i], t[2 * i + 1])));
            gradcheck(
                |_, v| {
                    let pred = Segment::Cubic([0, 1, 2, 3].map(|i| Vec2::new(v[2 * i], v[2 * i + 1])));
                    loss_aux_render(&pred, &gt, 16).map_err(other)
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::KlGaussian => {
            let x = s.coords(8, 1.0);
            gradcheck(
                |_, v| {
                    let sigma: Vec<Var> = v[4..].iter().map(|l| l.exp()).collect();
                    kl_gaussian(&v[..4], &sigma).map_err(other)
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        CaseKind::TotalLoss => {
            let x = s.coords(18, 1.0);
            let cl = s.labels(&ContinuityLabel::ALL, 1);
            let al = s.labels(&AlignLabel::ALL, 1);
            let step = s.rng.gen_range(0..20_000);
            let weights = LossWeights::default();
            gradcheck(
                |_, v| {
                    let cont = loss_continuity(&rows3(&v[0..3]), &cl, &CostMatrix::default()).map_err(other)?.value;
                    let align = loss_alignment(&rows3(&v[3..6]), &al).map_err(other)?.value;
                    let sigma: Vec<Var> = v[8..10].iter().map(|l| l.exp()).collect();
                    let kl = kl_gaussian(&v[6..8], &sigma).map_err(other)?;
                    let pairs: Vec<_> = v[10..18]
                        .chunks(4)
                        .map(|c| (Vec2::new(c[0], c[1]), Vec2::new(c[2], c[3])))
                        .collect();
                    let rec = consistency_loss(&pairs, v[0]);
                    Ok(total_loss(&LossComponents { rec, kl, cont, align }, &weights, step))
                },
                &x,
                STEP,
                TOLERANCE,
            )?
        }
        _ => unreachable!("not a loss case"),
    };
    Ok((report.passed, report.max_rel_error))
}

/// Runs `count` cases cycling through every [`CaseKind`], deterministically
/// for a given `seed`.
pub fn run_gradient_suite(seed: u64, count: usize, policy: &StePolicy) -> SuiteReport {
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), resampled: 0 };
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let kind = CaseKind::ALL[i % CaseKind::ALL.len()];
        let mut attempt = 0;
        let result = loop {
            let r = match kind {
                CaseKind::CurveCurveJunction
                | CaseKind::LineCurveJunction
                | CaseKind::CurveLineJunction
                | CaseKind::SnapLine => ste_case(&mut s, kind, policy),
                CaseKind::RefineThenRender => refine_then_render(&mut s),
                _ => loss_case(&mut s, kind),
            };
            // A draw whose finite-difference stencil crosses into an
            // undefined region is resampled like any other boundary point.
            match r {
                Err(AdError::AmbiguousSelection) | Err(AdError::Refine(_)) if attempt < MAX_RESAMPLES => {
                    attempt += 1;
                    s.resampled += 1;
                }
                other => break other,
            }
        };
        cases.push(match result {
            Ok((passed, max_rel_error)) => CaseResult { kind, passed, max_rel_error, error: None },
            Err(e) => CaseResult { kind, passed: false, max_rel_error: f64::NAN, error: Some(e.to_string()) },
        });
    }
    SuiteReport { seed, cases, resampled: s.resampled }
}
