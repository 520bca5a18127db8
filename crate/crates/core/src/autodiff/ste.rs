//! Straight-through selection between discrete refinement branches.
//!
//! Forward: the branch picked by `argmax(logits)`, exactly. Backward: logits
//! receive the gradient of the softmax mixture `Σ_c softmax(l/τ)_c · b_c`.
//! Branch inputs receive gradient only through the selected branch by default,
//! or through the softmax weights under [`GeometryGradient::Soft`].

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::tape::{Op, Var};
use super::AdError;
use crate::continuity::{AlignLabel, ContinuityLabel};
use crate::geometry::Segment;
use crate::refine::{refine_continuity_junction, snap_alignment, RefineError};
use crate::scalar::{Scalar, Vec2};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryGradient {
    /// Geometry gradients flow through the argmax branch only.
    #[default]
    Selected,
    /// Geometry gradients are weighted by the softmax probabilities.
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StePolicy {
    pub temperature: f64,
    pub geometry_gradient: GeometryGradient,
}

impl Default for StePolicy {
    fn default() -> Self {
        StePolicy { temperature: 1.0, geometry_gradient: GeometryGradient::Selected }
    }
}

/// Index of the largest logit; an exact tie for the maximum is an error.
pub fn hard_argmax(logits: &[f64]) -> Result<usize, AdError> {
    let mut best = 0;
    for i in 1..logits.len() {
        if logits[i] > logits[best] {
            best = i;
        }
    }
    let ties = logits.iter().filter(|&&l| l == logits[best]).count();
    if ties > 1 {
        return Err(AdError::AmbiguousSelection);
    }
    Ok(best)
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| ((l - m) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn ste_select<'t>(
    logits: &[Var<'t>],
    branches: &[Vec<Var<'t>>],
    policy: &StePolicy,
) -> Result<Vec<Var<'t>>, AdError> {
    let k = logits.len();
    if k < 2 {
        return Err(AdError::TooFewBranches(k));
    }
    if branches.len() != k {
        return Err(AdError::BranchShape);
    }
    let dim = branches[0].len();
    if branches.iter().any(|b| b.len() != dim) {
        return Err(AdError::BranchShape);
    }
    let lv: Vec<f64> = logits.iter().map(|l| l.value()).collect();
    let chosen = hard_argmax(&lv)?;
    let s = softmax(&lv, policy.temperature);
    let tape = logits[0].tape();

    let mut out = Vec::with_capacity(dim);
    #[allow(clippy::needless_range_loop)]
    for d in 0..dim {
        let mix: f64 = (0..k).map(|c| s[c] * branches[c][d].value()).sum();
        let mut partials: SmallVec<[(u32, f64); 2]> = SmallVec::new();
        for j in 0..k {
            let g = s[j] * (branches[j][d].value() - mix) / policy.temperature;
            partials.push((logits[j].id(), g));
        }
        match policy.geometry_gradient {
            GeometryGradient::Selected => partials.push((branches[chosen][d].id(), 1.0)),
            GeometryGradient::Soft => {
                for c in 0..k {
                    partials.push((branches[c][d].id(), s[c]));
                }
            }
        }
        out.push(tape.push(Op::Select, branches[chosen][d].value(), partials));
    }
    Ok(out)
}

pub(crate) fn flatten<S: Scalar>(segs: &[Segment<S>]) -> Vec<S> {
    segs.iter()
        .flat_map(|s| s.points())
        .flat_map(|p| [p.x, p.y])
        .collect()
}

fn rebuild<S: Scalar>(shape: &[Segment<S>], flat: &[S]) -> Vec<Segment<S>> {
    let mut it = flat.chunks(2).map(|c| Vec2::new(c[0], c[1]));
    shape
        .iter()
        .map(|s| match s {
            Segment::Line(..) => Segment::Line(it.next().unwrap(), it.next().unwrap()),
            Segment::Cubic(_) => Segment::Cubic([(); 4].map(|_| it.next().unwrap())),
        })
        .collect()
}

/// Continuity repair with branches `{identity, G1, C1}` selected by `logits`.
///
/// A branch that cannot be evaluated (for example the G1 branch at a cusp) is
/// replaced by the identity when it is not the selected one.
pub fn diff_refine_junction<'t>(
    prev: &Segment<Var<'t>>,
    next: &Segment<Var<'t>>,
    logits: &[Var<'t>; 3],
    policy: &StePolicy,
) -> Result<(Segment<Var<'t>>, Segment<Var<'t>>), AdError> {
    let lv: Vec<f64> = logits.iter().map(|l| l.value()).collect();
    let chosen = hard_argmax(&lv)?;
    let identity = [*prev, *next];
    let mut branches = Vec::with_capacity(3);
    for (c, label) in ContinuityLabel::ALL.into_iter().enumerate() {
        let pair = match refine_continuity_junction(prev, next, label) {
            Ok((p, n)) => [p, n],
            Err(e) if c == chosen => return Err(e.into()),
            Err(RefineError::Geometry(e)) => return Err(RefineError::Geometry(e).into()),
            Err(_) => identity,
        };
        branches.push(flatten(&pair));
    }
    let out = ste_select(logits, &branches, policy)?;
    let segs = rebuild(&identity, &out);
    Ok((segs[0], segs[1]))
}

/// Snapping with branches `{H, V, None}` selected by `logits`.
pub fn diff_snap_line<'t>(
    line: &Segment<Var<'t>>,
    logits: &[Var<'t>; 3],
    policy: &StePolicy,
) -> Result<Segment<Var<'t>>, AdError> {
    let branches = AlignLabel::ALL
        .into_iter()
        .map(|label| snap_alignment(line, label).map(|s| flatten(&[s])))
        .collect::<Result<Vec<_>, RefineError>>()?;
    let out = ste_select(logits, &branches, policy)?;
    Ok(rebuild(&[*line], &out)[0])
}
