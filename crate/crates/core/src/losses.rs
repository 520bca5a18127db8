//! Training-loss terms as pure functions over predictions and targets.
//!
//! Every function is generic over [`Scalar`]: with `f64` it is a reference
//! evaluation, with [`crate::autodiff::Var`] it is differentiable. Reductions
//! run left to right.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuity::{AlignLabel, ContinuityLabel};
use crate::geometry::{sample_segment, GeometryError, Segment};
use crate::model::{ArgMask, CommandKind, Path};
use crate::scalar::{Point, Scalar, Vec2};

/// Floor applied to probabilities inside every logarithm.
pub const EPS_LOG: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("no terms to average")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("probability vector {index} sums to {sum}, expected 1")]
    NotNormalized { index: usize, sum: f64 },
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("invalid cost matrix: {0}")]
    CostMatrix(&'static str),
    #[error("invalid loss weights: {0}")]
    Weights(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A loss value with the number of logarithm arguments that hit [`EPS_LOG`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOutput<S> {
    pub value: S,
    pub clamped: usize,
}

fn clamped_ln<S: Scalar>(p: S, clamped: &mut usize) -> S {
    if p.value() < EPS_LOG {
        *clamped += 1;
        p.lift(EPS_LOG).ln()
    } else {
        p.ln()
    }
}

fn check_len(a: usize, b: usize) -> Result<(), LossError> {
    match (a, b) {
        (0, 0) => Err(LossError::Empty),
        (a, b) if a != b => Err(LossError::LengthMismatch(a, b)),
        _ => Ok(()),
    }
}

fn check_normalized<S: Scalar, const K: usize>(probs: &[[S; K]]) -> Result<(), LossError> {
    for (index, p) in probs.iter().enumerate() {
        let sum: f64 = p.iter().map(|v| v.value()).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(LossError::NotNormalized { index, sum });
        }
    }
    Ok(())
}

/// 3×3 weights for the continuity cross-entropy, rows indexed by true label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostMatrixRepr", into = "CostMatrixRepr")]
pub struct CostMatrix {
    rows: [[f64; 3]; 3],
    literal: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostMatrixRepr {
    rows: [[f64; 3]; 3],
    #[serde(default)]
    literal: bool,
}

impl TryFrom<CostMatrixRepr> for CostMatrix {
    type Error = LossError;
    fn try_from(r: CostMatrixRepr) -> Result<Self, LossError> {
        if r.literal {
            CostMatrix::literal(r.rows)
        } else {
            CostMatrix::new(r.rows)
        }
    }
}

impl From<CostMatrix> for CostMatrixRepr {
    fn from(c: CostMatrix) -> Self {
        CostMatrixRepr { rows: c.rows, literal: c.literal }
    }
}

impl Default for CostMatrix {
    fn default() -> Self {
        CostMatrix {
            rows: [[0.90, 0.08, 0.02], [0.05, 0.90, 0.05], [0.02, 0.08, 0.90]],
            literal: false,
        }
    }
}

impl CostMatrix {
    /// Rows as soft target distributions: each row sums to 1 and the
    /// C0↔C1 entries carry the least mass.
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, LossError> {
        Self::check_nonnegative(&rows)?;
        if rows.iter().any(|r| (r.iter().sum::<f64>() - 1.0).abs() > 1e-9) {
            return Err(LossError::CostMatrix("rows must sum to 1"));
        }
        let far = rows[0][2].max(rows[2][0]);
        let near = [rows[0][1], rows[1][0], rows[1][2], rows[2][1]];
        if near.iter().any(|&n| far > n) {
            return Err(LossError::CostMatrix("C0<->C1 entries must not exceed adjacent-class entries"));
        }
        Ok(CostMatrix { rows, literal: false })
    }

    /// Any nonnegative matrix, used verbatim in `-Σ W[y][c] log p(c)`.
    pub fn literal(rows: [[f64; 3]; 3]) -> Result<Self, LossError> {
        Self::check_nonnegative(&rows)?;
        Ok(CostMatrix { rows, literal: true })
    }

    pub fn identity() -> Self {
        CostMatrix { rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], literal: false }
    }

    fn check_nonnegative(rows: &[[f64; 3]; 3]) -> Result<(), LossError> {
        if rows.iter().flatten().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(LossError::CostMatrix("entries must be nonnegative"));
        }
        Ok(())
    }

    pub fn row(&self, label: ContinuityLabel) -> [f64; 3] {
        self.rows[label as usize]
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.rows
    }

    pub fn is_literal(&self) -> bool {
        self.literal
    }
}

/// Entropy `-Σ w log w` of a cost-matrix row.
pub fn row_entropy(row: [f64; 3]) -> f64 {
    row.iter().filter(|&&w| w > 0.0).map(|w| -w * w.ln()).sum()
}

/// `-(1/N) Σ_i Σ_c W[y_i][c] log p_i(c)`.
pub fn loss_continuity<S: Scalar>(
    probs: &[[S; 3]],
    labels: &[ContinuityLabel],
    w: &CostMatrix,
) -> Result<LossOutput<S>, LossError> {
    check_len(probs.len(), labels.len())?;
    check_normalized(probs)?;
    let mut clamped = 0;
    let mut acc = probs[0][0].lift(0.0);
    for (p, y) in probs.iter().zip(labels) {
        for (c, wc) in w.row(*y).into_iter().enumerate() {
            if wc != 0.0 {
                acc = acc - clamped_ln(p[c], &mut clamped) * wc;
            }
        }
    }
    Ok(LossOutput { value: acc / probs.len() as f64, clamped })
}

/// Mean cross-entropy with hard alignment targets.
pub fn loss_alignment<S: Scalar>(probs: &[[S; 3]], labels: &[AlignLabel]) -> Result<LossOutput<S>, LossError> {
    check_len(probs.len(), labels.len())?;
    check_normalized(probs)?;
    let mut clamped = 0;
    let mut acc = probs[0][0].lift(0.0);
    for (p, y) in probs.iter().zip(labels) {
        acc = acc - clamped_ln(p[*y as usize], &mut clamped);
    }
    Ok(LossOutput { value: acc / probs.len() as f64, clamped })
}

/// Mean squared distance between duplicated junction coordinates, given as
/// `(end of command k-1, start of command k)` pairs. Zero when there are none.
pub fn consistency_loss<S: Scalar>(pairs: &[(Vec2<S>, Vec2<S>)], zero: S) -> S {
    if pairs.is_empty() {
        return zero.lift(0.0);
    }
    let mut acc = zero.lift(0.0);
    for (end, start) in pairs {
        acc = acc + (*start - *end).norm_squared();
    }
    acc / pairs.len() as f64
}

/// Consistency loss of a path: every drawing command's `p1` against the `p4`
/// of the command before it (a `MoveTo` included).
pub fn loss_consistency(path: &Path) -> f64 {
    let pairs: Vec<(Point, Point)> = path
        .commands
        .windows(2)
        .filter(|w| w[1].kind.is_drawing() && w[0].kind != CommandKind::Eos)
        .map(|w| (w[0].end(), w[1].start()))
        .collect();
    consistency_loss(&pairs, 0.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgLoss {
    /// Mean absolute error.
    #[default]
    Mae,
    /// Mean squared error.
    Mse,
}

/// Masked argument regression over padded command slots.
pub fn loss_args<S: Scalar>(
    pred: &[[Vec2<S>; 4]],
    gt: &[[Point; 4]],
    masks: &[ArgMask],
    kind: ArgLoss,
) -> Result<S, LossError> {
    if pred.len() != gt.len() || pred.len() != masks.len() {
        return Err(LossError::LengthMismatch(pred.len(), gt.len()));
    }
    let Some(first) = pred.first() else { return Err(LossError::Empty) };
    let mut acc = first[0].x.lift(0.0);
    let mut n = 0usize;
    for ((p, g), m) in pred.iter().zip(gt).zip(masks) {
        for k in 0..4 {
            for (axis, (pv, gv)) in [(p[k].x, g[k].x), (p[k].y, g[k].y)].into_iter().enumerate() {
                if !m.0[k][axis] {
                    continue;
                }
                let d = pv - gv;
                acc = acc
                    + match kind {
                        ArgLoss::Mae => d.abs(),
                        ArgLoss::Mse => d * d,
                    };
                n += 1;
            }
        }
    }
    Ok(if n == 0 { acc } else { acc / n as f64 })
}

/// Mean cross-entropy over command kinds (probabilities ordered as
/// [`CommandKind::ALL`]).
pub fn loss_cmd<S: Scalar>(pred: &[[S; 4]], gt: &[CommandKind]) -> Result<LossOutput<S>, LossError> {
    check_len(pred.len(), gt.len())?;
    check_normalized(pred)?;
    let mut clamped = 0;
    let mut acc = pred[0][0].lift(0.0);
    for (p, k) in pred.iter().zip(gt) {
        acc = acc - clamped_ln(p[k.index()], &mut clamped);
    }
    Ok(LossOutput { value: acc / pred.len() as f64, clamped })
}

/// Mean binary cross-entropy of path visibility.
pub fn loss_visibility<S: Scalar>(pred: &[S], gt: &[bool]) -> Result<LossOutput<S>, LossError> {
    check_len(pred.len(), gt.len())?;
    let mut clamped = 0;
    let mut acc = pred[0].lift(0.0);
    for (p, v) in pred.iter().zip(gt) {
        let q = if *v { *p } else { -*p + 1.0 };
        acc = acc - clamped_ln(q, &mut clamped);
    }
    Ok(LossOutput { value: acc / pred.len() as f64, clamped })
}

/// Mean squared distance between `n` parameter-uniform samples of both segments.
pub fn loss_aux_render<S: Scalar>(pred: &Segment<S>, gt: &Segment, n: usize) -> Result<S, LossError> {
    let ps = sample_segment(pred, n)?;
    let gs = sample_segment(gt, n)?;
    let zero = ps[0].x.lift(0.0);
    let mut acc = zero;
    for (p, g) in ps.iter().zip(&gs) {
        let d = Vec2::new(p.x - g.x, p.y - g.y);
        acc = acc + d.norm_squared();
    }
    Ok(acc / n as f64)
}

/// KL divergence of `N(mu, diag(sigma²))` from the standard normal.
pub fn kl_gaussian<S: Scalar>(mu: &[S], sigma: &[S]) -> Result<S, LossError> {
    check_len(mu.len(), sigma.len())?;
    let mut acc = mu[0].lift(0.0);
    for (m, s) in mu.iter().zip(sigma) {
        if s.value().is_nan() || s.value() <= 0.0 {
            return Err(LossError::NonPositiveSigma(s.value()));
        }
        acc = acc + (*m * *m + *s * *s - 1.0 - s.ln() * 2.0) * 0.5;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Final KL weight reached at the end of the ramp.
    pub kl_end: f64,
    /// Steps over which the KL weight rises linearly from 0.
    pub kl_ramp_steps: u64,
    pub cont: f64,
    pub align: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { kl_end: 10.0, kl_ramp_steps: 10_000, cont: 1.0, align: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, v) in [("kl_end", self.kl_end), ("cont", self.cont), ("align", self.align)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LossError::Weights(name));
            }
        }
        Ok(())
    }

    pub fn lambda_kl(&self, step: u64) -> f64 {
        if self.kl_ramp_steps == 0 {
            return self.kl_end;
        }
        (step as f64 / self.kl_ramp_steps as f64).min(1.0) * self.kl_end
    }
}

/// Unweighted terms of the reconstruction loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionTerms<S> {
    pub cmd: S,
    pub args: S,
    pub visibility: S,
    pub consistency: S,
    pub aux: S,
}

impl<S: Scalar> ReconstructionTerms<S> {
    /// Equal-weight sum.
    pub fn total(&self) -> S {
        self.cmd + self.args + self.visibility + self.consistency + self.aux
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossComponents<S> {
    pub rec: S,
    pub kl: S,
    pub cont: S,
    pub align: S,
}

/// `rec + λ_KL(step)·kl + λ_cont·cont + λ_align·align`.
pub fn total_loss<S: Scalar>(c: &LossComponents<S>, w: &LossWeights, step: u64) -> S {
    c.rec + c.kl * w.lambda_kl(step) + c.cont * w.cont + c.align * w.align
}
