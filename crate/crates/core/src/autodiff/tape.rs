use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use smallvec::SmallVec;

use super::AdError;
use crate::scalar::{Scalar, Vec2};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Kind of a recorded operation; the partial derivatives are stored alongside.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Exp,
    Log,
    Abs,
    /// Straight-through selection.
    Select,
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: f64,
    /// `(parent index, ∂self/∂parent)`; parents always precede the node.
    pub(crate) partials: SmallVec<[(u32, f64); 2]>,
}

/// Append-only record of a computation.
///
/// A tape is single-threaded (`!Sync`); independent tapes may be used from
/// different threads.
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("id", &self.id).field("len", &self.len()).finish()
    }
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

/// Node identifier returned by [`Var::id`].
pub type NodeId = u32;

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({})", self.index, self.value)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&self, op: Op, value: f64, partials: SmallVec<[(u32, f64); 2]>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node { op, value, partials });
        Var { tape: self, index, value }
    }

    /// A differentiable input.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Input, value, SmallVec::new())
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn point(&self, p: crate::scalar::Point) -> Vec2<Var<'_>> {
        Vec2::new(self.var(p.x), self.var(p.y))
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Const, value, SmallVec::new())
    }

    pub fn op_at(&self, id: NodeId) -> Option<Op> {
        self.nodes.borrow().get(id as usize).map(|n| n.op)
    }

    /// Reverse accumulation from `output`; the result holds `∂output/∂node`
    /// for every node on the tape.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, AdError> {
        if !std::ptr::eq(output.tape, self) {
            return Err(AdError::ForeignVar);
        }
        let nodes = self.nodes.borrow();
        let n = output.index as usize + 1;
        if let Some(bad) = nodes[..n].iter().position(|nd| !nd.value.is_finite()) {
            return Err(AdError::NonFinite { node: bad as u32 });
        }
        let mut adj = vec![0.0; nodes.len()];
        adj[output.index as usize] = 1.0;
        for i in (0..n).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            for &(p, d) in &nodes[i].partials {
                adj[p as usize] += g * d;
            }
        }
        Ok(Gradients { tape: self.id, adjoints: adj })
    }
}

/// Gradients of one output with respect to every node of a tape.
#[derive(Clone, Debug)]
pub struct Gradients {
    tape: u64,
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        assert_eq!(v.tape.id, self.tape, "variable from another tape");
        self.adjoints[v.index as usize]
    }

    pub fn wrt_all(&self, vs: &[Var<'_>]) -> Vec<f64> {
        vs.iter().map(|v| self.wrt(*v)).collect()
    }

    /// Node id → gradient for every node with a nonzero gradient.
    pub fn to_map(&self) -> HashMap<NodeId, f64> {
        self.adjoints
            .iter()
            .enumerate()
            .filter(|(_, g)| **g != 0.0)
            .map(|(i, g)| (i as NodeId, *g))
            .collect()
    }
}

/// Free-function form of [`Tape::backward`].
pub fn backward(tape: &Tape, output: Var<'_>) -> Result<Gradients, AdError> {
    tape.backward(output)
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: Op, value: f64, d: f64) -> Self {
        let mut p = SmallVec::new();
        p.push((self.index, d));
        self.tape.push(op, value, p)
    }

    fn binary(self, other: Self, op: Op, value: f64, da: f64, db: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "mixing tapes");
        let mut p = SmallVec::new();
        p.push((self.index, da));
        p.push((other.index, db));
        self.tape.push(op, value, p)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, Op::Add, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, Op::Sub, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, Op::Mul, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        self.binary(o, Op::Div, q, 1.0 / o.value, -q / o.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(Op::Add, self.value + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(Op::Sub, self.value - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(Op::Mul, self.value * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(Op::Div, self.value / c, 1.0 / c)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(&self) -> f64 {
        self.value
    }

    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        // d/dx sqrt at 0 is taken as 0 so zero-length vectors stay finite
        let d = if r > 0.0 { 0.5 / r } else { 0.0 };
        self.unary(Op::Sqrt, r, d)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(Op::Exp, e, e)
    }

    fn ln(self) -> Self {
        self.unary(Op::Log, self.value.ln(), 1.0 / self.value)
    }

    fn abs(self) -> Self {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Op::Abs, self.value.abs(), d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = x * x;
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x), 6.0);
    }

    #[test]
    fn norm_gradient() {
        let tape = Tape::new();
        let v = tape.point(crate::scalar::Point::new(3.0, 4.0));
        let n = v.norm();
        assert_eq!(n.value(), 5.0);
        let g = tape.backward(n).unwrap();
        assert!((g.wrt(v.x) - 0.6).abs() < 1e-15);
        assert!((g.wrt(v.y) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn constant_output_has_zero_gradients() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let c = tape.constant(7.0);
        let g = tape.backward(c).unwrap();
        assert_eq!(g.wrt(x), 0.0);
        assert!(g.to_map().keys().all(|&k| k == c.id()));
    }

    #[test]
    fn foreign_output_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let x = b.var(1.0);
        assert!(matches!(a.backward(x), Err(AdError::ForeignVar)));
    }

    #[test]
    fn non_finite_rejected() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = x.ln();
        assert!(matches!(tape.backward(y), Err(AdError::NonFinite { .. })));
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = tape.var(5.0);
        // f = x*y + x/y - exp(x) + ln(y)
        let f = x * y + x / y - x.exp() + y.ln();
        let g = tape.backward(f).unwrap();
        assert!((g.wrt(x) - (5.0 + 1.0 / 5.0 - 2f64.exp())).abs() < 1e-12);
        assert!((g.wrt(y) - (2.0 - 2.0 / 25.0 + 1.0 / 5.0)).abs() < 1e-12);
        assert_eq!(tape.op_at(f.id()), Some(Op::Add));
    }
}
