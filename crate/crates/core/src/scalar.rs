//! Scalar abstraction shared by the plain and the differentiable code paths.
//!
//! Geometry, refinement and loss routines are written once against [`Scalar`].
//! Instantiated with `f64` they are the ordinary numeric operators; instantiated
//! with [`crate::autodiff::Var`] they record onto a tape. Both instantiations
//! execute the same sequence of IEEE operations, so forward values agree bit for
//! bit.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Primal value.
    fn value(&self) -> f64;

    /// A constant living in the same context as `self` (same tape, if any).
    fn lift(&self, c: f64) -> Self;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// A 2-vector over any [`Scalar`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

/// A point or displacement in glyph coordinates.
pub type Point = Vec2<f64>;

impl<S> Vec2<S> {
    #[inline]
    pub const fn new(x: S, y: S) -> Self {
        Vec2 { x, y }
    }
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl<S: Scalar> Vec2<S> {
    #[inline]
    pub fn dot(self, other: Self) -> S {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, s: S) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn values(&self) -> Point {
        Point::new(self.x.value(), self.y.value())
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

impl<S: Scalar> Mul<f64> for Vec2<S> {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl<S: Scalar> Div<f64> for Vec2<S> {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        Vec2::new(self.x / s, self.y / s)
    }
}
