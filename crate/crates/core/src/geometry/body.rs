//! Implicit obstacle bodies.
//!
//! Every body is a scalar field `f` with `f < 0` strictly inside the
//! obstacle and `f > 0` in the billiard domain, so `grad f` on the zero set
//! is the unit normal pointing into the domain once normalized.

use std::f64::consts::PI;

use super::vector::{UnitVector, Vector};
use crate::error::{Error, Result};

/// Below this gradient norm a zero-set point is treated as singular.
pub const MIN_GRADIENT_NORM: f64 = 1e-8;

/// Upper bound on `|d/dt exp(-t / (1 - t))|` over `t` in `[0, 1)` (the
/// maximum is `4 / e`).
const BUMP_PROFILE_SLOPE: f64 = 1.4716;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector,
    pub max: Vector,
}

impl Aabb {
    pub fn around(center: Vector, half: Vector) -> Self {
        Aabb {
            min: center - half,
            max: center + half,
        }
    }

    pub fn union(self, other: Aabb) -> Aabb {
        let mut out = self;
        for i in 0..3 {
            out.min.0[i] = self.min.0[i].min(other.min.0[i]);
            out.max.0[i] = self.max.0[i].max(other.max.0[i]);
        }
        out
    }

    pub fn intersection(self, other: Aabb) -> Aabb {
        let mut out = self;
        for i in 0..3 {
            out.min.0[i] = self.min.0[i].max(other.min.0[i]);
            out.max.0[i] = self.max.0[i].min(other.max.0[i]);
        }
        out
    }

    pub fn center(&self) -> Vector {
        (self.min + self.max) * 0.5
    }

    /// Volume of the leading `dimension` extents.
    pub fn volume(&self, dimension: usize) -> f64 {
        (0..dimension)
            .map(|i| (self.max.0[i] - self.min.0[i]).max(0.0))
            .product()
    }

    /// Half the diagonal over the leading `dimension` extents.
    pub fn half_diagonal(&self, dimension: usize) -> f64 {
        (0..dimension)
            .map(|i| (self.max.0[i] - self.min.0[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            * 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
}

/// Ellipsoid with principal directions `axes[i]` and semi-axes
/// `semi_axes[i]`, `i < dimension`.
///
/// The field is `a_min * (|D^-1 R^T (q - c)| - 1)`: exact zero set, and
/// 1-Lipschitz because of the `a_min` scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: Vector,
    dimension: usize,
    semi_axes: [f64; 3],
    axes: [Vector; 3],
    scale: f64,
}

impl Ellipsoid {
    /// `axes` defaults to the coordinate frame. Axes must be orthonormal.
    pub fn new(center: Vector, semi_axes: &[f64], axes: Option<&[Vector]>) -> Result<Self> {
        let dimension = semi_axes.len();
        if !(2..=3).contains(&dimension) {
            return Err(Error::Dimension(format!(
                "ellipsoid needs 2 or 3 semi-axes, got {dimension}"
            )));
        }
        if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "semi-axes must be positive: {semi_axes:?}"
            )));
        }
        let mut frame = [
            Vector::new(1.0, 0.0, 0.0),
            Vector::new(0.0, 1.0, 0.0),
            Vector::new(0.0, 0.0, 1.0),
        ];
        if let Some(axes) = axes {
            if axes.len() != dimension {
                return Err(Error::Dimension(format!(
                    "{} rotation axes for a {dimension}-dimensional ellipsoid",
                    axes.len()
                )));
            }
            for (i, a) in axes.iter().enumerate() {
                for (j, b) in axes.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    if (a.dot(*b) - expected).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(
                            "ellipsoid rotation axes are not orthonormal".into(),
                        ));
                    }
                }
                frame[i] = *a;
            }
        }
        let mut sa = [1.0; 3];
        sa[..dimension].copy_from_slice(semi_axes);
        let scale = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Ellipsoid {
            center,
            dimension,
            semi_axes: sa,
            axes: frame,
            scale,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes[..self.dimension]
    }

    pub fn axes(&self) -> &[Vector] {
        &self.axes[..self.dimension]
    }

    /// `|D^-1 R^T (q - c)|`, the normalized quadric radius.
    #[inline]
    fn radius_of(&self, q: Vector) -> f64 {
        let p = q - self.center;
        let mut r2 = 0.0;
        for i in 0..self.dimension {
            let l = self.axes[i].dot(p) / self.semi_axes[i];
            r2 += l * l;
        }
        r2.sqrt()
    }

    fn gradient(&self, q: Vector) -> Vector {
        let p = q - self.center;
        let r = self.radius_of(q);
        if r == 0.0 {
            return Vector::ZERO;
        }
        let mut g = Vector::ZERO;
        for i in 0..self.dimension {
            let a = self.semi_axes[i];
            g += self.axes[i] * (self.axes[i].dot(p) / (a * a));
        }
        g * (self.scale / r)
    }
}

/// Half space `<normal, q> <= offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: UnitVector,
    pub offset: f64,
}

/// Children combined by a log-sum-exp blend of width `blend`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blend {
    pub children: Vec<Body>,
    pub blend: f64,
}

/// Base body pushed outward by `amplitude * phi(angle)` around `direction`
/// as seen from `center`; `phi` is a smooth bump of compact angular support
/// `width` (radians) with peak value 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBump {
    pub base: Box<Body>,
    pub amplitude: f64,
    pub center: Vector,
    pub direction: UnitVector,
    pub width: f64,
    support: f64,
}

impl RadialBump {
    pub fn new(
        base: Body,
        amplitude: f64,
        center: Vector,
        direction: UnitVector,
        width: f64,
    ) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bump amplitude must be >= 0, got {amplitude}"
            )));
        }
        if !(width > 0.0 && width <= PI) {
            return Err(Error::InvalidParameter(format!(
                "bump width must lie in (0, pi], got {width}"
            )));
        }
        Ok(RadialBump {
            base: Box::new(base),
            amplitude,
            center,
            direction,
            width,
            support: 1.0 - width.cos(),
        })
    }

    /// Bump profile value and the gradient of the profile.
    fn profile(&self, q: Vector) -> (f64, Vector) {
        let p = q - self.center;
        let r = p.norm();
        if r == 0.0 {
            return (0.0, Vector::ZERO);
        }
        let u = p / r;
        let cos_angle = self.direction.dot(u);
        let t = (1.0 - cos_angle) / self.support;
        if t >= 1.0 {
            return (0.0, Vector::ZERO);
        }
        let phi = (-t / (1.0 - t)).exp();
        let dphi = -phi / ((1.0 - t) * (1.0 - t));
        // d(1 - cos)/dq = -(d - cos * u) / r
        let ds = -(self.direction.get() - u * cos_angle) / r;
        (phi, ds * (dphi / self.support))
    }

    fn eval(&self, q: Vector) -> f64 {
        let base = self.base.eval(q);
        if self.amplitude == 0.0 {
            return base;
        }
        base - self.amplitude * self.profile(q).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Ball(Ball),
    Ellipsoid(Ellipsoid),
    HalfSpace(HalfSpace),
    /// Closure of the exterior of the child.
    Complement(Box<Body>),
    SmoothUnion(Blend),
    SmoothIntersection(Blend),
    RadialBump(RadialBump),
}

impl Body {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Body::Ball(Ball { center, radius }))
    }

    pub fn ellipsoid(center: Vector, semi_axes: &[f64], axes: Option<&[Vector]>) -> Result<Self> {
        Ellipsoid::new(center, semi_axes, axes).map(Body::Ellipsoid)
    }

    pub fn half_space(normal: Vector, offset: f64) -> Result<Self> {
        Ok(Body::HalfSpace(HalfSpace {
            normal: UnitVector::new(normal)?,
            offset,
        }))
    }

    pub fn complement(body: Body) -> Self {
        Body::Complement(Box::new(body))
    }

    pub fn smooth_union(children: Vec<Body>, blend: f64) -> Result<Self> {
        Self::check_blend(&children, blend)?;
        Ok(Body::SmoothUnion(Blend { children, blend }))
    }

    pub fn smooth_intersection(children: Vec<Body>, blend: f64) -> Result<Self> {
        Self::check_blend(&children, blend)?;
        Ok(Body::SmoothIntersection(Blend { children, blend }))
    }

    fn check_blend(children: &[Body], blend: f64) -> Result<()> {
        if children.is_empty() {
            return Err(Error::InvalidParameter("blend without children".into()));
        }
        if !(blend.is_finite() && blend > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blend parameter must be positive, got {blend}"
            )));
        }
        Ok(())
    }

    /// Field value: negative inside the obstacle, positive outside.
    pub fn eval(&self, q: Vector) -> f64 {
        match self {
            Body::Ball(b) => (q - b.center).norm() - b.radius,
            Body::Ellipsoid(e) => e.scale * (e.radius_of(q) - 1.0),
            Body::HalfSpace(h) => h.normal.dot(q) - h.offset,
            Body::Complement(b) => -b.eval(q),
            Body::SmoothUnion(u) => blend_value(&u.children, u.blend, q, 1.0),
            Body::SmoothIntersection(u) => -blend_value(&u.children, u.blend, q, -1.0),
            Body::RadialBump(r) => r.eval(q),
        }
    }

    /// Analytic gradient of [`Body::eval`].
    pub fn gradient(&self, q: Vector) -> Vector {
        match self {
            Body::Ball(b) => {
                let p = q - b.center;
                let n = p.norm();
                if n == 0.0 {
                    Vector::ZERO
                } else {
                    p / n
                }
            }
            Body::Ellipsoid(e) => e.gradient(q),
            Body::HalfSpace(h) => h.normal.get(),
            Body::Complement(b) => -b.gradient(q),
            Body::SmoothUnion(u) => blend_gradient(&u.children, u.blend, q, 1.0),
            Body::SmoothIntersection(u) => blend_gradient(&u.children, u.blend, q, -1.0),
            Body::RadialBump(r) => {
                let g = r.base.gradient(q);
                if r.amplitude == 0.0 {
                    return g;
                }
                g - r.profile(q).1 * r.amplitude
            }
        }
    }

    /// Unit normal `grad f / |grad f|`, pointing out of the obstacle.
    pub fn inward_normal(&self, q: Vector) -> Result<UnitVector> {
        let g = self.gradient(q);
        let n = g.norm();
        // Negated so that a NaN norm is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(n >= MIN_GRADIENT_NORM) {
            return Err(Error::DegenerateGradient {
                point: q.0,
                norm: n,
            });
        }
        Ok(UnitVector::renormalized(g))
    }

    /// Global Lipschitz constant of the field, if one is known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Body::Ball(_) | Body::Ellipsoid(_) | Body::HalfSpace(_) => Some(1.0),
            Body::Complement(b) => b.lipschitz(),
            Body::SmoothUnion(u) | Body::SmoothIntersection(u) => u
                .children
                .iter()
                .map(|c| c.lipschitz())
                .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l))),
            Body::RadialBump(_) => None,
        }
    }

    /// Lower bound on the distance from `q` to the zero set, given the
    /// field value `value = self.eval(q) > 0`. `None` when no bound is
    /// available.
    pub fn distance_bound(&self, q: Vector, value: f64) -> Option<f64> {
        if value <= 0.0 {
            return Some(0.0);
        }
        if let Body::RadialBump(r) = self {
            // Within a ball of radius |q - c| / 2 the bump term is
            // Lipschitz with constant amplitude * slope / (support * |q - c| / 2).
            let base = r.base.lipschitz()?;
            let dist = (q - r.center).norm();
            if dist == 0.0 {
                return Some(0.0);
            }
            let half = 0.5 * dist;
            let local = base + r.amplitude * BUMP_PROFILE_SLOPE / (r.support * half);
            return Some((value / local).min(half));
        }
        self.lipschitz().map(|l| value / l)
    }

    /// Box containing `{ f < level }`, if the body is bounded.
    pub fn bounding_box(&self, level: f64) -> Option<Aabb> {
        match self {
            Body::Ball(b) => {
                let h = b.radius + level;
                Some(Aabb::around(b.center, Vector::new(h, h, h)))
            }
            Body::Ellipsoid(e) => {
                let s = (1.0 + level / e.scale).max(0.0);
                let mut half = Vector::ZERO;
                for j in 0..3 {
                    let mut acc = 0.0;
                    for i in 0..e.dimension {
                        acc += (e.semi_axes[i] * e.axes[i].0[j]).powi(2);
                    }
                    half.0[j] = s * acc.sqrt();
                }
                Some(Aabb::around(e.center, half))
            }
            Body::HalfSpace(_) | Body::Complement(_) => None,
            Body::SmoothUnion(u) => {
                let slack = u.blend * (u.children.len() as f64).ln();
                u.children
                    .iter()
                    .map(|c| c.bounding_box(level + slack))
                    .try_fold(None::<Aabb>, |acc, b| {
                        let b = b?;
                        Some(Some(acc.map_or(b, |a| a.union(b))))
                    })
                    .flatten()
            }
            Body::SmoothIntersection(u) => u
                .children
                .iter()
                .filter_map(|c| c.bounding_box(level))
                .reduce(Aabb::intersection),
            Body::RadialBump(r) => r.base.bounding_box(level + r.amplitude),
        }
    }

    /// Closed-form volume, when one exists.
    pub fn exact_volume(&self, dimension: usize) -> Option<f64> {
        match self {
            Body::Ball(b) => Some(ball_volume(dimension, b.radius)),
            Body::Ellipsoid(e) => {
                Some(ball_volume(dimension, 1.0) * e.semi_axes[..dimension].iter().product::<f64>())
            }
            Body::RadialBump(r) if r.amplitude == 0.0 => r.base.exact_volume(dimension),
            _ => None,
        }
    }

    /// True when every vector parameter lies in the `z = 0` plane.
    pub fn is_planar(&self) -> bool {
        match self {
            Body::Ball(b) => b.center.is_planar(),
            Body::Ellipsoid(e) => e.dimension == 2 && e.center.is_planar(),
            Body::HalfSpace(h) => h.normal.get().is_planar(),
            Body::Complement(b) => b.is_planar(),
            Body::SmoothUnion(u) | Body::SmoothIntersection(u) => {
                u.children.iter().all(Body::is_planar)
            }
            Body::RadialBump(r) => {
                r.base.is_planar() && r.center.is_planar() && r.direction.get().is_planar()
            }
        }
    }

    /// Whether the body is a Ball or Ellipsoid (closed-form ray intersection).
    pub fn is_quadric(&self) -> bool {
        matches!(self, Body::Ball(_) | Body::Ellipsoid(_))
    }
}

/// Volume of the `n`-ball of radius `r`, `pi^(n/2) r^n / Gamma(n/2 + 1)`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    let unit = match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            let half = n as f64 / 2.0;
            PI.powf(half) / statrs::function::gamma::gamma(half + 1.0)
        }
    };
    unit * r.powi(n as i32)
}

/// `-k ln sum exp(-sign * f_i / k)` over the children, evaluated around the
/// minimum for stability.
fn blend_value(children: &[Body], k: f64, q: Vector, sign: f64) -> f64 {
    let mut stack = [0.0; 8];
    let mut heap = Vec::new();
    let values: &mut [f64] = if children.len() <= stack.len() {
        &mut stack[..children.len()]
    } else {
        heap.resize(children.len(), 0.0);
        &mut heap
    };
    for (v, c) in values.iter_mut().zip(children) {
        *v = sign * c.eval(q);
    }
    let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (-(v - m) / k).exp()).sum();
    m - k * s.ln()
}

/// Gradient of a blend. `sign = 1` for union (smooth min of the children),
/// `-1` for intersection (smooth max).
fn blend_gradient(children: &[Body], k: f64, q: Vector, sign: f64) -> Vector {
    let values: Vec<f64> = children.iter().map(|c| sign * c.eval(q)).collect();
    let m = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|v| (-(v - m) / k).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut g = Vector::ZERO;
    for (child, w) in children.iter().zip(&weights) {
        if *w > 0.0 {
            g += child.gradient(q) * (w / total);
        }
    }
    g
}
