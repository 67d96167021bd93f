use std::f64::consts::PI;

use super::body::{Aabb, Body, RadialBump};
use super::vector::{UnitVector, Vector};
use crate::error::{Error, Result};

/// Default number of sampled zero-set points per body for scene checks.
pub const SURFACE_SAMPLES: usize = 4096;

/// Relative margin every obstacle must keep from the bounding sphere.
const CONTAINMENT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBall {
    pub center: Vector,
    pub radius: f64,
}

impl BoundingBall {
    /// Unit normal at a sphere point, pointing into the ball.
    pub fn inward_normal(&self, q: Vector) -> UnitVector {
        UnitVector::renormalized(self.center - q)
    }

    pub fn contains(&self, q: Vector, slack: f64) -> bool {
        (q - self.center).norm() <= self.radius + slack
    }

    /// Largest `t >= 0` with `|q + t v - c| = R`, for `q` inside the ball.
    pub fn exit_time(&self, q: Vector, v: UnitVector) -> f64 {
        let p = q - self.center;
        let b = v.dot(p);
        let c = p.norm_squared() - self.radius * self.radius;
        let disc = (b * b - c).max(0.0);
        let root = disc.sqrt();
        // Stable form of -b + sqrt(b^2 - c).
        if b <= 0.0 {
            -b + root
        } else {
            let denom = b + root;
            if denom == 0.0 {
                0.0
            } else {
                -c / denom
            }
        }
    }
}

/// A one-parameter family of radial bumps applied to one body.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    /// Index of the perturbed body in the scene.
    pub body: usize,
    pub center: Vector,
    pub direction: UnitVector,
    /// Angular half-width of the bump support, radians.
    pub width: f64,
}

/// Obstacles inside a bounding ball; the billiard domain is the closure of
/// the ball minus the obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    dimension: usize,
    bounding: BoundingBall,
    bodies: Vec<Body>,
    min_separation: Option<f64>,
    strictly_convex_components: bool,
    perturbation: Option<BumpFamily>,
}

/// Unvalidated scene parameters.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    pub name: String,
    pub dimension: usize,
    pub bounding: BoundingBall,
    pub bodies: Vec<Body>,
    pub min_separation: Option<f64>,
    pub strictly_convex_components: bool,
    pub perturbation: Option<BumpFamily>,
}

impl SceneBuilder {
    pub fn new(name: impl Into<String>, dimension: usize, center: Vector, radius: f64) -> Self {
        SceneBuilder {
            name: name.into(),
            dimension,
            bounding: BoundingBall { center, radius },
            bodies: Vec::new(),
            min_separation: None,
            strictly_convex_components: false,
            perturbation: None,
        }
    }

    pub fn body(mut self, body: Body) -> Self {
        self.bodies.push(body);
        self
    }

    pub fn min_separation(mut self, d: f64) -> Self {
        self.min_separation = Some(d);
        self
    }

    pub fn strictly_convex(mut self) -> Self {
        self.strictly_convex_components = true;
        self
    }

    pub fn perturbation(mut self, family: BumpFamily) -> Self {
        self.perturbation = Some(family);
        self
    }

    pub fn build(self) -> Result<Scene> {
        Scene::new(self)
    }
}

impl Scene {
    pub fn new(b: SceneBuilder) -> Result<Self> {
        if !(2..=3).contains(&b.dimension) {
            return Err(Error::Dimension(format!(
                "scene dimension must be 2 or 3, got {}",
                b.dimension
            )));
        }
        if !(b.bounding.radius.is_finite() && b.bounding.radius > 0.0) {
            return Err(Error::Validation(format!(
                "bounding radius must be positive, got {}",
                b.bounding.radius
            )));
        }
        if b.dimension == 2 {
            let planar = b.bounding.center.is_planar()
                && b.bodies.iter().all(Body::is_planar)
                && b.perturbation
                    .as_ref()
                    .is_none_or(|p| p.center.is_planar() && p.direction.get().is_planar());
            if !planar {
                return Err(Error::Dimension(
                    "three-dimensional data in a planar scene".into(),
                ));
            }
        } else if b
            .bodies
            .iter()
            .any(|body| matches!(body, Body::Ellipsoid(e) if e.dimension() != 3))
        {
            return Err(Error::Dimension(
                "planar ellipse in a three-dimensional scene".into(),
            ));
        }
        if let Some(d) = b.min_separation {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Validation(format!(
                    "min_separation must be positive, got {d}"
                )));
            }
        }
        if let Some(p) = &b.perturbation {
            if p.body >= b.bodies.len() {
                return Err(Error::Validation(format!(
                    "perturbation refers to body {} of {}",
                    p.body,
                    b.bodies.len()
                )));
            }
            if !(p.width > 0.0 && p.width <= PI) {
                return Err(Error::Validation(format!(
                    "perturbation width must lie in (0, pi], got {}",
                    p.width
                )));
            }
        }
        let scene = Scene {
            name: b.name,
            dimension: b.dimension,
            bounding: b.bounding,
            bodies: b.bodies,
            min_separation: b.min_separation,
            strictly_convex_components: b.strictly_convex_components,
            perturbation: b.perturbation,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<()> {
        let r = self.bounding.radius;
        let mut samples = Vec::with_capacity(self.bodies.len());
        for (i, body) in self.bodies.iter().enumerate() {
            let points = sample_surface(body, self.dimension, SURFACE_SAMPLES)
                .ok_or_else(|| Error::Validation(format!("body {i} is unbounded")))?;
            if points.is_empty() {
                return Err(Error::Validation(format!("body {i} has an empty zero set")));
            }
            let reach = points
                .iter()
                .map(|q| (*q - self.bounding.center).norm())
                .fold(0.0, f64::max);
            if reach > r - CONTAINMENT_MARGIN * r {
                return Err(Error::Validation(format!(
                    "body {i} reaches {reach} from the center, bounding radius {r}"
                )));
            }
            samples.push((points, reach));
        }
        if let Some(d) = self.min_separation {
            let slack = 1e-9 * r;
            for (i, (_, reach)) in samples.iter().enumerate() {
                if r - reach < d - slack {
                    return Err(Error::Validation(format!(
                        "body {i} is {} from the bounding sphere, declared separation {d}",
                        r - reach
                    )));
                }
            }
            for i in 0..samples.len() {
                for j in i + 1..samples.len() {
                    let gap = min_distance(&samples[i].0, &samples[j].0);
                    if gap < d - slack {
                        return Err(Error::Validation(format!(
                            "bodies {i} and {j} are {gap} apart, declared separation {d}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounding(&self) -> &BoundingBall {
        &self.bounding
    }

    pub fn radius(&self) -> f64 {
        self.bounding.radius
    }

    /// Length scale used for tolerances.
    pub fn scale(&self) -> f64 {
        self.bounding.radius
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn min_separation(&self) -> Option<f64> {
        self.min_separation
    }

    pub fn strictly_convex_components(&self) -> bool {
        self.strictly_convex_components
    }

    pub fn perturbation(&self) -> Option<&BumpFamily> {
        self.perturbation.as_ref()
    }

    /// Minimum field value over the bodies and the index attaining it.
    #[inline]
    pub fn eval(&self, q: Vector) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, b) in self.bodies.iter().enumerate() {
            let f = b.eval(q);
            if f < best.0 {
                best = (f, i);
            }
        }
        best
    }

    /// True for points of the billiard domain, up to `slack`.
    pub fn contains(&self, q: Vector, slack: f64) -> bool {
        self.bounding.contains(q, slack) && self.eval(q).0 >= -slack
    }

    /// Box around all obstacles, `None` for an empty scene.
    pub fn obstacle_box(&self) -> Option<Aabb> {
        self.bodies
            .iter()
            .map(|b| b.bounding_box(0.0))
            .reduce(|a, b| match (a, b) {
                (Some(a), Some(b)) => Some(a.union(b)),
                _ => None,
            })
            .flatten()
    }

    /// Scene with the bump family applied at amplitude `epsilon`.
    pub fn perturbed(&self, epsilon: f64) -> Result<Scene> {
        let family = self
            .perturbation
            .as_ref()
            .ok_or(Error::NoPerturbationFamily)?;
        let body = perturb(
            &self.bodies[family.body],
            epsilon,
            family,
            &self.bounding,
            self.dimension,
        )?;
        let mut bodies = self.bodies.clone();
        bodies[family.body] = body;
        // The bump moves the surface by at most epsilon, so the declared
        // separation shrinks by that much. Convexity is not preserved.
        let bumped = epsilon != 0.0;
        let builder = SceneBuilder {
            name: self.name.clone(),
            dimension: self.dimension,
            bounding: self.bounding.clone(),
            bodies,
            min_separation: self
                .min_separation
                .map(|d| d - epsilon.abs())
                .filter(|d| *d > 0.0),
            strictly_convex_components: self.strictly_convex_components && !bumped,
            perturbation: self.perturbation.clone(),
        };
        Scene::new(builder).map_err(|e| match e {
            Error::Validation(_) => Error::PerturbationTooLarge { epsilon },
            other => other,
        })
    }

    pub fn to_builder(&self) -> SceneBuilder {
        SceneBuilder {
            name: self.name.clone(),
            dimension: self.dimension,
            bounding: self.bounding.clone(),
            bodies: self.bodies.clone(),
            min_separation: self.min_separation,
            strictly_convex_components: self.strictly_convex_components,
            perturbation: self.perturbation.clone(),
        }
    }
}

/// Applies a radial bump of amplitude `epsilon` to `base`.
///
/// `epsilon == 0` returns `base` unchanged. Fails with
/// [`Error::PerturbationTooLarge`] when the bumped surface is not strictly
/// inside `bounding`.
pub fn perturb(
    base: &Body,
    epsilon: f64,
    bump: &BumpFamily,
    bounding: &BoundingBall,
    dimension: usize,
) -> Result<Body> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation amplitude must be >= 0, got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(base.clone());
    }
    let body = Body::RadialBump(RadialBump::new(
        base.clone(),
        epsilon,
        bump.center,
        bump.direction,
        bump.width,
    )?);
    let points = sample_surface(&body, dimension, SURFACE_SAMPLES).unwrap_or_default();
    let limit = bounding.radius * (1.0 - CONTAINMENT_MARGIN);
    let escapes = points.is_empty() || points.iter().any(|q| (*q - bounding.center).norm() > limit);
    if escapes {
        return Err(Error::PerturbationTooLarge { epsilon });
    }
    Ok(body)
}

/// `count` directions spread over the unit circle (planar) or sphere.
pub fn spread_directions(dimension: usize, count: usize) -> Vec<UnitVector> {
    if dimension == 2 {
        (0..count)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                UnitVector::renormalized(Vector::planar(a.cos(), a.sin()))
            })
            .collect()
    } else {
        // Fibonacci lattice.
        let golden = PI * (3.0 - 5.0f64.sqrt());
        (0..count)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let rho = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                UnitVector::renormalized(Vector::new(rho * a.cos(), rho * a.sin(), z))
            })
            .collect()
    }
}

/// Zero-set points found along `count` rays cast from the center of the
/// body's bounding box. Every sign change along a ray contributes one point,
/// refined by bisection. `None` for unbounded bodies.
pub fn sample_surface(body: &Body, dimension: usize, count: usize) -> Option<Vec<Vector>> {
    let bbox = body.bounding_box(0.0)?;
    let origin = bbox.center();
    let reach = bbox.half_diagonal(dimension) * 1.01 + 1e-9;
    let steps = 512;
    let h = reach / steps as f64;
    let mut out = Vec::new();
    for dir in spread_directions(dimension, count) {
        let v = dir.get();
        let mut t0 = 0.0;
        let mut f0 = body.eval(origin);
        for k in 1..=steps {
            let t1 = k as f64 * h;
            let f1 = body.eval(origin + v * t1);
            if (f0 < 0.0) != (f1 < 0.0) {
                let (mut a, mut b) = (t0, t1);
                let inside_a = f0 < 0.0;
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if (body.eval(origin + v * m) < 0.0) == inside_a {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(origin + v * (0.5 * (a + b)));
            }
            t0 = t1;
            f0 = f1;
        }
    }
    Some(out)
}

fn min_distance(a: &[Vector], b: &[Vector]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let d = (*p - *q).norm_squared();
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(x: f64, y: f64, r: f64) -> Body {
        Body::ball(Vector::planar(x, y), r).unwrap()
    }

    #[test]
    fn sphere_exit_time() {
        let m = BoundingBall {
            center: Vector::ZERO,
            radius: 3.0,
        };
        let v = UnitVector::planar_x();
        let t = m.exit_time(Vector::planar(-2.0, 2.0), v);
        assert!((t - (2.0 + 5.0f64.sqrt())).abs() < 1e-14);
        let t = m.exit_time(Vector::planar(-3.0, 0.0), v);
        assert!((t - 6.0).abs() < 1e-14);
    }

    #[test]
    fn containment_is_checked() {
        let ok = SceneBuilder::new("ok", 2, Vector::ZERO, 2.0)
            .body(ball(0.0, 0.0, 1.0))
            .build();
        assert!(ok.is_ok());
        let err = SceneBuilder::new("bad", 2, Vector::ZERO, 2.0)
            .body(ball(1.5, 0.0, 1.0))
            .build();
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn separation_is_checked() {
        let two = |d: f64| {
            SceneBuilder::new("two", 2, Vector::ZERO, 5.0)
                .body(ball(-2.0, 0.0, 1.0))
                .body(ball(2.0, 0.0, 1.0))
                .min_separation(d)
                .build()
        };
        assert!(two(2.0).is_ok());
        assert!(matches!(two(2.1), Err(Error::Validation(_))));
    }

    #[test]
    fn dimension_mixing_is_rejected() {
        let err = SceneBuilder::new("mixed", 2, Vector::ZERO, 2.0)
            .body(Body::ball(Vector::new(0.0, 0.0, 0.1), 0.5).unwrap())
            .build();
        assert!(matches!(err, Err(Error::Dimension(_))));
        let err = SceneBuilder::new("mixed", 3, Vector::ZERO, 2.0)
            .body(Body::ellipsoid(Vector::ZERO, &[1.0, 0.5], None).unwrap())
            .build();
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn unbounded_body_is_rejected() {
        let err = SceneBuilder::new("half", 2, Vector::ZERO, 2.0)
            .body(Body::half_space(Vector::planar(1.0, 0.0), 0.0).unwrap())
            .build();
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn perturbation_limits() {
        let family = BumpFamily {
            body: 0,
            center: Vector::ZERO,
            direction: UnitVector::planar_x(),
            width: 0.5,
        };
        let m = BoundingBall {
            center: Vector::ZERO,
            radius: 2.0,
        };
        let base = ball(0.0, 0.0, 1.0);
        assert_eq!(perturb(&base, 0.0, &family, &m, 2).unwrap(), base);
        assert!(perturb(&base, 0.5, &family, &m, 2).is_ok());
        assert!(matches!(
            perturb(&base, 2.0, &family, &m, 2),
            Err(Error::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn surface_samples_lie_on_the_zero_set() {
        let b = ball(0.3, -0.2, 0.7);
        let pts = sample_surface(&b, 2, 256).unwrap();
        assert_eq!(pts.len(), 256);
        for p in pts {
            assert!(b.eval(p).abs() < 1e-12);
        }
    }
}
