//! First intersection of a ray with the obstacles or the bounding sphere.
//!
//! The sphere exit time is solved in closed form and bounds the search.
//! Obstacle crossings are found by marching the minimum field over all
//! bodies: where a body supplies a distance bound the march advances by it
//! (it cannot step over the zero set), elsewhere it falls back to a fixed
//! stride. A sign change is bracketed, bisected to a 1e-12 interval and
//! polished with one Newton step.

use crate::geometry::{Scene, UnitVector, Vector};

/// Tolerance on `|<normal, direction>|` below which a hit is grazing.
pub const GRAZING_TOLERANCE: f64 = 1e-6;

/// Hits closer than this to the ray origin are ignored.
pub const START_SKIP: f64 = 1e-12;

const BISECTION_WIDTH: f64 = 1e-12;

/// Field value, relative to the scene scale, below which a ray passing a
/// local minimum is taken to touch the surface.
const TOUCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayParams {
    /// March step where no distance bound is available.
    pub stride: f64,
    /// Smallest step taken when a distance bound is tiny.
    pub min_step: f64,
    pub grazing_tolerance: f64,
    pub max_steps: usize,
}

impl RayParams {
    /// Defaults scaled to the scene: stride `0.01 R`, minimum step `1e-6 R`.
    pub fn for_scene(scene: &Scene) -> Self {
        let r = scene.scale();
        RayParams {
            stride: 0.01 * r,
            min_step: 1e-6 * r,
            grazing_tolerance: GRAZING_TOLERANCE,
            max_steps: 100_000,
        }
    }

    /// Same parameters with both march steps scaled by `factor`.
    pub fn refined(self, factor: f64) -> Self {
        RayParams {
            stride: self.stride * factor,
            min_step: self.min_step * factor,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub point: Vector,
    pub time: f64,
    pub body_index: usize,
    /// Unit normal pointing out of the obstacle, into the domain.
    pub normal: UnitVector,
    pub grazing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayEvent {
    Hit(HitRecord),
    ExitSphere {
        point: Vector,
        time: f64,
    },
    /// The march exceeded its step budget.
    StepBudgetExhausted,
    /// The field gradient vanished at the refined crossing.
    GradientFailure {
        point: Vector,
        time: f64,
    },
}

struct Probe {
    value: f64,
    bound: f64,
}

#[inline]
fn probe(scene: &Scene, params: &RayParams, p: Vector) -> Probe {
    let mut value = f64::INFINITY;
    let mut bound = f64::INFINITY;
    for body in scene.bodies() {
        let f = body.eval(p);
        value = value.min(f);
        let b = body.distance_bound(p, f).unwrap_or(params.stride);
        bound = bound.min(b);
    }
    Probe { value, bound }
}

/// Earliest event along `q + t v`, `t > 1e-12`.
///
/// `q` must lie in the domain; it may sit on an obstacle surface, in which
/// case the crossing at the start is skipped.
pub fn first_hit(scene: &Scene, q: Vector, v: UnitVector, params: &RayParams) -> RayEvent {
    let dir = v.get();
    let t_exit = scene.bounding().exit_time(q, v);
    let exit = || RayEvent::ExitSphere {
        point: q + dir * t_exit,
        time: t_exit,
    };
    if scene.bodies().is_empty() {
        return exit();
    }

    let at = |t: f64| q + dir * t;
    let start = probe(scene, params, q);
    let (mut t_prev, mut bound_prev) = if start.value > 0.0 {
        (0.0, start.bound)
    } else {
        // On the surface (or a rounding error inside it): find the first
        // positive sample, shrinking toward the origin.
        let mut t_neg = params.min_step.min(t_exit);
        let first = probe(scene, params, at(t_neg));
        if first.value > 0.0 {
            (t_neg, first.bound)
        } else {
            let mut t = 0.5 * t_neg;
            loop {
                if t <= START_SKIP {
                    return grazing_start(scene, q);
                }
                if probe(scene, params, at(t)).value > 0.0 {
                    return refine(scene, params, q, v, t, t_neg);
                }
                t_neg = t;
                t *= 0.5;
            }
        }
    };

    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > params.max_steps {
            return RayEvent::StepBudgetExhausted;
        }
        let remaining = t_exit - t_prev;
        let step = bound_prev.max(params.min_step);
        if step >= remaining {
            if bound_prev >= remaining {
                return exit();
            }
            let end = probe(scene, params, at(t_exit));
            if end.value > 0.0 {
                return exit();
            }
            return refine(scene, params, q, v, t_prev, t_exit);
        }
        let t_next = t_prev + step;
        let p = probe(scene, params, at(t_next));
        if p.value <= 0.0 {
            return refine(scene, params, q, v, t_prev, t_next);
        }
        if bound_prev < params.min_step {
            if let Some(hit) = tangency(scene, params, q, v, t_prev, t_next) {
                return hit;
            }
        }
        t_prev = t_next;
        bound_prev = p.bound;
    }
}

/// Bisects `[a, b]` (field positive at `a`, non-positive at `b`) and builds
/// the hit record.
fn refine(scene: &Scene, params: &RayParams, q: Vector, v: UnitVector, a: f64, b: f64) -> RayEvent {
    let dir = v.get();
    let (mut a, mut b) = (a, b);
    while b - a > BISECTION_WIDTH {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if scene.eval(q + dir * m).0 > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let mut t = 0.5 * (a + b);
    let (value, index) = scene.eval(q + dir * t);
    let body = &scene.bodies()[index];
    let slope = body.gradient(q + dir * t).dot(dir);
    if slope != 0.0 {
        let polished = t - value / slope;
        if polished >= a && polished <= b {
            t = polished;
        }
    }
    let point = q + dir * t;
    let index = scene.eval(point).1;
    match scene.bodies()[index].inward_normal(point) {
        Ok(normal) => RayEvent::Hit(HitRecord {
            point,
            time: t,
            body_index: index,
            normal,
            grazing: normal.dot(dir) > -params.grazing_tolerance,
        }),
        Err(_) => RayEvent::GradientFailure { point, time: t },
    }
}

/// A forced step over `[a, b]` that passes a local minimum of the field
/// within the hit tolerance of zero is a tangential touch.
fn tangency(
    scene: &Scene,
    params: &RayParams,
    q: Vector,
    v: UnitVector,
    a: f64,
    b: f64,
) -> Option<RayEvent> {
    let dir = v.get();
    let slope = |t: f64| {
        let p = q + dir * t;
        let (_, index) = scene.eval(p);
        scene.bodies()[index].gradient(p).dot(dir)
    };
    if !(slope(a) < 0.0 && slope(b) > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..80 {
        let m = 0.5 * (lo + hi);
        if slope(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let t = 0.5 * (lo + hi);
    let point = q + dir * t;
    let (value, index) = scene.eval(point);
    if value > TOUCH_TOLERANCE * scene.scale() {
        return None;
    }
    Some(match scene.bodies()[index].inward_normal(point) {
        Ok(normal) => RayEvent::Hit(HitRecord {
            point,
            time: t,
            body_index: index,
            normal,
            grazing: normal.dot(dir) > -params.grazing_tolerance,
        }),
        Err(_) => RayEvent::GradientFailure { point, time: t },
    })
}

/// The ray leaves its start point straight into an obstacle.
fn grazing_start(scene: &Scene, q: Vector) -> RayEvent {
    let (_, index) = scene.eval(q);
    match scene.bodies()[index].inward_normal(q) {
        Ok(normal) => RayEvent::Hit(HitRecord {
            point: q,
            time: START_SKIP,
            body_index: index,
            normal,
            grazing: true,
        }),
        Err(_) => RayEvent::GradientFailure {
            point: q,
            time: START_SKIP,
        },
    }
}

impl RayEvent {
    pub fn time(&self) -> Option<f64> {
        match self {
            RayEvent::Hit(h) => Some(h.time),
            RayEvent::ExitSphere { time, .. } | RayEvent::GradientFailure { time, .. } => {
                Some(*time)
            }
            RayEvent::StepBudgetExhausted => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Body, SceneBuilder};

    fn ball_scene() -> Scene {
        SceneBuilder::new("unit", 2, Vector::ZERO, 3.0)
            .body(Body::ball(Vector::ZERO, 1.0).unwrap())
            .build()
            .unwrap()
    }

    fn x() -> UnitVector {
        UnitVector::planar_x()
    }

    #[test]
    fn head_on_chord() {
        let s = ball_scene();
        let p = RayParams::for_scene(&s);
        match first_hit(&s, Vector::planar(-2.0, 0.0), x(), &p) {
            RayEvent::Hit(h) => {
                assert!((h.time - 1.0).abs() < 1e-12);
                assert!(h.point.max_abs_diff(Vector::planar(-1.0, 0.0)) < 1e-12);
                assert!(h.normal.get().max_abs_diff(Vector::planar(-1.0, 0.0)) < 1e-12);
                assert!(!h.grazing);
                assert_eq!(h.body_index, 0);
            }
            other => panic!("expected a hit, got {other:?}"),
        }
    }

    #[test]
    fn miss_exits_the_sphere() {
        let s = ball_scene();
        let p = RayParams::for_scene(&s);
        match first_hit(&s, Vector::planar(-2.0, 2.0), x(), &p) {
            RayEvent::ExitSphere { point, time } => {
                let root5 = 5.0f64.sqrt();
                assert!((time - (2.0 + root5)).abs() < 1e-12);
                assert!(point.max_abs_diff(Vector::planar(root5, 2.0)) < 1e-12);
                assert!((point.norm() - 3.0).abs() < 1e-9 * 3.0);
            }
            other => panic!("expected exit, got {other:?}"),
        }
    }

    #[test]
    fn tangent_ray_is_grazing() {
        let s = ball_scene();
        let p = RayParams::for_scene(&s);
        match first_hit(&s, Vector::planar(-2.0, 1.0), x(), &p) {
            RayEvent::Hit(h) => {
                assert!(h.grazing);
                assert!((h.point.x()).abs() < 1e-5);
            }
            other => panic!("expected grazing hit, got {other:?}"),
        }
    }

    #[test]
    fn start_on_surface_is_skipped() {
        let s = ball_scene();
        let p = RayParams::for_scene(&s);
        // Leaving the ball surface outward.
        match first_hit(&s, Vector::planar(1.0, 0.0), x(), &p) {
            RayEvent::ExitSphere { time, .. } => assert!((time - 2.0).abs() < 1e-12),
            other => panic!("expected exit, got {other:?}"),
        }
    }

    #[test]
    fn hit_refinement_tolerance() {
        let s = ball_scene();
        let p = RayParams::for_scene(&s);
        let v = UnitVector::new(Vector::planar(1.0, 0.3)).unwrap();
        if let RayEvent::Hit(h) = first_hit(&s, Vector::planar(-2.5, -0.4), v, &p) {
            assert!(s.bodies()[0].eval(h.point).abs() <= 1e-9 * s.scale());
            assert!(h.normal.dot(v.get()) <= GRAZING_TOLERANCE);
            assert!(h.time > START_SKIP);
        } else {
            panic!("expected a hit");
        }
    }

    #[test]
    fn empty_scene_exit() {
        let s = SceneBuilder::new("empty", 2, Vector::ZERO, 1.0)
            .build()
            .unwrap();
        let p = RayParams::for_scene(&s);
        match first_hit(&s, Vector::planar(-1.0, 0.0), x(), &p) {
            RayEvent::ExitSphere { time, .. } => assert!((time - 2.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
