//! The billiard flow: specular reflection, the billiard ball map and full
//! trajectories from an entry point on the bounding sphere.

use crate::error::{Error, Result};
use crate::geometry::{Scene, UnitVector, Vector};
use crate::raycast::{first_hit, RayEvent, RayParams};

/// Position on the domain with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: Vector,
    pub v: UnitVector,
}

impl PhasePoint {
    pub fn new(q: Vector, v: UnitVector) -> Self {
        PhasePoint { q, v }
    }

    pub fn reversed(self) -> Self {
        PhasePoint {
            q: self.q,
            v: -self.v,
        }
    }
}

/// Censoring caps for a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caps {
    pub t_max: f64,
    pub k_max: u64,
}

impl Caps {
    /// `T_max = 1000 R`, `k_max = 10^4`.
    pub fn for_scene(scene: &Scene) -> Self {
        Caps {
            t_max: 1e3 * scene.scale(),
            k_max: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    Time,
    Reflections,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateReason {
    Grazing,
    StepBudget,
    GradientFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceOutcome {
    Exited {
        travel_time: f64,
        reflections: u64,
        /// Exit point on the sphere with the outgoing direction.
        exit: PhasePoint,
    },
    Censored {
        /// Time travelled, truncated at `T_max` for time-capped runs.
        elapsed: f64,
        reflections: u64,
        cap: CapKind,
    },
    Degenerate {
        reason: DegenerateReason,
        elapsed: f64,
        reflections: u64,
    },
}

impl TraceOutcome {
    pub fn elapsed(&self) -> f64 {
        match *self {
            TraceOutcome::Exited { travel_time, .. } => travel_time,
            TraceOutcome::Censored { elapsed, .. } | TraceOutcome::Degenerate { elapsed, .. } => {
                elapsed
            }
        }
    }

    pub fn reflections(&self) -> u64 {
        match *self {
            TraceOutcome::Exited { reflections, .. }
            | TraceOutcome::Censored { reflections, .. }
            | TraceOutcome::Degenerate { reflections, .. } => reflections,
        }
    }
}

/// One free flight of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Vector,
    pub direction: UnitVector,
    pub length: f64,
}

/// Specular reflection `v - 2 <n, v> n`.
#[inline]
pub fn reflect(v: UnitVector, normal: UnitVector) -> UnitVector {
    let n = normal.get();
    UnitVector::renormalized(v.get() - n * (2.0 * normal.dot(v.get())))
}

/// Flows a boundary state to the next boundary point (obstacle or sphere)
/// and reflects there.
pub fn billiard_map(
    scene: &Scene,
    x: PhasePoint,
    params: &RayParams,
) -> std::result::Result<PhasePoint, DegenerateReason> {
    match first_hit(scene, x.q, x.v, params) {
        RayEvent::Hit(hit) => {
            if hit.grazing {
                Err(DegenerateReason::Grazing)
            } else {
                Ok(PhasePoint::new(hit.point, reflect(x.v, hit.normal)))
            }
        }
        RayEvent::ExitSphere { point, .. } => {
            let normal = scene.bounding().inward_normal(point);
            if normal.dot(x.v.get()).abs() < params.grazing_tolerance {
                return Err(DegenerateReason::Grazing);
            }
            Ok(PhasePoint::new(point, reflect(x.v, normal)))
        }
        RayEvent::StepBudgetExhausted => Err(DegenerateReason::StepBudget),
        RayEvent::GradientFailure { .. } => Err(DegenerateReason::GradientFailure),
    }
}

/// Follows the trajectory entering at `entry` until it leaves the bounding
/// ball, hits a cap, or degenerates.
pub fn trace(scene: &Scene, entry: PhasePoint, caps: Caps, params: &RayParams) -> TraceOutcome {
    trace_with(scene, entry, caps, params, |_| {}, |_| {})
}

/// [`trace`] that also returns the reflection points in order.
pub fn trace_path(
    scene: &Scene,
    entry: PhasePoint,
    caps: Caps,
    params: &RayParams,
) -> (TraceOutcome, Vec<Vector>) {
    let mut points = Vec::new();
    let outcome = trace_with(scene, entry, caps, params, |_| {}, |p| points.push(p));
    (outcome, points)
}

/// [`trace`] with callbacks for every free-flight segment (truncated at the
/// time cap) and every reflection point.
pub fn trace_with(
    scene: &Scene,
    entry: PhasePoint,
    caps: Caps,
    params: &RayParams,
    mut on_segment: impl FnMut(Segment),
    mut on_reflection: impl FnMut(Vector),
) -> TraceOutcome {
    let mut q = entry.q;
    let mut v = entry.v;
    let mut elapsed = 0.0;
    let mut reflections = 0u64;
    loop {
        let event = first_hit(scene, q, v, params);
        let (t, end) = match event {
            RayEvent::Hit(h) => (h.time, h.point),
            RayEvent::ExitSphere { point, time } => (time, point),
            RayEvent::StepBudgetExhausted => {
                return TraceOutcome::Degenerate {
                    reason: DegenerateReason::StepBudget,
                    elapsed,
                    reflections,
                }
            }
            RayEvent::GradientFailure { .. } => {
                return TraceOutcome::Degenerate {
                    reason: DegenerateReason::GradientFailure,
                    elapsed,
                    reflections,
                }
            }
        };
        if elapsed + t > caps.t_max {
            on_segment(Segment {
                start: q,
                direction: v,
                length: caps.t_max - elapsed,
            });
            return TraceOutcome::Censored {
                elapsed: caps.t_max,
                reflections,
                cap: CapKind::Time,
            };
        }
        match event {
            RayEvent::Hit(h) if h.grazing => {
                return TraceOutcome::Degenerate {
                    reason: DegenerateReason::Grazing,
                    elapsed,
                    reflections,
                }
            }
            RayEvent::Hit(h) => {
                on_segment(Segment {
                    start: q,
                    direction: v,
                    length: t,
                });
                elapsed += t;
                reflections += 1;
                if reflections > caps.k_max {
                    return TraceOutcome::Censored {
                        elapsed,
                        reflections,
                        cap: CapKind::Reflections,
                    };
                }
                on_reflection(end);
                q = end;
                v = reflect(v, h.normal);
            }
            _ => {
                on_segment(Segment {
                    start: q,
                    direction: v,
                    length: t,
                });
                return TraceOutcome::Exited {
                    travel_time: elapsed + t,
                    reflections,
                    exit: PhasePoint::new(end, v),
                };
            }
        }
    }
}

/// Retraces an exited trajectory backwards from its exit state and returns
/// the largest distance between corresponding reflection points (including
/// the entry point).
pub fn time_reverse_check(
    scene: &Scene,
    entry: PhasePoint,
    caps: Caps,
    params: &RayParams,
) -> Result<f64> {
    let (forward, path) = trace_path(scene, entry, caps, params);
    let TraceOutcome::Exited { exit, .. } = forward else {
        return Err(Error::InvalidParameter(
            "time reversal needs an exited trajectory".into(),
        ));
    };
    let (backward, back_path) = trace_path(scene, exit.reversed(), caps, params);
    let TraceOutcome::Exited {
        exit: back_exit, ..
    } = backward
    else {
        return Err(Error::ReversalMismatch(format!(
            "reversed trajectory did not exit: {backward:?}"
        )));
    };
    if back_path.len() != path.len() {
        return Err(Error::ReversalMismatch(format!(
            "{} reflections forward, {} backward",
            path.len(),
            back_path.len()
        )));
    }
    let deviation = path
        .iter()
        .zip(back_path.iter().rev())
        .map(|(a, b)| a.distance(*b))
        .fold(back_exit.q.distance(entry.q), f64::max);
    if deviation > 1e-6 * scene.scale() {
        return Err(Error::ReversalMismatch(format!(
            "reflection points deviate by {deviation:e}"
        )));
    }
    Ok(deviation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Body, SceneBuilder};

    fn p(x: f64, y: f64) -> Vector {
        Vector::planar(x, y)
    }

    fn dir(x: f64, y: f64) -> UnitVector {
        UnitVector::new(p(x, y)).unwrap()
    }

    #[test]
    fn reflection_examples() {
        assert_eq!(reflect(dir(0.0, -1.0), dir(0.0, 1.0)).get(), p(0.0, 1.0));
        assert_eq!(reflect(dir(1.0, 0.0), dir(0.0, 1.0)).get(), p(1.0, 0.0));
        let r = reflect(dir(1.0, -1.0), dir(0.0, 1.0));
        assert!(r.get().max_abs_diff(dir(1.0, 1.0).get()) < 1e-15);
    }

    #[test]
    fn billiard_map_examples() {
        let disk = SceneBuilder::new("disk", 2, Vector::ZERO, 1.0)
            .build()
            .unwrap();
        let params = RayParams::for_scene(&disk);
        let y = billiard_map(&disk, PhasePoint::new(p(-1.0, 0.0), dir(1.0, 0.0)), &params).unwrap();
        assert!(y.q.max_abs_diff(p(1.0, 0.0)) < 1e-15);
        assert!(y.v.get().max_abs_diff(p(-1.0, 0.0)) < 1e-15);

        let ball = SceneBuilder::new("ball", 2, Vector::ZERO, 3.0)
            .body(Body::ball(Vector::ZERO, 1.0).unwrap())
            .build()
            .unwrap();
        let params = RayParams::for_scene(&ball);
        let y = billiard_map(&ball, PhasePoint::new(p(-3.0, 0.0), dir(1.0, 0.0)), &params).unwrap();
        assert!(y.q.max_abs_diff(p(-1.0, 0.0)) < 1e-12);
        assert!(y.v.get().max_abs_diff(p(-1.0, 0.0)) < 1e-12);

        let two = SceneBuilder::new("two", 2, Vector::ZERO, 5.0)
            .body(Body::ball(p(-2.0, 0.0), 1.0).unwrap())
            .body(Body::ball(p(2.0, 0.0), 1.0).unwrap())
            .build()
            .unwrap();
        let params = RayParams::for_scene(&two);
        let y = billiard_map(&two, PhasePoint::new(p(-1.0, 0.0), dir(1.0, 0.0)), &params).unwrap();
        assert!(y.q.max_abs_diff(p(1.0, 0.0)) < 1e-12);
        assert!(y.v.get().max_abs_diff(p(-1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn trace_examples() {
        let r = 1.5;
        let disk = SceneBuilder::new("disk", 2, Vector::ZERO, r)
            .build()
            .unwrap();
        let params = RayParams::for_scene(&disk);
        let out = trace(
            &disk,
            PhasePoint::new(p(-r, 0.0), dir(1.0, 0.0)),
            Caps::for_scene(&disk),
            &params,
        );
        match out {
            TraceOutcome::Exited {
                travel_time,
                reflections,
                exit,
            } => {
                assert!((travel_time - 2.0 * r).abs() < 1e-14);
                assert_eq!(reflections, 0);
                assert!(exit.q.max_abs_diff(p(r, 0.0)) < 1e-14);
            }
            other => panic!("{other:?}"),
        }

        let ball = SceneBuilder::new("ball", 2, Vector::ZERO, 3.0)
            .body(Body::ball(Vector::ZERO, 1.0).unwrap())
            .build()
            .unwrap();
        let params = RayParams::for_scene(&ball);
        let out = trace(
            &ball,
            PhasePoint::new(p(-3.0, 0.0), dir(1.0, 0.0)),
            Caps::for_scene(&ball),
            &params,
        );
        match out {
            TraceOutcome::Exited {
                travel_time,
                reflections,
                exit,
            } => {
                assert!((travel_time - 4.0).abs() < 1e-12);
                assert_eq!(reflections, 1);
                assert!(exit.q.max_abs_diff(p(-3.0, 0.0)) < 1e-12);
                assert!(exit.v.get().max_abs_diff(p(-1.0, 0.0)) < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn caps_censor_the_bouncing_ball_orbit() {
        let two = SceneBuilder::new("two", 2, Vector::ZERO, 5.0)
            .body(Body::ball(p(-2.0, 0.0), 1.0).unwrap())
            .body(Body::ball(p(2.0, 0.0), 1.0).unwrap())
            .build()
            .unwrap();
        let params = RayParams::for_scene(&two);
        let bounce = PhasePoint::new(p(-1.0, 0.0), dir(1.0, 0.0));
        let out = trace(
            &two,
            bounce,
            Caps {
                t_max: 100.0,
                k_max: 1000,
            },
            &params,
        );
        match out {
            TraceOutcome::Censored { elapsed, cap, .. } => {
                assert_eq!(cap, CapKind::Time);
                assert_eq!(elapsed, 100.0);
            }
            other => panic!("{other:?}"),
        }
        let out = trace(
            &two,
            bounce,
            Caps {
                t_max: 100.0,
                k_max: 5,
            },
            &params,
        );
        match out {
            TraceOutcome::Censored {
                reflections,
                cap,
                elapsed,
            } => {
                assert_eq!(cap, CapKind::Reflections);
                assert_eq!(reflections, 6);
                assert!((elapsed - 12.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn straight_chord_reverses_exactly() {
        let disk = SceneBuilder::new("disk", 2, Vector::ZERO, 1.0)
            .build()
            .unwrap();
        let params = RayParams::for_scene(&disk);
        let a = 0.7f64;
        let entry = PhasePoint::new(p(a.cos(), a.sin()), dir(-1.0, -0.2));
        let dev = time_reverse_check(&disk, entry, Caps::for_scene(&disk), &params).unwrap();
        assert!(dev <= 1e-10);
    }
}
