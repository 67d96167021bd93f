//! Shared test oracles: closed-form ray/quadric intersections computed
//! independently of the marching solver.

#![allow(dead_code)]

use billiards::geometry::{Body, Scene, UnitVector, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest root of `a t^2 + 2 b t + c = 0` with the ray entering the
/// quadric (`c > 0`, start outside), or `None`.
fn entering_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if c <= 0.0 || b >= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    // c / (-b + sqrt(disc)) avoids cancellation for the near root.
    Some(c / (-b + disc.sqrt()))
}

/// Entry time of `q + t v` into a ball or ellipsoid.
pub fn quadric_entry(body: &Body, q: Vector, v: Vector) -> Option<f64> {
    match body {
        Body::Ball(ball) => {
            let p = q - ball.center;
            entering_root(1.0, p.dot(v), p.dot(p) - ball.radius * ball.radius)
        }
        Body::Ellipsoid(e) => {
            let p = q - e.center;
            let (mut a, mut b, mut c) = (0.0, 0.0, -1.0);
            for (axis, s) in e.axes().iter().zip(e.semi_axes()) {
                let pl = axis.dot(p) / s;
                let vl = axis.dot(v) / s;
                a += vl * vl;
                b += pl * vl;
                c += pl * pl;
            }
            entering_root(a, b, c)
        }
        _ => panic!("no closed form for {body:?}"),
    }
}

/// Time at which `q + t v` leaves the bounding sphere.
pub fn sphere_exit(scene: &Scene, q: Vector, v: Vector) -> f64 {
    let m = scene.bounding();
    let p = q - m.center;
    let b = p.dot(v);
    let c = p.dot(p) - m.radius * m.radius;
    -b + (b * b - c).sqrt()
}

/// Earliest closed-form event: `(time, Some(body))` for a hit, `(time, None)`
/// for the sphere exit.
pub fn oracle_event(scene: &Scene, q: Vector, v: Vector) -> (f64, Option<usize>) {
    let exit = sphere_exit(scene, q, v);
    scene
        .bodies()
        .iter()
        .enumerate()
        .filter_map(|(i, b)| quadric_entry(b, q, v).map(|t| (t, Some(i))))
        .filter(|(t, _)| *t < exit)
        .fold((exit, None), |best, x| if x.0 < best.0 { x } else { best })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_direction(rng: &mut ChaCha8Rng, dimension: usize) -> UnitVector {
    loop {
        let mut v = Vector::ZERO;
        for k in 0..dimension {
            v.0[k] = rng.random_range(-1.0..1.0);
        }
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitVector::new(v).unwrap();
        }
    }
}

/// Uniform point of the domain (inside the bounding ball, outside every
/// obstacle).
pub fn random_domain_point(rng: &mut ChaCha8Rng, scene: &Scene) -> Vector {
    let n = scene.dimension();
    let m = scene.bounding();
    loop {
        let mut p = Vector::ZERO;
        for k in 0..n {
            p.0[k] = rng.random_range(-1.0..1.0);
        }
        if p.norm() >= 1.0 {
            continue;
        }
        let q = m.center + p * m.radius;
        if scene.eval(q).0 > 0.0 {
            return q;
        }
    }
}

/// Central finite-difference gradient with step `h`.
pub fn fd_gradient(body: &Body, q: Vector, dimension: usize, h: f64) -> Vector {
    let mut g = Vector::ZERO;
    for k in 0..dimension {
        let mut e = Vector::ZERO;
        e.0[k] = h;
        g.0[k] = (body.eval(q + e) - body.eval(q - e)) / (2.0 * h);
    }
    g
}

/// Scenes whose obstacles all have closed-form intersections.
pub fn quadric_scenes() -> Vec<Scene> {
    use billiards::bundled;
    use billiards::geometry::SceneBuilder;
    let mut scenes: Vec<Scene> = ["single_ball", "single_ball_3d", "two_disks", "five_balls"]
        .iter()
        .map(|n| bundled::scene(n).unwrap())
        .collect();
    let (c, s) = (0.6f64.cos(), 0.6f64.sin());
    scenes.push(
        SceneBuilder::new("ellipses", 2, Vector::ZERO, 3.0)
            .body(
                Body::ellipsoid(
                    Vector::planar(-1.0, 0.5),
                    &[0.9, 0.3],
                    Some(&[Vector::planar(c, s), Vector::planar(-s, c)]),
                )
                .unwrap(),
            )
            .body(Body::ellipsoid(Vector::planar(1.2, -0.4), &[0.4, 1.0], None).unwrap())
            .build()
            .unwrap(),
    );
    scenes.push(
        SceneBuilder::new("ellipsoids", 3, Vector::ZERO, 3.0)
            .body(Body::ellipsoid(Vector::new(0.8, 0.0, 0.2), &[0.5, 1.1, 0.7], None).unwrap())
            .body(Body::ball(Vector::new(-1.2, 0.3, -0.5), 0.6).unwrap())
            .build()
            .unwrap(),
    );
    scenes
}
