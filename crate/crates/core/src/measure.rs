//! Liouville measure on the boundary sphere, normalization constants and
//! the counter-based random streams every estimator draws from.
//!
//! A sample is a pure function of `(seed, index)`: each index owns its own
//! ChaCha8 stream, so results do not depend on how indices are split across
//! workers.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::PhasePoint;
use crate::error::{Error, Result};
use crate::geometry::{ball_volume, orthonormal_basis, Body, Scene, UnitVector, Vector};

/// Default point count for Monte Carlo obstacle volumes.
pub const DEFAULT_VOLUME_POINTS: u64 = 10_000_000;

/// Independent purposes drawing from the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Entry = 0x454e_5452,
    Volume = 0x564f_4c55,
    Boundary = 0x424e_4452,
}

/// Random stream number `index` for `(seed, domain)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// `Vol_{n-1}(S^{n-1})`: `2 pi` for `n = 2`, `4 pi` for `n = 3`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * ball_volume(n, 1.0)
}

/// `∫ <nu, v> dv` over the inward hemisphere: `c_2 = 2`, `c_3 = pi`.
pub fn hemisphere_cosine_integral(n: usize) -> f64 {
    ball_volume(n - 1, 1.0)
}

/// Total Liouville mass of the inward-pointing states on the bounding sphere.
pub fn mu_total(scene: &Scene) -> f64 {
    let n = scene.dimension();
    unit_sphere_area(n) * scene.radius().powi(n as i32 - 1) * hemisphere_cosine_integral(n)
}

/// Cosine-weighted direction in the hemisphere around `normal`.
fn cosine_direction(rng: &mut ChaCha8Rng, dimension: usize, normal: Vector) -> UnitVector {
    if dimension == 2 {
        let tangent = Vector::planar(-normal.y(), normal.x());
        let sin = 2.0 * rng.random::<f64>() - 1.0;
        let cos = (1.0 - sin * sin).max(0.0).sqrt();
        UnitVector::renormalized(normal * cos + tangent * sin)
    } else {
        let (t, s) = orthonormal_basis(normal);
        let u: f64 = rng.random();
        let phi = 2.0 * PI * rng.random::<f64>();
        let rho = u.sqrt();
        let cos = (1.0 - u).max(0.0).sqrt();
        UnitVector::renormalized(t * (rho * phi.cos()) + s * (rho * phi.sin()) + normal * cos)
    }
}

/// Uniform point on the unit circle or sphere.
fn uniform_direction(rng: &mut ChaCha8Rng, dimension: usize) -> Vector {
    let phi = 2.0 * PI * rng.random::<f64>();
    if dimension == 2 {
        Vector::planar(phi.cos(), phi.sin())
    } else {
        let z = 1.0 - 2.0 * rng.random::<f64>();
        let rho = (1.0 - z * z).max(0.0).sqrt();
        Vector::new(rho * phi.cos(), rho * phi.sin(), z)
    }
}

/// Draws entry states from the normalized Liouville measure on the
/// inward-pointing boundary of the bounding ball.
#[derive(Debug, Clone, Copy)]
pub struct LiouvilleSampler<'a> {
    scene: &'a Scene,
    seed: u64,
}

impl<'a> LiouvilleSampler<'a> {
    pub fn new(scene: &'a Scene, seed: u64) -> Self {
        LiouvilleSampler { scene, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry state number `index`: uniform position on the sphere,
    /// cosine-weighted inward direction.
    pub fn sample_entry(&self, index: u64) -> PhasePoint {
        let mut rng = stream(self.seed, Domain::Entry, index);
        let n = self.scene.dimension();
        let m = self.scene.bounding();
        let outward = uniform_direction(&mut rng, n);
        let q = m.center + outward * m.radius;
        let v = cosine_direction(&mut rng, n, -outward);
        PhasePoint::new(q, v)
    }
}

/// A volume with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Points used; zero for closed-form values.
    pub points: u64,
}

impl VolumeEstimate {
    pub fn exact(value: f64) -> Self {
        VolumeEstimate {
            value,
            std_error: 0.0,
            points: 0,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.points == 0
    }
}

/// Volume of the obstacle union. Closed form when every body has one and
/// their bounding boxes are disjoint, rejection sampling in the obstacle
/// bounding box otherwise.
pub fn obstacle_volume(scene: &Scene, points: u64, seed: u64) -> VolumeEstimate {
    let n = scene.dimension();
    let bodies = scene.bodies();
    if bodies.is_empty() {
        return VolumeEstimate::exact(0.0);
    }
    let exact: Option<Vec<f64>> = bodies.iter().map(|b| b.exact_volume(n)).collect();
    if let Some(volumes) = exact {
        if boxes_disjoint(bodies, n) {
            return VolumeEstimate::exact(volumes.iter().sum());
        }
    }
    monte_carlo_volume(scene, points, seed)
}

fn boxes_disjoint(bodies: &[Body], n: usize) -> bool {
    let boxes: Vec<_> = bodies.iter().map(|b| b.bounding_box(0.0)).collect();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (Some(a), Some(b)) = (boxes[i], boxes[j]) else {
                return false;
            };
            let separated = (0..n).any(|k| a.max.0[k] <= b.min.0[k] || b.max.0[k] <= a.min.0[k]);
            if !separated {
                return false;
            }
        }
    }
    true
}

const VOLUME_CHUNK: u64 = 4096;

/// Rejection-sampled obstacle volume inside the obstacle bounding box.
pub fn monte_carlo_volume(scene: &Scene, points: u64, seed: u64) -> VolumeEstimate {
    let n = scene.dimension();
    let Some(bbox) = scene.obstacle_box() else {
        return VolumeEstimate::exact(0.0);
    };
    let points = points.max(1);
    let chunks = points.div_ceil(VOLUME_CHUNK);
    let inside: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Domain::Volume, c);
            let count = VOLUME_CHUNK.min(points - c * VOLUME_CHUNK);
            let mut hits = 0u64;
            for _ in 0..count {
                let mut p = Vector::ZERO;
                for k in 0..n {
                    p.0[k] = bbox.min.0[k] + (bbox.max.0[k] - bbox.min.0[k]) * rng.random::<f64>();
                }
                if scene.eval(p).0 < 0.0 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let box_volume = bbox.volume(n);
    let frac = inside as f64 / points as f64;
    VolumeEstimate {
        value: box_volume * frac,
        std_error: box_volume * (frac * (1.0 - frac) / points as f64).sqrt(),
        points,
    }
}

/// `λ(S(Ω)) = Vol_n(Ω) · Vol_{n-1}(S^{n-1})`, with the obstacle volume's
/// error propagated.
pub fn lambda_total(scene: &Scene, volume_points: u64, seed: u64) -> VolumeEstimate {
    let n = scene.dimension();
    let obstacle = obstacle_volume(scene, volume_points, seed);
    let sphere = unit_sphere_area(n);
    VolumeEstimate {
        value: (ball_volume(n, scene.radius()) - obstacle.value) * sphere,
        std_error: obstacle.std_error * sphere,
        points: obstacle.points,
    }
}

/// A state drawn from the Liouville measure on the whole boundary of the
/// domain (sphere and obstacles), with the index of its boundary component
/// (`0` is the sphere, `i + 1` is body `i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub state: PhasePoint,
    pub component: usize,
}

/// Liouville sampler on the full boundary of scenes whose obstacles are
/// balls.
#[derive(Debug, Clone)]
pub struct BoundarySampler<'a> {
    scene: &'a Scene,
    seed: u64,
    /// `(center, radius, inward sign)` per component.
    spheres: Vec<(Vector, f64, f64)>,
    cumulative: Vec<f64>,
}

impl<'a> BoundarySampler<'a> {
    pub fn new(scene: &'a Scene, seed: u64) -> Result<Self> {
        let n = scene.dimension() as i32;
        let m = scene.bounding();
        let mut spheres = vec![(m.center, m.radius, -1.0)];
        for body in scene.bodies() {
            match body {
                Body::Ball(b) => spheres.push((b.center, b.radius, 1.0)),
                _ => {
                    return Err(Error::Unsupported(
                        "boundary sampling needs ball obstacles".into(),
                    ))
                }
            }
        }
        let mut total = 0.0;
        let cumulative = spheres
            .iter()
            .map(|(_, r, _)| {
                total += r.powi(n - 1);
                total
            })
            .collect();
        Ok(BoundarySampler {
            scene,
            seed,
            spheres,
            cumulative,
        })
    }

    /// Boundary components as `(center, radius)`; index 0 is the sphere.
    pub fn components(&self) -> impl Iterator<Item = (Vector, f64)> + '_ {
        self.spheres.iter().map(|(c, r, _)| (*c, *r))
    }

    pub fn sample(&self, index: u64) -> BoundarySample {
        let mut rng = stream(self.seed, Domain::Boundary, index);
        let n = self.scene.dimension();
        let total = *self.cumulative.last().unwrap();
        let pick = rng.random::<f64>() * total;
        let component = self
            .cumulative
            .iter()
            .position(|c| pick < *c)
            .unwrap_or(self.cumulative.len() - 1);
        let (center, radius, sign) = self.spheres[component];
        let u = uniform_direction(&mut rng, n);
        let q = center + u * radius;
        let v = cosine_direction(&mut rng, n, u * sign);
        BoundarySample {
            state: PhasePoint::new(q, v),
            component,
        }
    }
}
