//! Implicit-surface obstacles, scenes and perturbation families.

mod body;
mod scene;
mod vector;

pub use body::{
    ball_volume, Aabb, Ball, Blend, Body, Ellipsoid, HalfSpace, RadialBump, MIN_GRADIENT_NORM,
};
pub use scene::{
    perturb, sample_surface, spread_directions, BoundingBall, BumpFamily, Scene, SceneBuilder,
    SURFACE_SAMPLES,
};
pub use vector::{orthonormal_basis, UnitVector, Vector, UNIT_TOLERANCE};

/// Field value of `body` at `q`.
pub fn eval_body(body: &Body, q: Vector) -> f64 {
    body.eval(q)
}

/// Unit normal of `body` at a zero-set point, pointing into the domain.
pub fn inward_normal(body: &Body, q: Vector) -> crate::Result<UnitVector> {
    body.inward_normal(q)
}
