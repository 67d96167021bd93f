//! TOML scene descriptions.
//!
//! ```toml
//! name = "single_ball"
//! dimension = 2
//! min_separation = 1.5            # optional
//! strictly_convex_components = true
//!
//! [bounding_ball]
//! center = [0.0, 0.0]
//! radius = 2.0
//!
//! [[bodies]]
//! kind = "ball"
//! center = [0.0, 0.0]
//! radius = 0.5
//!
//! [perturbation]                  # optional
//! body = 0
//! center = [0.0, 0.0]
//! direction = [0.0, 1.0]
//! width = 0.5
//! ```
//!
//! Body kinds: `ball`, `ellipsoid` (`semi_axes`, optional `axes`),
//! `half_space` (`normal`, `offset`), `complement` (`body`),
//! `smooth_union` and `smooth_intersection` (`children`, optional `blend`,
//! default `0.05 R`), `radial_bump` (`base`, `amplitude`, `center`,
//! `direction`, `width`). Every vector has exactly `dimension` components
//! and unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{
    Body, BoundingBall, BumpFamily, RadialBump, Scene, SceneBuilder, UnitVector, Vector,
};

/// Default blend width relative to the bounding radius.
pub const DEFAULT_BLEND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
    #[serde(default)]
    pub strictly_convex_components: bool,
    pub bounding_ball: BoundingSpec,
    #[serde(default)]
    pub bodies: Vec<BodySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub body: usize,
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axes: Option<Vec<Vec<f64>>>,
    },
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    Complement {
        body: Box<BodySpec>,
    },
    SmoothUnion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blend: Option<f64>,
        children: Vec<BodySpec>,
    },
    SmoothIntersection {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blend: Option<f64>,
        children: Vec<BodySpec>,
    },
    RadialBump {
        amplitude: f64,
        center: Vec<f64>,
        direction: Vec<f64>,
        width: f64,
        base: Box<BodySpec>,
    },
}

struct Context {
    dimension: usize,
    default_blend: f64,
}

impl Context {
    fn vector(&self, what: &str, v: &[f64]) -> Result<Vector> {
        if v.len() != self.dimension {
            return Err(Error::Dimension(format!(
                "{what} has {} components in a {}-dimensional scene",
                v.len(),
                self.dimension
            )));
        }
        Vector::from_slice(v)
    }

    fn body(&self, spec: &BodySpec) -> Result<Body> {
        match spec {
            BodySpec::Ball { center, radius } => {
                Body::ball(self.vector("ball center", center)?, *radius)
            }
            BodySpec::Ellipsoid {
                center,
                semi_axes,
                axes,
            } => {
                if semi_axes.len() != self.dimension {
                    return Err(Error::Dimension(format!(
                        "ellipsoid has {} semi-axes in a {}-dimensional scene",
                        semi_axes.len(),
                        self.dimension
                    )));
                }
                let axes = axes
                    .as_ref()
                    .map(|a| {
                        a.iter()
                            .map(|v| self.vector("ellipsoid axis", v))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                Body::ellipsoid(
                    self.vector("ellipsoid center", center)?,
                    semi_axes,
                    axes.as_deref(),
                )
            }
            BodySpec::HalfSpace { normal, offset } => {
                Body::half_space(self.vector("half-space normal", normal)?, *offset)
            }
            BodySpec::Complement { body } => Ok(Body::complement(self.body(body)?)),
            BodySpec::SmoothUnion { blend, children } => Body::smooth_union(
                self.children(children)?,
                blend.unwrap_or(self.default_blend),
            ),
            BodySpec::SmoothIntersection { blend, children } => Body::smooth_intersection(
                self.children(children)?,
                blend.unwrap_or(self.default_blend),
            ),
            BodySpec::RadialBump {
                amplitude,
                center,
                direction,
                width,
                base,
            } => Ok(Body::RadialBump(RadialBump::new(
                self.body(base)?,
                *amplitude,
                self.vector("bump center", center)?,
                UnitVector::new(self.vector("bump direction", direction)?)?,
                *width,
            )?)),
        }
    }

    fn children(&self, specs: &[BodySpec]) -> Result<Vec<Body>> {
        specs.iter().map(|s| self.body(s)).collect()
    }
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<SceneFile> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene files always serialize")
    }

    /// Builds and validates the scene. `fallback_name` is used when the file
    /// has no `name`.
    pub fn to_scene(&self, fallback_name: &str) -> Result<Scene> {
        let cx = Context {
            dimension: self.dimension,
            default_blend: DEFAULT_BLEND * self.bounding_ball.radius,
        };
        if !(2..=3).contains(&self.dimension) {
            return Err(Error::Dimension(format!(
                "scene dimension must be 2 or 3, got {}",
                self.dimension
            )));
        }
        let bodies = cx.children(&self.bodies)?;
        let perturbation = self
            .perturbation
            .as_ref()
            .map(|p| -> Result<BumpFamily> {
                Ok(BumpFamily {
                    body: p.body,
                    center: cx.vector("perturbation center", &p.center)?,
                    direction: UnitVector::new(cx.vector("perturbation direction", &p.direction)?)?,
                    width: p.width,
                })
            })
            .transpose()?;
        let builder = SceneBuilder {
            name: self
                .name
                .clone()
                .unwrap_or_else(|| fallback_name.to_string()),
            dimension: self.dimension,
            bounding: BoundingBall {
                center: cx.vector("bounding ball center", &self.bounding_ball.center)?,
                radius: self.bounding_ball.radius,
            },
            bodies,
            min_separation: self.min_separation,
            strictly_convex_components: self.strictly_convex_components,
            perturbation,
        };
        builder.build()
    }

    /// Description of an existing scene; parsing it back yields an equal
    /// scene.
    pub fn from_scene(scene: &Scene) -> SceneFile {
        let n = scene.dimension();
        SceneFile {
            name: Some(scene.name.clone()),
            dimension: n,
            min_separation: scene.min_separation(),
            strictly_convex_components: scene.strictly_convex_components(),
            bounding_ball: BoundingSpec {
                center: scene.bounding().center.to_vec(n),
                radius: scene.radius(),
            },
            bodies: scene.bodies().iter().map(|b| body_spec(b, n)).collect(),
            perturbation: scene.perturbation().map(|p| PerturbationSpec {
                body: p.body,
                center: p.center.to_vec(n),
                direction: p.direction.get().to_vec(n),
                width: p.width,
            }),
        }
    }
}

fn body_spec(body: &Body, n: usize) -> BodySpec {
    match body {
        Body::Ball(b) => BodySpec::Ball {
            center: b.center.to_vec(n),
            radius: b.radius,
        },
        Body::Ellipsoid(e) => {
            let frame = e.axes();
            let identity = frame
                .iter()
                .enumerate()
                .all(|(i, a)| (0..n).all(|j| a.0[j] == if i == j { 1.0 } else { 0.0 }));
            BodySpec::Ellipsoid {
                center: e.center.to_vec(n),
                semi_axes: e.semi_axes().to_vec(),
                axes: (!identity).then(|| frame.iter().map(|a| a.to_vec(n)).collect()),
            }
        }
        Body::HalfSpace(h) => BodySpec::HalfSpace {
            normal: h.normal.get().to_vec(n),
            offset: h.offset,
        },
        Body::Complement(b) => BodySpec::Complement {
            body: Box::new(body_spec(b, n)),
        },
        Body::SmoothUnion(b) => BodySpec::SmoothUnion {
            blend: Some(b.blend),
            children: b.children.iter().map(|c| body_spec(c, n)).collect(),
        },
        Body::SmoothIntersection(b) => BodySpec::SmoothIntersection {
            blend: Some(b.blend),
            children: b.children.iter().map(|c| body_spec(c, n)).collect(),
        },
        Body::RadialBump(r) => BodySpec::RadialBump {
            amplitude: r.amplitude,
            center: r.center.to_vec(n),
            direction: r.direction.get().to_vec(n),
            width: r.width,
            base: Box::new(body_spec(&r.base, n)),
        },
    }
}

/// Parses and validates a scene description.
pub fn parse_scene(text: &str, fallback_name: &str) -> Result<Scene> {
    SceneFile::parse(text)?.to_scene(fallback_name)
}

/// SHA-256 of the canonical TOML form of the scene, hex encoded.
pub fn scene_hash(scene: &Scene) -> String {
    let text = SceneFile::from_scene(scene).to_toml();
    hex::encode(Sha256::digest(text.as_bytes()))
}
