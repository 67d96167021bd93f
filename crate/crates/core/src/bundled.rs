//! Scenes shipped with the crate.

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::scene_file::parse_scene;

/// `(name, TOML source)` of every bundled scene.
pub const SCENES: &[(&str, &str)] = &[
    ("disk_empty", include_str!("../scenes/disk_empty.toml")),
    ("single_ball", include_str!("../scenes/single_ball.toml")),
    (
        "single_ball_3d",
        include_str!("../scenes/single_ball_3d.toml"),
    ),
    ("two_disks", include_str!("../scenes/two_disks.toml")),
    ("five_balls", include_str!("../scenes/five_balls.toml")),
    (
        "livshits_cavity",
        include_str!("../scenes/livshits_cavity.toml"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SCENES.iter().map(|(name, _)| *name)
}

pub fn source(name: &str) -> Option<&'static str> {
    SCENES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses and validates a bundled scene.
pub fn scene(name: &str) -> Result<Scene> {
    let text = source(name).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "no bundled scene `{name}` (available: {})",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_scene(text, name)
}

/// A bundled scene name, or else a path to a scene file.
pub fn load(name_or_path: &str) -> Result<Scene> {
    if source(name_or_path).is_some() {
        return scene(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    let stem = std::path::Path::new(name_or_path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene");
    parse_scene(&text, stem)
}
