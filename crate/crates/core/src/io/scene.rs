//! Scene files: world content and trajectory in the dotted-key grammar.
//!
//! Either a single preset reference:
//!
//! ```text
//! scene.preset = moving_object
//! ```
//!
//! or a full description:
//!
//! ```text
//! scene.seed = 101
//! scene.channels = 32
//! rig = rig.txt                      # path relative to this file
//! frame.count = 2
//! frame.0.timestamp = 0
//! frame.0.rotation = 9 numbers
//! frame.0.translation = x y z
//! surface.count = 1
//! surface.0.center = x y z
//! surface.0.axis_a = x y z
//! surface.0.axis_b = x y z
//! surface.0.size = w h
//! surface.0.velocity = x y z
//! surface.0.texture_id = 0
//! surface.0.texture_scale = 0.35
//! flat.count = 0
//! flat.N.surface / flat.N.center / flat.N.half_size
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{EgoPose, GeometryError};
use crate::io::keyval::{fmt_f64, KeyVal, KeyValError};
use crate::io::rig::{read_rig, rig_to_keyval, RigError};
use crate::synthworld::{SceneSpec, Surface, SynthError, TexturelessRegion};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] KeyValError),
    #[error("rig '{path}': {source}")]
    Rig {
        path: String,
        #[source]
        source: RigError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SynthError),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

pub const PRESETS: &[&str] = &[
    "static_plane",
    "billboard_crossing",
    "moving_object",
    "range_spread",
];

pub fn preset(name: &str) -> Result<SceneSpec, SceneError> {
    match name {
        "static_plane" => Ok(SceneSpec::static_plane()),
        "billboard_crossing" => Ok(SceneSpec::billboard_crossing()),
        "moving_object" => Ok(SceneSpec::moving_object()),
        "range_spread" => Ok(SceneSpec::range_spread()),
        other => Err(SceneError::UnknownPreset(other.to_string())),
    }
}

fn fmt_vec3(v: &Vector3<f64>) -> String {
    format!("{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))
}

fn fmt_mat3(m: &Matrix3<f64>) -> String {
    let mut parts = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            parts.push(fmt_f64(m[(r, c)]));
        }
    }
    parts.join(" ")
}

fn vec3(kv: &KeyVal, key: &str) -> Result<Vector3<f64>, KeyValError> {
    let v = kv.f64_list(key, 3)?;
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn mat3(kv: &KeyVal, key: &str) -> Result<Matrix3<f64>, KeyValError> {
    let v = kv.f64_list(key, 9)?;
    Ok(Matrix3::new(
        v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8],
    ))
}

/// Renders the scene body (everything except the rig, which lives in its
/// own file referenced by the `rig` key).
pub fn scene_to_keyval(spec: &SceneSpec, rig_path: &str) -> KeyVal {
    let mut kv = KeyVal::new();
    kv.push("scene.seed", spec.seed);
    kv.push("scene.channels", spec.feature_channels);
    kv.push("rig", rig_path);
    kv.push("frame.count", spec.trajectory.len());
    for (i, pose) in spec.trajectory.iter().enumerate() {
        kv.push(&format!("frame.{i}.timestamp"), pose.timestamp);
        kv.push(&format!("frame.{i}.rotation"), fmt_mat3(&pose.rotation));
        kv.push(
            &format!("frame.{i}.translation"),
            fmt_vec3(&pose.translation),
        );
    }
    kv.push("surface.count", spec.surfaces.len());
    for (i, s) in spec.surfaces.iter().enumerate() {
        kv.push(&format!("surface.{i}.center"), fmt_vec3(&s.center));
        kv.push(&format!("surface.{i}.axis_a"), fmt_vec3(&s.axis_a));
        kv.push(&format!("surface.{i}.axis_b"), fmt_vec3(&s.axis_b));
        kv.push(
            &format!("surface.{i}.size"),
            format!("{} {}", fmt_f64(s.size.0), fmt_f64(s.size.1)),
        );
        kv.push(&format!("surface.{i}.velocity"), fmt_vec3(&s.velocity));
        kv.push(&format!("surface.{i}.texture_id"), s.texture_id);
        kv.push(
            &format!("surface.{i}.texture_scale"),
            fmt_f64(s.texture_scale),
        );
    }
    kv.push("flat.count", spec.textureless.len());
    for (i, r) in spec.textureless.iter().enumerate() {
        kv.push(&format!("flat.{i}.surface"), r.surface);
        kv.push(
            &format!("flat.{i}.center"),
            format!("{} {}", fmt_f64(r.center.0), fmt_f64(r.center.1)),
        );
        kv.push(
            &format!("flat.{i}.half_size"),
            format!("{} {}", fmt_f64(r.half_size.0), fmt_f64(r.half_size.1)),
        );
    }
    kv
}

/// Writes the scene file at `path` and its rig file next to it.
pub fn write_scene(path: &Path, spec: &SceneSpec, rig_name: &str) -> Result<(), SceneError> {
    let rig_path = path
        .parent()
        .map(|d| d.join(rig_name))
        .unwrap_or_else(|| rig_name.into());
    fs::write(&rig_path, rig_to_keyval(&spec.rig).render())?;
    fs::write(path, scene_to_keyval(spec, rig_name).render())?;
    Ok(())
}

/// Reads a scene file; a `scene.preset` key short-circuits to the named
/// preset, otherwise the full description (and its rig file, resolved
/// relative to the scene file) is loaded.
pub fn read_scene(path: &Path) -> Result<SceneSpec, SceneError> {
    let kv = KeyVal::parse(&fs::read_to_string(path)?)?;
    if let Some(name) = kv.get("scene.preset") {
        return preset(name);
    }
    let rig_name = kv.require("rig")?;
    let rig_path = path
        .parent()
        .map(|d| d.join(rig_name))
        .unwrap_or_else(|| rig_name.into());
    let rig = read_rig(&rig_path).map_err(|source| SceneError::Rig {
        path: rig_path.display().to_string(),
        source,
    })?;

    let mut trajectory = Vec::new();
    for i in 0..kv.usize("frame.count")? {
        trajectory.push(EgoPose::new(
            kv.i64(&format!("frame.{i}.timestamp"))?,
            mat3(&kv, &format!("frame.{i}.rotation"))?,
            vec3(&kv, &format!("frame.{i}.translation"))?,
        )?);
    }
    let mut surfaces = Vec::new();
    for i in 0..kv.usize("surface.count")? {
        let size = kv.f64_list(&format!("surface.{i}.size"), 2)?;
        surfaces.push(Surface {
            center: vec3(&kv, &format!("surface.{i}.center"))?,
            axis_a: vec3(&kv, &format!("surface.{i}.axis_a"))?,
            axis_b: vec3(&kv, &format!("surface.{i}.axis_b"))?,
            size: (size[0], size[1]),
            velocity: vec3(&kv, &format!("surface.{i}.velocity"))?,
            texture_id: kv.u64(&format!("surface.{i}.texture_id"))? as u32,
            texture_scale: kv.f64(&format!("surface.{i}.texture_scale"))?,
        });
    }
    let mut textureless = Vec::new();
    for i in 0..kv.usize("flat.count")? {
        let center = kv.f64_list(&format!("flat.{i}.center"), 2)?;
        let half = kv.f64_list(&format!("flat.{i}.half_size"), 2)?;
        textureless.push(TexturelessRegion {
            surface: kv.usize(&format!("flat.{i}.surface"))?,
            center: (center[0], center[1]),
            half_size: (half[0], half[1]),
        });
    }
    let spec = SceneSpec {
        seed: kv.u64("scene.seed")?,
        feature_channels: kv.usize("scene.channels")?,
        rig,
        trajectory,
        surfaces,
        textureless,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs_match(a: &SceneSpec, b: &SceneSpec) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.feature_channels, b.feature_channels);
        assert_eq!(a.rig.len(), b.rig.len());
        assert_eq!(a.trajectory.len(), b.trajectory.len());
        for (x, y) in a.trajectory.iter().zip(b.trajectory.iter()) {
            assert_eq!(x.timestamp, y.timestamp);
            assert_eq!(x.rotation, y.rotation);
            assert_eq!(x.translation, y.translation);
        }
        assert_eq!(a.surfaces.len(), b.surfaces.len());
        for (x, y) in a.surfaces.iter().zip(b.surfaces.iter()) {
            assert_eq!(x.center, y.center);
            assert_eq!(x.size, y.size);
            assert_eq!(x.velocity, y.velocity);
            assert_eq!(x.texture_id, y.texture_id);
            assert_eq!(x.texture_scale, y.texture_scale);
        }
        assert_eq!(a.textureless.len(), b.textureless.len());
    }

    #[test]
    fn full_scene_round_trips_through_the_text_grammar() {
        let spec = SceneSpec::moving_object();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        write_scene(&path, &spec, "rig.txt").unwrap();
        let again = read_scene(&path).unwrap();
        specs_match(&spec, &again);
    }

    #[test]
    fn preset_reference_loads_the_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        fs::write(&path, "scene.preset = range_spread\n").unwrap();
        let spec = read_scene(&path).unwrap();
        specs_match(&spec, &SceneSpec::range_spread());
        fs::write(&path, "scene.preset = not_a_scene\n").unwrap();
        assert!(matches!(
            read_scene(&path),
            Err(SceneError::UnknownPreset(_))
        ));
    }

    #[test]
    fn every_listed_preset_constructs() {
        for name in PRESETS {
            let spec = preset(name).unwrap();
            spec.validate().unwrap();
        }
    }

    #[test]
    fn missing_rig_file_is_reported_with_its_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        let spec = SceneSpec::static_plane();
        fs::write(&path, scene_to_keyval(&spec, "absent.txt").render()).unwrap();
        match read_scene(&path) {
            Err(SceneError::Rig { path, .. }) => assert!(path.contains("absent.txt")),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
