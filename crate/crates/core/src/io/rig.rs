//! Rig files: the camera set in the dotted-key grammar.
//!
//! ```text
//! camera.count = 6
//! camera.0.id = front
//! camera.0.intrinsics = fx s cx 0 fy cy 0 0 1   (9 numbers, row-major)
//! camera.0.size = width height
//! camera.0.rotation = 9 numbers, row-major camera-to-ego
//! camera.0.translation = x y z
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{CameraModel, GeometryError};
use crate::io::keyval::{fmt_f64, KeyVal, KeyValError};

#[derive(Debug, Error)]
pub enum RigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] KeyValError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("camera.{index}.size: values must be positive integers")]
    BadSize { index: usize },
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn matrix_row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

fn matrix_from_row_major(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

pub fn rig_to_keyval(rig: &[CameraModel]) -> KeyVal {
    let mut kv = KeyVal::new();
    kv.push("camera.count", rig.len());
    for (i, cam) in rig.iter().enumerate() {
        kv.push(&format!("camera.{i}.id"), &cam.camera_id);
        kv.push(
            &format!("camera.{i}.intrinsics"),
            fmt_list(&matrix_row_major(&cam.intrinsics)),
        );
        kv.push(&format!("camera.{i}.size"), format!("{} {}", cam.width, cam.height));
        kv.push(
            &format!("camera.{i}.rotation"),
            fmt_list(&matrix_row_major(&cam.rotation)),
        );
        kv.push(
            &format!("camera.{i}.translation"),
            fmt_list(cam.translation.as_slice()),
        );
    }
    kv
}

pub fn rig_from_keyval(kv: &KeyVal) -> Result<Vec<CameraModel>, RigError> {
    let count = kv.usize("camera.count")?;
    let mut rig = Vec::with_capacity(count);
    for i in 0..count {
        let id = kv.require(&format!("camera.{i}.id"))?;
        let k = kv.f64_list(&format!("camera.{i}.intrinsics"), 9)?;
        let size = kv.f64_list(&format!("camera.{i}.size"), 2)?;
        let rot = kv.f64_list(&format!("camera.{i}.rotation"), 9)?;
        let t = kv.f64_list(&format!("camera.{i}.translation"), 3)?;
        if size.iter().any(|&s| s <= 0.0 || s.fract() != 0.0 || s > u32::MAX as f64) {
            return Err(RigError::BadSize { index: i });
        }
        rig.push(CameraModel::new(
            id,
            matrix_from_row_major(&k),
            size[0] as u32,
            size[1] as u32,
            matrix_from_row_major(&rot),
            Vector3::new(t[0], t[1], t[2]),
        )?);
    }
    Ok(rig)
}

pub fn write_rig(path: &Path, rig: &[CameraModel]) -> Result<(), RigError> {
    fs::write(path, rig_to_keyval(rig).render())?;
    Ok(())
}

pub fn read_rig(path: &Path) -> Result<Vec<CameraModel>, RigError> {
    Ok(rig_from_keyval(&KeyVal::parse(&fs::read_to_string(path)?)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthworld::default_rig;

    #[test]
    fn rig_round_trips_exactly() {
        let rig = default_rig();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rig.txt");
        write_rig(&path, &rig).unwrap();
        let again = read_rig(&path).unwrap();
        assert_eq!(again.len(), rig.len());
        for (a, b) in rig.iter().zip(again.iter()) {
            assert_eq!(a.camera_id, b.camera_id);
            assert_eq!(a.intrinsics, b.intrinsics);
            assert_eq!((a.width, a.height), (b.width, b.height));
            assert_eq!(a.rotation, b.rotation);
            assert_eq!(a.translation, b.translation);
        }
    }

    #[test]
    fn invalid_rotation_is_rejected_on_read() {
        let rig = default_rig();
        let mut kv = rig_to_keyval(&rig[..1]);
        let mut broken = KeyVal::new();
        for (k, v) in kv.entries() {
            if k == "camera.0.rotation" {
                broken.push(k, "1 1 0 0 1 0 0 0 1");
            } else {
                broken.push(k, v);
            }
        }
        kv = broken;
        assert!(matches!(
            rig_from_keyval(&kv),
            Err(RigError::Geometry(GeometryError::BadRotation))
        ));
    }
}
