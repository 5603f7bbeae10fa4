//! Camera rig geometry: pinhole cameras on an ego body, relative poses
//! between (camera, time) pairs, and the plane-induced homographies that
//! drive the sweep.
//!
//! Conventions, fixed once and used everywhere:
//! - camera frame: x right, y down, z along the optical axis (depth);
//! - `CameraModel` stores the camera-to-ego rigid transform, `EgoPose` the
//!   ego-to-world transform of one frame;
//! - `RelativePose` maps reference-camera points to source-camera points,
//!   `X_src = R * X_ref + t`;
//! - pixel (u, v) means image coordinates where texel (i, j) has its center
//!   at (i + 0.5, j + 0.5); depth hypotheses are fronto-parallel planes
//!   `z = d` in the reference camera frame.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::hypotheses::DepthHypothesisSet;

/// Source-camera depths at or below this are treated as behind the camera.
pub const MIN_SOURCE_DEPTH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("intrinsics must be upper-triangular with positive focal lengths and K[2][2] = 1")]
    BadIntrinsics,
    #[error("rotation is not orthonormal with determinant +1 (tolerance 1e-9)")]
    BadRotation,
    #[error("camera size must be nonzero, got {width}x{height}")]
    BadSize { width: u32, height: u32 },
    #[error("plane depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("stride {stride} does not divide camera size {width}x{height}")]
    StrideMismatch { stride: u32, width: u32, height: u32 },
}

fn rotation_ok(r: &Matrix3<f64>) -> bool {
    let should_be_identity = r.transpose() * r;
    let mut err = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((should_be_identity[(i, j)] - target).abs());
        }
    }
    err < 1e-9 && (r.determinant() - 1.0).abs() < 1e-9
}

/// One pinhole camera rigidly mounted on the ego body.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub camera_id: String,
    /// Intrinsics K, upper-triangular, K[2][2] = 1.
    pub intrinsics: Matrix3<f64>,
    pub width: u32,
    pub height: u32,
    /// Camera-to-ego rotation.
    pub rotation: Matrix3<f64>,
    /// Camera-to-ego translation (camera center in the ego frame), meters.
    pub translation: Vector3<f64>,
}

impl CameraModel {
    pub fn new(
        camera_id: impl Into<String>,
        intrinsics: Matrix3<f64>,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let k = &intrinsics;
        let upper = k[(1, 0)].abs() <= 1e-12 && k[(2, 0)].abs() <= 1e-12 && k[(2, 1)].abs() <= 1e-12;
        if !upper || k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 || (k[(2, 2)] - 1.0).abs() > 1e-12 {
            return Err(GeometryError::BadIntrinsics);
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::BadSize { width, height });
        }
        if !rotation_ok(&rotation) {
            return Err(GeometryError::BadRotation);
        }
        Ok(Self {
            camera_id: camera_id.into(),
            intrinsics,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// Closed-form inverse of the upper-triangular K.
    pub fn intrinsics_inverse(&self) -> Matrix3<f64> {
        let k = &self.intrinsics;
        let (fx, s, cx) = (k[(0, 0)], k[(0, 1)], k[(0, 2)]);
        let (fy, cy) = (k[(1, 1)], k[(1, 2)]);
        Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            (s * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Feature-grid size at `stride`; errors unless stride divides both dims.
    pub fn feature_size(&self, stride: u32) -> Result<(usize, usize), GeometryError> {
        if stride == 0 || self.width % stride != 0 || self.height % stride != 0 {
            return Err(GeometryError::StrideMismatch {
                stride,
                width: self.width,
                height: self.height,
            });
        }
        Ok(((self.width / stride) as usize, (self.height / stride) as usize))
    }
}

/// Ego-to-world pose of one frame; `timestamp` is the frame index.
#[derive(Debug, Clone)]
pub struct EgoPose {
    pub timestamp: i64,
    /// Ego-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Ego-to-world translation, meters.
    pub translation: Vector3<f64>,
}

impl EgoPose {
    pub fn new(
        timestamp: i64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        if !rotation_ok(&rotation) {
            return Err(GeometryError::BadRotation);
        }
        Ok(Self {
            timestamp,
            rotation,
            translation,
        })
    }

    pub fn identity(timestamp: i64) -> Self {
        Self {
            timestamp,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// Rigid map from reference-camera coordinates to source-camera coordinates:
/// `X_src = rotation * X_ref + translation`.
#[derive(Debug, Clone)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RelativePose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }
}

/// Relative pose taking points in the reference camera frame (its ego at
/// `ref_ego`) to the source camera frame (its ego at `src_ego`).
///
/// Composition, right to left: camera_ref -> ego(ref) -> world ->
/// ego(src) -> camera_src.
pub fn compose_relative_pose(
    src_cam: &CameraModel,
    src_ego: &EgoPose,
    ref_cam: &CameraModel,
    ref_ego: &EgoPose,
) -> RelativePose {
    // world rotation/translation of each camera
    let r_ref_w = ref_ego.rotation * ref_cam.rotation;
    let t_ref_w = ref_ego.rotation * ref_cam.translation + ref_ego.translation;
    let r_src_w = src_ego.rotation * src_cam.rotation;
    let t_src_w = src_ego.rotation * src_cam.translation + src_ego.translation;

    let r_src_w_t = r_src_w.transpose();
    RelativePose {
        rotation: r_src_w_t * r_ref_w,
        translation: r_src_w_t * (t_ref_w - t_src_w),
    }
}

/// Homography induced by the plane `z = depth` in the reference camera.
#[derive(Debug, Clone)]
pub struct Homography {
    pub matrix: Matrix3<f64>,
    pub depth: f64,
}

impl Homography {
    /// Applies the homography to pixel (u, v); returns (u_src, v_src, w)
    /// where w * depth is the source-camera depth of the plane point.
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let p = self.matrix * Vector3::new(u, v, 1.0);
        (p.x / p.z, p.y / p.z, p.z)
    }
}

/// `H(d) = K_src (R + t n1^T / d) K_ref^{-1}` for the fronto-parallel plane
/// at depth `d` in the reference camera, `n1 = (0, 0, 1)`.
pub fn plane_homography(
    rel: &RelativePose,
    ref_cam: &CameraModel,
    src_cam: &CameraModel,
    depth: f64,
) -> Result<Homography, GeometryError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    let mut mid = rel.rotation;
    // t * n1^T only touches the third column.
    mid.column_mut(2).copy_from(&(rel.rotation.column(2) + rel.translation / depth));
    Ok(Homography {
        matrix: src_cam.intrinsics * mid * ref_cam.intrinsics_inverse(),
        depth,
    })
}

/// Homography limit for depth -> infinity (pure rotation of rays).
pub fn infinite_homography(
    rel: &RelativePose,
    ref_cam: &CameraModel,
    src_cam: &CameraModel,
) -> Matrix3<f64> {
    src_cam.intrinsics * rel.rotation * ref_cam.intrinsics_inverse()
}

/// Reference pixel pushed through explicit backproject / transform / project.
#[derive(Debug, Clone, Copy)]
pub struct SourceProjection {
    pub u: f64,
    pub v: f64,
    /// Depth of the 3D point in the source camera frame.
    pub z_src: f64,
}

impl SourceProjection {
    pub fn in_front(&self) -> bool {
        self.z_src > MIN_SOURCE_DEPTH
    }
}

/// Ground-truth projection used to certify the homography path: backproject
/// pixel (u, v) at `depth` in the reference camera, transform by `rel`,
/// project with the source intrinsics. When the point lands at or behind
/// the source camera (`z_src <= MIN_SOURCE_DEPTH`) the pixel coordinates are
/// NaN; callers must check `in_front` before using them.
pub fn project_point_oracle(
    pixel: (f64, f64),
    depth: f64,
    rel: &RelativePose,
    ref_cam: &CameraModel,
    src_cam: &CameraModel,
) -> SourceProjection {
    let ray = ref_cam.intrinsics_inverse() * Vector3::new(pixel.0, pixel.1, 1.0);
    let x_ref = ray * depth;
    let x_src = rel.transform(&x_ref);
    let z = x_src.z;
    if z <= MIN_SOURCE_DEPTH {
        return SourceProjection {
            u: f64::NAN,
            v: f64::NAN,
            z_src: z,
        };
    }
    let p = src_cam.intrinsics * x_src;
    SourceProjection {
        u: p.x / p.z,
        v: p.y / p.z,
        z_src: z,
    }
}

/// Precomputed warp targets: for every (source, depth bin, reference texel)
/// the source-image pixel coordinates plus a validity flag (inside the
/// source image and in front of the source camera).
///
/// Coordinates are stored as f32 (what the sampler consumes); validity is
/// decided on the stored values so a set flag guarantees in-bounds sampling.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub sources: usize,
    pub depth_count: usize,
    /// Reference grid height/width in texels (camera size / stride).
    pub height: usize,
    pub width: usize,
    pub stride: u32,
    us: Vec<f32>,
    vs: Vec<f32>,
    valid: Vec<bool>,
}

impl SampleGrid {
    #[inline]
    fn index(&self, source: usize, depth: usize, y: usize, x: usize) -> usize {
        ((source * self.depth_count + depth) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn coords(&self, source: usize, depth: usize, y: usize, x: usize) -> (f32, f32) {
        let i = self.index(source, depth, y, x);
        (self.us[i], self.vs[i])
    }

    #[inline]
    pub fn is_valid(&self, source: usize, depth: usize, y: usize, x: usize) -> bool {
        self.valid[self.index(source, depth, y, x)]
    }

    pub fn valid_total(&self) -> u64 {
        self.valid.iter().map(|&b| b as u64).sum()
    }
}

/// Projects every reference texel center through the plane homography of
/// every depth hypothesis into every source camera.
///
/// The reference grid has one cell per `stride x stride` pixel block; cell
/// (x, y) is the image point ((x + 0.5) * stride, (y + 0.5) * stride).
/// Validity of a target: `0 <= u < src.width`, `0 <= v < src.height` (on the
/// stored f32 values) and source depth above `MIN_SOURCE_DEPTH`.
pub fn sample_positions(
    ref_cam: &CameraModel,
    sources: &[(&CameraModel, &EgoPose)],
    ref_ego: &EgoPose,
    hypotheses: &DepthHypothesisSet,
    stride: u32,
) -> Result<SampleGrid, GeometryError> {
    let (width, height) = ref_cam.feature_size(stride)?;
    let depth_count = hypotheses.count();
    let cells = sources.len() * depth_count * height * width;
    let mut us = vec![0.0f32; cells];
    let mut vs = vec![0.0f32; cells];
    let mut valid = vec![false; cells];

    let plane = depth_count * height * width;
    for (s, (src_cam, src_ego)) in sources.iter().enumerate() {
        let rel = compose_relative_pose(src_cam, src_ego, ref_cam, ref_ego);
        let w_img = src_cam.width as f32;
        let h_img = src_cam.height as f32;
        let base = s * plane;
        for (d, &depth) in hypotheses.centers().iter().enumerate() {
            let h = plane_homography(&rel, ref_cam, src_cam, depth)?;
            let m = h.matrix;
            for y in 0..height {
                let vc = (y as f64 + 0.5) * stride as f64;
                let row = base + (d * height + y) * width;
                for x in 0..width {
                    let uc = (x as f64 + 0.5) * stride as f64;
                    let hx = m[(0, 0)] * uc + m[(0, 1)] * vc + m[(0, 2)];
                    let hy = m[(1, 0)] * uc + m[(1, 1)] * vc + m[(1, 2)];
                    let hw = m[(2, 0)] * uc + m[(2, 1)] * vc + m[(2, 2)];
                    let z_src = hw * depth;
                    let i = row + x;
                    if z_src > MIN_SOURCE_DEPTH {
                        let u = (hx / hw) as f32;
                        let v = (hy / hw) as f32;
                        us[i] = u;
                        vs[i] = v;
                        valid[i] = u >= 0.0 && u < w_img && v >= 0.0 && v < h_img;
                    }
                }
            }
        }
    }

    Ok(SampleGrid {
        sources: sources.len(),
        depth_count,
        height,
        width,
        stride,
        us,
        vs,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::DepthHypothesisSet;
    use nalgebra::{Matrix4, Rotation3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_k() -> Matrix3<f64> {
        Matrix3::new(700.0, 0.0, 352.0, 0.0, 700.0, 128.0, 0.0, 0.0, 1.0)
    }

    fn axis_cam(id: &str) -> CameraModel {
        CameraModel::new(id, simple_k(), 704, 256, Matrix3::identity(), Vector3::zeros()).unwrap()
    }

    /// Brute-force oracle: chain the four 4x4 homogeneous matrices.
    fn compose_oracle(
        src_cam: &CameraModel,
        src_ego: &EgoPose,
        ref_cam: &CameraModel,
        ref_ego: &EgoPose,
    ) -> Matrix4<f64> {
        fn homogeneous(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
            let mut m = Matrix4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
            m
        }
        let cam_to_ego_src = homogeneous(&src_cam.rotation, &src_cam.translation);
        let ego_to_world_src = homogeneous(&src_ego.rotation, &src_ego.translation);
        let cam_to_ego_ref = homogeneous(&ref_cam.rotation, &ref_cam.translation);
        let ego_to_world_ref = homogeneous(&ref_ego.rotation, &ref_ego.translation);
        (ego_to_world_src * cam_to_ego_src)
            .try_inverse()
            .unwrap()
            * ego_to_world_ref
            * cam_to_ego_ref
    }

    #[test]
    fn identical_camera_and_pose_is_identity() {
        let cam = axis_cam("c");
        let ego = EgoPose::identity(0);
        let rel = compose_relative_pose(&cam, &ego, &cam, &ego);
        assert!((rel.rotation - Matrix3::identity()).abs().max() < 1e-15);
        assert!(rel.translation.norm() < 1e-15);
    }

    #[test]
    fn forward_motion_puts_source_one_meter_behind() {
        // Ego drives 1 m along the camera's optical axis between the source
        // frame (t-1) and the reference frame (t). A static point is then
        // 1 m farther from the source camera: t_rel = (0, 0, +1). The
        // projection oracle cross-check below (depth 10 -> z_src = 11) pins
        // the same convention.
        let cam = axis_cam("c");
        let src_ego = EgoPose::identity(0);
        let ref_ego = EgoPose::new(1, Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let rel = compose_relative_pose(&cam, &src_ego, &cam, &ref_ego);
        assert!((rel.rotation - Matrix3::identity()).abs().max() < 1e-12);
        assert!((rel.translation - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);

        let p = project_point_oracle((352.0, 128.0), 10.0, &rel, &cam, &cam);
        assert!(p.in_front());
        assert!((p.z_src - 11.0).abs() < 1e-12, "z_src={}", p.z_src);
        assert!((p.u - 352.0).abs() < 1e-9 && (p.v - 128.0).abs() < 1e-9);
    }

    #[test]
    fn yawed_mounts_recover_relative_mount_rotation() {
        let yaw = 60f64.to_radians();
        let r60 = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw).into_inner();
        let a = CameraModel::new("a", simple_k(), 704, 256, Matrix3::identity(), Vector3::zeros())
            .unwrap();
        let b = CameraModel::new("b", simple_k(), 704, 256, r60, Vector3::new(0.3, 0.0, -0.1))
            .unwrap();
        let ego = EgoPose::identity(0);
        let rel = compose_relative_pose(&b, &ego, &a, &ego);
        assert!((rel.rotation - r60.transpose()).abs().max() < 1e-12);

        // Full 4x4 brute-force agreement on a batch of random rigs.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let rand_rot = |rng: &mut ChaCha8Rng| {
                let axis = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
                Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), rng.gen_range(-3.0..3.0))
                    .into_inner()
            };
            let rand_t = |rng: &mut ChaCha8Rng| {
                Vector3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            };
            let sc = CameraModel::new("s", simple_k(), 704, 256, rand_rot(&mut rng), rand_t(&mut rng)).unwrap();
            let rc = CameraModel::new("r", simple_k(), 704, 256, rand_rot(&mut rng), rand_t(&mut rng)).unwrap();
            let se = EgoPose::new(0, rand_rot(&mut rng), rand_t(&mut rng)).unwrap();
            let re = EgoPose::new(1, rand_rot(&mut rng), rand_t(&mut rng)).unwrap();
            let rel = compose_relative_pose(&sc, &se, &rc, &re);
            let oracle = compose_oracle(&sc, &se, &rc, &re);
            let ro = oracle.fixed_view::<3, 3>(0, 0).into_owned();
            let to = oracle.fixed_view::<3, 1>(0, 3).into_owned();
            assert!((rel.rotation - ro).abs().max() < 1e-9);
            assert!((rel.translation - to).norm() < 1e-9);
        }
    }

    #[test]
    fn identity_pose_gives_identity_homography() {
        let cam = axis_cam("c");
        let h = plane_homography(&RelativePose::identity(), &cam, &cam, 7.0).unwrap();
        assert!((h.matrix - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn infinite_depth_limit_is_rotation_only() {
        let cam = axis_cam("c");
        let yaw = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.4).into_inner();
        let rel = RelativePose {
            rotation: yaw,
            translation: Vector3::new(1.0, -0.5, 2.0),
        };
        let h_far = plane_homography(&rel, &cam, &cam, 1e9).unwrap().matrix;
        let h_inf = infinite_homography(&rel, &cam, &cam);
        let scale = h_inf.abs().max();
        assert!((h_far - h_inf).abs().max() / scale < 1e-6);
    }

    #[test]
    fn non_positive_depth_is_rejected() {
        let cam = axis_cam("c");
        assert!(plane_homography(&RelativePose::identity(), &cam, &cam, 0.0).is_err());
        assert!(plane_homography(&RelativePose::identity(), &cam, &cam, -3.0).is_err());
        assert!(plane_homography(&RelativePose::identity(), &cam, &cam, f64::NAN).is_err());
    }

    #[test]
    fn homography_matches_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0usize;
        while checked < 500 {
            let axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if axis.norm() < 1e-3 {
                continue;
            }
            let rel = RelativePose {
                rotation: Rotation3::from_axis_angle(
                    &nalgebra::Unit::new_normalize(axis),
                    rng.gen_range(-0.9..0.9),
                )
                .into_inner(),
                translation: Vector3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ),
            };
            let cam = axis_cam("c");
            let depth = rng.gen_range(2.0..58.0);
            let pixel = (rng.gen_range(0.0..704.0), rng.gen_range(0.0..256.0));
            let oracle = project_point_oracle(pixel, depth, &rel, &cam, &cam);
            if oracle.z_src <= 0.1 {
                continue;
            }
            let h = plane_homography(&rel, &cam, &cam, depth).unwrap();
            let (u, v, w) = h.apply(pixel.0, pixel.1);
            assert!((u - oracle.u).abs() < 1e-6, "u {} vs {}", u, oracle.u);
            assert!((v - oracle.v).abs() < 1e-6);
            assert!((w * depth - oracle.z_src).abs() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn forward_translation_roundtrips_through_shifted_plane() {
        // A fronto-parallel plane z = d in the reference frame is the plane
        // z = d + tz in a source frame offset purely along z, so the two
        // plane homographies must invert each other pointwise on the plane.
        let cam = axis_cam("c");
        let tz = 0.7;
        let fwd = RelativePose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(0.0, 0.0, tz),
        };
        let d = 12.5;
        let h_ab = plane_homography(&fwd, &cam, &cam, d).unwrap();
        let h_ba = plane_homography(&fwd.inverse(), &cam, &cam, d + tz).unwrap();
        for &(u, v) in &[(10.0, 10.0), (352.0, 128.0), (700.0, 250.0), (3.0, 200.0)] {
            let (us, vs, _) = h_ab.apply(u, v);
            let (ur, vr, _) = h_ba.apply(us, vs);
            assert!((ur - u).abs() < 1e-9 && (vr - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_motion_sample_grid_is_identity_and_valid() {
        let cam = axis_cam("c");
        let ego0 = EgoPose::identity(0);
        let ego1 = EgoPose::identity(1);
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 8).unwrap();
        let grid = sample_positions(&cam, &[(&cam, &ego0)], &ego1, &bins, 4).unwrap();
        assert_eq!((grid.width, grid.height), (176, 64));
        for d in 0..8 {
            for y in 0..grid.height {
                for x in 0..grid.width {
                    assert!(grid.is_valid(0, d, y, x));
                    let (u, v) = grid.coords(0, d, y, x);
                    assert!((u - (x as f32 + 0.5) * 4.0).abs() < 1e-3);
                    assert!((v - (y as f32 + 0.5) * 4.0).abs() < 1e-3);
                }
            }
        }
    }

    #[test]
    fn rotated_away_source_is_never_valid() {
        // Source camera looks the opposite way: every warp target is behind.
        let k = simple_k();
        let flip = Rotation3::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI).into_inner();
        let ref_cam = axis_cam("r");
        let src_cam = CameraModel::new("s", k, 704, 256, flip, Vector3::zeros()).unwrap();
        let ego = EgoPose::identity(0);
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 4).unwrap();
        let grid = sample_positions(&ref_cam, &[(&src_cam, &ego)], &ego, &bins, 16).unwrap();
        assert_eq!(grid.valid_total(), 0);
    }

    #[test]
    fn near_bin_validity_not_above_far_bin_for_forward_motion() {
        // Straight forward trajectory: the nearest plane sweeps fastest out
        // of the source frustum, so its valid count cannot exceed the
        // farthest bin's.
        let cam = axis_cam("c");
        let src_ego = EgoPose::identity(0);
        let ref_ego = EgoPose::new(1, Matrix3::identity(), Vector3::new(0.0, 0.0, 4.0)).unwrap();
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 16).unwrap();
        let grid = sample_positions(&cam, &[(&cam, &src_ego)], &ref_ego, &bins, 4).unwrap();
        let count = |d: usize| -> u64 {
            let mut n = 0;
            for y in 0..grid.height {
                for x in 0..grid.width {
                    n += grid.is_valid(0, d, y, x) as u64;
                }
            }
            n
        };
        assert!(count(0) <= count(15));
    }

    #[test]
    fn stride_must_divide_camera_size() {
        let cam = axis_cam("c");
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 2).unwrap();
        let err = sample_positions(&cam, &[], &EgoPose::identity(0), &bins, 3);
        assert!(matches!(err, Err(GeometryError::StrideMismatch { .. })));
    }
}
