//! Deterministic synthetic test world: textured rectangles in world space,
//! ray-cast into per-camera feature maps with exact depth, plus a synthetic
//! monocular depth head with controllable quality.
//!
//! Every rendered value is a pure function of the scene seed and geometry,
//! so renders are bit-identical across runs, platforms, and thread counts.
//! Depth is camera-frame z (not ray length): a fronto-parallel wall has one
//! depth everywhere, matching the plane-sweep hypothesis geometry.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::costvol::DepthLogits;
use crate::depthmap::DepthMap;
use crate::geometry::{CameraModel, EgoPose, GeometryError};
use crate::hypotheses::DepthHypothesisSet;
use crate::sweep::FeatureMap;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("surface {index}: {reason}")]
    BadSurface { index: usize, reason: &'static str },
    #[error("textureless region {index}: {reason}")]
    BadRegion { index: usize, reason: &'static str },
    #[error("scene: {0}")]
    BadScene(&'static str),
    #[error("frame {frame} out of range, trajectory has {frames}")]
    BadFrame { frame: usize, frames: usize },
    #[error("mono quality: {0}")]
    BadQuality(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One textured rectangle. `center` is its position at frame 0; it moves by
/// `velocity` (world meters) every frame. `axis_a` and `axis_b` span the
/// rectangle (orthogonal, any length; normalized internally) and `size` is
/// the full extent along each.
#[derive(Debug, Clone)]
pub struct Surface {
    pub center: Vector3<f64>,
    pub axis_a: Vector3<f64>,
    pub axis_b: Vector3<f64>,
    pub size: (f64, f64),
    pub velocity: Vector3<f64>,
    pub texture_id: u32,
    /// Correlation length of the texture, meters on the surface.
    pub texture_scale: f64,
}

impl Surface {
    /// Vertical wall whose tangent runs at `yaw_deg` + 90 degrees, i.e. the
    /// wall faces along the horizontal bearing `yaw_deg` (either side).
    pub fn wall(
        center: Vector3<f64>,
        yaw_deg: f64,
        width: f64,
        height: f64,
        texture_id: u32,
        texture_scale: f64,
    ) -> Self {
        let yaw = yaw_deg.to_radians();
        Surface {
            center,
            axis_a: Vector3::new(-yaw.sin(), yaw.cos(), 0.0),
            axis_b: Vector3::new(0.0, 0.0, 1.0),
            size: (width, height),
            velocity: Vector3::zeros(),
            texture_id,
            texture_scale,
        }
    }

    pub fn with_velocity(mut self, velocity: Vector3<f64>) -> Self {
        self.velocity = velocity;
        self
    }

    fn basis(&self, index: usize) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>), SynthError> {
        let na = self.axis_a.norm();
        let nb = self.axis_b.norm();
        if na < 1e-9 || nb < 1e-9 {
            return Err(SynthError::BadSurface {
                index,
                reason: "degenerate axis",
            });
        }
        let a = self.axis_a / na;
        let b = self.axis_b / nb;
        if a.dot(&b).abs() > 1e-9 {
            return Err(SynthError::BadSurface {
                index,
                reason: "axes are not orthogonal",
            });
        }
        if !(self.size.0 > 0.0) || !(self.size.1 > 0.0) {
            return Err(SynthError::BadSurface {
                index,
                reason: "size must be positive",
            });
        }
        if !(self.texture_scale > 0.0) {
            return Err(SynthError::BadSurface {
                index,
                reason: "texture scale must be positive",
            });
        }
        Ok((a, b, a.cross(&b)))
    }

    pub fn is_moving(&self) -> bool {
        self.velocity.norm_squared() > 0.0
    }
}

/// Axis-aligned patch of a surface (in its local a/b coordinates) that is
/// rendered with one flat color per channel instead of texture.
#[derive(Debug, Clone)]
pub struct TexturelessRegion {
    pub surface: usize,
    pub center: (f64, f64),
    pub half_size: (f64, f64),
}

/// A full synthetic scene: rig, ego trajectory (one pose per frame), and
/// world content.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub seed: u64,
    pub feature_channels: usize,
    pub rig: Vec<CameraModel>,
    pub trajectory: Vec<EgoPose>,
    pub surfaces: Vec<Surface>,
    pub textureless: Vec<TexturelessRegion>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.feature_channels == 0 {
            return Err(SynthError::BadScene("feature_channels must be positive"));
        }
        if self.rig.is_empty() {
            return Err(SynthError::BadScene("rig has no cameras"));
        }
        if self.trajectory.is_empty() {
            return Err(SynthError::BadScene("trajectory has no frames"));
        }
        for (i, s) in self.surfaces.iter().enumerate() {
            s.basis(i)?;
        }
        for (i, r) in self.textureless.iter().enumerate() {
            if r.surface >= self.surfaces.len() {
                return Err(SynthError::BadRegion {
                    index: i,
                    reason: "surface index out of range",
                });
            }
            if !(r.half_size.0 > 0.0) || !(r.half_size.1 > 0.0) {
                return Err(SynthError::BadRegion {
                    index: i,
                    reason: "half size must be positive",
                });
            }
        }
        Ok(())
    }
}

/// Everything rendered for one camera of one frame. Masks are row-major
/// over the feature grid.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub camera_index: usize,
    pub features: FeatureMap,
    /// Camera-frame z of the nearest hit; 0 where no surface is seen.
    pub gt_depth: DepthMap,
    pub moving_mask: Vec<bool>,
    pub textureless_mask: Vec<bool>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn hash_mix(values: &[u64]) -> u64 {
    let mut h = 0x243F6A8885A308D3u64;
    for &v in values {
        h = splitmix64(h ^ v);
    }
    h
}

/// Uniform in [-1.5, 1.5], zero mean over the hash ensemble.
fn hash_signed(values: &[u64]) -> f64 {
    (hash_mix(values) >> 11) as f64 * (3.0 / 9007199254740992.0) - 1.5
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Band-limited value noise on a surface: lattice values hashed from
/// (seed, texture, channel, cell), blended with smoothstep weights. The
/// correlation length is one lattice cell.
fn value_noise(seed: u64, texture_id: u32, channel: usize, x: f64, y: f64) -> f64 {
    let i = x.floor();
    let j = y.floor();
    let fx = smoothstep(x - i);
    let fy = smoothstep(y - j);
    let (i, j) = (i as i64, j as i64);
    let corner = |di: i64, dj: i64| {
        hash_signed(&[
            seed,
            texture_id as u64,
            channel as u64,
            (i + di) as u64,
            (j + dj) as u64,
        ])
    };
    let v00 = corner(0, 0);
    let v10 = corner(1, 0);
    let v01 = corner(0, 1);
    let v11 = corner(1, 1);
    let top = v00 + (v10 - v00) * fx;
    let bottom = v01 + (v11 - v01) * fx;
    top + (bottom - top) * fy
}

const FLAT_SALT: u64 = 0x464C4154;
const MONO_SALT: u64 = 0x4D4F4E4F;

struct PreparedSurface {
    center: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
    normal: Vector3<f64>,
    half: (f64, f64),
    moving: bool,
    texture_id: u32,
    texture_scale: f64,
}

struct Hit {
    surface: usize,
    t: f64,
    alpha: f64,
    beta: f64,
}

fn cast_ray(
    surfaces: &[PreparedSurface],
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (idx, s) in surfaces.iter().enumerate() {
        let den = s.normal.dot(dir);
        if den.abs() < 1e-12 {
            continue;
        }
        let t = s.normal.dot(&(s.center - origin)) / den;
        if t <= 1e-6 {
            continue;
        }
        if let Some(ref b) = best {
            if t >= b.t {
                continue;
            }
        }
        let p = origin + dir * t;
        let rel = p - s.center;
        let alpha = rel.dot(&s.a);
        let beta = rel.dot(&s.b);
        if alpha.abs() <= s.half.0 && beta.abs() <= s.half.1 {
            best = Some(Hit {
                surface: idx,
                t,
                alpha,
                beta,
            });
        }
    }
    best
}

/// Renders every rig camera of one frame at the given feature stride.
///
/// Depth hypotheses, features, and ground truth all share the same texel
/// convention: texel (x, y) looks through image point
/// ((x + 0.5) stride, (y + 0.5) stride).
pub fn render(
    spec: &SceneSpec,
    frame: usize,
    stride: u32,
) -> Result<Vec<RenderedFrame>, SynthError> {
    spec.validate()?;
    if frame >= spec.trajectory.len() {
        return Err(SynthError::BadFrame {
            frame,
            frames: spec.trajectory.len(),
        });
    }
    let ego = &spec.trajectory[frame];
    let shift = frame as f64;
    let mut prepared = Vec::with_capacity(spec.surfaces.len());
    for (i, s) in spec.surfaces.iter().enumerate() {
        let (a, b, normal) = s.basis(i)?;
        prepared.push(PreparedSurface {
            center: s.center + s.velocity * shift,
            a,
            b,
            normal,
            half: (s.size.0 * 0.5, s.size.1 * 0.5),
            moving: s.is_moving(),
            texture_id: s.texture_id,
            texture_scale: s.texture_scale,
        });
    }

    let mut frames = Vec::with_capacity(spec.rig.len());
    for (cam_idx, cam) in spec.rig.iter().enumerate() {
        let (fw, fh) = cam.feature_size(stride)?;
        let k_inv = cam.intrinsics_inverse();
        let cam_rot_world = ego.rotation * cam.rotation;
        let origin = ego.rotation * cam.translation + ego.translation;

        let channels = spec.feature_channels;
        let mut data = vec![0.0f32; channels * fh * fw];
        let mut gt = DepthMap::zeros(fw, fh, stride);
        let mut moving = vec![false; fh * fw];
        let mut flat = vec![false; fh * fw];

        for y in 0..fh {
            for x in 0..fw {
                let u = (x as f64 + 0.5) * stride as f64;
                let v = (y as f64 + 0.5) * stride as f64;
                let dir = cam_rot_world * (k_inv * Vector3::new(u, v, 1.0));
                let Some(hit) = cast_ray(&prepared, &origin, &dir) else {
                    continue;
                };
                // dir keeps the camera-frame z component equal to 1, so the
                // ray parameter is exactly the camera-frame depth.
                gt.set(y, x, hit.t);
                let s = &prepared[hit.surface];
                moving[y * fw + x] = s.moving;
                let region = spec
                    .textureless
                    .iter()
                    .position(|r| {
                        r.surface == hit.surface
                            && (hit.alpha - r.center.0).abs() <= r.half_size.0
                            && (hit.beta - r.center.1).abs() <= r.half_size.1
                    });
                flat[y * fw + x] = region.is_some();
                let base = (y * fw + x) * channels;
                for c in 0..channels {
                    let value = match region {
                        Some(ri) => {
                            hash_signed(&[spec.seed, FLAT_SALT, ri as u64, c as u64])
                        }
                        None => value_noise(
                            spec.seed,
                            s.texture_id,
                            c,
                            hit.alpha / s.texture_scale,
                            hit.beta / s.texture_scale,
                        ),
                    };
                    data[base + c] = value as f32;
                }
            }
        }

        let mut features = FeatureMap::from_fn(
            cam.camera_id.clone(),
            ego.timestamp,
            channels,
            fh,
            fw,
            stride,
            |_, _, _| 0.0,
        );
        for y in 0..fh {
            for x in 0..fw {
                let base = (y * fw + x) * channels;
                features
                    .texel_mut(y, x)
                    .copy_from_slice(&data[base..base + channels]);
            }
        }
        frames.push(RenderedFrame {
            camera_index: cam_idx,
            features,
            gt_depth: gt,
            moving_mask: moving,
            textureless_mask: flat,
        });
    }
    Ok(frames)
}

/// Quality knobs of the synthetic monocular depth head. `sigma_bins` is the
/// peak width at zero depth in bin units, `depth_growth` adds bins of width
/// per meter of truth, `noise` scales a per-(pixel, bin) logit jitter.
#[derive(Debug, Clone, Copy)]
pub struct MonoQuality {
    pub sigma_bins: f64,
    pub depth_growth: f64,
    pub noise: f64,
}

impl Default for MonoQuality {
    fn default() -> Self {
        Self {
            sigma_bins: 3.0,
            depth_growth: 0.12,
            noise: 0.4,
        }
    }
}

/// Synthetic monocular depth logits for one rendered frame: a quadratic
/// peak at the truth's fractional bin, width `sigma_bins + depth_growth *
/// truth`, plus deterministic jitter. Pixels without truth (sky) emit a
/// flat zero column, i.e. an uninformative uniform prior.
pub fn mono_oracle(
    frame: &RenderedFrame,
    bins: &DepthHypothesisSet,
    quality: &MonoQuality,
    seed: u64,
) -> Result<DepthLogits, SynthError> {
    if !(quality.sigma_bins > 0.0) {
        return Err(SynthError::BadQuality("sigma_bins must be positive"));
    }
    if quality.depth_growth < 0.0 {
        return Err(SynthError::BadQuality("depth_growth must not be negative"));
    }
    if quality.noise < 0.0 {
        return Err(SynthError::BadQuality("noise must not be negative"));
    }
    let (h, w) = (frame.features.height(), frame.features.width());
    let mut logits = DepthLogits::zeros(bins.clone(), h, w, frame.features.stride());
    let k = bins.count();
    for y in 0..h {
        for x in 0..w {
            let gt = frame.gt_depth.get(y, x);
            if gt <= 0.0 {
                continue;
            }
            let pos = bins.fractional_bin(gt);
            let sigma = quality.sigma_bins + quality.depth_growth * gt;
            let pixel = (y * w + x) as u64;
            let col = logits.column_mut(y, x);
            for (i, out) in col.iter_mut().enumerate().take(k) {
                let d = i as f64 - pos;
                let jitter = if quality.noise > 0.0 {
                    quality.noise * hash_signed(&[seed, MONO_SALT, pixel, i as u64]) / 1.5
                } else {
                    0.0
                };
                *out = -d * d / (2.0 * sigma * sigma) + jitter;
            }
        }
    }
    Ok(logits)
}

/// Z-buffers world points into a sparse depth map: each point projects into
/// the feature texel containing its image point and the smallest positive
/// camera-frame z per texel wins. Texels nothing projects into stay 0.
pub fn project_points_to_depth(
    points: &[Vector3<f64>],
    camera: &CameraModel,
    ego: &EgoPose,
    stride: u32,
) -> Result<DepthMap, SynthError> {
    let (fw, fh) = camera.feature_size(stride)?;
    let mut map = DepthMap::zeros(fw, fh, stride);
    let world_to_ego_rot = ego.rotation.transpose();
    let ego_to_cam_rot = camera.rotation.transpose();
    for p in points {
        let ego_p = world_to_ego_rot * (p - ego.translation);
        let cam_p = ego_to_cam_rot * (ego_p - camera.translation);
        if cam_p.z <= 1e-9 {
            continue;
        }
        let uvw = camera.intrinsics * cam_p;
        let u = uvw.x / uvw.z;
        let v = uvw.y / uvw.z;
        if u < 0.0 || v < 0.0 || u >= camera.width as f64 || v >= camera.height as f64 {
            continue;
        }
        let x = (u / stride as f64) as usize;
        let y = (v / stride as f64) as usize;
        if x >= fw || y >= fh {
            continue;
        }
        let cur = map.get(y, x);
        if cur == 0.0 || cam_p.z < cur {
            map.set(y, x, cam_p.z);
        }
    }
    Ok(map)
}

/// The standard six-camera rig: 70 degree horizontal FoV cameras at yaw
/// 0, 60, ..., 300 degrees, mounted 0.8 m from the ego center at 1.5 m
/// height. Image 704 x 256, principal point centered.
pub fn default_rig() -> Vec<CameraModel> {
    let names = [
        "front",
        "front_left",
        "back_left",
        "back",
        "back_right",
        "front_right",
    ];
    let f = 352.0 / (35.0f64.to_radians().tan());
    let k = Matrix3::new(f, 0.0, 352.0, 0.0, f, 128.0, 0.0, 0.0, 1.0);
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let yaw = (60.0 * i as f64).to_radians();
            let (s, c) = (yaw.sin(), yaw.cos());
            // Columns: camera x (right), y (down), z (forward) in the ego
            // frame (x forward, y left, z up).
            let rot = Matrix3::new(
                s, 0.0, c, //
                -c, 0.0, s, //
                0.0, -1.0, 0.0,
            );
            let t = Vector3::new(0.8 * c, 0.8 * s, 1.5);
            CameraModel::new(*name, k, 704, 256, rot, t).expect("rig camera is valid")
        })
        .collect()
}

fn bearing(deg: f64, dist: f64) -> Vector3<f64> {
    let r = deg.to_radians();
    Vector3::new(dist * r.cos(), dist * r.sin(), 0.0)
}

/// Six walls forming a closed hexagonal ring at `apothem` meters from the
/// world origin.
fn hexagon_ring(
    apothem: f64,
    width: f64,
    height: f64,
    texture_scale: f64,
    first_texture_id: u32,
) -> Vec<Surface> {
    (0..6)
        .map(|i| {
            let yaw = 60.0 * i as f64;
            let mut c = bearing(yaw, apothem);
            c.z = 1.5;
            Surface::wall(c, yaw, width, height, first_texture_id + i as u32, texture_scale)
        })
        .collect()
}

fn two_frame_trajectory(step: Vector3<f64>) -> Vec<EgoPose> {
    vec![
        EgoPose::identity(0),
        EgoPose::new(1, Matrix3::identity(), step).expect("identity rotation"),
    ]
}

impl SceneSpec {
    /// Static hexagon of textured walls around the ego; one diagonal step
    /// of 1 m between the two frames. The walls are wide enough that every
    /// camera sees only its own fronto-parallel wall (19-24 m) across its
    /// whole field of view.
    pub fn static_plane() -> SceneSpec {
        SceneSpec {
            seed: 101,
            feature_channels: 32,
            rig: default_rig(),
            trajectory: two_frame_trajectory(bearing(30.0, 1.0)),
            surfaces: hexagon_ring(20.0, 32.0, 14.0, 0.3, 0),
            textureless: Vec::new(),
        }
    }

    /// The ego yaws 50 degrees between frames, so a billboard seen by the
    /// front camera now was outside that camera's view in the previous
    /// frame; only another rig camera observed it. A distant ring provides
    /// background truth everywhere.
    pub fn billboard_crossing() -> SceneSpec {
        let step = bearing(-25.0, 1.0);
        let yaw = (-50.0f64).to_radians();
        let rot = Matrix3::new(
            yaw.cos(),
            -yaw.sin(),
            0.0,
            yaw.sin(),
            yaw.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        let mut surfaces = hexagon_ring(34.0, 40.5, 20.0, 1.4, 30);
        let mut center = step + bearing(-55.0, 17.0);
        center.z = 1.5;
        surfaces.push(Surface::wall(center, -55.0, 10.0, 7.0, 20, 0.35));
        SceneSpec {
            seed: 202,
            feature_channels: 32,
            rig: default_rig(),
            trajectory: vec![
                EgoPose::identity(0),
                EgoPose::new(1, rot, step).expect("valid yaw"),
            ],
            surfaces,
            textureless: Vec::new(),
        }
    }

    /// Static hexagon backdrop plus one laterally moving billboard in front
    /// of the ego, and a flat textureless patch on the front wall.
    pub fn moving_object() -> SceneSpec {
        let step = bearing(25.0, 2.5);
        let mut surfaces = hexagon_ring(24.0, 28.5, 14.0, 0.8, 10);
        let velocity = Vector3::new(0.0, -1.3, 0.0);
        let mut mover_center = step + bearing(0.0, 14.8) - velocity;
        mover_center.z = 1.5;
        surfaces.push(
            Surface::wall(mover_center, 0.0, 6.0, 4.0, 40, 0.3).with_velocity(velocity),
        );
        SceneSpec {
            seed: 303,
            feature_channels: 32,
            rig: default_rig(),
            trajectory: two_frame_trajectory(step),
            surfaces,
            textureless: vec![TexturelessRegion {
                surface: 0,
                center: (-6.0, 0.0),
                half_size: (2.0, 1.5),
            }],
        }
    }

    /// Five billboards spread over the whole depth range in front of the
    /// ego, with textures scaled to their distance; a 5 m diagonal step.
    pub fn range_spread() -> SceneSpec {
        let step = bearing(55.0, 5.0);
        let boards = [
            (27.0, 6.0, 1.5, 2.4, 0.2),
            (13.0, 12.0, 2.5, 4.5, 0.3),
            (-2.0, 25.0, 2.6, 8.0, 0.5),
            (-13.0, 37.0, 4.5, 12.0, 0.7),
            (-24.0, 51.0, 7.0, 16.0, 0.9),
        ];
        let surfaces = boards
            .iter()
            .enumerate()
            .map(|(i, &(deg, dist, w, h, scale))| {
                let mut c = step + bearing(deg, dist);
                c.z = 1.5;
                Surface::wall(c, deg, w, h, 50 + i as u32, scale)
            })
            .collect();
        SceneSpec {
            seed: 404,
            feature_channels: 32,
            rig: default_rig(),
            trajectory: two_frame_trajectory(step),
            surfaces,
            textureless: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::DepthMode;
    use crate::sweep::{build_warped_volume, SourceView, SweepMode};

    fn front_only_scene(wall_x: f64, width: f64, scale: f64) -> SceneSpec {
        SceneSpec {
            seed: 7,
            feature_channels: 8,
            rig: vec![default_rig()[0].clone()],
            trajectory: two_frame_trajectory(Vector3::new(1.0, 0.0, 0.0)),
            surfaces: vec![Surface::wall(
                Vector3::new(wall_x, 0.0, 1.5),
                180.0,
                width,
                14.0,
                3,
                scale,
            )],
            textureless: Vec::new(),
        }
    }

    #[test]
    fn rendering_is_bit_identical_across_runs() {
        let spec = SceneSpec::moving_object();
        let a = render(&spec, 1, 16).unwrap();
        let b = render(&spec, 1, 16).unwrap();
        for (fa, fb) in a.iter().zip(b.iter()) {
            assert_eq!(fa.features.to_chw(), fb.features.to_chw());
            assert_eq!(fa.gt_depth.data(), fb.gt_depth.data());
            assert_eq!(fa.moving_mask, fb.moving_mask);
        }
    }

    #[test]
    fn fronto_parallel_wall_has_constant_z_depth() {
        // z-depth of a fronto-parallel plane is the same for every pixel,
        // including oblique ones; ray length would grow off-center.
        let spec = front_only_scene(20.8, 32.0, 0.5);
        let frames = render(&spec, 0, 16).unwrap();
        let gt = &frames[0].gt_depth;
        assert_eq!(gt.observed(), gt.width() * gt.height());
        for &d in gt.data() {
            assert!((d - 20.0).abs() < 1e-9, "depth {d}");
        }
        assert!(frames[0].moving_mask.iter().all(|&m| !m));
    }

    #[test]
    fn feature_values_stay_inside_the_noise_range() {
        let spec = SceneSpec::range_spread();
        let frames = render(&spec, 1, 16).unwrap();
        let mut seen = 0usize;
        for f in &frames {
            for v in f.features.to_chw() {
                assert!(v.is_finite() && (-1.5..=1.5).contains(&v));
                if v != 0.0 {
                    seen += 1;
                }
            }
        }
        assert!(seen > 1000, "textured pixels rendered: {seen}");
    }

    #[test]
    fn texture_mean_is_near_zero() {
        let spec = front_only_scene(20.8, 32.0, 0.5);
        let frames = render(&spec, 0, 4).unwrap();
        let chw = frames[0].features.to_chw();
        let mean = chw.iter().map(|&v| v as f64).sum::<f64>() / chw.len() as f64;
        assert!(mean.abs() < 0.05, "texture mean {mean}");
    }

    #[test]
    fn nearer_surface_occludes() {
        let mut spec = front_only_scene(20.8, 32.0, 0.5);
        spec.surfaces.push(Surface::wall(
            Vector3::new(10.8, 0.0, 1.5),
            180.0,
            4.0,
            4.0,
            9,
            0.3,
        ));
        let frames = render(&spec, 0, 16).unwrap();
        let gt = &frames[0].gt_depth;
        // Principal texel: image point (352, 128) is texel (21, 7) at
        // stride 16 ((21 + 0.5) * 16 = 344 .. not exact center; use the
        // texel whose center ray passes closest to the axis: x = 21.97,
        // so texel 21 center is at u = 344, still on the near wall.
        let center = gt.get(7, 21);
        assert!((center - 10.0).abs() < 1e-9, "center {center}");
        let edge = gt.get(7, 0);
        assert!((edge - 20.0).abs() < 1e-9, "edge {edge}");
    }

    #[test]
    fn moving_object_mask_follows_velocity() {
        let spec = SceneSpec::moving_object();
        let frames = render(&spec, 1, 16).unwrap();
        let front = &frames[0];
        let w = front.gt_depth.width();
        let mut mover = 0;
        for y in 0..front.gt_depth.height() {
            for x in 0..w {
                let d = front.gt_depth.get(y, x);
                let m = front.moving_mask[y * w + x];
                if m {
                    mover += 1;
                    assert!(d < 18.0, "mover depth {d}");
                } else if d > 0.0 {
                    assert!(d > 18.0, "backdrop depth {d}");
                }
            }
        }
        assert!(mover > 20, "mover pixels {mover}");
    }

    #[test]
    fn textureless_region_is_flat_and_masked() {
        let spec = SceneSpec::moving_object();
        let frames = render(&spec, 1, 16).unwrap();
        let front = &frames[0];
        let w = front.gt_depth.width();
        let channels = front.features.channels();
        let mut flat_px = Vec::new();
        for y in 0..front.gt_depth.height() {
            for x in 0..w {
                if front.textureless_mask[y * w + x] {
                    flat_px.push((y, x));
                }
            }
        }
        assert!(flat_px.len() > 10, "flat pixels {}", flat_px.len());
        let first = front.features.texel(flat_px[0].0, flat_px[0].1).to_vec();
        for &(y, x) in &flat_px[1..] {
            assert_eq!(front.features.texel(y, x), &first[..]);
        }
        // The flat color is still a color, not all zeros.
        assert!(first.iter().any(|&v| v != 0.0));
        assert_eq!(first.len(), channels);
    }

    #[test]
    fn point_projection_z_buffers_per_texel() {
        let rig = default_rig();
        let cam = &rig[0];
        let ego = EgoPose::identity(0);
        // Points straight ahead of the front camera at (0.8, 0, 1.5).
        let points = vec![
            Vector3::new(10.8, 0.0, 1.5),
            Vector3::new(20.8, 0.0, 1.5),
            Vector3::new(-5.0, 0.0, 1.5),
        ];
        let map = project_points_to_depth(&points, cam, &ego, 16).unwrap();
        assert_eq!(map.observed(), 1);
        // Image point (352, 128) lies in texel (22, 8).
        assert_eq!(map.get(8, 22), 10.0);
    }

    #[test]
    fn warping_true_depth_reproduces_the_reference_almost_everywhere() {
        // One fronto-parallel wall at exactly 20 m from the second frame.
        // Warping the first frame onto a single hypothesis plane at 20 m
        // must reproduce the reference features up to interpolation error.
        let spec = front_only_scene(21.8, 34.0, 2.0);
        let f0 = render(&spec, 0, 4).unwrap();
        let f1 = render(&spec, 1, 4).unwrap();
        let bins = DepthHypothesisSet::with_mode(DepthMode::Uniform, 19.75, 20.25, 1).unwrap();
        assert_eq!(bins.center(0), 20.0);
        let cam = &spec.rig[0];
        let sources = [SourceView {
            features: &f0[0].features,
            camera: cam,
            ego: &spec.trajectory[0],
        }];
        let volume = build_warped_volume(
            cam,
            &spec.trajectory[1],
            &f1[0].features,
            &sources,
            &bins,
            SweepMode::Surround,
        )
        .unwrap();
        let (h, w) = (volume.height(), volume.width());
        let mut checked = 0usize;
        let mut close = 0usize;
        for y in 0..h {
            for x in 0..w {
                if volume.valid_count(0, y, x) == 0 {
                    continue;
                }
                let warped = volume.cell(0, y, x);
                let reference = f1[0].features.texel(y, x);
                for (a, b) in warped.iter().zip(reference.iter()) {
                    checked += 1;
                    if (a - b).abs() < 0.05 {
                        close += 1;
                    }
                }
            }
        }
        assert!(checked > 50_000, "checked {checked}");
        let frac = close as f64 / checked as f64;
        assert!(frac >= 0.99, "within tolerance: {frac}");
    }

    #[test]
    fn mono_oracle_peaks_at_the_true_bin_when_sharp() {
        let spec = front_only_scene(20.8, 32.0, 0.5);
        let frames = render(&spec, 0, 16).unwrap();
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 112).unwrap();
        let quality = MonoQuality {
            sigma_bins: 0.05,
            depth_growth: 0.0,
            noise: 0.0,
        };
        let logits = mono_oracle(&frames[0], &bins, &quality, 99).unwrap();
        let want = bins.nearest_bin(20.0);
        for y in 0..logits.height() {
            for x in 0..logits.width() {
                let col = logits.column(y, x);
                let mut best = 0;
                for (k, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = k;
                    }
                }
                assert_eq!(best, want);
            }
        }
    }

    #[test]
    fn mono_oracle_gives_sky_a_flat_column_and_rejects_bad_sigma() {
        let mut spec = front_only_scene(20.8, 32.0, 0.5);
        // Shrink the wall so corners of the view miss it.
        spec.surfaces[0].size = (10.0, 4.0);
        let frames = render(&spec, 0, 16).unwrap();
        let bins = DepthHypothesisSet::sid(2.0, 58.0, 14).unwrap();
        let logits = mono_oracle(&frames[0], &bins, &MonoQuality::default(), 1).unwrap();
        let gt = &frames[0].gt_depth;
        let mut sky = 0;
        for y in 0..logits.height() {
            for x in 0..logits.width() {
                if gt.get(y, x) == 0.0 {
                    sky += 1;
                    assert!(logits.column(y, x).iter().all(|&v| v == 0.0));
                }
            }
        }
        assert!(sky > 0);
        let bad = MonoQuality {
            sigma_bins: 0.0,
            ..MonoQuality::default()
        };
        assert!(matches!(
            mono_oracle(&frames[0], &bins, &bad, 1),
            Err(SynthError::BadQuality(_))
        ));
    }

    #[test]
    fn default_rig_has_six_valid_cameras_sixty_degrees_apart() {
        let rig = default_rig();
        assert_eq!(rig.len(), 6);
        let f = 352.0 / (35.0f64.to_radians().tan());
        for (i, cam) in rig.iter().enumerate() {
            assert!((cam.intrinsics[(0, 0)] - f).abs() < 1e-9);
            assert_eq!((cam.width, cam.height), (704, 256));
            // Forward axis of camera i is at yaw 60 i degrees.
            let fwd = cam.rotation * Vector3::new(0.0, 0.0, 1.0);
            let yaw = (60.0 * i as f64).to_radians();
            assert!((fwd - Vector3::new(yaw.cos(), yaw.sin(), 0.0)).norm() < 1e-12);
            // Mounted 0.8 m out, 1.5 m up.
            assert!((cam.translation.z - 1.5).abs() < 1e-12);
            assert!((cam.translation.xy().norm() - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_validate_and_render() {
        // The first three enclose the rig in a backdrop ring, so nearly every
        // texel sees geometry; range_spread is open sky behind its boards.
        for (spec, min_observed) in [
            (SceneSpec::static_plane(), 3000),
            (SceneSpec::billboard_crossing(), 3000),
            (SceneSpec::moving_object(), 3000),
            (SceneSpec::range_spread(), 400),
        ] {
            spec.validate().unwrap();
            assert_eq!(spec.trajectory.len(), 2);
            let frames = render(&spec, 1, 16).unwrap();
            assert_eq!(frames.len(), 6);
            let observed: usize = frames.iter().map(|f| f.gt_depth.observed()).sum();
            assert!(observed > min_observed, "observed {observed}");
        }
    }
}
