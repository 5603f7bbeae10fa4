//! Plane-sweep warping: bilinear feature sampling and construction of the
//! warped feature volume that the cost volume is correlated against.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{sample_positions, CameraModel, EgoPose, GeometryError};
use crate::hypotheses::DepthHypothesisSet;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("feature map data length {got} does not match {channels}x{height}x{width}")]
    ShapeMismatch {
        got: usize,
        channels: usize,
        height: usize,
        width: usize,
    },
    #[error("feature map contains a non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("source '{id}' disagrees with reference in channels or stride")]
    SourceMismatch { id: String },
    #[error("feature map for '{id}' does not match its camera size at stride {stride}")]
    CameraMismatch { id: String, stride: u32 },
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

/// A dense C x H' x W' feature map at `stride` (H' = image height / stride).
/// Values are stored texel-major (`[y][x][c]`) so one texel's channel vector
/// is contiguous for sampling and correlation.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    stride: u32,
    pub camera_id: String,
    pub timestamp: i64,
    data: Vec<f32>,
}

impl FeatureMap {
    /// Builds from channel-major (`[c][y][x]`) data, the on-disk layout.
    pub fn from_chw(
        camera_id: impl Into<String>,
        timestamp: i64,
        channels: usize,
        height: usize,
        width: usize,
        stride: u32,
        chw: &[f32],
    ) -> Result<Self, SweepError> {
        if chw.len() != channels * height * width {
            return Err(SweepError::ShapeMismatch {
                got: chw.len(),
                channels,
                height,
                width,
            });
        }
        if let Some(bad) = chw.iter().position(|v| !v.is_finite()) {
            return Err(SweepError::NonFinite(bad));
        }
        let mut data = vec![0.0f32; chw.len()];
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data[(y * width + x) * channels + c] = chw[(c * height + y) * width + x];
                }
            }
        }
        Ok(Self {
            channels,
            height,
            width,
            stride,
            camera_id: camera_id.into(),
            timestamp,
            data,
        })
    }

    /// Builds by evaluating `f(channel, y, x)` on every texel.
    pub fn from_fn(
        camera_id: impl Into<String>,
        timestamp: i64,
        channels: usize,
        height: usize,
        width: usize,
        stride: u32,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = vec![0.0f32; channels * height * width];
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data[(y * width + x) * channels + c] = f(c, y, x);
                }
            }
        }
        Self {
            channels,
            height,
            width,
            stride,
            camera_id: camera_id.into(),
            timestamp,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    #[inline]
    pub fn texel(&self, y: usize, x: usize) -> &[f32] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    #[inline]
    pub fn texel_mut(&mut self, y: usize, x: usize) -> &mut [f32] {
        let base = (y * self.width + x) * self.channels;
        &mut self.data[base..base + self.channels]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Channel-major copy (`[c][y][x]`), the on-disk layout.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = vec![0.0f32; self.data.len()];
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out[(c * self.height + y) * self.width + x] =
                        self.data[(y * self.width + x) * self.channels + c];
                }
            }
        }
        out
    }

    /// Bilinear sample at image pixel (u, v); neighbors are clamped at the
    /// map border (constant extrapolation inside the outer half-texel ring).
    #[inline]
    fn sample_into(&self, u: f32, v: f32, out: &mut [f32]) {
        let x = u / self.stride as f32 - 0.5;
        let y = v / self.stride as f32 - 0.5;
        let x0f = x.floor();
        let y0f = y.floor();
        let fx = x - x0f;
        let fy = y - y0f;
        let clamp = |i: i64, n: usize| -> usize { i.clamp(0, n as i64 - 1) as usize };
        let x0 = clamp(x0f as i64, self.width);
        let x1 = clamp(x0f as i64 + 1, self.width);
        let y0 = clamp(y0f as i64, self.height);
        let y1 = clamp(y0f as i64 + 1, self.height);
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let t00 = self.texel(y0, x0);
        let t10 = self.texel(y0, x1);
        let t01 = self.texel(y1, x0);
        let t11 = self.texel(y1, x1);
        for c in 0..self.channels {
            out[c] = w00 * t00[c] + w10 * t10[c] + w01 * t01[c] + w11 * t11[c];
        }
    }
}

/// Bilinear sample of all channels at image pixel (u, v). The coordinate
/// must be inside the image (`0 <= u < width * stride` etc.); sampling
/// outside the validity mask is a caller bug, not a recoverable state.
pub fn bilinear_sample(map: &FeatureMap, u: f32, v: f32) -> Vec<f32> {
    let w = (map.width as u32 * map.stride) as f32;
    let h = (map.height as u32 * map.stride) as f32;
    assert!(
        u >= 0.0 && u < w && v >= 0.0 && v < h,
        "bilinear sample at ({u}, {v}) outside image {w}x{h}; pre-filter with the validity mask"
    );
    let mut out = vec![0.0f32; map.channels];
    map.sample_into(u, v, &mut out);
    out
}

/// Which source cameras may contribute to a reference camera's volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// All rig cameras of the source frame (cross-camera matching).
    Surround,
    /// Only the source frame's camera with the reference camera's id.
    SameCamera,
}

impl SweepMode {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMode::Surround => "surround",
            SweepMode::SameCamera => "same_camera",
        }
    }
}

/// One source view: a feature map plus the camera and ego pose it was
/// captured with.
#[derive(Debug, Clone, Copy)]
pub struct SourceView<'a> {
    pub features: &'a FeatureMap,
    pub camera: &'a CameraModel,
    pub ego: &'a EgoPose,
}

/// Warped source features stacked over depth hypotheses, plus the number of
/// valid sources per cell. Layout: `values[((d * H + y) * W + x) * C + c]`.
#[derive(Debug, Clone)]
pub struct WarpedVolume {
    channels: usize,
    depth_count: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
    valid_count: Vec<u16>,
}

impl WarpedVolume {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth_count(&self) -> usize {
        self.depth_count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn cell(&self, d: usize, y: usize, x: usize) -> &[f32] {
        let base = ((d * self.height + y) * self.width + x) * self.channels;
        &self.values[base..base + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, d: usize, y: usize, x: usize) -> &mut [f32] {
        let base = ((d * self.height + y) * self.width + x) * self.channels;
        &mut self.values[base..base + self.channels]
    }

    #[inline]
    pub fn valid_count(&self, d: usize, y: usize, x: usize) -> u16 {
        self.valid_count[(d * self.height + y) * self.width + x]
    }

    pub fn valid_counts(&self) -> &[u16] {
        &self.valid_count
    }

    pub fn valid_total(&self) -> u64 {
        self.valid_count.iter().map(|&c| c as u64).sum()
    }

    /// Test/bench constructor from explicit cell values.
    pub fn from_fn(
        channels: usize,
        depth_count: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
        mut count: impl FnMut(usize, usize, usize) -> u16,
    ) -> Self {
        let mut values = vec![0.0f32; channels * depth_count * height * width];
        let mut valid_count = vec![0u16; depth_count * height * width];
        for d in 0..depth_count {
            for y in 0..height {
                for x in 0..width {
                    valid_count[(d * height + y) * width + x] = count(d, y, x);
                    for c in 0..channels {
                        values[((d * height + y) * width + x) * channels + c] = f(c, d, y, x);
                    }
                }
            }
        }
        Self {
            channels,
            depth_count,
            height,
            width,
            values,
            valid_count,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }
}

/// Builds the warped feature volume for one reference camera: every source
/// allowed by `mode` is warped onto every depth hypothesis and valid samples
/// are averaged per cell.
///
/// Source order is normalized internally (timestamp descending, camera id
/// ascending) so the accumulation order, and therefore every output bit, is
/// independent of caller ordering and thread count. Cells with no valid
/// source are zero-filled with valid_count = 0.
pub fn build_warped_volume(
    ref_cam: &CameraModel,
    ref_ego: &EgoPose,
    ref_features: &FeatureMap,
    sources: &[SourceView],
    hypotheses: &DepthHypothesisSet,
    mode: SweepMode,
) -> Result<WarpedVolume, SweepError> {
    let channels = ref_features.channels();
    let stride = ref_features.stride();
    let (width, height) = ref_cam.feature_size(stride)?;
    if ref_features.width() != width || ref_features.height() != height {
        return Err(SweepError::CameraMismatch {
            id: ref_cam.camera_id.clone(),
            stride,
        });
    }

    let mut picked: Vec<&SourceView> = sources
        .iter()
        .filter(|s| match mode {
            SweepMode::Surround => true,
            SweepMode::SameCamera => s.camera.camera_id == ref_cam.camera_id,
        })
        .collect();
    picked.sort_by(|a, b| {
        b.ego
            .timestamp
            .cmp(&a.ego.timestamp)
            .then_with(|| a.camera.camera_id.cmp(&b.camera.camera_id))
    });

    for s in &picked {
        if s.features.channels() != channels || s.features.stride() != stride {
            return Err(SweepError::SourceMismatch {
                id: s.camera.camera_id.clone(),
            });
        }
        let (sw, sh) = s.camera.feature_size(stride)?;
        if s.features.width() != sw || s.features.height() != sh {
            return Err(SweepError::CameraMismatch {
                id: s.camera.camera_id.clone(),
                stride,
            });
        }
    }

    let cams: Vec<(&CameraModel, &EgoPose)> = picked.iter().map(|s| (s.camera, s.ego)).collect();
    let grid = sample_positions(ref_cam, &cams, ref_ego, hypotheses, stride)?;

    let depth_count = hypotheses.count();
    let mut values = vec![0.0f32; channels * depth_count * height * width];
    let mut valid_count = vec![0u16; depth_count * height * width];

    // One (depth, row) slab per task: disjoint output, fixed inner order.
    let row_len = width * channels;
    values
        .par_chunks_mut(row_len)
        .zip(valid_count.par_chunks_mut(width))
        .enumerate()
        .for_each(|(slab, (val_row, cnt_row))| {
            let d = slab / height;
            let y = slab % height;
            let mut sample = vec![0.0f32; channels];
            for x in 0..width {
                let mut n = 0u16;
                let cell = &mut val_row[x * channels..(x + 1) * channels];
                for (s, view) in picked.iter().enumerate() {
                    if !grid.is_valid(s, d, y, x) {
                        continue;
                    }
                    let (u, v) = grid.coords(s, d, y, x);
                    view.features.sample_into(u, v, &mut sample);
                    for c in 0..channels {
                        cell[c] += sample[c];
                    }
                    n += 1;
                }
                if n > 1 {
                    let inv = 1.0 / n as f32;
                    for c in cell.iter_mut() {
                        *c *= inv;
                    }
                }
                cnt_row[x] = n;
            }
        });

    Ok(WarpedVolume {
        channels,
        depth_count,
        height,
        width,
        values,
        valid_count,
    })
}
