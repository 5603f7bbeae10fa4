//! Lifting per-pixel depth distributions into ego-frame frustum points and
//! splatting them onto a bird's-eye-view occupancy grid.
//!
//! Each feature pixel contributes one weighted point per depth bin along its
//! back-projected ray; the weight is the bin's probability mass, so a frame
//! of H x W pixels carries exactly H * W units of mass. Splatting bins the
//! points onto a square ground grid and is deterministic: points are ordered
//! by (cell, pixel) before accumulation, independent of thread count.

use nalgebra::Vector3;
use thiserror::Error;

use crate::fusion::DepthDistribution;
use crate::geometry::{CameraModel, GeometryError};

#[derive(Debug, Error)]
pub enum BevError {
    #[error("grid extent [{lo}, {hi}] is not a positive whole number of {cell} m cells")]
    BadExtent { lo: f64, hi: f64, cell: f64 },
    #[error("distribution {0}x{1} does not match camera at stride {2}")]
    ShapeMismatch(usize, usize, u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Square ground-plane grid in ego coordinates. `x` spans rows of travel
/// direction, `y` the lateral axis; cells index as `(iy, ix)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
}

impl BevGridConfig {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        cell_size: f64,
    ) -> Result<Self, BevError> {
        let cfg = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            cell_size,
        };
        for (lo, hi) in [(x_min, x_max), (y_min, y_max)] {
            if !(cell_size > 0.0) || !(hi > lo) || !span_is_whole(lo, hi, cell_size) {
                return Err(BevError::BadExtent {
                    lo,
                    hi,
                    cell: cell_size,
                });
            }
        }
        Ok(cfg)
    }

    pub fn cells_x(&self) -> usize {
        ((self.x_max - self.x_min) / self.cell_size).round() as usize
    }

    pub fn cells_y(&self) -> usize {
        ((self.y_max - self.y_min) / self.cell_size).round() as usize
    }
}

fn span_is_whole(lo: f64, hi: f64, cell: f64) -> bool {
    let n = (hi - lo) / cell;
    n >= 1.0 - 1e-9 && (n - n.round()).abs() < 1e-9
}

impl Default for BevGridConfig {
    /// 128 x 128 grid of 0.8 m cells covering +-51.2 m around the ego.
    fn default() -> Self {
        Self {
            x_min: -51.2,
            x_max: 51.2,
            y_min: -51.2,
            y_max: 51.2,
            cell_size: 0.8,
        }
    }
}

/// One weighted point of a camera frustum in ego coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrustumPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
    /// Row-major index `y * W + x` of the source feature pixel.
    pub pixel_index: usize,
}

/// Back-projects every (pixel, bin) of a depth distribution into the ego
/// frame. Bins with exactly zero probability emit no point.
///
/// A pixel (y, x) at stride s looks through the image point
/// ((x + 0.5) s, (y + 0.5) s); the bin's center depth is its camera-frame z.
pub fn lift(
    dist: &DepthDistribution,
    camera: &CameraModel,
) -> Result<Vec<FrustumPoint>, BevError> {
    let (fw, fh) = camera.feature_size(dist.stride())?;
    if (dist.width(), dist.height()) != (fw, fh) {
        return Err(BevError::ShapeMismatch(
            dist.height(),
            dist.width(),
            dist.stride(),
        ));
    }
    let k_inv = camera.intrinsics_inverse();
    let stride = dist.stride() as f64;
    let centers = dist.bins().centers();
    let mut points = Vec::with_capacity(dist.height() * dist.width() * centers.len());
    for y in 0..dist.height() {
        for x in 0..dist.width() {
            let u = (x as f64 + 0.5) * stride;
            let v = (y as f64 + 0.5) * stride;
            let ray = k_inv * Vector3::new(u, v, 1.0);
            let col = dist.column(y, x);
            let pixel_index = y * dist.width() + x;
            for (bin, &p) in col.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let cam = ray * centers[bin];
                let ego = camera.rotation * cam + camera.translation;
                points.push(FrustumPoint {
                    x: ego.x,
                    y: ego.y,
                    z: ego.z,
                    weight: p,
                    pixel_index,
                });
            }
        }
    }
    Ok(points)
}

/// Bird's-eye-view occupancy grid; `data[iy * cells_x + ix]` accumulates
/// point weight.
#[derive(Debug, Clone)]
pub struct BevGrid {
    config: BevGridConfig,
    cells_x: usize,
    cells_y: usize,
    data: Vec<f64>,
}

impl BevGrid {
    pub fn config(&self) -> &BevGridConfig {
        &self.config
    }

    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    pub fn get(&self, iy: usize, ix: usize) -> f64 {
        self.data[iy * self.cells_x + ix]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total accumulated weight.
    pub fn mass(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Accumulates frustum points onto the grid. Points outside the extent are
/// dropped; the rest are sorted by (cell, pixel) so the floating-point sum
/// order, and therefore every bit of the result, is reproducible.
pub fn splat(points: &[FrustumPoint], config: &BevGridConfig) -> BevGrid {
    let cells_x = config.cells_x();
    let cells_y = config.cells_y();
    let mut binned: Vec<(usize, usize, f64)> = Vec::with_capacity(points.len());
    for p in points {
        let fx = (p.x - config.x_min) / config.cell_size;
        let fy = (p.y - config.y_min) / config.cell_size;
        let ix = fx.floor();
        let iy = fy.floor();
        if ix < 0.0 || iy < 0.0 || ix >= cells_x as f64 || iy >= cells_y as f64 {
            continue;
        }
        let cell = iy as usize * cells_x + ix as usize;
        binned.push((cell, p.pixel_index, p.weight));
    }
    binned.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut data = vec![0.0f64; cells_x * cells_y];
    for (cell, _, w) in binned {
        data[cell] += w;
    }
    BevGrid {
        config: config.clone(),
        cells_x,
        cells_y,
        data,
    }
}
