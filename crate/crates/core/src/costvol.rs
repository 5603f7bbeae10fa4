//! Group-wise correlation cost volumes and their reduction to depth logits.
//!
//! The feature channels are split into G groups; each (depth, texel) cell
//! scores one similarity per group,
//! `S_g = <ref_g, warped_g> / (C / G)`,
//! and a per-cell head (three 1x1x1 layers, or the training-free group mean)
//! collapses the G similarities into a single logit. Average pooling then
//! moves the logits from the matching stride n to the output stride m, and
//! duplication expands the coarse stereo bins to the final bin count.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraModel, EgoPose, GeometryError};
use crate::hypotheses::{expand_bins, DepthHypothesisSet, HypothesisError};
use crate::sweep::{build_warped_volume, FeatureMap, SourceView, SweepError, SweepMode, WarpedVolume};

#[derive(Debug, Error)]
pub enum CostVolumeError {
    #[error("groups {groups} must divide feature channels {channels}")]
    GroupsDontDivide { groups: usize, channels: usize },
    #[error("reference map {0}x{1}x{2} does not match warped volume {3}x{4}x{5}")]
    ShapeMismatch(usize, usize, usize, usize, usize, usize),
    #[error("head layer {layer}: expected {expect} inputs, layer has {got}")]
    HeadChain {
        layer: usize,
        expect: usize,
        got: usize,
    },
    #[error("head must map {groups} groups to 1 logit, maps {input} to {output}")]
    HeadShape {
        groups: usize,
        input: usize,
        output: usize,
    },
    #[error("head layer {layer} weight/bias sizes do not match its {inputs}x{outputs} shape")]
    HeadData {
        layer: usize,
        inputs: usize,
        outputs: usize,
    },
    #[error("target stride {target} is not a multiple of logits stride {current}")]
    StrideAlignment { target: u32, current: u32 },
    #[error("pooling factor {factor} does not divide logits grid {height}x{width}")]
    PoolShape {
        factor: usize,
        height: usize,
        width: usize,
    },
}

/// G x C_D' x H' x W' grouped similarities, cell-major: one cell's G values
/// are contiguous.
#[derive(Debug, Clone)]
pub struct CostVolume {
    groups: usize,
    depth_count: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl CostVolume {
    pub fn groups(&self) -> usize {
        self.groups
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
    pub fn cell(&self, d: usize, y: usize, x: usize) -> &[f64] {
        let base = ((d * self.height + y) * self.width + x) * self.groups;
        &self.data[base..base + self.groups]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Group-wise correlation of the reference features against every depth
/// slice of the warped volume. Cells without any valid source stay zero.
pub fn group_correlation(
    ref_map: &FeatureMap,
    warped: &WarpedVolume,
    groups: usize,
) -> Result<CostVolume, CostVolumeError> {
    let channels = ref_map.channels();
    if groups == 0 || channels % groups != 0 {
        return Err(CostVolumeError::GroupsDontDivide { groups, channels });
    }
    if warped.channels() != channels
        || warped.height() != ref_map.height()
        || warped.width() != ref_map.width()
    {
        return Err(CostVolumeError::ShapeMismatch(
            channels,
            ref_map.height(),
            ref_map.width(),
            warped.channels(),
            warped.height(),
            warped.width(),
        ));
    }
    let per_group = channels / groups;
    let norm = 1.0 / per_group as f64;
    let (depth_count, height, width) = (warped.depth_count(), warped.height(), warped.width());

    let mut data = vec![0.0f64; groups * depth_count * height * width];
    let row_len = width * groups;
    data.par_chunks_mut(row_len).enumerate().for_each(|(slab, out_row)| {
        let d = slab / height;
        let y = slab % height;
        for x in 0..width {
            if warped.valid_count(d, y, x) == 0 {
                continue;
            }
            let r = ref_map.texel(y, x);
            let w = warped.cell(d, y, x);
            let out = &mut out_row[x * groups..(x + 1) * groups];
            for g in 0..groups {
                let mut acc = 0.0f64;
                let base = g * per_group;
                for c in 0..per_group {
                    acc += r[base + c] as f64 * w[base + c] as f64;
                }
                out[g] = acc * norm;
            }
        }
    });

    Ok(CostVolume {
        groups,
        depth_count,
        height,
        width,
        data,
    })
}

/// One dense layer of the per-cell regularizer: `y = W x + b`.
#[derive(Debug, Clone)]
pub struct HeadLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs` rows of `inputs` weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-cell reduction of G similarities to one logit. The training-free
/// default averages the groups; a loaded head chains dense 1x1x1 layers
/// with ReLU between (not after) them.
#[derive(Debug, Clone)]
pub enum RegularizerHead {
    GroupMean,
    Layers(Vec<HeadLayer>),
}

impl RegularizerHead {
    pub fn group_mean() -> Self {
        RegularizerHead::GroupMean
    }

    pub fn from_layers(layers: Vec<HeadLayer>) -> Result<Self, CostVolumeError> {
        if layers.is_empty() {
            return Err(CostVolumeError::HeadShape {
                groups: 0,
                input: 0,
                output: 0,
            });
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(CostVolumeError::HeadData {
                    layer: i,
                    inputs: layer.inputs,
                    outputs: layer.outputs,
                });
            }
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(CostVolumeError::HeadChain {
                    layer: i,
                    expect: layers[i - 1].outputs,
                    got: layer.inputs,
                });
            }
        }
        Ok(RegularizerHead::Layers(layers))
    }

    fn check_volume(&self, groups: usize) -> Result<(), CostVolumeError> {
        if let RegularizerHead::Layers(layers) = self {
            let input = layers[0].inputs;
            let output = layers[layers.len() - 1].outputs;
            if input != groups || output != 1 {
                return Err(CostVolumeError::HeadShape {
                    groups,
                    input,
                    output,
                });
            }
        }
        Ok(())
    }

    /// Applies the head to one cell's group vector.
    fn apply(&self, cell: &[f64], scratch: &mut [Vec<f64>; 2]) -> f64 {
        match self {
            RegularizerHead::GroupMean => {
                cell.iter().sum::<f64>() / cell.len() as f64
            }
            RegularizerHead::Layers(layers) => {
                let last = layers.len() - 1;
                let mut cur = 0usize;
                scratch[0].clear();
                scratch[0].extend_from_slice(cell);
                for (i, layer) in layers.iter().enumerate() {
                    let (a, b) = scratch.split_at_mut(1);
                    let (src, dst) = if cur == 0 {
                        (&a[0], &mut b[0])
                    } else {
                        (&b[0], &mut a[0])
                    };
                    dst.clear();
                    for o in 0..layer.outputs {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        let mut acc = layer.bias[o];
                        for (w, x) in row.iter().zip(src.iter()) {
                            acc += w * x;
                        }
                        if i < last {
                            acc = acc.max(0.0);
                        }
                        dst.push(acc);
                    }
                    cur = 1 - cur;
                }
                scratch[cur][0]
            }
        }
    }
}

/// Per-pixel depth logits, texel-major (`[y][x][k]`), tagged with their
/// hypothesis set and pixel stride.
#[derive(Debug, Clone)]
pub struct DepthLogits {
    bins: DepthHypothesisSet,
    height: usize,
    width: usize,
    stride: u32,
    data: Vec<f64>,
}

impl DepthLogits {
    pub fn zeros(bins: DepthHypothesisSet, height: usize, width: usize, stride: u32) -> Self {
        let n = bins.count() * height * width;
        Self {
            bins,
            height,
            width,
            stride,
            data: vec![0.0; n],
        }
    }

    pub fn bins(&self) -> &DepthHypothesisSet {
        &self.bins
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
    pub fn column(&self, y: usize, x: usize) -> &[f64] {
        let k = self.bins.count();
        let base = (y * self.width + x) * k;
        &self.data[base..base + k]
    }

    #[inline]
    pub fn column_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let k = self.bins.count();
        let base = (y * self.width + x) * k;
        &mut self.data[base..base + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Collapses the cost volume's group axis into per-pixel depth logits at the
/// volume's stride.
pub fn regularize(
    volume: &CostVolume,
    head: &RegularizerHead,
    bins: &DepthHypothesisSet,
    stride: u32,
) -> Result<DepthLogits, CostVolumeError> {
    head.check_volume(volume.groups())?;
    assert_eq!(
        bins.count(),
        volume.depth_count(),
        "hypothesis set does not match the volume depth axis"
    );
    let (height, width) = (volume.height(), volume.width());
    let mut out = DepthLogits::zeros(bins.clone(), height, width, stride);
    let k = bins.count();
    let data = out.data_mut();
    data.par_chunks_mut(k).enumerate().for_each(|(pix, column)| {
        let y = pix / width;
        let x = pix % width;
        let mut scratch = [Vec::new(), Vec::new()];
        for d in 0..k {
            column[d] = head.apply(volume.cell(d, y, x), &mut scratch);
        }
    });
    Ok(out)
}

/// Average-pools logits from their stride to a coarser `target_stride`
/// (factor f = target / current, non-overlapping f x f blocks per bin).
pub fn pool_to_output(logits: &DepthLogits, target_stride: u32) -> Result<DepthLogits, CostVolumeError> {
    let current = logits.stride();
    if target_stride == 0 || target_stride % current != 0 {
        return Err(CostVolumeError::StrideAlignment {
            target: target_stride,
            current,
        });
    }
    let factor = (target_stride / current) as usize;
    if factor == 1 {
        let mut out = logits.clone();
        out.stride = target_stride;
        return Ok(out);
    }
    if logits.height() % factor != 0 || logits.width() % factor != 0 {
        return Err(CostVolumeError::PoolShape {
            factor,
            height: logits.height(),
            width: logits.width(),
        });
    }
    let oh = logits.height() / factor;
    let ow = logits.width() / factor;
    let k = logits.bins().count();
    let inv = 1.0 / (factor * factor) as f64;
    let mut out = DepthLogits::zeros(logits.bins().clone(), oh, ow, target_stride);
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = out.column_mut(oy, ox);
            for dy in 0..factor {
                for dx in 0..factor {
                    let src = logits.column(oy * factor + dy, ox * factor + dx);
                    for b in 0..k {
                        dst[b] += src[b];
                    }
                }
            }
            for v in dst.iter_mut() {
                *v *= inv;
            }
        }
    }
    Ok(out)
}

/// Feature maps of one frame, aligned index-for-index with the rig.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub ego: EgoPose,
    pub features: Vec<FeatureMap>,
}

/// Configuration of the stereo matching pipeline.
#[derive(Debug, Clone)]
pub struct StereoConfig {
    /// Hypotheses swept by the matcher (C_D' bins).
    pub stereo_bins: DepthHypothesisSet,
    /// Bin count of the emitted logits (C_D, a multiple of C_D').
    pub output_bins: usize,
    pub mode: SweepMode,
    pub groups: usize,
    /// Stride of the emitted logits (m, a multiple of the feature stride n).
    pub output_stride: u32,
    pub head: RegularizerHead,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reference camera index {index} out of range for rig of {rig}")]
    BadCamera { index: usize, rig: usize },
    #[error("frame {timestamp} carries {got} feature maps for a rig of {rig}")]
    FrameShape { timestamp: i64, got: usize, rig: usize },
    #[error("warp stage: {0}")]
    Warp(#[from] SweepError),
    #[error("correlation/regularize stage: {0}")]
    Cost(#[from] CostVolumeError),
    #[error("bin expansion stage: {0}")]
    Expand(#[from] HypothesisError),
    #[error("geometry stage: {0}")]
    Geometry(#[from] GeometryError),
}

/// Full stereo branch for one reference camera: warp sources onto the
/// hypothesis planes, correlate, regularize, pool to the output stride, and
/// expand to the output bin count.
pub fn stereo_pipeline(
    rig: &[CameraModel],
    ref_frame: &FrameFeatures,
    source_frames: &[FrameFeatures],
    ref_index: usize,
    cfg: &StereoConfig,
) -> Result<DepthLogits, PipelineError> {
    if ref_index >= rig.len() {
        return Err(PipelineError::BadCamera {
            index: ref_index,
            rig: rig.len(),
        });
    }
    if ref_frame.features.len() != rig.len() {
        return Err(PipelineError::FrameShape {
            timestamp: ref_frame.ego.timestamp,
            got: ref_frame.features.len(),
            rig: rig.len(),
        });
    }
    let mut sources = Vec::new();
    for frame in source_frames {
        if frame.features.len() != rig.len() {
            return Err(PipelineError::FrameShape {
                timestamp: frame.ego.timestamp,
                got: frame.features.len(),
                rig: rig.len(),
            });
        }
        for (cam, feat) in rig.iter().zip(frame.features.iter()) {
            sources.push(SourceView {
                features: feat,
                camera: cam,
                ego: &frame.ego,
            });
        }
    }
    let ref_cam = &rig[ref_index];
    let ref_feat = &ref_frame.features[ref_index];
    let volume = build_warped_volume(
        ref_cam,
        &ref_frame.ego,
        ref_feat,
        &sources,
        &cfg.stereo_bins,
        cfg.mode,
    )?;
    let cost = group_correlation(ref_feat, &volume, cfg.groups)?;
    let logits = regularize(&cost, &cfg.head, &cfg.stereo_bins, ref_feat.stride())?;
    let pooled = pool_to_output(&logits, cfg.output_stride)?;
    Ok(expand_bins(&pooled, cfg.output_bins)?)
}
