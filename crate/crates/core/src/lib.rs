//! Training-free surround-view temporal stereo depth estimation.
//!
//! The engine warps feature maps from the previous frame of a multi-camera
//! rig onto depth-plane hypotheses in each reference camera (plane sweep),
//! scores the hypotheses with group-wise correlation, regularizes the cost
//! volume into depth logits, fuses them with a monocular depth distribution,
//! and lifts the result into a bird's-eye-view grid. Everything is
//! deterministic: same inputs, same seeds, same bytes out, regardless of
//! thread count.

pub mod bev;
pub mod costvol;
pub mod depthmap;
pub mod fusion;
pub mod geometry;
pub mod hypotheses;
pub mod io;
pub mod metrics;
pub mod sweep;
pub mod synthworld;

pub use bev::{lift, splat, BevGrid, BevGridConfig, FrustumPoint};
pub use costvol::{
    group_correlation, pool_to_output, regularize, stereo_pipeline, CostVolume, DepthLogits,
    FrameFeatures, PipelineError, RegularizerHead, StereoConfig,
};
pub use depthmap::DepthMap;
pub use fusion::{bce_depth_loss, decode_depth, fuse, DecodeMode, DepthDistribution};
pub use geometry::{
    compose_relative_pose, infinite_homography, plane_homography, project_point_oracle,
    sample_positions, CameraModel, EgoPose, Homography, RelativePose, SampleGrid,
    SourceProjection, MIN_SOURCE_DEPTH,
};
pub use hypotheses::{expand_bins, DepthHypothesisSet, DepthMode};
pub use metrics::{bin_accuracy, range_binned, silog, RangeBins};
pub use sweep::{bilinear_sample, build_warped_volume, FeatureMap, SourceView, SweepMode, WarpedVolume};
pub use synthworld::{
    default_rig, mono_oracle, project_points_to_depth, render, MonoQuality, RenderedFrame,
    SceneSpec, Surface,
};
