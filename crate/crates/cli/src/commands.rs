//! The three subcommands and their file outputs.
//!
//! Every run writes into one output directory and finishes with a
//! `manifest.txt` listing each file's size and FNV-1a hash, so two runs can
//! be compared by their manifests alone. All outputs are pure functions of
//! the configuration and seed; thread count never changes a byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use sts_core::bev::{lift, splat, FrustumPoint};
use sts_core::costvol::{stereo_pipeline, FrameFeatures, StereoConfig};
use sts_core::depthmap::DepthMap;
use sts_core::fusion::{decode_depth, fuse, DecodeMode};
use sts_core::hypotheses::DepthHypothesisSet;
use sts_core::io::keyval::{fmt_f64, KeyVal};
use sts_core::io::pgm::{depth_to_pixels, grid_to_pixels, write_pgm};
use sts_core::io::rig::RigError;
use sts_core::io::scene::{write_scene, SceneError};
use sts_core::io::tensor::{read_tensor, write_tensor, Tensor, TensorError};
use sts_core::io::weights::WeightsError;
use sts_core::metrics::{bin_accuracy, range_binned, silog, MetricsError, RangeBins};
use sts_core::synthworld::{mono_oracle, render, SceneSpec};

use crate::config::RunConfig;
use crate::{CmdResult, ExitWith, Failure};

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Missing scene or rig files are input errors; files that exist but do not
/// parse or validate are data errors.
fn scene_failure(error: anyhow::Error) -> Failure {
    let code = match error.downcast_ref::<SceneError>() {
        Some(SceneError::Io(_)) | Some(SceneError::UnknownPreset(_)) | None => 2,
        Some(SceneError::Rig {
            source: RigError::Io(_),
            ..
        }) => 2,
        Some(_) => 3,
    };
    Failure { code, error }
}

fn weights_failure(error: anyhow::Error) -> Failure {
    let code = match error.downcast_ref::<WeightsError>() {
        Some(WeightsError::Io(_)) | None => 2,
        Some(_) => 3,
    };
    Failure { code, error }
}

fn load_scene(cfg: &RunConfig) -> CmdResult<SceneSpec> {
    cfg.load_scene().map_err(scene_failure)
}

/// Output directory that records every file it writes for the manifest.
struct OutDir {
    dir: PathBuf,
    files: Vec<(String, u64, u64)>,
}

impl OutDir {
    fn create(dir: &Path) -> CmdResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::input(anyhow!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Hashes an already-written file into the manifest list.
    fn record(&mut self, name: &str) -> CmdResult {
        let bytes = fs::read(self.path(name)).or_input()?;
        self.files
            .push((name.to_string(), bytes.len() as u64, fnv1a64(&bytes)));
        Ok(())
    }

    fn write_tensor(&mut self, name: &str, tensor: &Tensor) -> CmdResult {
        write_tensor(&self.path(name), tensor).map_err(|e| match e {
            TensorError::Io(_) => Failure::input(e),
            other => Failure::numeric(other),
        })?;
        self.record(name)
    }

    fn write_pgm(&mut self, name: &str, width: usize, height: usize, px: &[u8]) -> CmdResult {
        write_pgm(&self.path(name), width, height, px).or_input()?;
        self.record(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> CmdResult {
        fs::write(self.path(name), text).or_input()?;
        self.record(name)
    }

    /// Writes `manifest.txt`: the given header keys plus one entry per file.
    fn finish(self, mut header: KeyVal) -> CmdResult<usize> {
        header.push("file.count", self.files.len());
        for (i, (name, bytes, hash)) in self.files.iter().enumerate() {
            header.push(&format!("file.{i}.name"), name);
            header.push(&format!("file.{i}.bytes"), bytes);
            header.push(&format!("file.{i}.fnv64"), format!("{hash:016x}"));
        }
        let count = self.files.len();
        fs::write(self.dir.join("manifest.txt"), header.render()).or_input()?;
        Ok(count)
    }
}

fn mask_pixels(mask: &[bool]) -> Vec<u8> {
    mask.iter().map(|&m| if m { 255 } else { 0 }).collect()
}

fn depth_tensor(map: &DepthMap) -> CmdResult<Tensor> {
    Tensor::new(
        vec![map.height() as u32, map.width() as u32],
        map.data().iter().map(|&v| v as f32).collect(),
    )
    .or_numeric()
}

/// One CSV row per (scene, camera, mode, range, metric); floats are printed
/// with the shortest round-trip form so files are byte-stable.
struct MetricsCsv {
    lines: Vec<String>,
    skipped: usize,
}

impl MetricsCsv {
    fn new() -> Self {
        Self {
            lines: vec!["scene,camera,mode,depth_mode,range_lo,range_hi,metric,value".to_string()],
            skipped: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        scene: &str,
        camera: &str,
        mode: &str,
        depth_mode: &str,
        lo: f64,
        hi: f64,
        metric: &str,
        value: f64,
    ) {
        self.lines.push(format!(
            "{scene},{camera},{mode},{depth_mode},{},{},{metric},{}",
            fmt_f64(lo),
            fmt_f64(hi),
            fmt_f64(value)
        ));
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn rows(&self) -> usize {
        self.lines.len() - 1
    }

    fn render(&self) -> String {
        self.lines.join("\n") + "\n"
    }
}

/// Renders every frame of the scene: per camera a feature tensor at the
/// feature stride plus ground-truth depth and masks at the output stride.
pub fn simulate(cfg: &RunConfig) -> CmdResult {
    let spec = load_scene(cfg)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    write_scene(&out.path("scene.txt"), &spec, "rig.txt").map_err(|e| scene_failure(e.into()))?;
    out.record("scene.txt")?;
    out.record("rig.txt")?;

    for frame in 0..spec.trajectory.len() {
        let fine = render(&spec, frame, cfg.feature_stride).or_numeric()?;
        let coarse = render(&spec, frame, cfg.output_stride).or_numeric()?;
        for (cam_idx, cam) in spec.rig.iter().enumerate() {
            let name = |kind: &str, ext: &str| format!("frame{frame}_{}_{kind}.{ext}", cam.camera_id);
            let f = &fine[cam_idx].features;
            let features = Tensor::new(
                vec![f.channels() as u32, f.height() as u32, f.width() as u32],
                f.to_chw(),
            )
            .or_numeric()?;
            out.write_tensor(&name("features", "stst"), &features)?;

            let gt = &coarse[cam_idx].gt_depth;
            out.write_tensor(&name("depth", "stst"), &depth_tensor(gt)?)?;
            let (w, h) = (gt.width(), gt.height());
            out.write_pgm(&name("depth", "pgm"), w, h, &depth_to_pixels(gt, cfg.d_max))?;
            out.write_pgm(
                &name("moving", "pgm"),
                w,
                h,
                &mask_pixels(&coarse[cam_idx].moving_mask),
            )?;
            out.write_pgm(
                &name("textureless", "pgm"),
                w,
                h,
                &mask_pixels(&coarse[cam_idx].textureless_mask),
            )?;
        }
    }

    let mut header = KeyVal::new();
    header.push("command", "simulate");
    header.push("scene", cfg.scene_label());
    header.push("seed", spec.seed);
    header.push("frames", spec.trajectory.len());
    header.push("cameras", spec.rig.len());
    header.push("feature_stride", cfg.feature_stride);
    header.push("output_stride", cfg.output_stride);
    let count = out.finish(header)?;
    println!(
        "simulate: wrote {count} files to {} (scene {}, seed {})",
        cfg.out_dir.display(),
        cfg.scene_label(),
        spec.seed
    );
    Ok(())
}

/// Full pipeline on the scene's last frame: plane-sweep stereo against all
/// earlier frames, mono fusion, depth decoding, BEV lifting, and metrics.
pub fn sweep(cfg: &RunConfig) -> CmdResult {
    let spec = load_scene(cfg)?;
    let head = cfg.load_head().map_err(weights_failure)?;
    if spec.trajectory.len() < 2 {
        return Err(Failure::input(anyhow!(
            "sweep needs at least two frames, scene has {}",
            spec.trajectory.len()
        )));
    }
    let ref_idx = spec.trajectory.len() - 1;

    let mut ref_frame = None;
    let mut source_frames = Vec::new();
    for frame in 0..spec.trajectory.len() {
        let rendered = render(&spec, frame, cfg.feature_stride).or_numeric()?;
        let features = FrameFeatures {
            ego: spec.trajectory[frame].clone(),
            features: rendered.into_iter().map(|r| r.features).collect(),
        };
        if frame == ref_idx {
            ref_frame = Some(features);
        } else {
            source_frames.push(features);
        }
    }
    let ref_frame = ref_frame.expect("reference frame rendered");
    let ref_out = render(&spec, ref_idx, cfg.output_stride).or_numeric()?;

    let stereo_bins =
        DepthHypothesisSet::with_mode(cfg.depth_mode, cfg.d_min, cfg.d_max, cfg.stereo_bins)
            .or_input()?;
    let output_bins =
        DepthHypothesisSet::with_mode(cfg.depth_mode, cfg.d_min, cfg.d_max, cfg.output_bins)
            .or_input()?;
    let stereo_cfg = StereoConfig {
        stereo_bins,
        output_bins: cfg.output_bins,
        mode: cfg.sweep_mode,
        groups: cfg.groups,
        output_stride: cfg.output_stride,
        head,
    };

    let ranges = RangeBins::default();
    let edges = ranges.edges();
    let (span_lo, span_hi) = (edges[0], *edges.last().unwrap());
    let scene = cfg.scene_label();
    let mode = cfg.sweep_mode.name();
    let depth_mode = cfg.depth_mode.name();
    let mut csv = MetricsCsv::new();
    let mut out = OutDir::create(&cfg.out_dir)?;
    let mut points: Vec<FrustumPoint> = Vec::new();

    for (cam_idx, cam) in spec.rig.iter().enumerate() {
        let stereo = stereo_pipeline(&spec.rig, &ref_frame, &source_frames, cam_idx, &stereo_cfg)
            .or_numeric()?;
        let mono =
            mono_oracle(&ref_out[cam_idx], &output_bins, &cfg.mono, spec.seed).or_numeric()?;
        let fused = fuse(&stereo, &mono).or_numeric()?;
        let depth = decode_depth(&fused, DecodeMode::Argmax);
        let gt = &ref_out[cam_idx].gt_depth;
        let id = cam.camera_id.as_str();

        let (h, w, b) = (
            fused.height() as u32,
            fused.width() as u32,
            cfg.output_bins as u32,
        );
        let as_f32 = |data: &[f64]| data.iter().map(|&v| v as f32).collect::<Vec<f32>>();
        out.write_tensor(
            &format!("{id}_stereo.stst"),
            &Tensor::new(vec![h, w, b], as_f32(stereo.data())).or_numeric()?,
        )?;
        out.write_tensor(
            &format!("{id}_fused.stst"),
            &Tensor::new(vec![h, w, b], as_f32(fused.data())).or_numeric()?,
        )?;
        out.write_tensor(&format!("{id}_depth.stst"), &depth_tensor(&depth)?)?;
        out.write_pgm(
            &format!("{id}_depth.pgm"),
            depth.width(),
            depth.height(),
            &depth_to_pixels(&depth, cfg.d_max),
        )?;

        // Rows cover truth inside the metric ranges; the full-span row uses
        // the union of all range masks so its label is literally true.
        let full: Vec<bool> = gt
            .data()
            .iter()
            .map(|&d| ranges.index_of(d).is_some())
            .collect();
        let mut full_silog = None;
        match silog(&depth, gt, Some(&full)) {
            Ok(v) => {
                full_silog = Some(v);
                csv.push(&scene, id, mode, depth_mode, span_lo, span_hi, "silog", v);
            }
            Err(MetricsError::EmptyMask) => csv.skip(),
            Err(e) => return Err(Failure::numeric(e)),
        }
        let mut full_acc = None;
        match bin_accuracy(&fused, gt, 1, Some(&full)) {
            Ok(v) => {
                full_acc = Some(v);
                csv.push(&scene, id, mode, depth_mode, span_lo, span_hi, "bin_acc_1", v);
            }
            Err(MetricsError::EmptyMask) => csv.skip(),
            Err(e) => return Err(Failure::numeric(e)),
        }
        let per_silog = range_binned(gt, &ranges, |m| silog(&depth, gt, Some(m)).ok());
        let per_acc = range_binned(gt, &ranges, |m| bin_accuracy(&fused, gt, 1, Some(m)).ok());
        for i in 0..ranges.count() {
            let (lo, hi) = ranges.bounds(i);
            match per_silog[i] {
                Some(v) => csv.push(&scene, id, mode, depth_mode, lo, hi, "silog", v),
                None => csv.skip(),
            }
            match per_acc[i] {
                Some(v) => csv.push(&scene, id, mode, depth_mode, lo, hi, "bin_acc_1", v),
                None => csv.skip(),
            }
        }

        points.extend(lift(&fused, cam).or_numeric()?);
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "sweep: {id}: silog {} bin_acc_1 {}",
            show(full_silog),
            show(full_acc)
        );
    }

    let grid = splat(&points, &cfg.grid);
    out.write_tensor(
        "bev.stst",
        &Tensor::new(
            vec![grid.cells_y() as u32, grid.cells_x() as u32],
            grid.data().iter().map(|&v| v as f32).collect(),
        )
        .or_numeric()?,
    )?;
    out.write_pgm("bev.pgm", grid.cells_x(), grid.cells_y(), &grid_to_pixels(&grid))?;
    out.write_text("metrics.csv", &csv.render())?;

    let mut header = KeyVal::new();
    header.push("command", "sweep");
    header.push("scene", &scene);
    header.push("seed", spec.seed);
    header.push("mode", mode);
    header.push("depth_mode", depth_mode);
    header.push("stereo_bins", cfg.stereo_bins);
    header.push("output_bins", cfg.output_bins);
    header.push("feature_stride", cfg.feature_stride);
    header.push("output_stride", cfg.output_stride);
    let rows = csv.rows();
    let skipped = csv.skipped;
    let count = out.finish(header)?;
    println!(
        "sweep: wrote {count} files to {} ({rows} metric rows, {skipped} empty ranges skipped)",
        cfg.out_dir.display()
    );
    Ok(())
}

/// Reads a rank-2 depth tensor; io failures are input errors, format
/// failures (reported with their byte offset) are data errors.
fn read_depth_tensor(path: &Path, stride: u32) -> CmdResult<DepthMap> {
    let tensor = read_tensor(path).map_err(|e| {
        let failure = match e {
            TensorError::Io(_) => Failure::input(e),
            other => Failure::data(other),
        };
        Failure {
            code: failure.code,
            error: failure.error.context(format!("reading {}", path.display())),
        }
    })?;
    if tensor.dims.len() != 2 {
        return Err(Failure::data(anyhow!(
            "{}: expected a rank-2 depth tensor, got rank {}",
            path.display(),
            tensor.dims.len()
        )));
    }
    let (h, w) = (tensor.dims[0] as usize, tensor.dims[1] as usize);
    Ok(DepthMap::new(
        w,
        h,
        stride,
        tensor.data.iter().map(|&v| v as f64).collect(),
    ))
}

/// Mean |pred - truth| / truth over masked pixels with positive truth.
fn abs_rel(pred: &DepthMap, truth: &DepthMap, mask: &[bool]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (&p, &t)) in pred.data().iter().zip(truth.data().iter()).enumerate() {
        if mask[i] && t > 0.0 {
            sum += (p - t).abs() / t;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Scores a predicted depth tensor against ground truth: silog and abs-rel,
/// overall and per depth range.
pub fn eval(cfg: &RunConfig, pred_path: &Path, truth_path: &Path) -> CmdResult {
    let pred = read_depth_tensor(pred_path, cfg.output_stride)?;
    let truth = read_depth_tensor(truth_path, cfg.output_stride)?;
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Failure::input(anyhow!(
            "shape mismatch: {} is {}x{}, {} is {}x{}",
            pred_path.display(),
            pred.height(),
            pred.width(),
            truth_path.display(),
            truth.height(),
            truth.width()
        )));
    }

    let scene = pred_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pred".to_string());
    let depth_mode = cfg.depth_mode.name();
    let ranges = RangeBins::default();
    let edges = ranges.edges();
    let mut csv = MetricsCsv::new();

    let full: Vec<bool> = truth
        .data()
        .iter()
        .map(|&d| ranges.index_of(d).is_some())
        .collect();
    let mut spans = vec![((edges[0], *edges.last().unwrap()), full)];
    for i in 0..ranges.count() {
        let (lo, hi) = ranges.bounds(i);
        let mask: Vec<bool> = truth.data().iter().map(|&d| d >= lo && d < hi).collect();
        spans.push(((lo, hi), mask));
    }

    for ((lo, hi), mask) in &spans {
        match silog(&pred, &truth, Some(mask)) {
            Ok(v) => {
                csv.push(&scene, "-", "eval", depth_mode, *lo, *hi, "silog", v);
                println!("eval: [{}, {}) silog {v:.4}", fmt_f64(*lo), fmt_f64(*hi));
            }
            Err(MetricsError::EmptyMask) => {
                csv.skip();
                println!("eval: [{}, {}) empty, row skipped", fmt_f64(*lo), fmt_f64(*hi));
            }
            Err(e) => return Err(Failure::numeric(e)),
        }
        if let Some(v) = abs_rel(&pred, &truth, mask) {
            csv.push(&scene, "-", "eval", depth_mode, *lo, *hi, "abs_rel", v);
        } else {
            csv.skip();
        }
    }

    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write_text("metrics.csv", &csv.render())?;
    println!(
        "eval: wrote {} metric rows to {} ({} empty ranges skipped)",
        csv.rows(),
        out.path("metrics.csv").display(),
        csv.skipped
    );
    Ok(())
}
