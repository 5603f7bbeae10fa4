//! Run configuration: defaults, config-file parsing, and flag overrides.
//!
//! Config files use the flat dotted-key grammar shared by all text formats.
//! Every key is optional and falls back to the default shown here:
//!
//! ```text
//! scene = static_plane        # preset name or path to a scene file
//! depth.mode = sid            # sid | ud
//! depth.min = 2
//! depth.max = 58
//! depth.stereo_bins = 56
//! depth.output_bins = 112
//! sweep.mode = surround       # surround | same_camera
//! sweep.feature_stride = 4
//! sweep.output_stride = 16
//! sweep.groups = 8
//! grid.x_min = -51.2
//! grid.x_max = 51.2
//! grid.y_min = -51.2
//! grid.y_max = 51.2
//! grid.cell_size = 0.8
//! mono.sigma_bins = 3
//! mono.depth_growth = 0.12
//! mono.noise = 0.4
//! seed = 0                    # 0 = keep the scene's own seed
//! out = out
//! head.weights = head.bin     # optional; omitted = parameter-free head
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sts_core::bev::BevGridConfig;
use sts_core::hypotheses::DepthMode;
use sts_core::io::keyval::KeyVal;
use sts_core::io::scene::{preset, read_scene, PRESETS};
use sts_core::io::weights::read_weights;
use sts_core::sweep::SweepMode;
use sts_core::synthworld::{MonoQuality, SceneSpec};
use sts_core::RegularizerHead;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: String,
    pub depth_mode: DepthMode,
    pub d_min: f64,
    pub d_max: f64,
    pub stereo_bins: usize,
    pub output_bins: usize,
    pub sweep_mode: SweepMode,
    pub feature_stride: u32,
    pub output_stride: u32,
    pub groups: usize,
    pub grid: BevGridConfig,
    pub mono: MonoQuality,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub head_weights: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: "static_plane".into(),
            depth_mode: DepthMode::Sid,
            d_min: 2.0,
            d_max: 58.0,
            stereo_bins: 56,
            output_bins: 112,
            sweep_mode: SweepMode::Surround,
            feature_stride: 4,
            output_stride: 16,
            groups: 8,
            grid: BevGridConfig::default(),
            mono: MonoQuality::default(),
            seed: 0,
            out_dir: "out".into(),
            head_weights: None,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scene",
    "depth.mode",
    "depth.min",
    "depth.max",
    "depth.stereo_bins",
    "depth.output_bins",
    "sweep.mode",
    "sweep.feature_stride",
    "sweep.output_stride",
    "sweep.groups",
    "grid.x_min",
    "grid.x_max",
    "grid.y_min",
    "grid.y_max",
    "grid.cell_size",
    "mono.sigma_bins",
    "mono.depth_growth",
    "mono.noise",
    "seed",
    "out",
    "head.weights",
];

fn parse_depth_mode(s: &str) -> Result<DepthMode> {
    match s {
        "sid" => Ok(DepthMode::Sid),
        "ud" => Ok(DepthMode::Uniform),
        other => bail!("depth mode must be 'sid' or 'ud', got '{other}'"),
    }
}

fn parse_sweep_mode(s: &str) -> Result<SweepMode> {
    match s {
        "surround" => Ok(SweepMode::Surround),
        "same_camera" => Ok(SweepMode::SameCamera),
        other => bail!("sweep mode must be 'surround' or 'same_camera', got '{other}'"),
    }
}

impl RunConfig {
    /// Defaults overlaid with a config file (if given). Flag overrides are
    /// applied separately by the caller.
    pub fn load(config_path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let Some(path) = config_path else {
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let kv = KeyVal::parse(&text)
            .with_context(|| format!("config file {}", path.display()))?;
        for (key, _) in kv.entries() {
            if !KNOWN_KEYS.contains(&key) {
                bail!("config file {}: unknown key '{key}'", path.display());
            }
        }
        if let Some(v) = kv.get("scene") {
            cfg.scene = v.to_string();
        }
        if let Some(v) = kv.get("depth.mode") {
            cfg.depth_mode = parse_depth_mode(v)?;
        }
        if kv.contains("depth.min") {
            cfg.d_min = kv.f64("depth.min")?;
        }
        if kv.contains("depth.max") {
            cfg.d_max = kv.f64("depth.max")?;
        }
        if kv.contains("depth.stereo_bins") {
            cfg.stereo_bins = kv.usize("depth.stereo_bins")?;
        }
        if kv.contains("depth.output_bins") {
            cfg.output_bins = kv.usize("depth.output_bins")?;
        }
        if let Some(v) = kv.get("sweep.mode") {
            cfg.sweep_mode = parse_sweep_mode(v)?;
        }
        if kv.contains("sweep.feature_stride") {
            cfg.feature_stride = kv.u64("sweep.feature_stride")? as u32;
        }
        if kv.contains("sweep.output_stride") {
            cfg.output_stride = kv.u64("sweep.output_stride")? as u32;
        }
        if kv.contains("sweep.groups") {
            cfg.groups = kv.usize("sweep.groups")?;
        }
        let g = &cfg.grid;
        let (mut x0, mut x1, mut y0, mut y1, mut cell) =
            (g.x_min, g.x_max, g.y_min, g.y_max, g.cell_size);
        if kv.contains("grid.x_min") {
            x0 = kv.f64("grid.x_min")?;
        }
        if kv.contains("grid.x_max") {
            x1 = kv.f64("grid.x_max")?;
        }
        if kv.contains("grid.y_min") {
            y0 = kv.f64("grid.y_min")?;
        }
        if kv.contains("grid.y_max") {
            y1 = kv.f64("grid.y_max")?;
        }
        if kv.contains("grid.cell_size") {
            cell = kv.f64("grid.cell_size")?;
        }
        cfg.grid = BevGridConfig::new(x0, x1, y0, y1, cell)?;
        if kv.contains("mono.sigma_bins") {
            cfg.mono.sigma_bins = kv.f64("mono.sigma_bins")?;
        }
        if kv.contains("mono.depth_growth") {
            cfg.mono.depth_growth = kv.f64("mono.depth_growth")?;
        }
        if kv.contains("mono.noise") {
            cfg.mono.noise = kv.f64("mono.noise")?;
        }
        if kv.contains("seed") {
            cfg.seed = kv.u64("seed")?;
        }
        if let Some(v) = kv.get("out") {
            cfg.out_dir = v.into();
        }
        if let Some(v) = kv.get("head.weights") {
            // Relative weight paths resolve against the config file.
            let p = Path::new(v);
            cfg.head_weights = Some(if p.is_absolute() {
                p.to_path_buf()
            } else {
                path.parent().map(|d| d.join(p)).unwrap_or_else(|| p.into())
            });
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_max > self.d_min) {
            bail!(
                "depth range [{}, {}] must satisfy 0 < min < max",
                self.d_min,
                self.d_max
            );
        }
        for (name, v) in [
            ("depth.stereo_bins", self.stereo_bins),
            ("depth.output_bins", self.output_bins),
            ("sweep.groups", self.groups),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if self.output_bins % self.stereo_bins != 0 {
            bail!(
                "depth.output_bins ({}) must be a multiple of depth.stereo_bins ({})",
                self.output_bins,
                self.stereo_bins
            );
        }
        if self.feature_stride == 0 || self.output_stride % self.feature_stride != 0 {
            bail!(
                "sweep.output_stride ({}) must be a positive multiple of sweep.feature_stride ({})",
                self.output_stride,
                self.feature_stride
            );
        }
        Ok(())
    }

    /// Resolves the scene reference: a known preset name or a scene file
    /// path. The configured seed (when nonzero) replaces the scene's.
    pub fn load_scene(&self) -> Result<SceneSpec> {
        let mut spec = if PRESETS.contains(&self.scene.as_str()) {
            preset(&self.scene)?
        } else {
            let path = Path::new(&self.scene);
            if !path.exists() {
                bail!(
                    "scene '{}' is neither a preset ({}) nor an existing file",
                    self.scene,
                    PRESETS.join(", ")
                );
            }
            read_scene(path)?
        };
        if self.seed != 0 {
            spec.seed = self.seed;
        }
        Ok(spec)
    }

    /// Short scene label for file names and CSV rows.
    pub fn scene_label(&self) -> String {
        if PRESETS.contains(&self.scene.as_str()) {
            self.scene.clone()
        } else {
            Path::new(&self.scene)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.scene.clone())
        }
    }

    /// The cost-regularizer head: identity group-mean unless a weights file
    /// is configured, in which case its layer chain must start at `groups`.
    pub fn load_head(&self) -> Result<RegularizerHead> {
        let Some(path) = &self.head_weights else {
            return Ok(RegularizerHead::group_mean());
        };
        let layers =
            read_weights(path).with_context(|| format!("head weights {}", path.display()))?;
        match layers.first() {
            Some(first) if first.inputs == self.groups => {}
            Some(first) => bail!(
                "head weights {}: first layer takes {} inputs but sweep.groups is {}",
                path.display(),
                first.inputs,
                self.groups
            ),
            None => bail!("head weights {}: no layers", path.display()),
        }
        Ok(RegularizerHead::from_layers(layers)?)
    }
}
