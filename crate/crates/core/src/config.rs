//! JSON run configuration.
//!
//! A document has the sections `geometry`, `kernel`, `noise`, `experiment`,
//! `checks`, `acceptance` and `output`; everything except `experiment.x0`
//! and `experiment.checkpoints` has a default.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::covariance::QuadratureSettings;
use crate::error::{Error, Result};
use crate::geometry::{ConeBeamGeometry, Point3, DEFAULT_DENOMINATOR_FLOOR};
use crate::kernel::{Kernel, KernelSpec};
use crate::noise::{AmplitudeConvention, NoiseModel, DEFAULT_DETECTOR_INDEX_LIMIT};
use crate::recon::{Experiment, DEFAULT_FOOTPRINT_MARGIN};
use crate::stats::RangePolicy;

pub const PAPER_PRESET: &str = include_str!("../presets/paper.json");
pub const CI_PRESET: &str = include_str!("../presets/ci.json");

/// Bundled configuration by file name.
pub fn bundled_preset(name: &str) -> Option<&'static str> {
    match name {
        "paper.json" | "paper" => Some(PAPER_PRESET),
        "ci.json" | "ci" => Some(CI_PRESET),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_geometry")]
    pub geometry: ConeBeamGeometry,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub noise: NoiseSettings,
    pub experiment: ExperimentSettings,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(default)]
    pub acceptance: AcceptanceThresholds,
    #[serde(default)]
    pub output: OutputSettings,
}

fn default_geometry() -> ConeBeamGeometry {
    ConeBeamGeometry { radius: 10.0, admissible_radius: None, denominator_floor: DEFAULT_DENOMINATOR_FLOOR }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub amplitude: AmplitudeConvention,
    #[serde(default = "default_index_limit")]
    pub detector_index_limit: i64,
}

fn one() -> f64 {
    1.0
}
fn default_index_limit() -> i64 {
    DEFAULT_DETECTOR_INDEX_LIMIT
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            seed: 0,
            scale: 1.0,
            amplitude: AmplitudeConvention::default(),
            detector_index_limit: DEFAULT_DETECTOR_INDEX_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub x0: [f64; 3],
    /// Local offsets; evaluation points are `x0 + eps * offset`.
    pub checkpoints: Vec<[f64; 3]>,
    /// Checkpoint indices for the 2D histogram and covariance comparison.
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_views")]
    pub n_views: usize,
    /// Optional; must equal `2 pi / n_views` when given.
    #[serde(default)]
    pub delta_s: Option<f64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub range: RangePolicy,
    #[serde(default = "default_margin")]
    pub footprint_margin: i64,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

fn default_eps() -> f64 {
    0.05
}
fn default_views() -> usize {
    500
}
fn default_realizations() -> usize {
    20_000
}
fn default_bins() -> usize {
    21
}
fn default_margin() -> i64 {
    DEFAULT_FOOTPRINT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_fan")]
    pub xi_fan: usize,
    #[serde(default = "default_y2_samples")]
    pub y2_samples: usize,
    #[serde(default = "default_y2_tolerances")]
    pub y2_tolerances: Vec<f64>,
    #[serde(default = "default_ellipse_samples")]
    pub ellipse_samples: usize,
    #[serde(default)]
    pub weyl: WeylSettings,
}

fn default_resolution() -> usize {
    4000
}
fn default_fan() -> usize {
    8
}
fn default_y2_samples() -> usize {
    100_000
}
fn default_y2_tolerances() -> Vec<f64> {
    vec![1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3]
}
fn default_ellipse_samples() -> usize {
    10_000
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            resolution: default_resolution(),
            xi_fan: default_fan(),
            y2_samples: default_y2_samples(),
            y2_tolerances: default_y2_tolerances(),
            ellipse_samples: default_ellipse_samples(),
            weyl: WeylSettings::default(),
        }
    }
}

/// Weyl-sum demo for `f(y) = y^2 / 2` on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylSettings {
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default = "default_weyl_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_equidist_eps")]
    pub equidist_eps: f64,
}

fn default_interval() -> [f64; 2] {
    [0.2, 0.8]
}
fn default_weyl_eps() -> Vec<f64> {
    (0..6).map(|k| 10f64.powf(-2.0 - 0.5 * k as f64)).collect()
}
fn default_equidist_eps() -> f64 {
    1e-4
}

impl Default for WeylSettings {
    fn default() -> Self {
        WeylSettings { interval: default_interval(), eps: default_weyl_eps(), equidist_eps: default_equidist_eps() }
    }
}

/// Target value with an absolute tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub tol: f64,
}

impl Target {
    pub fn holds(&self, v: f64) -> bool {
        (v - self.value).abs() <= self.tol
    }
}

/// Thresholds checked by `--assert`. Unset entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceThresholds {
    #[serde(default)]
    pub predicted_variance: Option<Target>,
    #[serde(default)]
    pub predicted_cross_covariance: Option<Target>,
    /// Allowed relative deviation of the sample variance at the first
    /// checkpoint from the predicted `C(0)`.
    #[serde(default)]
    pub sample_variance_rel: Option<f64>,
    #[serde(default)]
    pub covariance_mismatch: Option<f64>,
    #[serde(default)]
    pub pdf_mismatch_1d: Option<f64>,
    #[serde(default)]
    pub pdf_mismatch_2d: Option<f64>,
    /// Bound on `max |ellipse residual| / R^4`.
    #[serde(default)]
    pub ellipse_residual: Option<f64>,
    #[serde(default)]
    pub weyl_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "default_out")]
    pub dir: String,
    #[serde(default)]
    pub line_scans: Vec<LineScan>,
}

fn default_out() -> String {
    "out".into()
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings { dir: default_out(), line_scans: Vec::new() }
    }
}

/// `C(t * direction)` for `points` values of `t` in `[t_min, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineScan {
    pub direction: [f64; 3],
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl LineScan {
    pub fn ts(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.t_min];
        }
        (0..self.points)
            .map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Byte offset of a 1-based line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

impl Config {
    /// Parses and validates a document. Syntax errors name the byte offset,
    /// schema errors the field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                Error::InvalidConfig(format!(
                    "malformed JSON at byte offset {} (line {}, column {}): {inner}",
                    byte_offset(text, inner.line(), inner.column()),
                    inner.line(),
                    inner.column()
                ))
            } else {
                Error::InvalidConfig(format!("at `{path}`: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn paper() -> Self {
        Config::from_json(PAPER_PRESET).expect("bundled paper preset is valid")
    }

    pub fn ci() -> Self {
        Config::from_json(CI_PRESET).expect("bundled CI preset is valid")
    }

    pub fn delta_s(&self) -> f64 {
        TAU / self.experiment.n_views as f64
    }

    pub fn x0(&self) -> Point3 {
        Point3::from_array(self.experiment.x0)
    }

    pub fn checkpoints(&self) -> Vec<Point3> {
        self.experiment.checkpoints.iter().map(|c| Point3::from_array(*c)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.kernel.validate()?;
        if !(1.0 + self.kernel.a > 0.0) {
            return Err(Error::InvalidConfig("kernel support 1 + a must be positive".into()));
        }
        let ex = &self.experiment;
        if !(ex.eps > 0.0 && ex.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("experiment.eps must be positive, got {}", ex.eps)));
        }
        if ex.n_views == 0 {
            return Err(Error::InvalidConfig("experiment.n_views must be positive".into()));
        }
        if let Some(ds) = ex.delta_s {
            if (ds * ex.n_views as f64 - TAU).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "experiment.delta_s * n_views = {} differs from 2 pi",
                    ds * ex.n_views as f64
                )));
            }
        }
        if ex.realizations == 0 {
            return Err(Error::InvalidConfig("experiment.realizations must be at least 1".into()));
        }
        if ex.bins < 2 {
            return Err(Error::InvalidConfig("experiment.bins must be at least 2".into()));
        }
        if ex.checkpoints.is_empty() {
            return Err(Error::InvalidConfig("experiment.checkpoints must not be empty".into()));
        }
        if let Some([a, b]) = ex.pair {
            if a >= ex.checkpoints.len() || b >= ex.checkpoints.len() || a == b {
                return Err(Error::InvalidConfig(format!("experiment.pair [{a}, {b}] must name two distinct checkpoints")));
            }
        }
        ex.quadrature.validate()?;
        if self.checks.y2_tolerances.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidConfig("checks.y2_tolerances must be positive".into()));
        }
        for s in &self.output.line_scans {
            if s.points == 0 || s.direction.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidConfig("line scans need a nonzero direction and at least one point".into()));
            }
        }
        self.experiment()?.validate()
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        Ok(NoiseModel::new(self.experiment.eps, self.experiment.n_views, self.noise.seed)?
            .with_scale(self.noise.scale)
            .with_amplitude(self.noise.amplitude)
            .with_detector_index_limit(self.noise.detector_index_limit))
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Ok(Experiment {
            geometry: self.geometry,
            kernel: Kernel::new(self.kernel)?,
            noise: self.noise_model()?,
            x0: self.x0(),
            checkpoints: self.checkpoints(),
            realizations: self.experiment.realizations,
            footprint_margin: self.experiment.footprint_margin,
        })
    }
}
