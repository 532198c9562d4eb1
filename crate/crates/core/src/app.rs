//! Orchestration behind the `grf-tomo` binary: `predict`, `simulate` and
//! `check`, their output files and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, AcquisitionModel, WeylSumResult, Y1Check, ZeroSetReport};
use crate::config::{self, Config};
use crate::covariance::CovariancePredictor;
use crate::error::Error;
use crate::geometry::{Jacobian, Point3};
use crate::noise::{self, NoiseModel};
use crate::philox;
use crate::recon::{self, GaussianityReport, SampleStats};
use crate::stats::{fmt_f64, Histogram};

/// Dimension of the object space, of the source parameter space plus
/// detector, and the noise decay exponent, for the circular cone beam.
const OBJECT_DIM: u32 = 3;
const DATA_DIM: u32 = 2;
const NOISE_GAMMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Predict,
    Simulate,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Simulate => "simulate",
            Command::Check => "check",
        }
    }
}

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Numerical(Error),
    Io(String),
    /// `--assert` thresholds that failed.
    Assertion(Vec<String>),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Assertion(_) => 4,
            AppError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Numerical(e) => write!(f, "numerical error: {e}"),
            AppError::Io(m) => write!(f, "i/o error: {m}"),
            AppError::Assertion(v) => write!(f, "acceptance thresholds failed: {}", v.join("; ")),
        }
    }
}

impl std::error::Error for AppError {}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            AppError::Config(e.to_string())
        } else {
            AppError::Numerical(e)
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker count; `None` uses the hardware parallelism.
    pub threads: Option<usize>,
    pub realizations: Option<usize>,
    pub out: Option<PathBuf>,
    pub assert: bool,
}

/// Reads a config file. A missing file named like a bundled preset falls
/// back to the preset; no path means `paper.json`.
pub fn load_config(path: Option<&Path>) -> AppResult<Config> {
    let text = match path {
        None => config::PAPER_PRESET.to_string(),
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                match config::bundled_preset(name) {
                    Some(t) if e.kind() == std::io::ErrorKind::NotFound => {
                        log::info!("{} not found, using the bundled preset", p.display());
                        t.to_string()
                    }
                    _ => return Err(AppError::Config(format!("cannot read {}: {e}", p.display()))),
                }
            }
        },
    };
    Config::from_json(&text).map_err(AppError::from)
}

/// Applies the overrides and revalidates.
pub fn apply_overrides(mut cfg: Config, opts: &RunOptions) -> AppResult<Config> {
    if let Some(s) = opts.seed {
        cfg.noise.seed = s;
    }
    if let Some(r) = opts.realizations {
        cfg.experiment.realizations = r;
    }
    if let Some(o) = &opts.out {
        cfg.output.dir = o.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineScanResult {
    pub direction: [f64; 3],
    pub t: Vec<f64>,
    pub covariance: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub x0: [f64; 3],
    pub checkpoints: Vec<[f64; 3]>,
    /// `C(0)`, the variance at every point.
    pub variance: f64,
    /// `C(x_i - x_j)` over the checkpoint offsets.
    pub matrix: Vec<Vec<f64>>,
    /// Change of each entry when the panel count doubles.
    pub refinement_change: Vec<Vec<f64>>,
    pub pair: Option<[usize; 2]>,
    pub pair_matrix: Option<Vec<Vec<f64>>>,
    pub line_scans: Vec<LineScanResult>,
    pub smoothness_warning: Option<String>,
}

impl Prediction {
    /// `C(x_a - x_b)` for the configured pair.
    pub fn cross_covariance(&self) -> Option<f64> {
        self.pair.map(|[a, b]| self.matrix[a][b])
    }
}

fn predictor(cfg: &Config, noise: &NoiseModel) -> AppResult<CovariancePredictor> {
    let exp = cfg.experiment()?;
    Ok(CovariancePredictor::new(&cfg.geometry, noise, &exp.kernel, exp.x0, cfg.experiment.quadrature)?)
}

pub fn predict(cfg: &Config) -> AppResult<Prediction> {
    let noise = cfg.noise_model()?;
    let p = predictor(cfg, &noise)?;
    let cps = cfg.checkpoints();
    let matrix = p.predicted_cov_matrix(&cps)?;
    let refinement_change = cps
        .iter()
        .map(|a| cps.iter().map(|b| p.predicted_covariance_with_error(a.sub(*b)).1).collect())
        .collect();
    let variance = p.predicted_covariance(Point3::ORIGIN)?;
    let line_scans = cfg
        .output
        .line_scans
        .iter()
        .map(|s| {
            let rows = p.line_scan(Point3::from_array(s.direction), &s.ts())?;
            Ok(LineScanResult {
                direction: s.direction,
                t: rows.iter().map(|r| r.0).collect(),
                covariance: rows.iter().map(|r| r.1).collect(),
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    let pair = cfg.experiment.pair;
    Ok(Prediction {
        x0: cfg.experiment.x0,
        checkpoints: cfg.experiment.checkpoints.clone(),
        variance,
        pair_matrix: pair.map(|[a, b]| recon::submatrix(&matrix, &[a, b])),
        matrix,
        refinement_change,
        pair,
        line_scans,
        smoothness_warning: cfg.kernel.smoothness_warning(OBJECT_DIM, DATA_DIM, NOISE_GAMMA),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulation {
    pub seed: u64,
    pub stats: SampleStats,
    pub predicted: Vec<Vec<f64>>,
    /// `|var_o - C(0)| / C(0)` per checkpoint.
    pub variance_rel_error: Vec<f64>,
    pub report: GaussianityReport,
}

pub fn simulate(cfg: &Config) -> AppResult<Simulation> {
    let exp = cfg.experiment()?;
    let p = predictor(cfg, &exp.noise)?;
    let predicted = p.predicted_cov_matrix(&exp.checkpoints)?;
    let stats = exp.run()?;
    let report = recon::compare_with_prediction(
        &stats,
        &predicted,
        cfg.experiment.bins,
        cfg.experiment.range,
        cfg.experiment.pair,
    )?;
    let variance_rel_error = stats
        .variance
        .iter()
        .enumerate()
        .map(|(i, v)| (v - predicted[i][i]).abs() / predicted[i][i])
        .collect();
    Ok(Simulation { seed: cfg.noise.seed, stats, predicted, variance_rel_error, report })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllipseSummary {
    pub samples: usize,
    pub max_abs_residual: f64,
    /// `max_abs_residual / R^4`.
    pub max_scaled_residual: f64,
    /// Largest `||J - J_fd||_F / ||J||_F`.
    pub max_jacobian_rel_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Y2Scan {
    pub xcheck: [f64; 3],
    pub tolerances: Vec<f64>,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checks {
    pub x0: [f64; 3],
    pub ellipse: EllipseSummary,
    pub y1_cone_beam: Y1Check,
    pub y1_radon2d: ZeroSetReport,
    pub y2: Vec<Y2Scan>,
    /// Smallest noise variance profile on a grid over the views and
    /// detector window; positive means the nonvanishing assumption holds.
    pub min_noise_variance: f64,
    pub weyl: WeylSumResult,
    pub equidist_eps: f64,
    pub equidist_cos2: f64,
    pub smoothness_warning: Option<String>,
}

/// Deterministic point in the admissible cylinder, `|x3| <= R`, and an angle.
fn sample_point(cfg: &Config, i: u32) -> (Point3, f64) {
    let key = philox::key_from_seed(cfg.noise.seed);
    let u = |k: u32| 0.5 * (philox::uniform_symmetric([i, 0x0e11_1b5e, k, 0], key) + 1.0);
    let c = cfg.geometry.admissible_radius();
    let r = c * u(0).sqrt();
    let phi = std::f64::consts::TAU * u(1);
    let x3 = cfg.geometry.radius * (2.0 * u(2) - 1.0);
    (Point3::new(r * phi.cos(), r * phi.sin(), x3), std::f64::consts::TAU * u(3))
}

fn jacobian_fd(cfg: &Config, x: Point3, s: f64) -> crate::Result<Jacobian> {
    let h = 1e-5;
    let mut j = [[0.0; 3]; 2];
    for c in 0..3 {
        let mut e = [0.0; 3];
        e[c] = 1.0;
        let dir = Point3::from_array(e);
        let p = cfg.geometry.project(x.offset(h, dir), s)?;
        let m = cfg.geometry.project(x.offset(-h, dir), s)?;
        j[0][c] = (p.u - m.u) / (2.0 * h);
        j[1][c] = (p.v - m.v) / (2.0 * h);
    }
    Ok(j)
}

pub fn ellipse_summary(cfg: &Config) -> AppResult<EllipseSummary> {
    let n = cfg.checks.ellipse_samples;
    let (mut max_res, mut max_jac) = (0.0f64, 0.0f64);
    for i in 0..n as u32 {
        let (x, s) = sample_point(cfg, i);
        max_res = max_res.max(cfg.geometry.ellipse_residual(x, s)?.abs());
        let a = cfg.geometry.project_gradient(x, s)?;
        let f = jacobian_fd(cfg, x, s)?;
        let diff: f64 = a.iter().flatten().zip(f.iter().flatten()).map(|(p, q)| (p - q) * (p - q)).sum();
        let norm: f64 = a.iter().flatten().map(|p| p * p).sum();
        max_jac = max_jac.max((diff / norm).sqrt());
    }
    Ok(EllipseSummary {
        samples: n,
        max_abs_residual: max_res,
        max_scaled_residual: max_res / cfg.geometry.radius.powi(4),
        max_jacobian_rel_error: max_jac,
    })
}

fn min_noise_variance(cfg: &Config) -> f64 {
    let n = cfg.experiment.n_views;
    let mut m = f64::INFINITY;
    for j in 0..n {
        let s = j as f64 * cfg.delta_s();
        for a in -20..=20 {
            for b in -20..=20 {
                m = m.min(noise::sigma2(s, 0.5 * a as f64, 0.5 * b as f64));
            }
        }
    }
    m
}

pub fn check(cfg: &Config) -> AppResult<Checks> {
    let x0 = cfg.x0();
    let cone = AcquisitionModel::ConeBeam(cfg.geometry);
    let y1_cone_beam = analysis::y1_check(&cone, x0, cfg.checks.resolution, cfg.checks.xi_fan)?;
    let y1_radon2d = analysis::y1_scan(&AcquisitionModel::Radon2D, x0, &[1.0], cfg.checks.resolution)?;

    let cps = cfg.checkpoints();
    let mut dirs: Vec<Point3> = cps.iter().copied().filter(|c| c.norm() > 0.0).collect();
    if let Some([a, b]) = cfg.experiment.pair {
        dirs.push(cps[a].sub(cps[b]));
    }
    if dirs.is_empty() {
        dirs.push(Point3::new(1.0, 0.0, 0.0));
    }
    let y2 = dirs
        .iter()
        .filter(|d| d.norm() > 0.0)
        .map(|d| {
            let fractions = cfg
                .checks
                .y2_tolerances
                .iter()
                .map(|&t| analysis::y2_measure(&cone, x0, *d, cfg.checks.y2_samples, t))
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(Y2Scan { xcheck: d.to_array(), tolerances: cfg.checks.y2_tolerances.clone(), fractions })
        })
        .collect::<AppResult<Vec<_>>>()?;

    let w = &cfg.checks.weyl;
    let box1 = [(w.interval[0], w.interval[1])];
    let weyl = analysis::weyl_decay(|y| 0.5 * y[0] * y[0], &box1, &w.eps)?;
    let equidist_cos2 = analysis::equidist_average(
        |r| (std::f64::consts::TAU * r[0]).cos().powi(2),
        |y| vec![0.5 * y[0] * y[0]],
        w.equidist_eps,
        &box1,
    )?;

    Ok(Checks {
        x0: cfg.experiment.x0,
        ellipse: ellipse_summary(cfg)?,
        y1_cone_beam,
        y1_radon2d,
        y2,
        min_noise_variance: min_noise_variance(cfg),
        weyl,
        equidist_eps: w.equidist_eps,
        equidist_cos2,
        smoothness_warning: cfg.kernel.smoothness_warning(OBJECT_DIM, DATA_DIM, NOISE_GAMMA),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

fn bound(out: &mut Vec<AssertionOutcome>, name: &str, value: f64, max: Option<f64>) {
    if let Some(m) = max {
        out.push(AssertionOutcome { name: name.into(), value, threshold: if m.abs() < 1e-3 { format!("<= {m:e}") } else { format!("<= {m}") }, pass: value <= m });
    }
}

fn target(out: &mut Vec<AssertionOutcome>, name: &str, value: Option<f64>, t: Option<config::Target>) {
    if let (Some(v), Some(t)) = (value, t) {
        out.push(AssertionOutcome {
            name: name.into(),
            value: v,
            threshold: format!("{} +- {}", t.value, t.tol),
            pass: t.holds(v),
        });
    }
}

pub fn predict_assertions(cfg: &Config, p: &Prediction) -> Vec<AssertionOutcome> {
    let a = &cfg.acceptance;
    let mut out = Vec::new();
    target(&mut out, "predicted_variance", Some(p.variance), a.predicted_variance);
    target(&mut out, "predicted_cross_covariance", p.cross_covariance(), a.predicted_cross_covariance);
    out
}

pub fn simulate_assertions(cfg: &Config, s: &Simulation) -> Vec<AssertionOutcome> {
    let a = &cfg.acceptance;
    let mut out = Vec::new();
    bound(&mut out, "sample_variance_rel", s.variance_rel_error[0], a.sample_variance_rel);
    bound(&mut out, "covariance_mismatch", s.report.covariance_mismatch, a.covariance_mismatch);
    let worst1d = s.report.mismatch1d.iter().copied().fold(0.0, f64::max);
    bound(&mut out, "pdf_mismatch_1d", worst1d, a.pdf_mismatch_1d);
    if let Some(m) = s.report.mismatch2d {
        bound(&mut out, "pdf_mismatch_2d", m, a.pdf_mismatch_2d);
    }
    out
}

pub fn check_assertions(cfg: &Config, c: &Checks) -> Vec<AssertionOutcome> {
    let a = &cfg.acceptance;
    let mut out = Vec::new();
    bound(&mut out, "ellipse_residual", c.ellipse.max_scaled_residual, a.ellipse_residual);
    bound(&mut out, "weyl_slope", c.weyl.slope, a.weyl_slope);
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub config: Config,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
    pub metrics: serde_json::Value,
    pub assertions: Vec<AssertionOutcome>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> AppResult<Self> {
        fs::create_dir_all(dir).map_err(|e| AppError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> AppResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.to_string_lossy().into_owned());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Io(e.to_string()))?;
        text.push('\n');
        self.put(name, &text)
    }
}

fn prediction_csv(p: &Prediction) -> String {
    let mut s = String::from("i,j,theta1,theta2,theta3,covariance,refinement_change\n");
    for (i, a) in p.checkpoints.iter().enumerate() {
        for (j, b) in p.checkpoints.iter().enumerate() {
            let th = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            let _ = writeln!(
                s,
                "{i},{j},{},{},{},{},{}",
                fmt_f64(th[0]),
                fmt_f64(th[1]),
                fmt_f64(th[2]),
                fmt_f64(p.matrix[i][j]),
                fmt_f64(p.refinement_change[i][j])
            );
        }
    }
    s
}

fn line_scan_csv(r: &LineScanResult) -> String {
    let mut s = String::from("t,theta1,theta2,theta3,covariance\n");
    for (t, c) in r.t.iter().zip(&r.covariance) {
        let d = r.direction;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(t * d[0]),
            fmt_f64(t * d[1]),
            fmt_f64(t * d[2]),
            fmt_f64(*c)
        );
    }
    s
}

/// Histogram CSV with the predicted density of each cell.
fn histogram_csv(h: &Histogram, predicted: &[f64]) -> String {
    let mut s = String::from(if h.dim() == 1 { "center,density,predicted,count\n" } else { "center_x,center_y,density,predicted,count\n" });
    for (((c, d), p), n) in h.cell_centers().iter().zip(&h.density).zip(predicted).zip(&h.counts) {
        for v in c {
            s.push_str(&fmt_f64(*v));
            s.push(',');
        }
        let _ = writeln!(s, "{},{},{n}", fmt_f64(*d), fmt_f64(*p));
    }
    s
}

fn weyl_csv(w: &WeylSumResult) -> String {
    let mut s = String::from("eps,abs_sum,re,im,points\n");
    for (((e, m), (re, im)), n) in w.eps.iter().zip(&w.magnitudes).zip(&w.sums).zip(&w.point_counts) {
        let _ = writeln!(s, "{},{},{},{},{n}", fmt_f64(*e), fmt_f64(*m), fmt_f64(*re), fmt_f64(*im));
    }
    s
}

#[derive(Serialize)]
struct StatsFile<'a> {
    seed: u64,
    realizations: usize,
    mean: &'a [f64],
    variance: &'a [f64],
    covariance: &'a [Vec<f64>],
    predicted_covariance: &'a [Vec<f64>],
    variance_rel_error: &'a [f64],
    covariance_mismatch: f64,
    pdf_mismatch_1d: &'a [f64],
    pair: Option<[usize; 2]>,
    pdf_mismatch_2d: Option<f64>,
    histogram_ranges: Vec<[f64; 2]>,
}

fn write_outputs(cmd: Command, cfg: &Config, w: &mut Writer) -> AppResult<(serde_json::Value, Vec<AssertionOutcome>)> {
    match cmd {
        Command::Predict => {
            let p = predict(cfg)?;
            if let Some(m) = &p.smoothness_warning {
                log::warn!("{m}");
            }
            w.json("cov_pred.json", &p)?;
            w.put("cov_pred.csv", &prediction_csv(&p))?;
            for (k, r) in p.line_scans.iter().enumerate() {
                w.put(&format!("cov_scan_{k}.csv"), &line_scan_csv(r))?;
            }
            let metrics = serde_json::json!({
                "predicted_variance": p.variance,
                "predicted_cross_covariance": p.cross_covariance(),
                "pair_matrix": p.pair_matrix,
            });
            Ok((metrics, predict_assertions(cfg, &p)))
        }
        Command::Simulate => {
            let s = simulate(cfg)?;
            let r = &s.report;
            let file = StatsFile {
                seed: s.seed,
                realizations: s.stats.realizations,
                mean: &s.stats.mean,
                variance: &s.stats.variance,
                covariance: &s.stats.covariance,
                predicted_covariance: &s.predicted,
                variance_rel_error: &s.variance_rel_error,
                covariance_mismatch: r.covariance_mismatch,
                pdf_mismatch_1d: &r.mismatch1d,
                pair: r.pair,
                pdf_mismatch_2d: r.mismatch2d,
                histogram_ranges: r.hist1d.iter().map(|h| [h.axes[0].lo, h.axes[0].hi]).collect(),
            };
            w.json("stats.json", &file)?;
            for (k, (h, p)) in r.hist1d.iter().zip(&r.predicted1d).enumerate() {
                w.put(&format!("hist1d_{k}.csv"), &histogram_csv(h, p))?;
            }
            if let (Some(h), Some(p)) = (&r.hist2d, &r.predicted2d) {
                w.put("hist2d.csv", &histogram_csv(h, p))?;
            }
            let metrics = serde_json::json!({
                "sample_variance": s.stats.variance,
                "variance_rel_error": s.variance_rel_error,
                "covariance_mismatch": r.covariance_mismatch,
                "pdf_mismatch_1d": r.mismatch1d,
                "pdf_mismatch_2d": r.mismatch2d,
            });
            Ok((metrics, simulate_assertions(cfg, &s)))
        }
        Command::Check => {
            let c = check(cfg)?;
            if let Some(m) = &c.smoothness_warning {
                log::warn!("{m}");
            }
            if c.y1_cone_beam.degenerate {
                log::warn!("Y1 is degenerate at x0: {}", c.y1_cone_beam.worst.message.clone().unwrap_or_default());
            }
            w.json("checks.json", &c)?;
            w.put("weyl.csv", &weyl_csv(&c.weyl))?;
            let metrics = serde_json::json!({
                "ellipse_max_scaled_residual": c.ellipse.max_scaled_residual,
                "jacobian_max_rel_error": c.ellipse.max_jacobian_rel_error,
                "y1_degenerate": c.y1_cone_beam.degenerate,
                "y1_radon2d_roots": c.y1_radon2d.count,
                "weyl_slope": c.weyl.slope,
                "equidist_cos2": c.equidist_cos2,
            });
            Ok((metrics, check_assertions(cfg, &c)))
        }
    }
}

/// Runs one command inside a worker pool of the requested size and writes
/// its outputs plus `manifest.json`.
pub fn run(cmd: Command, opts: &RunOptions) -> AppResult<RunManifest> {
    let cfg = apply_overrides(load_config(opts.config.as_deref())?, opts)?;
    let threads = opts.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let started_unix = unix_now();
    let clock = Instant::now();
    let mut w = Writer::new(Path::new(&cfg.output.dir))?;
    let (metrics, assertions) = pool.install(|| write_outputs(cmd, &cfg, &mut w))?;
    let mut outputs = w.written.clone();
    outputs.push(w.dir.join("manifest.json").to_string_lossy().into_owned());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        seed: cfg.noise.seed,
        threads: pool.current_num_threads(),
        config: cfg.clone(),
        started_unix,
        finished_unix: unix_now(),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        outputs,
        metrics,
        assertions: if opts.assert { assertions } else { Vec::new() },
    };
    w.json("manifest.json", &manifest)?;
    if opts.assert {
        let failed: Vec<String> = manifest
            .assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| format!("{} = {} (want {})", a.name, a.value, a.threshold))
            .collect();
        if !failed.is_empty() {
            return Err(AppError::Assertion(failed));
        }
    }
    Ok(manifest)
}
