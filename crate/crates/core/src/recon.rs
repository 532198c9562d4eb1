//! Discrete local tomography of pure noise and its Monte-Carlo statistics.
//!
//! The reconstruction from the noise sinogram is
//!
//! ```text
//! N(x) = ds/eps^2 sum_{j,k} iota''((U(x,s_j) - eps k1)/eps) iota((V(x,s_j) - eps k2)/eps) eta[j,k]
//! ```
//!
//! Only detector nodes within the kernel support of the projected point
//! contribute, so each view costs a `(2(1+a)+1)^2`-sized footprint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConeBeamGeometry, Point3};
use crate::kernel::Kernel;
use crate::noise::{NoiseModel, NoiseSource};
use crate::stats::{self, Histogram, Moments, RangePolicy};

/// One index of margin beyond the kernel support on each side.
pub const DEFAULT_FOOTPRINT_MARGIN: i64 = 1;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub geometry: ConeBeamGeometry,
    pub kernel: Kernel,
    /// Carries the grid steps `eps`, `ds`, the view count and the seed.
    pub noise: NoiseModel,
    pub x0: Point3,
    /// Offsets `x` of the evaluation points `x0 + eps * x`.
    pub checkpoints: Vec<Point3>,
    pub realizations: usize,
    pub footprint_margin: i64,
}

/// Per-view detector nodes feeding at least one checkpoint, and each
/// checkpoint's nonzero kernel weights on them.
#[derive(Debug, Clone)]
struct ViewPlan {
    /// `(k1, k2, A * scale * h)` in `k1`-major order.
    cells: Vec<(i64, i64, f64)>,
    /// Per checkpoint: `(cell index, iota'' * iota)` in cell order.
    terms: Vec<Vec<(u32, f64)>>,
}

impl Experiment {
    pub fn eps(&self) -> f64 {
        self.noise.eps
    }

    pub fn delta_s(&self) -> f64 {
        self.noise.delta_s
    }

    pub fn n_views(&self) -> usize {
        self.noise.n_views
    }

    /// `x0 + eps * x` for every checkpoint.
    pub fn points(&self) -> Vec<Point3> {
        self.checkpoints.iter().map(|c| self.x0.offset(self.eps(), *c)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.noise.validate()?;
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("experiment.realizations must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidConfig("experiment.checkpoints must not be empty".into()));
        }
        if self.footprint_margin < 0 {
            return Err(Error::InvalidConfig("footprint margin must be non-negative".into()));
        }
        for (i, p) in self.points().into_iter().enumerate() {
            self.geometry
                .check_admissible(p)
                .map_err(|e| Error::InvalidConfig(format!("checkpoint {i}: {e}")))?;
            for j in 0..self.n_views() {
                self.geometry
                    .project(p, self.noise.view_angle(j))
                    .map_err(|e| Error::InvalidConfig(format!("checkpoint {i}, view {j}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Detector indices `k` with `|c/eps - k| < 1 + a`, widened by the margin.
    fn footprint(&self, c: f64) -> std::ops::RangeInclusive<i64> {
        let r = self.kernel.support_radius();
        let q = c / self.eps();
        let lo = (q - r).floor() as i64 - self.footprint_margin;
        let hi = (q + r).ceil() as i64 + self.footprint_margin;
        lo..=hi
    }

    /// `F(x, s, u', v') = eps^-2 iota''((U - u')/eps) iota((V - v')/eps)`.
    pub fn evaluate_f(&self, x: Point3, s: f64, u: f64, v: f64) -> Result<f64> {
        let p = self.geometry.project(x, s)?;
        let e = self.eps();
        Ok(self.kernel.d2((p.u - u) / e) * self.kernel.value((p.v - v) / e) / (e * e))
    }

    /// Reconstruction at `x` from realization `realization` of `noise`.
    pub fn reconstruct_point<N: NoiseSource + ?Sized>(&self, noise: &N, realization: u32, x: Point3) -> Result<f64> {
        let e = self.eps();
        let mut acc = 0.0;
        for j in 0..self.n_views() {
            let p = self.geometry.project(x, self.noise.view_angle(j))?;
            for k1 in self.footprint(p.u) {
                let w1 = self.kernel.d2((p.u - e * k1 as f64) / e);
                if w1 == 0.0 {
                    continue;
                }
                for k2 in self.footprint(p.v) {
                    let g = w1 * self.kernel.value((p.v - e * k2 as f64) / e);
                    if g == 0.0 {
                        continue;
                    }
                    acc += g * noise.eta(realization, j, k1, k2)?;
                }
            }
        }
        Ok(acc * (self.delta_s() / (e * e)))
    }

    fn plan(&self) -> Result<Vec<ViewPlan>> {
        let e = self.eps();
        let points = self.points();
        let amp = self.noise.amplitude();
        (0..self.n_views())
            .map(|j| {
                let s = self.noise.view_angle(j);
                let mut per_point: Vec<Vec<(i64, i64, f64)>> = Vec::with_capacity(points.len());
                for &x in &points {
                    let p = self.geometry.project(x, s)?;
                    let mut t = Vec::new();
                    for k1 in self.footprint(p.u) {
                        let w1 = self.kernel.d2((p.u - e * k1 as f64) / e);
                        if w1 == 0.0 {
                            continue;
                        }
                        for k2 in self.footprint(p.v) {
                            let g = w1 * self.kernel.value((p.v - e * k2 as f64) / e);
                            if g != 0.0 {
                                t.push((k1, k2, g));
                            }
                        }
                    }
                    per_point.push(t);
                }
                let mut keys: Vec<(i64, i64)> = per_point.iter().flatten().map(|&(a, b, _)| (a, b)).collect();
                keys.sort_unstable();
                keys.dedup();
                for &(k1, k2) in &keys {
                    self.noise.check_index(j, k1, k2)?;
                }
                let cells = keys.iter().map(|&(k1, k2)| (k1, k2, amp * self.noise.profile(j, k1, k2))).collect();
                let terms = per_point
                    .into_iter()
                    .map(|t| {
                        t.into_iter()
                            .map(|(k1, k2, g)| (keys.binary_search(&(k1, k2)).unwrap() as u32, g))
                            .collect()
                    })
                    .collect();
                Ok(ViewPlan { cells, terms })
            })
            .collect()
    }

    /// Reconstructions at every checkpoint for each realization, in
    /// realization order. Bitwise equal to [`Experiment::reconstruct_point`]
    /// with [`NoiseModel`] noise, for any thread count.
    pub fn simulate(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        if self.realizations > u32::MAX as usize {
            return Err(Error::InvalidConfig("too many realizations".into()));
        }
        let plan = self.plan()?;
        let max_cells = plan.iter().map(|v| v.cells.len()).max().unwrap_or(0);
        let l = self.checkpoints.len();
        let factor = self.delta_s() / (self.eps() * self.eps());
        let samples = (0..self.realizations as u32)
            .into_par_iter()
            .map_init(
                || vec![0.0; max_cells],
                |draws, r| {
                    let mut acc = vec![0.0; l];
                    for (j, view) in plan.iter().enumerate() {
                        for (d, &(k1, k2, ap)) in draws.iter_mut().zip(&view.cells) {
                            *d = ap * self.noise.unit_draw(r, j, k1, k2);
                        }
                        for (a, terms) in acc.iter_mut().zip(&view.terms) {
                            for &(c, g) in terms {
                                *a += g * draws[c as usize];
                            }
                        }
                    }
                    acc.iter().map(|a| a * factor).collect()
                },
            )
            .collect();
        Ok(samples)
    }

    /// Runs the Monte-Carlo experiment and reduces in realization order.
    pub fn run(&self) -> Result<SampleStats> {
        if self.realizations < 2 {
            return Err(Error::TooFewRealizations { needed: 2, got: self.realizations });
        }
        let samples = self.simulate()?;
        SampleStats::from_samples(samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub realizations: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Realizations x checkpoints.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl SampleStats {
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Result<Self> {
        let dim = samples.first().map(Vec::len).ok_or(Error::EmptySample)?;
        let mut m = Moments::new(dim);
        for s in &samples {
            m.push(s);
        }
        let covariance = m.covariance()?;
        Ok(SampleStats {
            realizations: samples.len(),
            mean: m.mean().to_vec(),
            variance: (0..dim).map(|i| covariance[i][i]).collect(),
            covariance,
            samples,
        })
    }

    /// Samples at one checkpoint.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[i]).collect()
    }

    /// Covariance restricted to the given checkpoints.
    pub fn sub_covariance(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        submatrix(&self.covariance, idx)
    }
}

pub fn submatrix(m: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect()
}

/// Observed histograms against the predicted zero-mean Gaussian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub hist1d: Vec<Histogram>,
    pub predicted1d: Vec<Vec<f64>>,
    pub mismatch1d: Vec<f64>,
    pub pair: Option<[usize; 2]>,
    pub hist2d: Option<Histogram>,
    pub predicted2d: Option<Vec<f64>>,
    pub mismatch2d: Option<f64>,
    /// `||Cov_o - Cov_p||_1 / ||Cov_p||_1` over the pair, or over all
    /// checkpoints when there is no pair.
    pub covariance_mismatch: f64,
}

pub fn compare_with_prediction(
    stats: &SampleStats,
    predicted: &[Vec<f64>],
    bins: usize,
    range: RangePolicy,
    pair: Option<[usize; 2]>,
) -> Result<GaussianityReport> {
    let l = stats.mean.len();
    if predicted.len() != l {
        return Err(Error::ShapeMismatch(format!("{l} checkpoints vs {}x{} prediction", predicted.len(), predicted.len())));
    }
    let mut hist1d = Vec::with_capacity(l);
    let mut predicted1d = Vec::with_capacity(l);
    let mut mismatch1d = Vec::with_capacity(l);
    for i in 0..l {
        let h = stats::histogram1d(&stats.column(i), bins, range)?;
        let p = stats::gaussian_pdf_on_bins(&[0.0], &[vec![predicted[i][i]]], &h)?;
        mismatch1d.push(stats::pdf_mismatch(&h, &p)?);
        hist1d.push(h);
        predicted1d.push(p);
    }
    let (hist2d, predicted2d, mismatch2d, covariance_mismatch) = match pair {
        Some([a, b]) => {
            if a >= l || b >= l || a == b {
                return Err(Error::InvalidConfig(format!("pair [{a}, {b}] does not name two checkpoints")));
            }
            let h = stats::histogram2d(&stats.column(a), &stats.column(b), bins, range)?;
            let cov = submatrix(predicted, &[a, b]);
            let p = stats::gaussian_pdf_on_bins(&[0.0, 0.0], &cov, &h)?;
            let m = stats::pdf_mismatch(&h, &p)?;
            let cm = stats::relative_l1(&stats.sub_covariance(&[a, b]), &cov)?;
            (Some(h), Some(p), Some(m), cm)
        }
        None => (None, None, None, stats::relative_l1(&stats.covariance, predicted)?),
    };
    Ok(GaussianityReport { hist1d, predicted1d, mismatch1d, pair, hist2d, predicted2d, mismatch2d, covariance_mismatch })
}
