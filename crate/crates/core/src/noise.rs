//! Structured sinogram noise.
//!
//! `eta[j, k] = A * h(s_j, eps k1, eps k2) * nu[j, k]` with
//! `h(s, u, v) = (1 + 0.5 sin 2s)(1 - 0.4 cos u)(1 + 0.6 sin v)` and
//! `nu` i.i.d. uniform on `[-1, 1]`, so `E eta^2 = A^2 sigma^2` with
//! `sigma^2 = h^2 / 3`.
//!
//! Each `nu` is a Philox draw keyed by the seed and counted by
//! `(realization, j, k1, k2)`: values never depend on evaluation order, on
//! which samples are requested, or on thread scheduling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::philox;

/// Default bound on `|k1|`, `|k2|`.
pub const DEFAULT_DETECTOR_INDEX_LIMIT: i64 = 1 << 30;

/// `h(s, u, v)`
pub fn h_field(s: f64, u: f64, v: f64) -> f64 {
    (1.0 + 0.5 * (2.0 * s).sin()) * (1.0 - 0.4 * u.cos()) * (1.0 + 0.6 * v.sin())
}

/// `sigma^2(s, u, v) = h^2 / 3`, the variance profile of the unit-amplitude
/// noise.
pub fn sigma2(s: f64, u: f64, v: f64) -> f64 {
    let h = h_field(s, u, v);
    h * h / 3.0
}

/// How the noise amplitude `A` scales with the sampling steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeConvention {
    /// `A = eps^2 / sqrt(ds)`: `E eta^2 = eps^(2 gamma) ds^-(n-N) sigma^2`
    /// with `gamma = 2` and one source parameter, the normalization under
    /// which the reconstruction variance tends to `C(0)`.
    #[default]
    SqrtViewStep,
    /// `A = eps^2 / ds`. Inflates the variance by `1/ds`.
    ViewStep,
}

/// Variance profile `sigma^2(s, u, v)` of the data noise, the input of the
/// covariance prediction.
pub trait VarianceField: Sync {
    fn sigma2(&self, s: f64, u: f64, v: f64) -> f64;
}

/// Source of the sinogram noise samples `eta[j, k]`.
pub trait NoiseSource: Sync {
    fn eta(&self, realization: u32, j: usize, k1: i64, k2: i64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub eps: f64,
    pub delta_s: f64,
    pub n_views: usize,
    pub seed: u64,
    /// Multiplies `h`; covariances scale with its square.
    pub scale: f64,
    pub amplitude: AmplitudeConvention,
    pub detector_index_limit: i64,
}

impl NoiseModel {
    pub fn new(eps: f64, n_views: usize, seed: u64) -> Result<Self> {
        let m = NoiseModel {
            eps,
            delta_s: std::f64::consts::TAU / n_views as f64,
            n_views,
            seed,
            scale: 1.0,
            amplitude: AmplitudeConvention::default(),
            detector_index_limit: DEFAULT_DETECTOR_INDEX_LIMIT,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_amplitude(mut self, amplitude: AmplitudeConvention) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_detector_index_limit(mut self, limit: i64) -> Self {
        self.detector_index_limit = limit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta_s > 0.0 && self.delta_s.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta_s must be positive, got {}", self.delta_s)));
        }
        if self.n_views == 0 || self.n_views > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!("n_views out of range: {}", self.n_views)));
        }
        if !self.scale.is_finite() {
            return Err(Error::InvalidConfig("noise.scale must be finite".into()));
        }
        if !(1..=i32::MAX as i64).contains(&self.detector_index_limit) {
            return Err(Error::InvalidConfig("detector index limit must lie in [1, 2^31)".into()));
        }
        Ok(())
    }

    /// The factor `A` in front of `h * nu`.
    pub fn amplitude(&self) -> f64 {
        let e2 = self.eps * self.eps;
        match self.amplitude {
            AmplitudeConvention::SqrtViewStep => e2 / self.delta_s.sqrt(),
            AmplitudeConvention::ViewStep => e2 / self.delta_s,
        }
    }

    pub fn view_angle(&self, j: usize) -> f64 {
        j as f64 * self.delta_s
    }

    /// `scale * h` at grid node `(j, k1, k2)`.
    pub fn profile(&self, j: usize, k1: i64, k2: i64) -> f64 {
        self.scale * h_field(self.view_angle(j), self.eps * k1 as f64, self.eps * k2 as f64)
    }

    pub(crate) fn check_index(&self, j: usize, k1: i64, k2: i64) -> Result<()> {
        if j >= self.n_views {
            return Err(Error::IndexOutOfGrid(format!("view {j} >= {}", self.n_views)));
        }
        let lim = self.detector_index_limit;
        if k1.abs() > lim || k2.abs() > lim {
            return Err(Error::IndexOutOfGrid(format!("detector index ({k1}, {k2}) beyond +-{lim}")));
        }
        Ok(())
    }

    /// The uniform `nu` in `[-1, 1)` at a grid node. Indices are not
    /// checked.
    #[inline]
    pub fn unit_draw(&self, realization: u32, j: usize, k1: i64, k2: i64) -> f64 {
        let ctr = [realization, j as u32, k1 as i32 as u32, k2 as i32 as u32];
        philox::uniform_symmetric(ctr, philox::key_from_seed(self.seed))
    }

    /// `eta[j, k]` for the given realization.
    pub fn sample_noise(&self, realization: u32, j: usize, k1: i64, k2: i64) -> Result<f64> {
        self.check_index(j, k1, k2)?;
        Ok(self.amplitude() * self.profile(j, k1, k2) * self.unit_draw(realization, j, k1, k2))
    }
}

impl VarianceField for NoiseModel {
    fn sigma2(&self, s: f64, u: f64, v: f64) -> f64 {
        self.scale * self.scale * sigma2(s, u, v)
    }
}

impl NoiseSource for NoiseModel {
    fn eta(&self, realization: u32, j: usize, k1: i64, k2: i64) -> Result<f64> {
        self.sample_noise(realization, j, k1, k2)
    }
}
