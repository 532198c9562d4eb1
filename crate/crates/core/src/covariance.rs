//! Covariance of the limiting Gaussian random field.
//!
//! For cone-beam local tomography the point-response function is
//! `G(theta) = iota''(theta1) iota(theta2)`, independent of `x` and `s`, so
//! its autocorrelation factors:
//!
//! ```text
//! (G*G)(theta) = A2(theta1) A0(theta2),   A2 = iota''*iota'',  A0 = iota*iota
//! C(theta)     = int_0^2pi (G*G)(dPsi/dx(x0, s) theta) sigma^2(s, Psi(x0, s)) ds
//! ```
//!
//! and the field has `Cov(x, y) = C(x - y)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Jacobian, Point3, ProjectionGeometry};
use crate::kernel::{AutocorrTable, Kernel, KernelFunction, DEFAULT_TABLE_STEP};
use crate::noise::VarianceField;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    /// Equal panels on `[0, 2pi)`.
    #[serde(default = "default_panels")]
    pub panels: usize,
    /// Gauss–Legendre nodes per panel.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Absolute tolerance on the change of `C` when the panel count doubles.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Autocorrelation table spacing.
    #[serde(default = "default_table_step")]
    pub table_step: f64,
}

fn default_panels() -> usize {
    2000
}
fn default_order() -> usize {
    4
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_table_step() -> f64 {
    DEFAULT_TABLE_STEP
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            panels: default_panels(),
            order: default_order(),
            tolerance: default_tolerance(),
            table_step: default_table_step(),
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || self.order == 0 || self.order > 64 {
            return Err(Error::InvalidConfig("quadrature panels and order must be positive (order <= 64)".into()));
        }
        if !(self.tolerance > 0.0) || !(self.table_step > 0.0 && self.table_step <= 0.1) {
            return Err(Error::InvalidConfig("quadrature tolerance and table_step must be positive, table_step <= 0.1".into()));
        }
        Ok(())
    }
}

/// Source-position nodes with the geometry and noise data the integrand
/// needs.
#[derive(Debug, Clone)]
struct Nodes {
    jacobian: Vec<Jacobian>,
    /// Quadrature weight times `sigma^2`.
    weight: Vec<f64>,
}

impl Nodes {
    fn build<G: ProjectionGeometry, V: VarianceField>(geom: &G, var: &V, x0: Point3, panels: usize, rule: &GaussLegendre) -> Result<Self> {
        let h = TAU / panels as f64;
        let n = panels * rule.len();
        let mut jacobian = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = mid + 0.5 * h * x;
                let d = geom.psi(x0, s)?;
                jacobian.push(geom.psi_jacobian(x0, s)?);
                weight.push(0.5 * h * w * var.sigma2(s, d.u, d.v));
            }
        }
        Ok(Nodes { jacobian, weight })
    }
}

#[derive(Debug, Clone)]
enum Autocorr {
    Table { a2: AutocorrTable, a0: AutocorrTable },
    Direct(Kernel),
}

#[derive(Debug, Clone)]
pub struct CovariancePredictor {
    x0: Point3,
    kernel: Kernel,
    autocorr: Autocorr,
    coarse: Nodes,
    fine: Nodes,
    settings: QuadratureSettings,
}

impl CovariancePredictor {
    pub fn new<G: ProjectionGeometry, V: VarianceField>(
        geometry: &G,
        variance: &V,
        kernel: &Kernel,
        x0: Point3,
        settings: QuadratureSettings,
    ) -> Result<Self> {
        settings.validate()?;
        let rule = GaussLegendre::new(settings.order);
        let coarse = Nodes::build(geometry, variance, x0, settings.panels, &rule)?;
        let fine = Nodes::build(geometry, variance, x0, 2 * settings.panels, &rule)?;
        let autocorr = Autocorr::Table {
            a2: kernel.autocorr_table(KernelFunction::SecondDerivative, settings.table_step),
            a0: kernel.autocorr_table(KernelFunction::Value, settings.table_step),
        };
        Ok(CovariancePredictor { x0, kernel: kernel.clone(), autocorr, coarse, fine, settings })
    }

    /// Evaluate autocorrelations by direct quadrature instead of the tables.
    pub fn with_direct_autocorr(mut self) -> Self {
        self.autocorr = Autocorr::Direct(self.kernel.clone());
        self
    }

    pub fn x0(&self) -> Point3 {
        self.x0
    }

    pub fn settings(&self) -> QuadratureSettings {
        self.settings
    }

    /// `G(theta) = iota''(theta1) iota(theta2)`
    pub fn g_value(&self, theta: [f64; 2]) -> f64 {
        self.kernel.d2(theta[0]) * self.kernel.value(theta[1])
    }

    /// `(G*G)(theta) = A2(theta1) A0(theta2)`
    pub fn gg_star(&self, theta: [f64; 2]) -> f64 {
        match &self.autocorr {
            Autocorr::Table { a2, a0 } => a2.eval(theta[0]) * a0.eval(theta[1]),
            Autocorr::Direct(k) => {
                k.autocorr(KernelFunction::SecondDerivative, theta[0]) * k.autocorr(KernelFunction::Value, theta[1])
            }
        }
    }

    fn integrate(&self, nodes: &Nodes, theta: Point3) -> f64 {
        let t = theta.to_array();
        let dot = |r: &[f64; 3]| r[0] * t[0] + r[1] * t[1] + r[2] * t[2];
        nodes
            .jacobian
            .iter()
            .zip(&nodes.weight)
            .map(|(j, w)| w * self.gg_star([dot(&j[0]), dot(&j[1])]))
            .sum()
    }

    /// `C(theta)` together with the change from doubling the panel count.
    pub fn predicted_covariance_with_error(&self, theta: Point3) -> (f64, f64) {
        let coarse = self.integrate(&self.coarse, theta);
        let fine = self.integrate(&self.fine, theta);
        (fine, (fine - coarse).abs())
    }

    /// `C(theta)` for an offset `theta = x - y` in local coordinates.
    pub fn predicted_covariance(&self, theta: Point3) -> Result<f64> {
        let (c, change) = self.predicted_covariance_with_error(theta);
        if !(change <= self.settings.tolerance) {
            return Err(Error::QuadratureNonConvergence { change, tol: self.settings.tolerance });
        }
        Ok(c)
    }

    /// `L x L` matrix of `C(x_i - x_j)`.
    pub fn predicted_cov_matrix(&self, checkpoints: &[Point3]) -> Result<Vec<Vec<f64>>> {
        if checkpoints.is_empty() {
            return Err(Error::InvalidConfig("at least one checkpoint is required".into()));
        }
        let l = checkpoints.len();
        let mut m = vec![vec![0.0; l]; l];
        for i in 0..l {
            for j in i..l {
                let c = self.predicted_covariance(checkpoints[i].sub(checkpoints[j]))?;
                m[i][j] = c;
                m[j][i] = c;
            }
        }
        Ok(m)
    }

    /// `C(t * direction)` for each `t`.
    pub fn line_scan(&self, direction: Point3, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
        ts.iter()
            .map(|&t| Ok((t, self.predicted_covariance(Point3::ORIGIN.offset(t, direction))?)))
            .collect()
    }
}
