use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{radon2d_gradient, radon2d_psi, ConeBeamGeometry, Point3};

/// Minimum scan resolution.
pub const MIN_RESOLUTION: usize = 1000;

/// Relative level below which a sampled determinant counts as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcquisitionModel {
    /// Planar Radon transform; `x0` uses `(x1, x2)` and `xi` has length 1.
    Radon2D,
    /// Circular cone beam; `xi` has length 2.
    ConeBeam(ConeBeamGeometry),
}

impl AcquisitionModel {
    fn xi_len(&self) -> usize {
        match self {
            AcquisitionModel::Radon2D => 1,
            AcquisitionModel::ConeBeam(_) => 2,
        }
    }

    /// `xi . Psi(x0, s)`
    fn phase(&self, x0: Point3, xi: &[f64], s: f64) -> Result<f64> {
        match self {
            AcquisitionModel::Radon2D => Ok(xi[0] * radon2d_psi([x0.x1, x0.x2], s)),
            AcquisitionModel::ConeBeam(g) => {
                let p = g.project(x0, s)?;
                Ok(xi[0] * p.u + xi[1] * p.v)
            }
        }
    }

    fn components(&self, x0: Point3, s: f64) -> Result<Vec<f64>> {
        match self {
            AcquisitionModel::Radon2D => Ok(vec![radon2d_psi([x0.x1, x0.x2], s)]),
            AcquisitionModel::ConeBeam(g) => {
                let p = g.project(x0, s)?;
                Ok(vec![p.u, p.v])
            }
        }
    }

    /// Rows of `dPsi/dx(x0, s)`.
    fn jacobian(&self, x0: Point3, s: f64) -> Result<Vec<Vec<f64>>> {
        match self {
            AcquisitionModel::Radon2D => Ok(vec![radon2d_gradient(s).to_vec()]),
            AcquisitionModel::ConeBeam(g) => Ok(g.project_gradient(x0, s)?.iter().map(|r| r.to_vec()).collect()),
        }
    }

    fn dim(&self) -> usize {
        match self {
            AcquisitionModel::Radon2D => 2,
            AcquisitionModel::ConeBeam(_) => 3,
        }
    }
}

/// Zero set of the Hessian determinant over the source parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSetReport {
    pub xi: Vec<f64>,
    pub roots: Vec<f64>,
    pub count: usize,
    /// The determinant vanishes identically (to tolerance).
    pub degenerate: bool,
    pub resolution: usize,
    pub max_abs_determinant: f64,
    pub message: Option<String>,
}

fn fd_step(resolution: usize) -> f64 {
    TAU / resolution as f64 * 0.1
}

/// `d^2/ds^2 (xi . Psi(x0, s))` by central differences.
fn hessian_fd(model: &AcquisitionModel, x0: Point3, xi: &[f64], s: f64, h: f64) -> Result<f64> {
    let p = model.phase(x0, xi, s + h)?;
    let c = model.phase(x0, xi, s)?;
    let m = model.phase(x0, xi, s - h)?;
    Ok((p - 2.0 * c + m) / (h * h))
}

/// Analytic `d^2/dalpha^2 (xi alpha.x0) = -xi alpha.x0` for the planar
/// Radon transform.
pub fn radon2d_hessian(x0: [f64; 2], xi: f64, alpha: f64) -> f64 {
    -xi * radon2d_psi(x0, alpha)
}

/// Samples `det(d^2_y (xi . Psi(x0, y)))` over `[0, 2pi)`, brackets sign
/// changes and bisects them to roots.
pub fn y1_scan(model: &AcquisitionModel, x0: Point3, xi: &[f64], resolution: usize) -> Result<ZeroSetReport> {
    if xi.len() != model.xi_len() {
        return Err(Error::ShapeMismatch(format!("xi has length {}, expected {}", xi.len(), model.xi_len())));
    }
    let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if xi_norm == 0.0 || !xi_norm.is_finite() {
        return Err(Error::ZeroDirection);
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidConfig(format!("scan resolution must be at least {MIN_RESOLUTION}")));
    }
    let h = fd_step(resolution);
    let ds = TAU / resolution as f64;
    let det = |s: f64| hessian_fd(model, x0, xi, s, h);
    let values: Vec<f64> = (0..resolution).map(|i| det(i as f64 * ds)).collect::<Result<_>>()?;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = xi_norm * x0.norm().max(1.0);
    if max_abs <= DEGENERACY_TOLERANCE * scale {
        return Ok(ZeroSetReport {
            xi: xi.to_vec(),
            roots: Vec::new(),
            count: 0,
            degenerate: true,
            resolution,
            max_abs_determinant: max_abs,
            message: Some(format!(
                "Hessian determinant vanishes identically for xi = {xi:?}: the detector trace of x0 contains a \
                 straight segment (for the circular cone beam, x0 lies in the source plane x3 = 0 or on the axis)"
            )),
        });
    }
    let mut roots = Vec::new();
    for i in 0..resolution {
        let (a, b) = (i as f64 * ds, (i + 1) as f64 * ds);
        let (fa, fb) = (values[i], values[(i + 1) % resolution]);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = det(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            roots.push(if r >= TAU { r - TAU } else { r });
        }
    }
    Ok(ZeroSetReport {
        xi: xi.to_vec(),
        count: roots.len(),
        roots,
        degenerate: false,
        resolution,
        max_abs_determinant: max_abs,
        message: None,
    })
}

/// Y1 check over all directions `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Y1Check {
    /// Scan for the direction along which the Hessian is smallest.
    pub worst: ZeroSetReport,
    /// Scans for a fan of directions.
    pub fan: Vec<ZeroSetReport>,
    pub degenerate: bool,
}

/// Scans a fan of directions plus the least-curved one.
///
/// For the cone beam the least-curved direction minimizes
/// `sum_s (xi . Psi''(s))^2`, the smallest eigenvector of the Gram matrix of
/// `(U'', V'')`; the Hessian vanishes identically for some `xi` exactly when
/// that eigenvalue is zero.
pub fn y1_check(model: &AcquisitionModel, x0: Point3, resolution: usize, fan: usize) -> Result<Y1Check> {
    let worst_xi = match model {
        AcquisitionModel::Radon2D => vec![1.0],
        AcquisitionModel::ConeBeam(_) => {
            let h = fd_step(resolution);
            let ds = TAU / resolution as f64;
            let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
            for i in 0..resolution {
                let s = i as f64 * ds;
                let p = model.components(x0, s + h)?;
                let c = model.components(x0, s)?;
                let m = model.components(x0, s - h)?;
                let u2 = (p[0] - 2.0 * c[0] + m[0]) / (h * h);
                let v2 = (p[1] - 2.0 * c[1] + m[1]) / (h * h);
                g11 += u2 * u2;
                g12 += u2 * v2;
                g22 += v2 * v2;
            }
            // smallest eigenvector of [[g11, g12], [g12, g22]]
            let tr = g11 + g22;
            let disc = ((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12).sqrt();
            let lmin = 0.5 * (tr - disc);
            let v = if g12.abs() > 0.0 {
                [g12, lmin - g11]
            } else if g11 <= g22 {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
            let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
            vec![v[0] / n, v[1] / n]
        }
    };
    let worst = y1_scan(model, x0, &worst_xi, resolution)?;
    let fan: Vec<ZeroSetReport> = match model {
        AcquisitionModel::Radon2D => vec![y1_scan(model, x0, &[-1.0], resolution)?],
        AcquisitionModel::ConeBeam(_) => (0..fan)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / fan as f64;
                y1_scan(model, x0, &[a.cos(), a.sin()], resolution)
            })
            .collect::<Result<_>>()?,
    };
    let degenerate = worst.degenerate || fan.iter().any(|r| r.degenerate);
    Ok(Y1Check { worst, fan, degenerate })
}

/// Fraction of `samples` source positions where
/// `|dPsi/dx(x0, y) x| < tol * ||dPsi/dx(x0, y)|| * |x|`.
pub fn y2_measure(model: &AcquisitionModel, x0: Point3, xcheck: Point3, samples: usize, tol: f64) -> Result<f64> {
    let xc = &xcheck.to_array()[..model.dim()];
    let xn = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if xn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("y2 scan needs at least one sample".into()));
    }
    let ds = TAU / samples as f64;
    let mut hits = 0usize;
    for i in 0..samples {
        let s = (i as f64 + 0.5) * ds;
        let jac = model.jacobian(x0, s)?;
        let frob = jac.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let image = jac.iter().map(|r| r.iter().zip(xc).map(|(a, b)| a * b).sum::<f64>());
        let norm = image.map(|v| v * v).sum::<f64>().sqrt();
        if norm < tol * frob * xn {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}
