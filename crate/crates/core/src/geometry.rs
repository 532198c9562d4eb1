//! Circular-trajectory cone-beam geometry and the classical 2D Radon model.
//!
//! The source moves on the circle `P(s) = (R cos s, R sin s, 0)` and a flat
//! virtual detector through the origin rotates with it. A point `x` projects
//! to detector coordinates
//!
//! ```text
//! T = 1 / (1 - (x1 cos s + x2 sin s) / R)
//! U = T (-x1 sin s + x2 cos s)
//! V = T x3
//! ```
//!
//! `(U, V)` is the map `Psi(x, s)` of the generalized Radon transform. Its
//! x-Jacobian is coded analytically since the covariance quadrature evaluates
//! it at thousands of source positions.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor on the denominator `1 - (x1 cos s + x2 sin s)/R`.
pub const DEFAULT_DENOMINATOR_FLOOR: f64 = 1e-9;

/// Default admissible cylinder radius as a fraction of `R`.
pub const DEFAULT_ADMISSIBLE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x1: 0.0, x2: 0.0, x3: 0.0 };

    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Point3 { x1, x2, x3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    /// `self + t * dir`
    pub fn offset(self, t: f64, dir: Point3) -> Point3 {
        Point3::new(self.x1 + t * dir.x1, self.x2 + t * dir.x2, self.x3 + t * dir.x3)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Point3) -> Point3 {
        Point3::new(self.x1 - other.x1, self.x2 - other.x2, self.x3 - other.x3)
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPoint {
    pub u: f64,
    pub v: f64,
}

/// Rows are `dU/dx` and `dV/dx`.
pub type Jacobian = [[f64; 3]; 2];

/// Map `s` into `[0, 2pi)`.
pub fn normalize_angle(s: f64) -> f64 {
    let r = s.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A data-acquisition geometry with a one-dimensional source parameter and a
/// two-dimensional detector, as needed by the covariance predictor.
pub trait ProjectionGeometry: Sync {
    fn psi(&self, x: Point3, s: f64) -> Result<DetectorPoint>;
    fn psi_jacobian(&self, x: Point3, s: f64) -> Result<Jacobian>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeBeamGeometry {
    /// Source trajectory radius `R`.
    pub radius: f64,
    /// Radius `c` of the cylinder `x1^2 + x2^2 <= c^2` in which reconstruction
    /// points must lie. Defaults to `0.9 R`.
    #[serde(default)]
    pub admissible_radius: Option<f64>,
    #[serde(default = "default_floor")]
    pub denominator_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_DENOMINATOR_FLOOR
}

impl ConeBeamGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        let g = ConeBeamGeometry { radius, admissible_radius: None, denominator_floor: DEFAULT_DENOMINATOR_FLOOR };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("geometry.radius must be positive, got {}", self.radius)));
        }
        let c = self.admissible_radius();
        if !(c > 0.0 && c < self.radius) {
            return Err(Error::InvalidConfig(format!(
                "geometry.admissible_radius must lie in (0, R), got {c}"
            )));
        }
        if !(self.denominator_floor > 0.0) {
            return Err(Error::InvalidConfig("geometry.denominator_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn admissible_radius(&self) -> f64 {
        self.admissible_radius.unwrap_or(DEFAULT_ADMISSIBLE_FRACTION * self.radius)
    }

    /// Checks that `x` lies inside the admissible cylinder.
    pub fn check_admissible(&self, x: Point3) -> Result<()> {
        let c = self.admissible_radius();
        if !x.is_finite() || x.x1 * x.x1 + x.x2 * x.x2 > c * c {
            return Err(Error::OutsideCylinder { x1: x.x1, x2: x.x2, radius: c });
        }
        Ok(())
    }

    pub fn source_position(&self, s: f64) -> Point3 {
        let (sin, cos) = normalize_angle(s).sin_cos();
        Point3::new(self.radius * cos, self.radius * sin, 0.0)
    }

    fn denominator(&self, x: Point3, sin: f64, cos: f64) -> Result<f64> {
        let d = 1.0 - (x.x1 * cos + x.x2 * sin) / self.radius;
        if d <= self.denominator_floor {
            return Err(Error::DegenerateProjection { denominator: d, floor: self.denominator_floor });
        }
        Ok(d)
    }

    /// Stereographic projection of `x` from the source at angle `s`.
    pub fn project(&self, x: Point3, s: f64) -> Result<DetectorPoint> {
        let (sin, cos) = normalize_angle(s).sin_cos();
        let t = 1.0 / self.denominator(x, sin, cos)?;
        Ok(DetectorPoint { u: t * (-x.x1 * sin + x.x2 * cos), v: t * x.x3 })
    }

    /// Analytic Jacobian `d(U, V)/dx`.
    pub fn project_gradient(&self, x: Point3, s: f64) -> Result<Jacobian> {
        let (sin, cos) = normalize_angle(s).sin_cos();
        let t = 1.0 / self.denominator(x, sin, cos)?;
        // dT/dx = T^2 (cos s / R, sin s / R, 0)
        let dt = [t * t * cos / self.radius, t * t * sin / self.radius, 0.0];
        let w = -x.x1 * sin + x.x2 * cos;
        let du = [t * -sin + w * dt[0], t * cos + w * dt[1], 0.0];
        let dv = [x.x3 * dt[0], x.x3 * dt[1], t];
        Ok([du, dv])
    }

    /// `(x1^2 + x2^2) V^2 - x3^2 U^2 - R^2 (V - x3)^2` at the projection of
    /// `x`. The detector trace of a point off the trajectory plane is the
    /// ellipse on which this vanishes.
    pub fn ellipse_residual(&self, x: Point3, s: f64) -> Result<f64> {
        let p = self.project(x, s)?;
        let rr = self.radius * self.radius;
        Ok((x.x1 * x.x1 + x.x2 * x.x2) * p.v * p.v - x.x3 * x.x3 * p.u * p.u - rr * (p.v - x.x3) * (p.v - x.x3))
    }
}

impl ProjectionGeometry for ConeBeamGeometry {
    fn psi(&self, x: Point3, s: f64) -> Result<DetectorPoint> {
        self.project(x, s)
    }

    fn psi_jacobian(&self, x: Point3, s: f64) -> Result<Jacobian> {
        self.project_gradient(x, s)
    }
}

/// `Psi(x, alpha) = (cos alpha, sin alpha) . x` of the classical Radon
/// transform in the plane.
pub fn radon2d_psi(x: [f64; 2], alpha: f64) -> f64 {
    let (sin, cos) = alpha.sin_cos();
    x[0] * cos + x[1] * sin
}

/// `d Psi / dx` for the planar Radon transform.
pub fn radon2d_gradient(alpha: f64) -> [f64; 2] {
    let (sin, cos) = alpha.sin_cos();
    [cos, sin]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn geom() -> ConeBeamGeometry {
        ConeBeamGeometry::new(10.0).unwrap()
    }

    #[test]
    fn source_positions() {
        let g = geom();
        let p = g.source_position(0.0);
        assert_eq!((p.x1, p.x2, p.x3), (10.0, 0.0, 0.0));
        let p = g.source_position(FRAC_PI_2);
        assert!(p.x1.abs() < 1e-14 && (p.x2 - 10.0).abs() < 1e-14);
        let p = g.source_position(PI);
        assert!((p.x1 + 10.0).abs() < 1e-14 && p.x2.abs() < 1e-14);
    }

    #[test]
    fn projection_examples() {
        let g = geom();
        for s in [0.0, 0.7, 3.0, 5.9] {
            let p = g.project(Point3::ORIGIN, s).unwrap();
            assert_eq!(p.u.abs(), 0.0);
            assert_eq!(p.v, 0.0);
            let p = g.project(Point3::new(0.0, 0.0, 1.7), s).unwrap();
            assert_eq!(p.u.abs(), 0.0);
            assert_eq!(p.v, 1.7);
        }
        let p = g.project(Point3::new(2.7, -3.1, 0.8), 0.0).unwrap();
        assert_relative_eq!(p.u, -3.1 / 0.73, max_relative = 1e-14);
        assert_relative_eq!(p.v, 0.8 / 0.73, max_relative = 1e-14);
        assert_relative_eq!(p.u, -4.2465753, epsilon = 1e-7);
        assert_relative_eq!(p.v, 1.0958904, epsilon = 1e-7);
    }

    #[test]
    fn degenerate_projection_is_rejected() {
        let g = geom();
        // on the source itself the denominator is exactly zero
        let err = g.project(Point3::new(10.0, 0.0, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateProjection { .. }));
        assert!(g.project_gradient(Point3::new(12.0, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn gradient_at_origin() {
        let g = geom();
        for s in [0.0, 1.0, 2.5, 4.0] {
            let j = g.project_gradient(Point3::ORIGIN, s).unwrap();
            let (sin, cos) = s.sin_cos();
            let want = [[-sin, cos, 0.0], [0.0, 0.0, 1.0]];
            for r in 0..2 {
                for c in 0..3 {
                    assert_relative_eq!(j[r][c], want[r][c], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn dv_dx3_is_magnification_in_plane() {
        let g = geom();
        let x = Point3::new(1.5, -2.0, 0.0);
        let s: f64 = 0.4;
        let (sin, cos) = s.sin_cos();
        let t = 1.0 / (1.0 - (x.x1 * cos + x.x2 * sin) / 10.0);
        let j = g.project_gradient(x, s).unwrap();
        assert_relative_eq!(j[1][2], t, max_relative = 1e-15);
    }

    #[test]
    fn ellipse_examples() {
        let g = geom();
        let r = g.ellipse_residual(Point3::new(2.7, -3.1, 0.8), 1.3).unwrap();
        assert!(r.abs() < 1e-10 * 1e4, "{r}");
        for s in [0.0, 2.0, 4.0] {
            assert_eq!(g.ellipse_residual(Point3::new(0.0, 0.0, 1.0), s).unwrap(), 0.0);
        }
    }

    #[test]
    fn radon2d_examples() {
        assert_eq!(radon2d_psi([1.0, 0.0], 0.0), 1.0);
        assert!(radon2d_psi([1.0, 0.0], FRAC_PI_2).abs() < 1e-16);
        assert_relative_eq!(radon2d_psi([3.0, 4.0], 4f64.atan2(3.0)), 5.0, max_relative = 1e-15);
    }

    #[test]
    fn validation() {
        assert!(ConeBeamGeometry::new(0.0).is_err());
        assert!(ConeBeamGeometry::new(-1.0).is_err());
        let mut g = geom();
        g.admissible_radius = Some(10.0);
        assert!(g.validate().is_err());
        let g = geom();
        assert!(g.check_admissible(Point3::new(2.7, -3.1, 0.8)).is_ok());
        assert!(g.check_admissible(Point3::new(9.5, 0.0, 0.0)).is_err());
    }

    fn admissible_point() -> impl Strategy<Value = Point3> {
        (0.0..8.9f64, 0.0..TAU, -5.0..5.0f64).prop_map(|(r, phi, z)| Point3::new(r * phi.cos(), r * phi.sin(), z))
    }

    proptest! {
        #[test]
        fn projection_is_periodic(x in admissible_point(), s in 0.0..TAU) {
            let g = geom();
            let a = g.project(x, s).unwrap();
            let b = g.project(x, s + TAU).unwrap();
            prop_assert!((a.u - b.u).abs() <= 1e-12 * (1.0 + a.u.abs()));
            prop_assert!((a.v - b.v).abs() <= 1e-12 * (1.0 + a.v.abs()));
        }

        #[test]
        fn axis_projects_to_fixed_point(z in -5.0..5.0f64, s in 0.0..TAU) {
            let p = geom().project(Point3::new(0.0, 0.0, z), s).unwrap();
            prop_assert_eq!(p.u.abs(), 0.0);
            prop_assert_eq!(p.v, z);
        }

        #[test]
        fn ellipse_identity_holds(x in admissible_point(), s in 0.0..TAU) {
            let r = geom().ellipse_residual(x, s).unwrap();
            prop_assert!(r.abs() < 1e-10 * 1e4);
        }

        #[test]
        fn jacobian_matches_finite_differences(x in admissible_point(), s in 0.0..TAU) {
            let g = geom();
            let j = g.project_gradient(x, s).unwrap();
            let h = 1e-6;
            let mut fd = [[0.0; 3]; 2];
            for c in 0..3 {
                let mut e = [0.0; 3];
                e[c] = 1.0;
                let e = Point3::from_array(e);
                let p = g.project(x.offset(h, e), s).unwrap();
                let m = g.project(x.offset(-h, e), s).unwrap();
                fd[0][c] = (p.u - m.u) / (2.0 * h);
                fd[1][c] = (p.v - m.v) / (2.0 * h);
            }
            for r in 0..2 {
                let scale = j[r].iter().map(|v| v.abs()).fold(0.0, f64::max);
                for c in 0..3 {
                    prop_assert!((j[r][c] - fd[r][c]).abs() <= 1e-6 * scale, "{:?} vs {:?}", j, fd);
                }
            }
        }
    }
}
