//! Numeric checks of the local conditions on `x0`, and equidistribution
//! sums.
//!
//! The limit theorems need, at the reconstruction point `x0`:
//!
//! * for every `xi != 0`, the set `Y1` of source parameters where the Hessian
//!   of `y -> xi . Psi(x0, y)` is degenerate is small (here: a finite set of
//!   roots, not an interval);
//! * for every `x != 0`, the set `Y2` where `dPsi/dx(x0, y) x = 0` has measure
//!   zero.
//!
//! Both acquisition models here have a one-dimensional source parameter, so
//! the Hessian is the scalar `d^2/ds^2 (xi . Psi)`.

mod weyl;
mod zeroset;

pub use weyl::{equidist_average, fit_decay_slope, weyl_decay, weyl_sum, WeylSumResult};
pub use zeroset::{radon2d_hessian, y1_check, y1_scan, y2_measure, AcquisitionModel, Y1Check, ZeroSetReport};
