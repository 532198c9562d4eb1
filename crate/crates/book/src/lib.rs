//! Runs the code listings of the guide in `book/` as doctests, one module
//! per chapter so a failure points at its chapter.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/kernel.md")]
pub mod kernel {}
#[doc = include_str!("../../../book/src/noise.md")]
pub mod noise {}
#[doc = include_str!("../../../book/src/reconstruction.md")]
pub mod reconstruction {}
#[doc = include_str!("../../../book/src/covariance.md")]
pub mod covariance {}
#[doc = include_str!("../../../book/src/assumptions.md")]
pub mod assumptions {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
