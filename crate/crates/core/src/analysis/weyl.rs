use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer indices `j` with `eps * j` in `[a, b]`.
fn grid_range(a: f64, b: f64, eps: f64) -> std::ops::RangeInclusive<i64> {
    let mut lo = (a / eps).ceil() as i64;
    let mut hi = (b / eps).floor() as i64;
    // division rounding can put a boundary node on the wrong side
    if eps * ((lo - 1) as f64) >= a {
        lo -= 1;
    }
    if eps * (lo as f64) < a {
        lo += 1;
    }
    if eps * ((hi + 1) as f64) <= b {
        hi += 1;
    }
    if eps * (hi as f64) > b {
        hi -= 1;
    }
    lo..=hi
}

/// Calls `visit` with every grid point `eps * j` inside the box.
fn for_each_node<F: FnMut(&[f64])>(bounds: &[(f64, f64)], eps: f64, mut visit: F) -> usize {
    let ranges: Vec<_> = bounds.iter().map(|&(a, b)| grid_range(a, b, eps)).collect();
    if ranges.iter().any(|r| r.is_empty()) {
        return 0;
    }
    let mut idx: Vec<i64> = ranges.iter().map(|r| *r.start()).collect();
    let mut y = vec![0.0; bounds.len()];
    let mut count = 0;
    loop {
        for (v, j) in y.iter_mut().zip(&idx) {
            *v = eps * *j as f64;
        }
        visit(&y);
        count += 1;
        // odometer increment, last coordinate fastest
        let mut d = idx.len();
        loop {
            if d == 0 {
                return count;
            }
            d -= 1;
            if idx[d] < *ranges[d].end() {
                idx[d] += 1;
                break;
            }
            idx[d] = *ranges[d].start();
        }
    }
}

/// `e(t) = exp(2 pi i t)`, reduced modulo 1 first.
fn unit_phase(t: f64) -> Complex64 {
    let frac = t - t.round();
    Complex64::from_polar(1.0, std::f64::consts::TAU * frac)
}

fn check(bounds: &[(f64, f64)], eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    if bounds.is_empty() || bounds.iter().any(|&(a, b)| !(b > a)) {
        return Err(Error::InvalidConfig("box must be nondegenerate".into()));
    }
    Ok(())
}

/// `I_eps = eps^N sum_{eps j in box} e(f(eps j) / eps)`, with the number of
/// grid points.
pub fn weyl_sum<F: Fn(&[f64]) -> f64>(f: F, eps: f64, bounds: &[(f64, f64)]) -> Result<(Complex64, usize)> {
    check(bounds, eps)?;
    let mut acc = Complex64::new(0.0, 0.0);
    let count = for_each_node(bounds, eps, |y| acc += unit_phase(f(y) / eps));
    Ok((acc * eps.powi(bounds.len() as i32), count))
}

/// `eps^d sum_{eps j in box} g(Psi(eps j) / eps)` for a box in `R^d`.
pub fn equidist_average<G, P>(g: G, psi: P, eps: f64, bounds: &[(f64, f64)]) -> Result<f64>
where
    G: Fn(&[f64]) -> f64,
    P: Fn(&[f64]) -> Vec<f64>,
{
    check(bounds, eps)?;
    let mut acc = 0.0;
    for_each_node(bounds, eps, |y| {
        let v: Vec<f64> = psi(y).into_iter().map(|c| c / eps).collect();
        acc += g(&v);
    });
    Ok(acc * eps.powi(bounds.len() as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylSumResult {
    pub eps: Vec<f64>,
    /// `(re, im)` of each `I_eps`.
    pub sums: Vec<(f64, f64)>,
    pub magnitudes: Vec<f64>,
    pub point_counts: Vec<usize>,
    /// Least-squares slope of `log |I_eps|` against `log(1/eps)`; decay
    /// like `eps^(1/3)` gives `-1/3`.
    pub slope: f64,
}

/// Least-squares slope of `log |I|` against `log(1/eps)`.
pub fn fit_decay_slope(eps: &[f64], magnitudes: &[f64]) -> Result<f64> {
    if eps.len() != magnitudes.len() || eps.len() < 2 {
        return Err(Error::ShapeMismatch("need at least two (eps, |I|) pairs".into()));
    }
    if magnitudes.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidConfig("cannot fit a log-log slope through a zero sum".into()));
    }
    let xs: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = magnitudes.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

pub fn weyl_decay<F: Fn(&[f64]) -> f64>(f: F, bounds: &[(f64, f64)], eps: &[f64]) -> Result<WeylSumResult> {
    let mut sums = Vec::with_capacity(eps.len());
    let mut magnitudes = Vec::with_capacity(eps.len());
    let mut point_counts = Vec::with_capacity(eps.len());
    for &e in eps {
        let (s, n) = weyl_sum(&f, e, bounds)?;
        sums.push((s.re, s.im));
        magnitudes.push(s.norm());
        point_counts.push(n);
    }
    let slope = fit_decay_slope(eps, &magnitudes)?;
    Ok(WeylSumResult { eps: eps.to_vec(), sums, magnitudes, point_counts, slope })
}
