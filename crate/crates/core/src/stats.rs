//! Histograms, Gaussian densities on histogram bins, and moment accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform bins on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinAxis {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinAxis {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
        }
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad bin range [{lo}, {hi}]")));
        }
        Ok(BinAxis { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|i| self.center(i)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|i| self.lo + i as f64 * self.width()).collect()
    }

    /// Bin of `x`; the right edge belongs to the last bin.
    pub fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.width()) as usize;
        Some(i.min(self.bins - 1))
    }
}

/// How a histogram axis range is chosen from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RangePolicy {
    /// `mean +- k * sd`, clipped to the sample extremes.
    MeanSd { k: f64 },
    Fixed { lo: f64, hi: f64 },
}

impl Default for RangePolicy {
    fn default() -> Self {
        RangePolicy::MeanSd { k: 4.5 }
    }
}

impl RangePolicy {
    pub fn axis(&self, samples: &[f64], bins: usize) -> Result<BinAxis> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        match *self {
            RangePolicy::Fixed { lo, hi } => BinAxis::new(lo, hi, bins),
            RangePolicy::MeanSd { k } => {
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = (mean - k * sd).max(min);
                let hi = (mean + k * sd).min(max);
                if hi > lo {
                    BinAxis::new(lo, hi, bins)
                } else {
                    // every sample equal
                    BinAxis::new(min - 0.5, min + 0.5, bins)
                }
            }
        }
    }
}

/// Density-normalized histogram in one or two dimensions. Cells are stored
/// row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub axes: Vec<BinAxis>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Samples that fell inside the range.
    pub in_range: usize,
    pub total: usize,
}

impl Histogram {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(BinAxis::width).product()
    }

    /// Bin-center coordinates of every cell in storage order.
    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [a] => a.centers().into_iter().map(|c| vec![c]).collect(),
            [a, b] => {
                let cb = b.centers();
                a.centers().into_iter().flat_map(|x| cb.iter().map(move |&y| vec![x, y])).collect()
            }
            _ => unreachable!("histograms are 1D or 2D"),
        }
    }

    fn from_counts(axes: Vec<BinAxis>, counts: Vec<u64>, total: usize) -> Result<Self> {
        let in_range: u64 = counts.iter().sum();
        if in_range == 0 {
            return Err(Error::EmptySample);
        }
        let vol: f64 = axes.iter().map(BinAxis::width).product();
        let density = counts.iter().map(|&c| c as f64 / (in_range as f64 * vol)).collect();
        Ok(Histogram { axes, counts, density, in_range: in_range as usize, total })
    }

    /// CSV with one column per axis (bin centers) and a `density` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.dim() {
            1 => out.push_str("center,density,count\n"),
            _ => out.push_str("center_x,center_y,density,count\n"),
        }
        for ((c, d), n) in self.cell_centers().iter().zip(&self.density).zip(&self.counts) {
            for v in c {
                out.push_str(&fmt_f64(*v));
                out.push(',');
            }
            out.push_str(&fmt_f64(*d));
            out.push(',');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn histogram1d(samples: &[f64], bins: usize, range: RangePolicy) -> Result<Histogram> {
    let axis = range.axis(samples, bins)?;
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if let Some(i) = axis.index(x) {
            counts[i] += 1;
        }
    }
    Histogram::from_counts(vec![axis], counts, samples.len())
}

pub fn histogram2d(xs: &[f64], ys: &[f64], bins: usize, range: RangePolicy) -> Result<Histogram> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!("{} x-samples vs {} y-samples", xs.len(), ys.len())));
    }
    let ax = range.axis(xs, bins)?;
    let ay = range.axis(ys, bins)?;
    let mut counts = vec![0u64; bins * bins];
    for (&x, &y) in xs.iter().zip(ys) {
        if let (Some(i), Some(j)) = (ax.index(x), ay.index(y)) {
            counts[i * bins + j] += 1;
        }
    }
    Histogram::from_counts(vec![ax, ay], counts, xs.len())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("covariance must be square".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (a[i][i].abs() + a[j][j].abs()) {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Multivariate normal density evaluator.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    chol: Vec<Vec<f64>>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: &[f64], cov: &[Vec<f64>]) -> Result<Self> {
        if mean.len() != cov.len() || mean.is_empty() {
            return Err(Error::ShapeMismatch(format!("mean of length {} vs {}x{} covariance", mean.len(), cov.len(), cov.len())));
        }
        let chol = cholesky(cov)?;
        let d = mean.len() as f64;
        let log_det: f64 = chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Gaussian { mean: mean.to_vec(), chol, log_norm })
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        // solve L z = x - mean
        let n = self.mean.len();
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.chol[i][k] * z[k]).sum();
            z[i] = (x[i] - self.mean[i] - s) / self.chol[i][i];
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        (self.log_norm - 0.5 * q).exp()
    }
}

/// Normal density at every bin center of `hist`, in the histogram's cell
/// order.
pub fn gaussian_pdf_on_bins(mean: &[f64], cov: &[Vec<f64>], hist: &Histogram) -> Result<Vec<f64>> {
    if mean.len() != hist.dim() {
        return Err(Error::ShapeMismatch(format!("{}-dimensional Gaussian on a {}-dimensional histogram", mean.len(), hist.dim())));
    }
    let g = Gaussian::new(mean, cov)?;
    Ok(hist.cell_centers().iter().map(|c| g.density(c)).collect())
}

/// `||P_o - P_p||_1 / ||P_p||_1` over histogram cells.
pub fn pdf_mismatch(observed: &Histogram, predicted: &[f64]) -> Result<f64> {
    if observed.density.len() != predicted.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} observed cells vs {} predicted",
            observed.density.len(),
            predicted.len()
        )));
    }
    let denom: f64 = predicted.iter().map(|p| p.abs()).sum();
    if denom == 0.0 {
        return Err(Error::ShapeMismatch("predicted density vanishes on every cell".into()));
    }
    let num: f64 = observed.density.iter().zip(predicted).map(|(o, p)| (o - p).abs()).sum();
    Ok(num / denom)
}

/// Entrywise `||a - b||_1 / ||b||_1`.
pub fn relative_l1(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::ShapeMismatch("matrices differ in shape".into()));
    }
    let num: f64 = a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).sum();
    let den: f64 = b.iter().flatten().map(|v| v.abs()).sum();
    Ok(num / den)
}

/// Streaming mean and co-moment accumulator (Welford). Samples must be pushed
/// in a fixed order for bitwise reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    n: usize,
    mean: Vec<f64>,
    comoment: Vec<Vec<f64>>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Moments { n: 0, mean: vec![0.0; dim], comoment: vec![vec![0.0; dim]; dim] }
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        let before: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&before) {
            *m += d / n;
        }
        let after: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        for (i, row) in self.comoment.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c += before[i] * after[j];
            }
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance, symmetrized.
    pub fn covariance(&self) -> Result<Vec<Vec<f64>>> {
        if self.n < 2 {
            return Err(Error::TooFewRealizations { needed: 2, got: self.n });
        }
        let d = self.mean.len();
        let scale = 1.0 / (self.n as f64 - 1.0);
        let mut c = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                c[i][j] = 0.5 * (self.comoment[i][j] + self.comoment[j][i]) * scale;
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_samples_fill_one_bin() {
        let h = histogram1d(&[2.5; 40], 21, RangePolicy::default()).unwrap();
        let occupied: Vec<_> = h.counts.iter().filter(|&&c| c > 0).collect();
        assert_eq!(occupied.len(), 1);
        let w = h.axes[0].width();
        let d = h.density.iter().copied().fold(0.0, f64::max);
        assert!((d - 1.0 / w).abs() < 1e-12);
    }

    #[test]
    fn density_normalization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ys: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = histogram1d(&xs, 21, RangePolicy::default()).unwrap();
        let s: f64 = h.density.iter().sum::<f64>() * h.cell_volume();
        assert!((s - 1.0).abs() < 1e-12);
        let h = histogram2d(&xs, &ys, 21, RangePolicy::default()).unwrap();
        let s: f64 = h.density.iter().sum::<f64>() * h.cell_volume();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(h.density.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn normal_samples_match_density_at_centers() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = histogram1d(&xs, 21, RangePolicy::Fixed { lo: -4.0, hi: 4.0 }).unwrap();
        let w = h.axes[0].width();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for (i, c) in h.axes[0].centers().into_iter().enumerate() {
            // the bin average of the density, which the histogram estimates
            let gl = crate::quadrature::GaussLegendre::new(8);
            let avg = gl.integrate(c - w / 2.0, c + w / 2.0, phi) / w;
            if avg > 0.05 {
                assert!((h.density[i] / avg - 1.0).abs() < 0.01, "bin {i}: {} vs {avg}", h.density[i]);
                // point value at the center differs from the average only by curvature
                assert!((phi(c) / avg - 1.0).abs() < 0.02);
            }
        }
    }

    #[test]
    fn gaussian_values() {
        let g = Gaussian::new(&[0.0], &[vec![1.0]]).unwrap();
        assert!((g.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let g = Gaussian::new(&[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((g.density(&[0.0, 0.0]) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(matches!(Gaussian::new(&[0.0, 0.0], &[vec![1.0, 2.0], vec![2.0, 1.0]]), Err(Error::NotPositiveDefinite)));
        assert!(matches!(Gaussian::new(&[0.0], &[vec![0.0]]), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn pdf_on_bins_integrates_to_one() {
        let cov = vec![vec![0.485, 0.011], vec![0.011, 0.46]];
        let sd = 0.485f64.sqrt();
        let axis = BinAxis::new(-6.0 * sd, 6.0 * sd, 121).unwrap();
        let h = Histogram {
            axes: vec![axis, axis],
            counts: vec![0; 121 * 121],
            density: vec![0.0; 121 * 121],
            in_range: 0,
            total: 0,
        };
        let p = gaussian_pdf_on_bins(&[0.0, 0.0], &cov, &h).unwrap();
        let s: f64 = p.iter().sum::<f64>() * h.cell_volume();
        assert!((s - 1.0).abs() < 1e-3, "{s}");
    }

    #[test]
    fn mismatch_examples() {
        let h = histogram1d(&[0.0, 0.1, 0.2, 0.2, 0.5], 4, RangePolicy::Fixed { lo: 0.0, hi: 1.0 }).unwrap();
        assert_eq!(pdf_mismatch(&h, &h.density).unwrap(), 0.0);
        let half: Vec<f64> = h.density.iter().map(|d| d / 2.0).collect();
        assert!((pdf_mismatch(&h, &half).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(pdf_mismatch(&h, &[1.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn empty_and_bad_inputs() {
        assert!(matches!(histogram1d(&[], 21, RangePolicy::default()), Err(Error::EmptySample)));
        assert!(histogram1d(&[1.0], 1, RangePolicy::default()).is_err());
    }

    #[test]
    fn moments_match_two_pass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let data: Vec<[f64; 2]> = (0..1000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                [3.0 + a, 0.5 * a + b]
            })
            .collect();
        let mut m = Moments::new(2);
        for x in &data {
            m.push(x);
        }
        let n = data.len() as f64;
        let mean = [data.iter().map(|x| x[0]).sum::<f64>() / n, data.iter().map(|x| x[1]).sum::<f64>() / n];
        let c01 = data.iter().map(|x| (x[0] - mean[0]) * (x[1] - mean[1])).sum::<f64>() / (n - 1.0);
        let cov = m.covariance().unwrap();
        assert!((cov[0][1] - c01).abs() < 1e-12);
        assert_eq!(cov[0][1], cov[1][0]);
        let mut one = Moments::new(1);
        one.push(&[1.0]);
        assert!(matches!(one.covariance(), Err(Error::TooFewRealizations { .. })));
    }
}
