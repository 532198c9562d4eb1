//! The interpolation–smoothing kernel `iota`.
//!
//! `iota` is the convolution of the linear interpolation kernel
//! `(1 - |s|)_+` with the normalized smoothing kernel
//! `c (1 - (s/a)^2)_+^l`, `c = (2l+1)!! / (2a (2l)!!)`.
//!
//! The triangle's second derivative is `delta(s+1) - 2 delta(s) + delta(s-1)`,
//! so with `phi(r) = (1 - (r/a)^2)_+^l`
//!
//! ```text
//! iota''(t) = c [phi(t+1) - 2 phi(t) + phi(t-1)]
//! iota(t)   = c [Phi2(t+1) - 2 Phi2(t) + Phi2(t-1)]
//! ```
//!
//! where `Phi2` is the second antiderivative of `phi` vanishing left of `-a`.
//! Both are piecewise polynomials with breakpoints at `±a`, `±a ± 1`; every
//! derivative is evaluated exactly from polynomial coefficients and the
//! autocorrelations are computed with Gauss–Legendre panels split at the
//! breakpoints, which is exact up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Highest derivative of `iota` we can evaluate.
pub const MAX_DERIVATIVE: usize = 4;

/// Default autocorrelation table spacing.
pub const DEFAULT_TABLE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Smoothing half-width.
    pub a: f64,
    /// Smoothness exponent.
    pub l: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { a: 2.5, l: 3 }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("kernel.a must be positive, got {}", self.a)));
        }
        if self.l < 1 {
            return Err(Error::InvalidConfig("kernel.l must be at least 1".into()));
        }
        if self.l > 20 {
            return Err(Error::InvalidConfig(format!("kernel.l = {} is unreasonably large", self.l)));
        }
        Ok(())
    }

    pub fn support_radius(&self) -> f64 {
        1.0 + self.a
    }

    /// Number of continuous derivatives of `iota`: the smoothing factor is
    /// `C^(l-1)` and the triangle adds two orders.
    pub fn smoothness(&self) -> u32 {
        self.l + 1
    }

    /// The limit theorems need `iota` in `C^M` with `M > max(N + gamma + 1, n/2)`.
    /// Returns a message when this kernel falls short.
    pub fn smoothness_warning(&self, n: u32, big_n: u32, gamma: f64) -> Option<String> {
        let bound = (big_n as f64 + gamma + 1.0).max(n as f64 / 2.0);
        let m = self.smoothness();
        if (m as f64) > bound {
            None
        } else {
            Some(format!(
                "kernel with l = {} is C^{m}, below the smoothness M > {bound} assumed by the limit theory; \
                 results are still computed",
                self.l
            ))
        }
    }
}

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// Antiderivative vanishing at `x = -1`.
    fn antiderivative_from_minus_one(&self) -> Poly {
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(0.0);
        c.extend(self.0.iter().enumerate().map(|(k, v)| v / (k as f64 + 1.0)));
        let mut p = Poly(c);
        let at = p.eval(-1.0);
        p.0[0] = -at;
        p
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Which kernel factor an autocorrelation is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFunction {
    /// `iota`
    Value,
    /// `iota''`
    SecondDerivative,
}

impl KernelFunction {
    fn order(self) -> usize {
        match self {
            KernelFunction::Value => 0,
            KernelFunction::SecondDerivative => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    norm: f64,
    /// `(1 - x^2)^l` and its derivatives in `x = r/a`.
    smoothing: Vec<Poly>,
    p1: Poly,
    p2: Poly,
    breaks: Vec<f64>,
    rule: GaussLegendre,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let l = spec.l;
        let mut coeffs = vec![0.0; 2 * l as usize + 1];
        for k in 0..=l {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[2 * k as usize] = sign * binomial(l, k);
        }
        let p = Poly(coeffs);
        let p1 = p.antiderivative_from_minus_one();
        let p2 = p1.antiderivative_from_minus_one();
        let mut smoothing = vec![p];
        for _ in 0..(MAX_DERIVATIVE - 2) {
            let next = smoothing.last().unwrap().derivative();
            smoothing.push(next);
        }
        let double_factorial = |mut n: u32| {
            let mut acc = 1.0;
            while n > 1 {
                acc *= n as f64;
                n -= 2;
            }
            acc
        };
        let norm = double_factorial(2 * l + 1) / (2.0 * spec.a * double_factorial(2 * l));
        let a = spec.a;
        let mut breaks = vec![-a - 1.0, -a, -a + 1.0, a - 1.0, a, a + 1.0];
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        // products of two pieces have degree 2(2l+2)
        let rule = GaussLegendre::new(2 * l as usize + 3);
        Ok(Kernel { spec, norm, smoothing, p1, p2, breaks, rule })
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn support_radius(&self) -> f64 {
        self.spec.support_radius()
    }

    /// Sorted points where the piecewise-polynomial representation changes.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// `order`-th derivative of `phi(r) = (1 - (r/a)^2)_+^l`'s antiderivative
    /// family: order `-2` is `Phi2`, `-1` is `Phi1`, `k >= 0` is `phi^(k)`.
    fn smoothing_family(&self, order: i32, r: f64) -> f64 {
        let a = self.spec.a;
        let x = r / a;
        match order {
            -2 => {
                if x <= -1.0 {
                    0.0
                } else if x < 1.0 {
                    a * a * self.p2.eval(x)
                } else {
                    a * a * self.p2.eval(1.0) + a * self.p1.eval(1.0) * (r - a)
                }
            }
            -1 => {
                if x <= -1.0 {
                    0.0
                } else if x < 1.0 {
                    a * self.p1.eval(x)
                } else {
                    a * self.p1.eval(1.0)
                }
            }
            k => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    self.smoothing[k as usize].eval(x) / a.powi(k)
                }
            }
        }
    }

    /// `d^order iota / dt^order` for `order <= MAX_DERIVATIVE`.
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        assert!(order <= MAX_DERIVATIVE, "derivative order {order} not supported");
        let ta = t.abs();
        if ta >= self.support_radius() {
            return 0.0;
        }
        // iota is even: evaluate at |t| so symmetry holds bitwise
        let k = order as i32 - 2;
        let v = self.norm
            * (self.smoothing_family(k, ta + 1.0) - 2.0 * self.smoothing_family(k, ta)
                + self.smoothing_family(k, ta - 1.0));
        if order % 2 == 1 && t < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `iota(t)`
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// `iota''(t)`
    pub fn d2(&self, t: f64) -> f64 {
        self.derivative(2, t)
    }

    pub fn eval(&self, f: KernelFunction, t: f64) -> f64 {
        self.derivative(f.order(), t)
    }

    /// `int f^(p)(theta + r) f^(q)(r) dr` over the overlap of supports,
    /// split at all breakpoints so each panel integrand is a polynomial.
    fn correlate(&self, p: usize, q: usize, theta: f64) -> f64 {
        let r = self.support_radius();
        if theta.abs() >= 2.0 * r {
            return 0.0;
        }
        let lo = (-r).max(-r - theta);
        let hi = r.min(r - theta);
        let mut cuts: Vec<f64> = Vec::with_capacity(2 * self.breaks.len() + 2);
        cuts.push(lo);
        cuts.push(hi);
        for &b in &self.breaks {
            for c in [b, b - theta] {
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        self.rule
            .integrate_piecewise(&cuts, |x| self.derivative(p, theta + x) * self.derivative(q, x))
    }

    /// Autocorrelation `int f(theta + r) f(r) dr`.
    pub fn autocorr(&self, f: KernelFunction, theta: f64) -> f64 {
        let k = f.order();
        self.correlate(k, k, theta)
    }

    /// Derivative of [`Kernel::autocorr`] in `theta`.
    pub fn autocorr_derivative(&self, f: KernelFunction, theta: f64) -> f64 {
        let k = f.order();
        self.correlate(k + 1, k, theta)
    }

    pub fn autocorr_table(&self, f: KernelFunction, step: f64) -> AutocorrTable {
        AutocorrTable::new(self, f, step)
    }
}

/// Cubic Hermite table of an autocorrelation on `[0, 2(1+a)]`, extended
/// evenly and by zero outside the support.
#[derive(Debug, Clone)]
pub struct AutocorrTable {
    step: f64,
    cutoff: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl AutocorrTable {
    pub fn new(kernel: &Kernel, f: KernelFunction, step: f64) -> Self {
        assert!(step > 0.0);
        let cutoff = 2.0 * kernel.support_radius();
        let n = (cutoff / step).ceil() as usize + 1;
        let (values, slopes) = (0..=n)
            .map(|i| {
                let t = i as f64 * step;
                (kernel.autocorr(f, t), kernel.autocorr_derivative(f, t))
            })
            .unzip();
        AutocorrTable { step, cutoff, values, slopes }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let t = theta.abs();
        if t >= self.cutoff {
            return 0.0;
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let x = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * y0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * y1 + (x3 - x2) * m1
    }
}
