//! Chebyshev proxies: interpolation on nested Chebyshev grids, adaptive
//! degree selection and Clenshaw evaluation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The reference interval `[-1, 1]`.
    pub fn unit() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Affine map onto `[-1, 1]`.
    #[inline]
    pub fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - (self.lo + self.hi)) / (self.hi - self.lo)
    }

    /// Inverse of [`Interval::to_unit`].
    #[inline]
    pub fn from_unit(&self, u: f64) -> f64 {
        0.5 * (self.hi - self.lo) * u + self.midpoint()
    }

    /// `n` uniformly spaced points including both endpoints.
    pub fn linspace(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let step = self.width() / (n.max(2) - 1) as f64;
        (0..n).map(move |k| if k + 1 == n { self.hi } else { self.lo + k as f64 * step })
    }
}

impl TryFrom<(f64, f64)> for Interval {
    type Error = Error;

    fn try_from((lo, hi): (f64, f64)) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for (f64, f64) {
    fn from(iv: Interval) -> Self {
        (iv.lo, iv.hi)
    }
}

/// A polynomial `sum_j c_j T_j(u(x))` on an interval, where `u` maps the
/// interval affinely onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebProxy {
    interval: Interval,
    coeffs: Vec<f64>,
}

impl ChebProxy {
    pub fn new(interval: Interval, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("a proxy needs at least one coefficient".into()));
        }
        Ok(Self { interval, coeffs })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw_unit(&self.coeffs, self.interval.to_unit(x))
    }

    /// Upper bound on `|p(x)|` over the interval from `|T_j| <= 1`.
    pub fn abs_coeff_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

/// Diagnostics of an adaptive fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxReport {
    pub degree: usize,
    pub achieved_check_error: f64,
    /// Distinct points at which the objective was queried.
    pub evals_used: usize,
}

/// Chebyshev extreme points of order `m` mapped onto `iv`, ordered by `k`
/// (descending in `x`).
///
/// The cosine is computed as `sin(pi (m - 2k) / 2m)` so the grid is exactly
/// symmetric and `S_m` is bitwise contained in `S_2m`.
pub fn cheb_points(m: usize, iv: Interval) -> Vec<f64> {
    assert!(m >= 1, "cheb_points needs m >= 1");
    (0..=m).map(|k| iv.from_unit(unit_node(k, m))).collect()
}

#[inline]
fn unit_node(k: usize, m: usize) -> f64 {
    let num = m as f64 - 2.0 * k as f64;
    (PI * num / (2.0 * m as f64)).sin()
}

/// Chebyshev coefficients of the degree-`m` interpolant through `values`
/// sampled at `cheb_points(m, ..)`. Direct `O(m^2)` sum.
pub fn coeffs_from_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {}",
            values.len()
        )));
    }
    let m = values.len() - 1;
    let inv_m = 1.0 / m as f64;
    // cos(l pi / m) for l in 0..2m; j*k is reduced mod 2m.
    let table: Vec<f64> = (0..2 * m).map(|l| (PI * l as f64 * inv_m).cos()).collect();
    let mut coeffs = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut interior = 0.0;
        for (k, fk) in values.iter().enumerate().take(m).skip(1) {
            interior += fk * table[(j * k) % (2 * m)];
        }
        coeffs.push(inv_m * (values[0] + sign * values[m]) + 2.0 * inv_m * interior);
    }
    coeffs[0] *= 0.5;
    coeffs[m] *= 0.5;
    Ok(coeffs)
}

/// Same as [`coeffs_from_values`] through a DCT-I computed with an FFT of
/// length `2m`.
pub fn coeffs_from_values_fast(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {}",
            values.len()
        )));
    }
    let m = values.len() - 1;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .chain(values[1..m].iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(2 * m).process(&mut buf);
    let inv_m = 1.0 / m as f64;
    let mut coeffs: Vec<f64> = buf[..=m].iter().map(|z| z.re * inv_m).collect();
    coeffs[0] *= 0.5;
    coeffs[m] *= 0.5;
    Ok(coeffs)
}

/// Clenshaw evaluation in the reference variable `u`.
pub fn clenshaw_unit(coeffs: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + u * b1 - b2
}

pub fn eval_clenshaw(p: &ChebProxy, x: f64) -> f64 {
    p.eval(x)
}

/// Largest `|f - p|` over `n` uniform points of the proxy's interval.
pub fn max_error_on_grid<F: Fn(f64) -> f64>(f: F, p: &ChebProxy, n: usize) -> f64 {
    p.interval()
        .linspace(n.max(2))
        .map(|x| (f(x) - p.eval(x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Direct,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub m_max: usize,
    pub transform: Transform,
    /// Also check a 33-point uniform grid before accepting.
    pub strict: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            m_max: 1 << 14,
            transform: Transform::Direct,
            strict: false,
        }
    }
}

const INITIAL_DEGREE: usize = 2;
const STRICT_GRID: usize = 33;

/// Doubles the interpolation degree from 2 until the interpolant matches `f`
/// to `eps1` on the points added by the next doubling.
pub fn adaptive_fit<F: Fn(f64) -> f64>(
    f: F,
    iv: Interval,
    eps1: f64,
    opts: &FitOptions,
) -> Result<(ChebProxy, ApproxReport)> {
    if !(eps1 > 0.0) {
        return Err(Error::InvalidInput(format!("eps1 must be positive, got {eps1}")));
    }
    let eval_checked = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("objective is not finite at x = {x}")))
        }
    };

    let mut m = INITIAL_DEGREE;
    let mut values = cheb_points(m, iv)
        .into_iter()
        .map(eval_checked)
        .collect::<Result<Vec<_>>>()?;
    let mut last_error = f64::INFINITY;

    while m <= opts.m_max {
        let coeffs = match opts.transform {
            Transform::Direct => coeffs_from_values(&values)?,
            Transform::Fast => coeffs_from_values_fast(&values)?,
        };
        // S_2m \ S_m are the odd indices of the finer grid.
        let mut finer = Vec::with_capacity(2 * m + 1);
        let mut err: f64 = 0.0;
        for k in 0..=2 * m {
            if k % 2 == 0 {
                finer.push(values[k / 2]);
            } else {
                let u = unit_node(k, 2 * m);
                let fx = eval_checked(iv.from_unit(u))?;
                err = err.max((fx - clenshaw_unit(&coeffs, u)).abs());
                finer.push(fx);
            }
        }
        let mut evals = 2 * m + 1;
        if err <= eps1 && opts.strict {
            for x in iv.linspace(STRICT_GRID) {
                let fx = eval_checked(x)?;
                err = err.max((fx - clenshaw_unit(&coeffs, iv.to_unit(x))).abs());
            }
            evals += STRICT_GRID;
        }
        if err <= eps1 {
            let report = ApproxReport {
                degree: m,
                achieved_check_error: err,
                evals_used: evals,
            };
            return Ok((ChebProxy { interval: iv, coeffs }, report));
        }
        last_error = err;
        values = finer;
        m *= 2;
    }
    Err(Error::DegreeCapExceeded {
        cap: opts.m_max,
        last_error,
    })
}
