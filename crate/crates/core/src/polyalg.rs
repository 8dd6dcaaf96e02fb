//! Calculus on Chebyshev proxies: differentiation, colleague-matrix root
//! finding and global minimization over the critical points.

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};

use crate::chebfit::{clenshaw_unit, ChebProxy, Interval};
use crate::error::{Error, Result};

/// Relative size below which trailing coefficients are dropped before
/// building a colleague matrix.
pub const TRIM_REL_TOL: f64 = 1e-13;
pub const EDGE_TOL: f64 = 1e-10;
pub const DEDUP_TOL: f64 = 1e-10;
const IMAG_REL_TOL: f64 = 1e-8;
const VALUE_TIE_REL_TOL: f64 = 1e-9;

/// Candidate minimizers of a proxy: interior stationary points plus both
/// endpoints, with the proxy values there.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

/// Coefficients of `dp/dx` in the same mapped basis, by the backward
/// recurrence `d_j = d_{j+2} + 2 (j+1) S c_{j+1}` with `S = 2 / (hi - lo)`.
pub fn derivative_coeffs(p: &ChebProxy) -> Vec<f64> {
    derivative_unit(p.coeffs(), 2.0 / p.interval().width())
}

fn derivative_unit(c: &[f64], scale: f64) -> Vec<f64> {
    let m = c.len().saturating_sub(1);
    if m == 0 {
        return vec![0.0];
    }
    let mut d = vec![0.0; m + 2];
    for j in (1..m).rev() {
        d[j] = d[j + 2] + 2.0 * (j + 1) as f64 * scale * c[j + 1];
    }
    d[0] = 0.5 * d[2] + scale * c[1];
    d.truncate(m);
    d
}

/// Drops trailing coefficients with `|c_j| <= TRIM_REL_TOL * max|c|`.
/// Returns the kept prefix and the number dropped.
pub fn trim_trailing(coeffs: &[f64]) -> (&[f64], usize) {
    let cmax = coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    if cmax == 0.0 {
        return (&coeffs[..coeffs.len().min(1)], coeffs.len().saturating_sub(1));
    }
    let cut = TRIM_REL_TOL * cmax;
    let keep = coeffs.iter().rposition(|c| c.abs() > cut).map_or(1, |i| i + 1);
    (&coeffs[..keep], coeffs.len() - keep)
}

/// Colleague matrix together with how many trailing coefficients were
/// discarded to obtain a well-defined leading term.
#[derive(Debug, Clone)]
pub struct Colleague {
    pub matrix: DMatrix<f64>,
    pub dropped_trailing: usize,
}

/// Builds the colleague matrix of `sum_j c_j T_j(u)`; its eigenvalues are the
/// roots in `u`.
pub fn colleague_matrix(coeffs: &[f64]) -> Result<Colleague> {
    let (c, dropped) = trim_trailing(coeffs);
    let n = c.len().saturating_sub(1);
    if n == 0 || c[n] == 0.0 {
        return Err(Error::InvalidInput(
            "colleague matrix needs a polynomial of degree >= 1".into(),
        ));
    }
    let lead = c[n];
    let mut a = DMatrix::zeros(n, n);
    if n == 1 {
        a[(0, 0)] = -c[0] / lead;
    } else {
        a[(0, 1)] = 1.0;
        for i in 1..n - 1 {
            a[(i, i - 1)] = 0.5;
            a[(i, i + 1)] = 0.5;
        }
        for k in 0..n {
            a[(n - 1, k)] = -c[k] / (2.0 * lead);
        }
        a[(n - 1, n - 2)] += 0.5;
    }
    Ok(Colleague {
        matrix: a,
        dropped_trailing: dropped,
    })
}

/// Eigenvalues of a dense real matrix as `(re, im)` pairs.
fn eigenvalues(mut a: DMatrix<f64>) -> Option<Vec<(f64, f64)>> {
    balance_parlett_reinsch(&mut a);
    let schur = Schur::try_new(a, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Real roots in `[-1, 1]` of `sum_j c_j T_j(u)`, sorted and deduplicated.
fn unit_roots(coeffs: &[f64]) -> Vec<f64> {
    let (c, _) = trim_trailing(coeffs);
    if c.len() < 2 {
        return Vec::new();
    }
    let Ok(col) = colleague_matrix(c) else {
        return Vec::new();
    };
    let mut roots: Vec<f64> = match eigenvalues(col.matrix) {
        Some(eigs) => {
            let radius = eigs.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max);
            let imag_tol = IMAG_REL_TOL * (1.0 + radius);
            eigs.into_iter()
                .filter(|&(re, im)| im.abs() <= imag_tol && re.abs() <= 1.0 + EDGE_TOL)
                .map(|(re, _)| polish(c, re.clamp(-1.0, 1.0)))
                .collect()
        }
        None => scan_roots(c, 64 * c.len()),
    };
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOL);
    roots
}

/// Newton refinement of an eigenvalue-derived root; keeps the original when
/// Newton does not improve the residual.
fn polish(c: &[f64], u0: f64) -> f64 {
    let d = derivative_unit(c, 1.0);
    let mut u = u0;
    let mut res = clenshaw_unit(c, u).abs();
    for _ in 0..3 {
        let slope = clenshaw_unit(&d, u);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = (u - clenshaw_unit(c, u) / slope).clamp(-1.0, 1.0);
        let next_res = clenshaw_unit(c, next).abs();
        if !(next_res < res) || (next - u0).abs() > 1e-6 {
            break;
        }
        u = next;
        res = next_res;
    }
    u
}

/// Sign-change scan plus bisection; fallback when the QR iteration fails.
fn scan_roots(c: &[f64], samples: usize) -> Vec<f64> {
    let f = |u: f64| clenshaw_unit(c, u);
    let mut out = Vec::new();
    let step = 2.0 / samples as f64;
    let mut lo = -1.0;
    let mut flo = f(lo);
    for k in 1..=samples {
        let hi = if k == samples { 1.0 } else { -1.0 + k as f64 * step };
        let fhi = f(hi);
        if flo == 0.0 {
            out.push(lo);
        } else if flo * fhi < 0.0 {
            out.push(bisect(&f, lo, hi));
        }
        lo = hi;
        flo = fhi;
    }
    if flo == 0.0 {
        out.push(1.0);
    }
    out
}

pub(crate) fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Real roots in `iv` of a derivative series expressed in the mapped basis.
pub fn real_roots_in_interval(dcoeffs: &[f64], iv: Interval) -> Vec<f64> {
    unit_roots(dcoeffs).into_iter().map(|u| iv.from_unit(u)).collect()
}

pub fn critical_set(p: &ChebProxy) -> CriticalSet {
    let iv = p.interval();
    let mut points = vec![iv.lo()];
    points.extend(
        real_roots_in_interval(&derivative_coeffs(p), iv)
            .into_iter()
            .filter(|&x| x > iv.lo() && x < iv.hi()),
    );
    points.push(iv.hi());
    let values = points.iter().map(|&x| p.eval(x)).collect();
    CriticalSet { points, values }
}

/// Global minimum of the proxy over its interval and every critical point
/// attaining it (within a relative tie tolerance).
pub fn minimize_by_stationary_points(p: &ChebProxy) -> (f64, Vec<f64>) {
    let cs = critical_set(p);
    let f_star = cs.values.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = VALUE_TIE_REL_TOL * (1.0 + f_star.abs());
    let xs = cs
        .points
        .iter()
        .zip(&cs.values)
        .filter(|(_, v)| **v <= f_star + tie)
        .map(|(x, _)| *x)
        .collect();
    (f_star, xs)
}
