//! Minimization of a Chebyshev series on `[-1, 1]` as a semidefinite program.
//!
//! `g(u) - t >= 0` on `[-1, 1]` is certified through the weighted
//! sum-of-squares forms
//!
//! * odd degree:  `(1 + u) h1(u)^2 + (1 - u) h2(u)^2`
//! * even degree: `h1(u)^2 + (1 - u^2) h2(u)^2`
//!
//! with `h_k^2 = v_k^T Q_k v_k` over the Chebyshev basis. Matching Chebyshev
//! coefficients gives one linear equality per degree `j = 0..=m` in the Gram
//! matrices and `t`; the solver then maximizes `t`.
//!
//! The dual of `max t, A(X) + t e0 = c, X psd` is
//! `min c.y, y0 = 1, A*(y) psd`. Iterates keep the dual exactly feasible
//! (`Z` is recomputed as `A*(y)`), so `c.y` is always a valid upper bound on
//! the minimum; `t - |r|_1`, with `r` the primal residual, is a valid lower
//! bound because `|T_j| <= 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chebfit::{clenshaw_unit, ChebProxy};
use crate::error::{Error, Result};

/// One coefficient-matching equality:
/// `<q, Q> + <q_prime, Q'> + t_coef * t = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub q: DMatrix<f64>,
    pub q_prime: DMatrix<f64>,
    pub t_coef: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    /// Orders of the two Gram blocks, `floor(m/2) + 1` and `floor((m-1)/2) + 1`.
    pub block_dims: [usize; 2],
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn degree(&self) -> usize {
        self.constraints.len() - 1
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.rhs))
    }

    /// Left-hand sides `<A_j, (Q, Q')>` without the `t` term.
    pub fn apply(&self, q: &DMatrix<f64>, q_prime: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.q.dot(q) + c.q_prime.dot(q_prime)),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> [DMatrix<f64>; 2] {
        let [n1, n2] = self.block_dims;
        let mut z1 = DMatrix::<f64>::zeros(n1, n1);
        let mut z2 = DMatrix::<f64>::zeros(n2, n2);
        for (c, &yj) in self.constraints.iter().zip(y.iter()) {
            z1 += &c.q * yj;
            z2 += &c.q_prime * yj;
        }
        [z1, z2]
    }

    fn block(&self, j: usize, b: usize) -> &DMatrix<f64> {
        if b == 0 {
            &self.constraints[j].q
        } else {
            &self.constraints[j].q_prime
        }
    }
}

impl fmt::Display for SdpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n1, n2] = self.block_dims;
        writeln!(f, "# maximize t")?;
        writeln!(f, "blocks {n1} {n2}")?;
        writeln!(f, "constraints {}", self.constraints.len())?;
        for (j, c) in self.constraints.iter().enumerate() {
            writeln!(f, "constraint {j} rhs {:e} t {}", c.rhs, c.t_coef)?;
            for (name, m) in [("Q", &c.q), ("Q'", &c.q_prime)] {
                for u in 0..m.nrows() {
                    for v in 0..m.ncols() {
                        if m[(u, v)] != 0.0 {
                            writeln!(f, "  {name} {u} {v} {}", m[(u, v)])?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Adds `scale * T_a * T_b` to `out`, dropping degrees beyond `out.len()`.
fn accumulate_product(out: &mut [f64], a: usize, b: usize, scale: f64) {
    for (k, w) in [(a + b, 0.5), (a.abs_diff(b), 0.5)] {
        if let Some(slot) = out.get_mut(k) {
            *slot += scale * w;
        }
    }
}

/// Chebyshev coefficients of `weight(u) * T_u(u) * T_v(u)`.
fn weighted_product(weight: &[f64], u: usize, v: usize, len: usize) -> Vec<f64> {
    let mut uv = vec![0.0; u + v + 1];
    accumulate_product(&mut uv, u, v, 1.0);
    let mut out = vec![0.0; len];
    for (k, &wk) in weight.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (l, &cl) in uv.iter().enumerate() {
            if cl != 0.0 {
                accumulate_product(&mut out, k, l, wk * cl);
            }
        }
    }
    out
}

/// Coefficient-matching SDP for minimizing `sum_j c_j T_j` on `[-1, 1]`.
pub fn build_reformulation(coeffs: &[f64]) -> Result<SdpProblem> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidInput(
            "the SDP reformulation needs degree >= 1".into(),
        ));
    }
    let m = coeffs.len() - 1;
    let d1 = m / 2;
    let d2 = (m - 1) / 2;
    // (1 + T1, 1 - T1) for odd degree, (1, (1 - T2) / 2) for even degree.
    let (w1, w2): (&[f64], &[f64]) = if m % 2 == 1 {
        (&[1.0, 1.0], &[1.0, -1.0])
    } else {
        (&[1.0], &[0.5, 0.0, -0.5])
    };
    let mut constraints: Vec<Constraint> = coeffs
        .iter()
        .enumerate()
        .map(|(j, &c)| Constraint {
            q: DMatrix::zeros(d1 + 1, d1 + 1),
            q_prime: DMatrix::zeros(d2 + 1, d2 + 1),
            t_coef: if j == 0 { 1.0 } else { 0.0 },
            rhs: c,
        })
        .collect();
    for (d, weight, second) in [(d1, w1, false), (d2, w2, true)] {
        for u in 0..=d {
            for v in 0..=d {
                let prod = weighted_product(weight, u, v, m + 1);
                for (j, val) in prod.into_iter().enumerate() {
                    if val != 0.0 {
                        let c = &mut constraints[j];
                        let target = if second { &mut c.q_prime } else { &mut c.q };
                        target[(u, v)] += val;
                    }
                }
            }
        }
    }
    Ok(SdpProblem {
        block_dims: [d1 + 1, d2 + 1],
        constraints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Certified lower bound on the minimum (`t - |primal residual|_1`).
    pub t_lower: f64,
    /// Dual objective; an upper bound on the minimum.
    pub t_upper: f64,
    pub gap: f64,
    pub status: SdpStatus,
    /// Primal objective value of the returned iterate.
    pub t_primal: f64,
    pub q: DMatrix<f64>,
    pub q_prime: DMatrix<f64>,
    pub iterations: usize,
    /// `(t_lower, t_upper)` of every iterate.
    pub bound_history: Vec<(f64, f64)>,
    /// Condition estimate of the last Schur complement.
    pub condition: f64,
}

impl SdpSolution {
    /// Turns a non-optimal status into the matching error.
    pub fn into_result(self, max_iters: usize) -> Result<SdpSolution> {
        match self.status {
            SdpStatus::Optimal => Ok(self),
            SdpStatus::MaxIters => Err(Error::MaxIters {
                iters: max_iters,
                gap: self.gap,
            }),
            SdpStatus::NumericalFailure => Err(Error::NumericalFailure {
                reason: format!("stalled with gap {:e}", self.gap),
                condition: self.condition,
            }),
        }
    }
}

pub const DEFAULT_MAX_ITERS: usize = 200;
const STEP_FRACTION: f64 = 0.98;
const START_GRID: usize = 32;

fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Inverse of an SPD matrix, or `None` if Cholesky fails.
fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Some(a.clone().cholesky()?.inverse())
}

/// Largest `alpha` with `x + alpha * dx` psd (infinite if `dx` is psd).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    let l = chol.l();
    let linv_dx = l.solve_lower_triangular(dx)?;
    let s = l.solve_lower_triangular(&linv_dx.transpose())?;
    let lmin = SymmetricEigen::new(sym(&s)).eigenvalues.min();
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(a)).eigenvalues.min()
}

struct Iterate {
    x: [DMatrix<f64>; 2],
    t: f64,
    y: DVector<f64>,
}

struct Direction {
    dx: [DMatrix<f64>; 2],
    dt: f64,
    dy: DVector<f64>,
    dz: [DMatrix<f64>; 2],
}

/// Dense HKM primal-dual interior-point method with Mehrotra
/// predictor-corrector; `t` stays free in the Newton system.
pub fn solve_sdp(prob: &SdpProblem, eps3: f64, max_iters: usize) -> Result<SdpSolution> {
    if !(eps3 > 0.0) {
        return Err(Error::InvalidInput(format!("eps3 must be positive, got {eps3}")));
    }
    let ncons = prob.constraints.len();
    if ncons < 2 {
        return Err(Error::InvalidInput("SDP needs at least two constraints".into()));
    }
    let c_raw = prob.rhs();
    let scale = c_raw.amax().max(1.0);
    let c = &c_raw / scale;
    let tol = eps3 / scale;
    let [n1, n2] = prob.block_dims;
    let ntot = (n1 + n2) as f64;

    let g_min = (0..=START_GRID)
        .map(|k| clenshaw_unit(c.as_slice(), (std::f64::consts::PI * k as f64 / START_GRID as f64).cos()))
        .fold(f64::INFINITY, f64::min);
    let mut it = Iterate {
        x: [DMatrix::identity(n1, n1), DMatrix::identity(n2, n2)],
        t: g_min - 1.0,
        y: {
            let mut y = DVector::zeros(ncons);
            y[0] = 1.0;
            y
        },
    };

    // Gram matrix of the constraint map including the `t` column, used to
    // project iterates onto the affine constraints.
    let mut gram = DMatrix::<f64>::zeros(ncons, ncons);
    for i in 0..ncons {
        for j in i..ncons {
            let (a, b) = (&prob.constraints[i], &prob.constraints[j]);
            let v = a.q.dot(&b.q) + a.q_prime.dot(&b.q_prime) + a.t_coef * b.t_coef;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let gram = gram.cholesky();
    let t_col = DVector::from_iterator(ncons, prob.constraints.iter().map(|c| c.t_coef));
    let residual = |x: &[DMatrix<f64>; 2], t: f64| -> DVector<f64> { &c - prob.apply(&x[0], &x[1]) - &t_col * t };

    let mut best_lower = f64::NEG_INFINITY;
    let mut best_upper = f64::INFINITY;
    let mut best_x = it.x.clone();
    let mut best_t = it.t;
    let mut history = Vec::new();
    let mut condition = 1.0;
    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;

    for iter in 0..=max_iters {
        iterations = iter;
        let z = prob.adjoint(&it.y);
        let mut rp = residual(&it.x, it.t);
        // Move onto the affine constraints when that keeps X definite.
        if let Some(g) = &gram {
            let w = g.solve(&rp);
            let dx = prob.adjoint(&w);
            let xs = [sym(&(&it.x[0] + &dx[0])), sym(&(&it.x[1] + &dx[1]))];
            if xs.iter().all(|m| m.clone().cholesky().is_some()) {
                let ts = it.t + t_col.dot(&w);
                let r = residual(&xs, ts);
                if r.lp_norm(1) < rp.lp_norm(1) {
                    (it.x, it.t, rp) = (xs, ts, r);
                }
            }
        }
        let lower = it.t - rp.lp_norm(1);
        let upper = c.dot(&it.y);
        history.push((lower * scale, upper * scale));
        if lower > best_lower {
            best_lower = lower;
            best_x = it.x.clone();
            best_t = it.t;
        }
        best_upper = best_upper.min(upper);
        if best_upper - best_lower <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        if iter == max_iters {
            break;
        }

        let Some(zi) = z.iter().map(spd_inverse).collect::<Option<Vec<_>>>() else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let zi = [zi[0].clone(), zi[1].clone()];
        let mu = (it.x[0].dot(&z[0]) + it.x[1].dot(&z[1])) / ntot;

        // Schur complement M_ij = sum_b tr(A_i X A_j Z^-1).
        let mut schur = DMatrix::<f64>::zeros(ncons, ncons);
        for b in 0..2 {
            let xb = &it.x[b];
            let zib = &zi[b];
            let prods: Vec<DMatrix<f64>> =
                (0..ncons).map(|j| xb * prob.block(j, b) * zib).collect();
            for i in 0..ncons {
                let ai = prob.block(i, b);
                for (j, pj) in prods.iter().enumerate().skip(i) {
                    let v = ai.dot(&pj.transpose());
                    schur[(i, j)] += v;
                    if i != j {
                        schur[(j, i)] += v;
                    }
                }
            }
        }
        let sub = schur.view((1, 1), (ncons - 1, ncons - 1)).into_owned();
        let diag = sub.diagonal();
        condition = diag.max() / diag.min().max(f64::MIN_POSITIVE);
        // Near the optimum the Schur complement can lose definiteness to
        // rounding; a small diagonal shift keeps the direction usable.
        let shift = diag.max() * 1e-14;
        let Some(chol) = [0.0, 1.0, 1e2, 1e4]
            .iter()
            .find_map(|k| (&sub + DMatrix::identity(ncons - 1, ncons - 1) * (k * shift)).cholesky())
        else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let dy0 = 1.0 - it.y[0];

        let solve = |rc: [DMatrix<f64>; 2]| -> Direction {
            let arc = prob.apply(&rc[0], &rc[1]);
            let h = &arc - &rp;
            let rhs = DVector::from_iterator(
                ncons - 1,
                (1..ncons).map(|r| h[r] - schur[(r, 0)] * dy0),
            );
            let rest = chol.solve(&rhs);
            let mut dy = DVector::zeros(ncons);
            dy[0] = dy0;
            dy.rows_mut(1, ncons - 1).copy_from(&rest);
            let dt = (&schur * &dy)[0] - h[0];
            let dz = prob.adjoint(&dy);
            let dx = [
                &rc[0] - sym(&(&it.x[0] * &dz[0] * &zi[0])),
                &rc[1] - sym(&(&it.x[1] * &dz[1] * &zi[1])),
            ];
            Direction { dx, dt, dy, dz }
        };
        let steps = |d: &Direction| -> Option<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for b in 0..2 {
                ap = ap.min(max_step(&it.x[b], &d.dx[b])?);
                ad = ad.min(max_step(&z[b], &d.dz[b])?);
            }
            Some((ap, ad))
        };

        let pred = solve([-it.x[0].clone(), -it.x[1].clone()]);
        let Some((ap, ad)) = steps(&pred) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = (0..2)
            .map(|b| (&it.x[b] + &pred.dx[b] * ap).dot(&(&z[b] + &pred.dz[b] * ad)))
            .sum::<f64>()
            / ntot;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc = [0, 1].map(|b| {
            &zi[b] * (sigma * mu) - &it.x[b] - sym(&(&pred.dx[b] * &pred.dz[b] * &zi[b]))
        });
        let corr = solve(rc);
        let Some((ap, ad)) = steps(&corr) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        for b in 0..2 {
            it.x[b] += &corr.dx[b] * ap;
            it.x[b] = sym(&it.x[b]);
        }
        it.t += corr.dt * ap;
        it.y += &corr.dy * ad;
        it.y[0] = 1.0;
    }

    let [q, q_prime] = best_x;
    Ok(SdpSolution {
        t_lower: best_lower * scale,
        t_upper: best_upper * scale,
        gap: (best_upper - best_lower) * scale,
        status,
        t_primal: best_t * scale,
        q: q * scale,
        q_prime: q_prime * scale,
        iterations,
        bound_history: history,
        condition,
    })
}

/// Minimum eigenvalues of the two Gram blocks.
pub fn gram_min_eigenvalues(sol: &SdpSolution) -> (f64, f64) {
    (min_eig(&sol.q), min_eig(&sol.q_prime))
}

/// Upper estimate `f_e` of the proxy minimum with `p* <= f_e <= p* + eps3`.
pub fn minimize_by_sdp(p: &ChebProxy, eps3: f64) -> Result<f64> {
    let c = p.coeffs();
    match c.len() {
        1 => Ok(c[0]),
        2 => Ok(c[0] - c[1].abs()),
        _ => {
            let prob = build_reformulation(c)?;
            let sol = solve_sdp(&prob, eps3, DEFAULT_MAX_ITERS)?.into_result(DEFAULT_MAX_ITERS)?;
            Ok(sol.t_upper)
        }
    }
}
