//! End-to-end distributed solve: constraint intersection, local proxy
//! construction, coefficient consensus and per-agent proxy minimization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebfit::{adaptive_fit, ChebProxy, FitOptions, Interval};
use crate::consensus::{intersect_constraints, run_average_consensus_with_stopping};
use crate::error::{Error, Result, Stage};
use crate::netgraph::Graph;
use crate::polyalg::minimize_by_stationary_points;
use crate::sdp::minimize_by_sdp;

/// A local objective queried by value only.
pub trait Objective: Sync {
    fn value(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Objective for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Sdp,
    StationaryPoints,
}

/// Split of the target accuracy across approximation, consensus and
/// polynomial optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl ErrorBudget {
    pub fn even(eps: f64) -> Self {
        let third = eps / 3.0;
        Self {
            eps1: third,
            eps2: third,
            eps3: eps - 2.0 * third,
        }
    }

    pub fn total(&self) -> f64 {
        self.eps1 + self.eps2 + self.eps3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcaConfig {
    pub eps: f64,
    pub budget: ErrorBudget,
    pub backend: Backend,
    /// Known upper bound on the graph diameter.
    pub upper_bound_u: usize,
    pub fit: FitOptions,
}

impl CpcaConfig {
    pub fn new(eps: f64, upper_bound_u: usize) -> Self {
        Self {
            eps,
            budget: ErrorBudget::even(eps),
            backend: Backend::Sdp,
            upper_bound_u,
            fit: FitOptions::default(),
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_budget(mut self, budget: ErrorBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budget;
        if !(self.eps > 0.0) || !(b.eps1 > 0.0 && b.eps2 > 0.0 && b.eps3 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "accuracy and budget parts must be positive: eps={}, budget={b:?}",
                self.eps
            )));
        }
        if (b.total() - self.eps).abs() > 1e-12 * self.eps {
            return Err(Error::InvalidInput(format!(
                "budget sums to {} but eps is {}",
                b.total(),
                self.eps
            )));
        }
        if self.upper_bound_u == 0 {
            return Err(Error::InvalidInput("upper_bound_u must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Zeroth-order queries each agent spent on its proxy.
    pub queries_per_agent: Vec<usize>,
    pub consensus_rounds: usize,
    pub intersection_rounds: usize,
    pub max_proxy_degree: usize,
}

#[derive(Debug, Clone)]
pub struct CpcaResult {
    pub interval: Interval,
    pub f_e_star: Vec<f64>,
    /// Minimizers of each agent's recovered proxy, from the stationary-point search.
    pub minimizer_sets: Vec<Vec<f64>>,
    /// Local proxies before consensus.
    pub local_proxies: Vec<ChebProxy>,
    /// Proxies recovered by each agent after consensus.
    pub final_proxies: Vec<ChebProxy>,
    pub delta: f64,
    pub metrics: Metrics,
}

/// Wraps a consensus vector as a proxy on the common interval.
pub fn recover_proxy(vector: Vec<f64>, iv: Interval) -> Result<ChebProxy> {
    ChebProxy::new(iv, vector)
}

pub fn run_cpca<O: Objective>(
    objectives: &[O],
    constraint_intervals: &[Interval],
    g: &Graph,
    cfg: &CpcaConfig,
) -> Result<CpcaResult> {
    cfg.validate()?;
    if objectives.len() != g.n() {
        return Err(Error::InvalidInput(format!(
            "{} objectives for {} agents",
            objectives.len(),
            g.n()
        )));
    }
    let u = cfg.upper_bound_u;
    let iv = intersect_constraints(g, constraint_intervals, u).map_err(|e| e.in_stage(Stage::Intersection))?;

    let fits = objectives
        .par_iter()
        .map(|f| adaptive_fit(|x| f.value(x), iv, cfg.budget.eps1, &cfg.fit))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage(Stage::Approximation))?;
    let queries_per_agent = fits.iter().map(|(_, r)| r.evals_used).collect();
    let max_proxy_degree = fits.iter().map(|(_, r)| r.degree).max().unwrap_or(0);
    let local_proxies: Vec<ChebProxy> = fits.into_iter().map(|(p, _)| p).collect();

    let init: Vec<Vec<f64>> = local_proxies.iter().map(|p| p.coeffs().to_vec()).collect();
    let outcome = run_average_consensus_with_stopping(g, &init, cfg.budget.eps2, u)
        .map_err(|e| e.in_stage(Stage::Consensus))?;

    let final_proxies = outcome
        .final_vectors
        .into_iter()
        .map(|v| recover_proxy(v, iv))
        .collect::<Result<Vec<_>>>()?;
    let solved = final_proxies
        .par_iter()
        .map(|p| {
            let (f_sp, xs) = minimize_by_stationary_points(p);
            let f = match cfg.backend {
                Backend::StationaryPoints => f_sp,
                Backend::Sdp => minimize_by_sdp(p, cfg.budget.eps3)?,
            };
            Ok((f, xs))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: Error| e.in_stage(Stage::Optimization))?;
    let (f_e_star, minimizer_sets) = solved.into_iter().unzip();

    Ok(CpcaResult {
        interval: iv,
        f_e_star,
        minimizer_sets,
        local_proxies,
        final_proxies,
        delta: outcome.delta_used,
        metrics: Metrics {
            queries_per_agent,
            consensus_rounds: outcome.rounds,
            intersection_rounds: u,
            max_proxy_degree,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_validation() {
        let cfg = CpcaConfig::new(1e-3, 2);
        cfg.validate().unwrap();
        let bad = cfg.clone().with_budget(ErrorBudget { eps1: 5e-4, eps2: 5e-4, eps3: 1e-4 });
        assert!(bad.validate().is_err());
        let neg = cfg.clone().with_budget(ErrorBudget { eps1: 1.1e-3, eps2: -1e-4, eps3: 0.0 });
        assert!(neg.validate().is_err());
        let skew = cfg.clone().with_budget(ErrorBudget { eps1: 1e-4, eps2: 8e-4, eps3: 1e-4 });
        skew.validate().unwrap();
        assert!(CpcaConfig { upper_bound_u: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn recover_linearity() {
        let iv = Interval::new(-1.0, 3.0).unwrap();
        let a = vec![1.0, -0.5, 0.25, 0.1];
        let b = vec![-2.0, 0.3, 0.0, 0.7];
        let avg: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (pa, pb) = (recover_proxy(a, iv).unwrap(), recover_proxy(b, iv).unwrap());
        let pm = recover_proxy(avg, iv).unwrap();
        for x in iv.linspace(100) {
            assert!((pm.eval(x) - 0.5 * (pa.eval(x) + pb.eval(x))).abs() <= 1e-12);
        }
        let sq = recover_proxy(vec![0.5, 0.0, 0.5], Interval::unit()).unwrap();
        assert!((sq.eval(0.7) - 0.49).abs() < 1e-15);
        let zero = recover_proxy(vec![0.0; 4], iv).unwrap();
        assert_eq!(zero.eval(1.3), 0.0);
    }

    #[test]
    fn single_agent_square() {
        let g = Graph::path(1);
        for backend in [Backend::Sdp, Backend::StationaryPoints] {
            let cfg = CpcaConfig::new(1e-6, 1).with_backend(backend);
            let r = run_cpca(&[|x: f64| x * x], &[Interval::unit()], &g, &cfg).unwrap();
            assert!(r.f_e_star[0].abs() <= 1e-6);
            assert!(r.minimizer_sets[0].iter().all(|x| x.abs() < 1e-6));
            assert_eq!(r.metrics.queries_per_agent, vec![5]);
        }
    }

    #[test]
    fn cancelling_pair() {
        let g = Graph::complete(2);
        let cfg = CpcaConfig::new(1e-6, 1);
        let objs: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = vec![Box::new(|x| x), Box::new(|x| -x)];
        let r = run_cpca(&objs, &[Interval::unit(); 2], &g, &cfg).unwrap();
        for f in &r.f_e_star {
            assert!(f.abs() <= 1e-6, "{f}");
        }
    }

    #[test]
    fn stage_labels() {
        let g = Graph::complete(2);
        let cfg = CpcaConfig::new(1e-3, 1);
        let ivs = [Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap()];
        let err = run_cpca(&[|x: f64| x, |x: f64| x], &ivs, &g, &cfg).unwrap_err();
        assert!(matches!(err, Error::InStage { stage: Stage::Intersection, .. }));
        assert!(matches!(err.root(), Error::EmptyIntersection { .. }));
        let mut tight = cfg.clone();
        tight.fit.m_max = 8;
        let err = run_cpca(&[f64::abs, f64::abs], &[Interval::unit(); 2], &g, &tight).unwrap_err();
        assert!(matches!(err, Error::InStage { stage: Stage::Approximation, .. }));
    }
}
