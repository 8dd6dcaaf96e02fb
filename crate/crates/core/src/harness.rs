//! Experiment driver: random objective families, a brute-force global
//! minimization oracle, parameter sweeps and CSV output.
//!
//! Objectives for agent `i` under seed `s` are drawn from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `i + 1`; the graph for seed `s`
//! uses stream 0 of the same seed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebfit::Interval;
use crate::error::{Error, Result};
use crate::netgraph::{erdos_renyi_connected, Graph};
use crate::pipeline::{run_cpca, Backend, CpcaConfig, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `a e^{bx} + c e^{-dx}`, `a, b ~ U(1, 2)`, `c, d ~ U(2, 4)`.
    ExpSum,
    /// `a / (1 + e^{-x}) + b log(1 + x^2)`, `a ~ N(10, 2)`, `b ~ N(5, 1)`.
    LogisticLog,
    /// Objectives supplied by the caller through [`run_sweep_with`].
    Custom,
}

#[derive(Clone)]
pub enum SampledObjective {
    ExpSum { a: f64, b: f64, c: f64, d: f64 },
    LogisticLog { a: f64, b: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SampledObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExpSum { a, b, c, d } => write!(f, "ExpSum({a}, {b}, {c}, {d})"),
            Self::LogisticLog { a, b } => write!(f, "LogisticLog({a}, {b})"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl SampledObjective {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::ExpSum { a, b, c, d } => a * (b * x).exp() + c * (-d * x).exp(),
            Self::LogisticLog { a, b } => a / (1.0 + (-x).exp()) + b * (x * x).ln_1p(),
            Self::Custom(f) => f(x),
        }
    }
}

impl Objective for SampledObjective {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

fn agent_rng(seed: u64, agent_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent_index as u64 + 1);
    rng
}

pub fn sample_objective(family: Family, seed: u64, agent_index: usize) -> Result<SampledObjective> {
    let mut rng = agent_rng(seed, agent_index);
    match family {
        Family::ExpSum => {
            let a = 1.0 + rng.random::<f64>();
            let b = 1.0 + rng.random::<f64>();
            let c = 2.0 + 2.0 * rng.random::<f64>();
            let d = 2.0 + 2.0 * rng.random::<f64>();
            Ok(SampledObjective::ExpSum { a, b, c, d })
        }
        Family::LogisticLog => {
            let a = Normal::new(10.0, 2.0).expect("valid normal").sample(&mut rng);
            let b = Normal::new(5.0, 1.0).expect("valid normal").sample(&mut rng);
            Ok(SampledObjective::LogisticLog { a, b })
        }
        Family::Custom => Err(Error::InvalidInput(
            "custom objectives must be supplied by the caller".into(),
        )),
    }
}

/// Average of the agents' objectives.
pub fn average_objective<O: Objective>(objectives: &[O]) -> impl Fn(f64) -> f64 + Sync + '_ {
    let n = objectives.len() as f64;
    move |x| objectives.iter().map(|o| o.value(x)).sum::<f64>() / n
}

pub const ORACLE_GRID: usize = 1_000_000;
const ORACLE_CANDIDATES: usize = 5;
const ORACLE_WIDTH: f64 = 1e-12;

/// Golden-section search for a minimum of `f` on `[a, b]` down to `width`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let mut best = if fc <= fd { (fc, c) } else { (fd, d) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.0 {
            best = (fx, x);
        }
    }
    best
}

/// Dense scan over `ORACLE_GRID + 1` uniform points followed by
/// golden-section refinement around the best local candidates.
/// Returns `(f_star, x_star)`.
pub fn brute_force_min<F: Fn(f64) -> f64 + Sync>(f: F, iv: Interval) -> (f64, f64) {
    let n = ORACLE_GRID;
    let h = iv.width() / n as f64;
    let xs = |k: usize| if k == n { iv.hi() } else { iv.lo() + k as f64 * h };
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|k| f(xs(k))).collect();
    let mut locals: Vec<usize> = (0..=n)
        .filter(|&k| {
            let left = k == 0 || vals[k] <= vals[k - 1];
            let right = k == n || vals[k] <= vals[k + 1];
            left && right
        })
        .collect();
    locals.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    locals.truncate(ORACLE_CANDIDATES);
    let mut best = (vals[locals[0]], xs(locals[0]));
    for k in locals {
        let lo = xs(k.saturating_sub(1));
        let hi = xs((k + 1).min(n));
        let cand = golden_section(&f, lo, hi, ORACLE_WIDTH);
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UPolicy {
    /// Use the exact diameter (at least 1).
    ExactDiameter,
    Fixed(usize),
}

impl UPolicy {
    pub fn resolve(&self, g: &Graph) -> Result<usize> {
        let d = g.diameter().max(1);
        match *self {
            UPolicy::ExactDiameter => Ok(d),
            UPolicy::Fixed(u) if u >= d => Ok(u),
            UPolicy::Fixed(u) => Err(Error::InvalidInput(format!(
                "U = {u} is below the graph diameter {d}"
            ))),
        }
    }
}

fn default_interval() -> Interval {
    Interval::unit()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    pub n_agents: usize,
    pub edge_prob: f64,
    pub seeds: Vec<u64>,
    pub eps_list: Vec<f64>,
    pub backend: Backend,
    pub u_policy: UPolicy,
    /// Common constraint interval of all agents.
    #[serde(default = "default_interval")]
    pub interval: Interval,
    /// When false, `runtime_ms` is written as 0 so output is reproducible.
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

impl ExperimentSpec {
    pub fn new(family: Family, n_agents: usize, edge_prob: f64) -> Self {
        Self {
            family,
            n_agents,
            edge_prob,
            seeds: vec![42],
            eps_list: vec![1e-4],
            backend: Backend::Sdp,
            u_policy: UPolicy::ExactDiameter,
            interval: Interval::unit(),
            record_runtime: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidInput("n_agents must be at least 1".into()));
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::InvalidInput(format!("eps values must be positive, got {e}")));
        }
        if self.n_agents > 1 && !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return Err(Error::InvalidInput(format!("edge_prob must lie in (0, 1], got {}", self.edge_prob)));
        }
        Ok(())
    }
}

/// Network of `n` agents for a seed; a single agent forms a trivial graph.
pub fn build_graph(n: usize, edge_prob: f64, seed: u64) -> Result<Graph> {
    if n == 1 {
        Ok(Graph::path(1))
    } else {
        erdos_renyi_connected(n, edge_prob, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub eps: f64,
    pub seed: u64,
    pub rounds: usize,
    /// Largest per-agent query count.
    pub queries: usize,
    pub degree: usize,
    /// Largest `|f_e - f*|` over agents.
    pub abs_error: f64,
    pub runtime_ms: u64,
    pub status: String,
}

struct Instance {
    graph: Graph,
    objectives: Vec<SampledObjective>,
    oracle: f64,
}

/// Runs every `(eps, seed)` cell; failures are recorded in the status column.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<MetricsRecord>> {
    let family = spec.family;
    run_sweep_with(spec, move |seed, i| sample_objective(family, seed, i))
}

pub fn run_sweep_with<S>(spec: &ExperimentSpec, sampler: S) -> Result<Vec<MetricsRecord>>
where
    S: Fn(u64, usize) -> Result<SampledObjective> + Sync,
{
    spec.validate()?;
    let instances: BTreeMap<u64, Result<Instance>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = (|| {
                let graph = build_graph(spec.n_agents, spec.edge_prob, seed)?;
                let objectives = (0..spec.n_agents)
                    .map(|i| sampler(seed, i))
                    .collect::<Result<Vec<_>>>()?;
                let (oracle, _) = brute_force_min(average_objective(&objectives), spec.interval);
                Ok(Instance { graph, objectives, oracle })
            })();
            (seed, inst)
        })
        .collect();

    let cells: Vec<(f64, u64)> = spec
        .eps_list
        .iter()
        .flat_map(|&e| spec.seeds.iter().map(move |&s| (e, s)))
        .collect();
    let mut records: Vec<MetricsRecord> = cells
        .par_iter()
        .map(|&(eps, seed)| {
            let failed = |status: String| MetricsRecord {
                eps,
                seed,
                rounds: 0,
                queries: 0,
                degree: 0,
                abs_error: f64::NAN,
                runtime_ms: 0,
                status,
            };
            let inst = match &instances[&seed] {
                Ok(inst) => inst,
                Err(e) => return failed(format!("error: {e}")),
            };
            let start = Instant::now();
            let run = spec.u_policy.resolve(&inst.graph).and_then(|u| {
                let cfg = CpcaConfig::new(eps, u).with_backend(spec.backend);
                let ivs = vec![spec.interval; spec.n_agents];
                run_cpca(&inst.objectives, &ivs, &inst.graph, &cfg)
            });
            let elapsed = if spec.record_runtime { start.elapsed().as_millis() as u64 } else { 0 };
            match run {
                Ok(res) => MetricsRecord {
                    eps,
                    seed,
                    rounds: res.metrics.consensus_rounds,
                    queries: res.metrics.queries_per_agent.iter().copied().max().unwrap_or(0),
                    degree: res.metrics.max_proxy_degree,
                    abs_error: res
                        .f_e_star
                        .iter()
                        .map(|f| (f - inst.oracle).abs())
                        .fold(0.0, f64::max),
                    runtime_ms: elapsed,
                    status: "ok".into(),
                },
                Err(e) => MetricsRecord {
                    runtime_ms: elapsed,
                    ..failed(format!("error: {e}"))
                },
            }
        })
        .collect();
    records.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.seed.cmp(&b.seed)));
    Ok(records)
}

pub const CSV_HEADER: &str = "eps,seed,rounds,queries,degree,abs_error,runtime_ms,status";

/// Writes records under the fixed header
/// `eps,seed,rounds,queries,degree,abs_error,runtime_ms,status`.
pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
