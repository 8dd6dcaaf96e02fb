//! Lock-step consensus simulator.
//!
//! All agents advance in synchronous rounds; every message sent in a round
//! is delivered within it. Max/min updates range over the closed
//! neighborhood (the agent itself included).

use std::io::Write;

use serde::Serialize;

use crate::chebfit::Interval;
use crate::error::{Error, Result};
use crate::netgraph::Graph;

pub const DEFAULT_ROUND_CAP: usize = 1_000_000;

/// Per-agent consensus variables: the coefficient estimate `p` and the
/// running max/min envelopes `r`, `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

impl AgentState {
    pub fn new(p: Vec<f64>) -> Self {
        Self {
            r: p.clone(),
            s: p.clone(),
            p,
        }
    }

    fn reset_envelopes(&mut self) {
        self.r.clone_from(&self.p);
        self.s.clone_from(&self.p);
    }

    fn pad_to(&mut self, len: usize) {
        for v in [&mut self.p, &mut self.r, &mut self.s] {
            if v.len() < len {
                v.resize(len, 0.0);
            }
        }
    }

    fn spread(&self) -> f64 {
        self.r
            .iter()
            .zip(&self.s)
            .map(|(r, s)| r - s)
            .fold(0.0, f64::max)
    }
}

/// One row of the optional per-round trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    /// `max_i |p_i - mean|_inf` against the exact initial average.
    pub max_deviation: f64,
    /// Outcome of the stopping test when the round is a check instant.
    pub stop_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusOutcome {
    pub final_vectors: Vec<Vec<f64>>,
    /// Number of averaging rounds `K`.
    pub rounds: usize,
    pub delta_used: f64,
    pub aligned_degree: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusOptions {
    pub round_cap: usize,
    pub trace: bool,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        Self {
            round_cap: DEFAULT_ROUND_CAP,
            trace: false,
        }
    }
}

fn check_bound(g: &Graph, len: usize, u: usize) -> Result<()> {
    if len != g.n() {
        return Err(Error::InvalidInput(format!(
            "{len} agent inputs for a graph with {} agents",
            g.n()
        )));
    }
    if u == 0 {
        return Err(Error::InvalidInput("diameter bound U must be at least 1".into()));
    }
    Ok(())
}

/// Runs `u` rounds of max consensus on the lower ends and min consensus on
/// the upper ends, giving every agent `[max lo_i, min hi_i]`.
pub fn intersect_constraints(g: &Graph, intervals: &[Interval], u: usize) -> Result<Interval> {
    check_bound(g, intervals.len(), u)?;
    let mut lo: Vec<f64> = intervals.iter().map(Interval::lo).collect();
    let mut hi: Vec<f64> = intervals.iter().map(Interval::hi).collect();
    for _ in 0..u {
        let (next_lo, next_hi): (Vec<f64>, Vec<f64>) = (0..g.n())
            .map(|i| {
                g.neighbors(i).iter().fold((lo[i], hi[i]), |(a, b), &j| (a.max(lo[j]), b.min(hi[j])))
            })
            .unzip();
        lo = next_lo;
        hi = next_hi;
    }
    if lo.iter().any(|&a| a != lo[0]) || hi.iter().any(|&b| b != hi[0]) {
        return Err(Error::InvalidInput(format!(
            "agents disagree after {u} rounds; U is below the graph diameter"
        )));
    }
    if lo[0] >= hi[0] {
        return Err(Error::EmptyIntersection { lo: lo[0], hi: hi[0] });
    }
    Interval::new(lo[0], hi[0])
}

/// One exchange round of length alignment: every agent zero-pads its vector
/// to the longest length among itself and its neighbors.
pub fn pad_align(g: &Graph, vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..g.n())
        .map(|i| {
            let len = g
                .neighbors(i)
                .iter()
                .map(|&j| vectors[j].len())
                .fold(vectors[i].len(), usize::max);
            let mut v = vectors[i].clone();
            v.resize(len, 0.0);
            v
        })
        .collect()
}

#[inline]
fn at(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(0.0)
}

fn exact_mean(init: &[Vec<f64>]) -> Vec<f64> {
    let len = init.iter().map(Vec::len).max().unwrap_or(0);
    let n = init.len() as f64;
    (0..len).map(|k| init.iter().map(|v| at(v, k)).sum::<f64>() / n).collect()
}

fn max_deviation(states: &[AgentState], mean: &[f64]) -> f64 {
    states
        .iter()
        .flat_map(|s| mean.iter().enumerate().map(move |(k, m)| (at(&s.p, k) - m).abs()))
        .fold(0.0, f64::max)
}

/// Lazy-Metropolis averaging of coefficient vectors with the periodic
/// max/min stopping test, checked every `u` rounds against
/// `delta = eps2 / (m + 1)`.
pub fn run_average_consensus_with_stopping(
    g: &Graph,
    init: &[Vec<f64>],
    eps2: f64,
    u: usize,
) -> Result<ConsensusOutcome> {
    run_with_options(g, init, eps2, u, &ConsensusOptions::default())
}

pub fn run_with_options(
    g: &Graph,
    init: &[Vec<f64>],
    eps2: f64,
    u: usize,
    opts: &ConsensusOptions,
) -> Result<ConsensusOutcome> {
    check_bound(g, init.len(), u)?;
    if !(eps2 > 0.0) {
        return Err(Error::InvalidInput(format!("eps2 must be positive, got {eps2}")));
    }
    if init.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("empty coefficient vector".into()));
    }
    let weights = neighbor_weights(g);
    let mean = if opts.trace { exact_mean(init) } else { Vec::new() };

    let mut states: Vec<AgentState> = init.iter().cloned().map(AgentState::new).collect();
    let mut delta = f64::NAN;
    let mut trace = Vec::new();
    let mut l = 1;
    let mut t = 0;
    loop {
        let mut stop_check = None;
        if t == l * u {
            if l == 1 {
                let len = states[0].p.len();
                if states.iter().any(|s| s.p.len() != len) {
                    return Err(Error::InvalidInput(format!(
                        "vector lengths still differ after {u} rounds; U is below the graph diameter"
                    )));
                }
                delta = eps2 / len as f64;
            }
            let verdicts: Vec<bool> = states.iter().map(|s| s.spread() <= delta).collect();
            if verdicts.iter().any(|&v| v != verdicts[0]) {
                return Err(Error::InvalidInput(format!(
                    "stop decisions diverged at round {t}; U is below the graph diameter"
                )));
            }
            stop_check = Some(verdicts[0]);
        }
        if opts.trace {
            trace.push(TraceRow {
                round: t,
                max_deviation: max_deviation(&states, &mean),
                stop_check,
            });
        }
        match stop_check {
            Some(true) => break,
            Some(false) => {
                states.iter_mut().for_each(AgentState::reset_envelopes);
                l += 1;
            }
            None => {}
        }
        if t >= opts.round_cap {
            return Err(Error::RoundCapExceeded { cap: opts.round_cap });
        }
        states = step(g, &weights, &states);
        t += 1;
    }

    let aligned_degree = states[0].p.len() - 1;
    Ok(ConsensusOutcome {
        final_vectors: states.into_iter().map(|s| s.p).collect(),
        rounds: t,
        delta_used: delta,
        aligned_degree,
        trace,
    })
}

fn neighbor_weights(g: &Graph) -> Vec<Vec<(usize, f64)>> {
    (0..g.n())
        .map(|i| {
            g.neighbors(i)
                .iter()
                .map(|&j| (j, 1.0 / (2.0 * g.degree(i).max(g.degree(j)) as f64)))
                .collect()
        })
        .collect()
}

/// One synchronous round without the stopping logic: padding, averaging and
/// envelope updates.
pub fn step_states(g: &Graph, states: &[AgentState]) -> Vec<AgentState> {
    assert_eq!(states.len(), g.n(), "one state per agent");
    step(g, &neighbor_weights(g), states)
}

fn step(g: &Graph, weights: &[Vec<(usize, f64)>], states: &[AgentState]) -> Vec<AgentState> {
    (0..g.n())
        .map(|i| {
            let nbrs = &weights[i];
            let len = nbrs.iter().map(|&(j, _)| states[j].p.len()).fold(states[i].p.len(), usize::max);
            let mut me = states[i].clone();
            me.pad_to(len);
            let mut next = me.clone();
            for k in 0..len {
                let mut acc = me.p[k];
                for &(j, w) in nbrs {
                    let other = &states[j];
                    acc += w * (at(&other.p, k) - me.p[k]);
                    next.r[k] = next.r[k].max(at(&other.r, k));
                    next.s[k] = next.s[k].min(at(&other.s, k));
                }
                next.p[k] = acc;
            }
            next
        })
        .collect()
}

/// Writes a trace as CSV with header `round,max_deviation,stop_check`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "max_deviation", "stop_check"])?;
    for r in rows {
        let check = match r.stop_check {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([r.round.to_string(), format!("{:e}", r.max_deviation), check.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
