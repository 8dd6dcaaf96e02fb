//! Fixed inputs shared by the stage benchmarks.

use cpca_core::harness::{build_graph, sample_objective, Family, SampledObjective};
use cpca_core::{ChebProxy, Graph, Interval};

/// Graph and sampled objectives for one benchmark instance.
pub fn instance(family: Family, n: usize, seed: u64) -> (Graph, Vec<SampledObjective>) {
    let g = build_graph(n, 0.4, seed).expect("connected graph");
    let objs = (0..n).map(|i| sample_objective(family, seed, i).expect("sampler")).collect();
    (g, objs)
}

/// A smooth proxy of the requested degree with geometrically decaying coefficients.
pub fn decaying_proxy(degree: usize) -> ChebProxy {
    let coeffs = (0..=degree).map(|k| (0.7f64).powi(k as i32) * if k % 3 == 1 { -1.0 } else { 1.0 }).collect();
    ChebProxy::new(Interval::unit(), coeffs).expect("valid proxy")
}
