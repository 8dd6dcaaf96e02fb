use cpca_core::consensus::{
    intersect_constraints, pad_align, run_average_consensus_with_stopping, run_with_options, step_states,
    write_trace_csv, AgentState, ConsensusOptions,
};
use cpca_core::netgraph::erdos_renyi_connected;
use cpca_core::{Graph, Interval};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn padded_mean(init: &[Vec<f64>]) -> Vec<f64> {
    let len = init.iter().map(Vec::len).max().unwrap();
    (0..len)
        .map(|k| init.iter().map(|v| v.get(k).copied().unwrap_or(0.0)).sum::<f64>() / init.len() as f64)
        .collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Graph, Vec<Vec<f64>>) {
    let n = rng.random_range(2..=25);
    let p = rng.random_range(0.15..0.9);
    let g = erdos_renyi_connected(n, p, rng.random()).unwrap();
    let init = (0..n)
        .map(|_| {
            let len = rng.random_range(1..=12);
            (0..len).map(|_| rng.random_range(-5.0..5.0)).collect()
        })
        .collect();
    (g, init)
}

#[test]
fn stopping_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for inst in 0..150 {
        let (g, init) = random_instance(&mut rng);
        let eps2 = 10f64.powf(-rng.random_range(1.0..9.0));
        let u = g.diameter().max(1) + rng.random_range(0..3);
        let out = run_average_consensus_with_stopping(&g, &init, eps2, u).unwrap();
        let mean = padded_mean(&init);
        assert_eq!(out.aligned_degree + 1, mean.len());
        assert_eq!(out.rounds % u, 0, "stops only at check rounds");
        let dev = out
            .final_vectors
            .iter()
            .flat_map(|v| v.iter().zip(&mean).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        assert!(dev <= out.delta_used, "instance {inst}: {dev:e} > {:e}", out.delta_used);
        assert_eq!(out.delta_used, eps2 / mean.len() as f64);
    }
}

#[test]
fn envelopes_sandwich_and_tighten() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let (g, init) = random_instance(&mut rng);
        let mut states: Vec<AgentState> = init.iter().cloned().map(AgentState::new).collect();
        let mean = padded_mean(&init);
        for _ in 0..3 * g.diameter().max(1) {
            let next = step_states(&g, &states);
            for (prev, cur) in states.iter().zip(&next) {
                for k in 0..cur.p.len() {
                    let r0 = prev.r.get(k).copied().unwrap_or(0.0);
                    let s0 = prev.s.get(k).copied().unwrap_or(0.0);
                    assert!(cur.s[k] <= cur.p[k] + 1e-12 && cur.p[k] <= cur.r[k] + 1e-12);
                    assert!(cur.r[k] >= r0 && cur.s[k] <= s0);
                }
            }
            states = next;
            let full: Vec<&AgentState> = states.iter().filter(|s| s.p.len() == mean.len()).collect();
            if full.len() == states.len() {
                for k in 0..mean.len() {
                    let avg = states.iter().map(|s| s.p[k]).sum::<f64>() / states.len() as f64;
                    assert!((avg - mean[k]).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn average_is_preserved_at_termination() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let (g, init) = random_instance(&mut rng);
        let out = run_average_consensus_with_stopping(&g, &init, 1e-6, g.diameter().max(1)).unwrap();
        let mean = padded_mean(&init);
        for k in 0..mean.len() {
            let avg = out.final_vectors.iter().map(|v| v[k]).sum::<f64>() / init.len() as f64;
            assert!((avg - mean[k]).abs() <= 1e-10);
        }
    }
}

#[test]
fn all_agents_stop_together_under_loose_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let (g, init) = random_instance(&mut rng);
        for extra in [0, 1, 5] {
            let u = g.diameter().max(1) + extra;
            let out = run_with_options(&g, &init, 1e-5, u, &ConsensusOptions { trace: true, ..Default::default() })
                .unwrap();
            let checks: Vec<_> = out.trace.iter().filter_map(|r| r.stop_check.map(|c| (r.round, c))).collect();
            assert!(checks.iter().all(|&(t, _)| t % u == 0));
            assert_eq!(checks.last().unwrap(), &(out.rounds, true));
            assert!(checks[..checks.len() - 1].iter().all(|&(_, c)| !c));
        }
    }
}

#[test]
fn deviation_decays_geometrically() {
    for seed in 0..5 {
        let g = erdos_renyi_connected(20, 0.3, seed).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(g.lazy_metropolis_weights())
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let slem = ev[1];
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let init: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let out = run_with_options(&g, &init, 1e-9, g.diameter(), &ConsensusOptions { trace: true, ..Default::default() })
            .unwrap();
        let d0 = out.trace[0].max_deviation;
        for row in &out.trace {
            let bound = (20f64).sqrt() * d0 * slem.powi(row.round as i32);
            assert!(row.max_deviation <= bound * (1.0 + 1e-9) + 1e-14, "round {}", row.round);
        }
    }
}

#[test]
fn trace_csv_layout() {
    let g = Graph::complete(3);
    let out = run_with_options(&g, &[vec![1.0], vec![2.0], vec![3.0]], 1e-3, 1, &ConsensusOptions { trace: true, ..Default::default() })
        .unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&out.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,max_deviation,stop_check"));
    assert!(lines.next().unwrap().starts_with("0,"));
    assert_eq!(text.lines().count(), out.trace.len() + 1);
}

#[test]
fn intersection_and_padding() {
    let g = Graph::path(4);
    let ivs = [(0.2, 2.0), (0.0, 3.0), (-2.0, 1.5), (-0.5, 5.0)].map(|(a, b)| Interval::new(a, b).unwrap());
    assert_eq!(intersect_constraints(&g, &ivs, 3).unwrap(), Interval::new(0.2, 1.5).unwrap());
    assert!(intersect_constraints(&g, &ivs, 2).is_err());
    let padded = pad_align(&g, &[vec![1.0], vec![1.0, 2.0, 3.0], vec![1.0], vec![4.0, 5.0]]);
    assert_eq!(padded.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 2]);
    assert_eq!(padded[0], vec![1.0, 0.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_inputs_stop_at_first_check(v in prop::collection::vec(-3.0..3.0f64, 1..8), n in 2usize..10) {
        let g = Graph::path(n);
        let out = run_average_consensus_with_stopping(&g, &vec![v.clone(); n], 1e-12, n - 1).unwrap();
        prop_assert_eq!(out.rounds, n - 1);
        for f in &out.final_vectors {
            prop_assert_eq!(f, &v);
        }
    }
}
