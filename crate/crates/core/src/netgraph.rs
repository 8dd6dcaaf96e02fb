//! Undirected communication graphs.
//!
//! Random graphs are drawn with `ChaCha8Rng::seed_from_u64(seed)` from
//! `rand_chacha`, which produces the same stream on every platform.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_CONNECT_ATTEMPTS: usize = 1000;

/// Connected undirected simple graph on agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list; rejects self-loops, duplicates,
    /// out-of-range indices and disconnected results.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let g = Self::build(n, edges)?;
        if !g.is_connected() {
            return Err(Error::InvalidInput("graph is not connected".into()));
        }
        Ok(g)
    }

    fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph needs at least one agent".into()));
        }
        let mut adj = vec![Vec::new(); n];
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at {a}")));
            }
            let e = (a.min(b), a.max(b));
            if adj[e.0].contains(&e.1) {
                return Err(Error::InvalidInput(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            adj[e.0].push(e.1);
            adj[e.1].push(e.0);
            list.push(e);
        }
        list.sort_unstable();
        for nb in &mut adj {
            nb.sort_unstable();
        }
        Ok(Self { n, edges: list, adj })
    }

    pub fn path(n: usize) -> Self {
        Self::build(n, (1..n).map(|i| (i - 1, i))).expect("path graph is valid")
    }

    pub fn complete(n: usize) -> Self {
        Self::build(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("complete graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    fn bfs_eccentricity(&self, src: usize) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        let mut seen = 1;
        let mut far = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    far = far.max(dist[v]);
                    seen += 1;
                    queue.push_back(v);
                }
            }
        }
        (seen == self.n).then_some(far)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_eccentricity(0).is_some()
    }

    /// Exact diameter by BFS from every node.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|s| self.bfs_eccentricity(s).expect("graph is connected"))
            .max()
            .unwrap_or(0)
    }

    /// `w_ij = 1 / (2 max(deg i, deg j))` on edges, remaining mass on the diagonal.
    pub fn lazy_metropolis_weights(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let mut off = 0.0;
            for &j in &self.adj[i] {
                let wij = 1.0 / (2.0 * self.degree(i).max(self.degree(j)) as f64);
                w[(i, j)] = wij;
                off += wij;
            }
            w[(i, i)] = 1.0 - off;
        }
        w
    }

    /// Text form: header `n=<count>`, then one `u v` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for (a, b) in &self.edges {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty edge list".into()))?;
        let n = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("bad header {header:?}, expected n=<count>")))?;
        let edges = lines
            .map(|l| {
                let mut it = l.split_whitespace().map(str::parse::<usize>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                    _ => Err(Error::InvalidInput(format!("bad edge line {l:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(n, edges)
    }
}

/// Erdős–Rényi `G(n, p)` resampled until connected.
pub fn erdos_renyi_connected(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!("edge probability must lie in (0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::build(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::NotConnectedAfterRetries {
        attempts: MAX_CONNECT_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn tiny_er_graphs() {
        let g = erdos_renyi_connected(2, 1.0, 99).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(matches!(
            erdos_renyi_connected(5, 1e-9, 1),
            Err(Error::NotConnectedAfterRetries { attempts: 1000 })
        ));
        assert!(erdos_renyi_connected(1, 0.5, 1).is_err());
        assert!(erdos_renyi_connected(4, 0.0, 1).is_err());
    }

    #[test]
    fn er_is_deterministic() {
        let a = erdos_renyi_connected(30, 0.4, 42).unwrap();
        let b = erdos_renyi_connected(30, 0.4, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, erdos_renyi_connected(30, 0.4, 43).unwrap());
    }

    #[test]
    fn reference_instance_diameter() {
        let g = erdos_renyi_connected(30, 0.4, 42).unwrap();
        assert!(g.is_connected());
        let d = g.diameter();
        assert!(d <= 4, "diameter {d}");
        assert_eq!(d, REFERENCE_DIAMETER);
    }

    // Diameter of ER(30, 0.4, seed 42) under the ChaCha8 stream.
    const REFERENCE_DIAMETER: usize = 3;

    #[test]
    fn diameters() {
        assert_eq!(Graph::path(4).diameter(), 3);
        for n in 2..7 {
            assert_eq!(Graph::complete(n).diameter(), 1);
        }
        assert_eq!(Graph::path(1).diameter(), 0);
    }

    #[test]
    fn small_weight_matrices() {
        let w = Graph::path(2).lazy_metropolis_weights();
        assert_eq!(w, DMatrix::from_element(2, 2, 0.5));
        let w = Graph::complete(3).lazy_metropolis_weights();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w[(i, j)], if i == j { 0.5 } else { 0.25 });
            }
        }
    }

    #[test]
    fn weights_are_doubly_stochastic_and_contracting() {
        for seed in 0..20 {
            let g = erdos_renyi_connected(30, 0.4, seed).unwrap();
            let w = g.lazy_metropolis_weights();
            assert_eq!(w, w.transpose());
            for i in 0..30 {
                assert!((w.row(i).sum() - 1.0).abs() <= 1e-14);
                assert!((w.column(i).sum() - 1.0).abs() <= 1e-14);
                assert!(w[(i, i)] >= 0.5 - 1e-15);
            }
            assert!(w.iter().all(|&v| v >= 0.0));
            let mut ev: Vec<f64> = SymmetricEigen::new(w).eigenvalues.iter().map(|v| v.abs()).collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            assert!((ev[0] - 1.0).abs() < 1e-12);
            assert!(ev[1] < 1.0 - 1e-6, "seed {seed}: slem {}", ev[1]);
        }
    }

    #[test]
    fn edge_list_text() {
        let g = erdos_renyi_connected(8, 0.5, 3).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("n=8\n"));
        assert_eq!(Graph::parse_edge_list(&text).unwrap(), g);
        assert!(Graph::parse_edge_list("n=3\n0 1\n").is_err());
        assert!(Graph::parse_edge_list("3\n0 1\n1 2\n").is_err());
        assert!(Graph::parse_edge_list("n=2\n0 0\n").is_err());
        assert!(Graph::parse_edge_list("n=2\n0 1\n1 0\n").is_err());
        assert!(Graph::parse_edge_list("n=2\n0 1 2\n").is_err());
    }
}
