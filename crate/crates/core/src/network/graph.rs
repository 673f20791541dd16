use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Simple undirected graph: no self-loops, no parallel edges.
///
/// Edges are stored as `(u, v)` with `u < v`, sorted; adjacency lists hold
/// `(neighbour, edge index)` sorted by neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl UGraph {
    /// Builds a graph on `n` nodes; duplicate and reversed edges collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) outside {n} nodes")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Self { n, edges, adj })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbour, edge index)` pairs of node `i`.
    pub fn neighbours(&self, i: usize) -> &[(usize, usize)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }
}

/// Parses whitespace-separated `u v` lines with 1-based ids.
///
/// Lines starting with `%` or `#` and blank lines are skipped; columns past
/// the second (weights, timestamps) are ignored. The node count is the
/// largest id seen.
pub fn parse_edge_list(text: &str) -> Result<UGraph> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let line_no = i + 1;
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let mut id = |name: &str| -> Result<usize> {
            let tok = cols
                .next()
                .ok_or_else(|| Error::Parse { line: line_no, message: format!("missing {name} node id") })?;
            let v: usize =
                tok.parse().map_err(|_| Error::Parse { line: line_no, message: format!("bad node id '{tok}'") })?;
            if v == 0 {
                return Err(Error::Parse { line: line_no, message: "node ids are 1-based".into() });
            }
            Ok(v - 1)
        };
        let (u, v) = (id("first")?, id("second")?);
        if u == v {
            return Err(Error::Parse { line: line_no, message: format!("self-loop at node {}", u + 1) });
        }
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    UGraph::new(n, edges)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<UGraph> {
    parse_edge_list(&std::fs::read_to_string(path)?)
}

/// G(n, p) random graph from a seeded stream.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<UGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("edge probability must lie in [0, 1]"));
    }
    let mut r = rng::stream(seed, "erdos_renyi", 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    UGraph::new(n, edges)
}

/// Preferential attachment: each new node links to `m` distinct existing
/// nodes chosen proportionally to degree, starting from a clique on `m + 1` nodes.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<UGraph> {
    if m == 0 || n <= m {
        return Err(Error::invalid("need 1 ≤ m < n"));
    }
    let mut r = rng::stream(seed, "barabasi_albert", 0);
    let mut edges = Vec::new();
    // every edge endpoint once: sampling from it is degree-proportional
    let mut ends = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    for new in m + 1..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(*ends.choose(&mut r).expect("clique has edges"));
        }
        for t in targets {
            edges.push((t, new));
            ends.extend([t, new]);
        }
    }
    UGraph::new(n, edges)
}
