use std::collections::VecDeque;

use super::graph::UGraph;
use crate::error::{Error, Result};

/// One edge of the shortest-path tree from a source: `from` is the endpoint
/// nearer the source, at hop distance `depth`, and `count` is how many
/// destinations route through the edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathUse {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
    pub depth: usize,
    pub count: usize,
}

/// Edge usage over the chosen shortest paths from `source` to every reachable node.
///
/// Among equally short paths, each node's predecessor is its lowest-numbered
/// neighbour one hop closer to the source. Ordered by `to`.
pub fn path_counts(g: &UGraph, source: usize) -> Result<Vec<PathUse>> {
    let n = g.node_count();
    if source >= n {
        return Err(Error::invalid(format!("node {source} outside {n} nodes")));
    }
    let mut dist = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([source]);
    dist[source] = 0;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(v, _) in g.neighbours(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let parent: Vec<Option<(usize, usize)>> = (0..n)
        .map(|v| {
            if v == source || dist[v] == usize::MAX {
                return None;
            }
            // neighbours are sorted, so the first hit is the lowest-numbered
            g.neighbours(v).iter().find(|&&(u, _)| dist[u] + 1 == dist[v]).copied()
        })
        .collect();
    let mut size = vec![1usize; n];
    for &v in order.iter().rev() {
        if let Some((u, _)) = parent[v] {
            size[u] += size[v];
        }
    }
    Ok((0..n)
        .filter_map(|v| parent[v].map(|(u, e)| PathUse { from: u, to: v, edge: e, depth: dist[u], count: size[v] }))
        .collect())
}

/// `Σ count·e^{−depth}/S_e` over the shortest-path tree of `source`.
pub fn subgraph_loss(g: &UGraph, alloc: &[f64], source: usize) -> Result<f64> {
    if alloc.len() != g.edge_count() || alloc.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("allocation must be positive on every edge"));
    }
    Ok(path_counts(g, source)?.iter().map(|u| u.count as f64 * (-(u.depth as f64)).exp() / alloc[u.edge]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: enumerate each destination's path by walking predecessors.
    fn brute(g: &UGraph, alloc: &[f64], i: usize) -> f64 {
        let n = g.node_count();
        let mut total = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            // BFS distances from i
            let mut d = vec![usize::MAX; n];
            d[i] = 0;
            let mut frontier = vec![i];
            while !frontier.is_empty() {
                let mut next = vec![];
                for &u in &frontier {
                    for &(v, _) in g.neighbours(u) {
                        if d[v] == usize::MAX {
                            d[v] = d[u] + 1;
                            next.push(v);
                        }
                    }
                }
                frontier = next;
            }
            if d[j] == usize::MAX {
                continue;
            }
            let mut k = j;
            while k != i {
                let (p, e) = *g.neighbours(k).iter().filter(|&&(u, _)| d[u] + 1 == d[k]).min().unwrap();
                total += (-(d[p] as f64)).exp() / alloc[e];
                k = p;
            }
        }
        total
    }

    #[test]
    fn isolated_node_costs_nothing() {
        let g = UGraph::new(3, [(0, 1)]).unwrap();
        assert_eq!(subgraph_loss(&g, &[1.0], 2).unwrap(), 0.0);
    }

    #[test]
    fn three_node_path() {
        let g = UGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let l = subgraph_loss(&g, &[1.0, 1.0], 0).unwrap();
        assert!((l - (2.0 + (-1.0f64).exp())).abs() < 1e-15);
        let counts = path_counts(&g, 0).unwrap();
        assert_eq!(counts[0], PathUse { from: 0, to: 1, edge: 0, depth: 0, count: 2 });
    }

    #[test]
    fn star_center() {
        let g = UGraph::new(6, (1..6).map(|l| (0, l))).unwrap();
        let alloc = [0.5, 1.0, 2.0, 4.0, 0.25];
        let expect: f64 = alloc.iter().map(|s| 1.0 / s).sum();
        assert!((subgraph_loss(&g, &alloc, 0).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn matches_enumeration_on_random_graphs() {
        for seed in 0..5 {
            let g = crate::network::erdos_renyi(18, 0.15, seed).unwrap();
            let alloc: Vec<f64> = (0..g.edge_count()).map(|e| 0.5 + (e as f64 * 0.37).sin().abs()).collect();
            for i in 0..18 {
                let a = subgraph_loss(&g, &alloc, i).unwrap();
                assert!((a - brute(&g, &alloc, i)).abs() < 1e-12);
            }
        }
    }
}
