use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::graph::UGraph;
use crate::error::{Error, Result};

/// Event probability per node, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDensity(Vec<f64>);

impl NodeDensity {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("node probabilities must be finite and non-negative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("node probabilities sum to {total}, not 1")));
        }
        Ok(Self(p))
    }

    /// Rescales non-negative weights to a density.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate("density: node weights sum to zero".into()));
        }
        Self::new(w.into_iter().map(|v| v / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Resource per undirected edge, indexed like [`UGraph::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAlloc {
    pub values: Vec<f64>,
    pub budget: f64,
}

impl EdgeAlloc {
    pub fn new(values: Vec<f64>, budget: f64) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("edge allocations must be positive"));
        }
        let total: f64 = values.iter().sum();
        if (total - budget).abs() > 1e-8 * budget {
            return Err(Error::invalid(format!("allocation totals {total}, budget is {budget}")));
        }
        Ok(Self { values, budget })
    }
}

fn check(g: &UGraph, p: &NodeDensity) -> Result<()> {
    if p.values().len() != g.node_count() {
        return Err(Error::invalid("one probability per node required"));
    }
    Ok(())
}

/// `Σ_e (p_u + p_v) / S_e` over undirected edges.
pub fn neighborhood_action(g: &UGraph, p: &NodeDensity, alloc: &[f64]) -> Result<f64> {
    check(g, p)?;
    if alloc.len() != g.edge_count() {
        return Err(Error::invalid(format!("{} allocations for {} edges", alloc.len(), g.edge_count())));
    }
    let p = p.values();
    Ok(g.edges().iter().zip(alloc).map(|(&(u, v), s)| (p[u] + p[v]) / s).sum())
}

/// `S_e = K·√(p_u + p_v) / Σ_f √(p_f)` with the sum over unordered edges.
pub fn neighborhood_optimum(g: &UGraph, p: &NodeDensity, budget: f64) -> Result<EdgeAlloc> {
    check(g, p)?;
    if g.edge_count() == 0 {
        return Err(Error::invalid("graph has no edges"));
    }
    if !(budget > 0.0) {
        return Err(Error::invalid("budget must be positive"));
    }
    let p = p.values();
    let w: Vec<f64> = g.edges().iter().map(|&(u, v)| (p[u] + p[v]).sqrt()).collect();
    let z: f64 = w.iter().sum();
    if z == 0.0 {
        return Err(Error::Degenerate("density: no probability on any edge endpoint".into()));
    }
    EdgeAlloc::new(w.iter().map(|x| budget * x / z).collect(), budget)
        .map_err(|_| Error::Degenerate("allocation: an edge with no adjacent probability gets no resource".into()))
}

/// `Σ_j S_ij` per node. Every edge counts at both ends, so these total `2K`.
pub fn incident_sums(g: &UGraph, alloc: &[f64]) -> Vec<f64> {
    (0..g.node_count()).map(|i| g.neighbours(i).iter().map(|&(_, e)| alloc[e]).sum()).collect()
}

/// Degree approximation `K·ρ_i / Σ_k ρ_k` of the per-node incident allocation.
///
/// These values total `K`; the exact [`incident_sums`] total `2K`, so the two
/// agree up to that constant factor.
pub fn degree_approx(g: &UGraph, budget: f64) -> Result<Vec<f64>> {
    let total: usize = (0..g.node_count()).map(|i| g.degree(i)).sum();
    if total == 0 {
        return Err(Error::invalid("graph has no edges"));
    }
    Ok((0..g.node_count()).map(|i| budget * g.degree(i) as f64 / total as f64).collect())
}

/// Uniformly random point of the allocation simplex `{S > 0, Σ S = K}`.
pub fn random_feasible_allocation<R: Rng + ?Sized>(g: &UGraph, budget: f64, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..g.edge_count()).map(|_| Exp1.sample(rng)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x: f64| budget * x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{barabasi_albert, erdos_renyi};
    use crate::stats::linear_fit;

    fn triangle() -> UGraph {
        UGraph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn action_examples() {
        let g = triangle();
        let p = NodeDensity::uniform(3);
        assert!((neighborhood_action(&g, &p, &[1.0; 3]).unwrap() - 2.0).abs() < 1e-15);
        let single = UGraph::new(2, [(0, 1)]).unwrap();
        let p1 = NodeDensity::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(neighborhood_action(&single, &p1, &[2.0]).unwrap(), 0.5);
        let a = neighborhood_action(&g, &p, &[0.3, 0.5, 0.9]).unwrap();
        let b = neighborhood_action(&g, &p, &[0.6, 1.0, 1.8]).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-14);
        assert!(neighborhood_action(&g, &p, &[1.0; 2]).is_err());
    }

    #[test]
    fn symmetric_triangle_optimum() {
        let s = neighborhood_optimum(&triangle(), &NodeDensity::uniform(3), 3.0).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn path_optimum_matches_projected_descent() {
        let g = UGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let p = NodeDensity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let s = neighborhood_optimum(&g, &p, 1.0).unwrap();
        assert!((s.values[0] - 0.8f64.sqrt() / (0.8f64.sqrt() + 0.5f64.sqrt())).abs() < 1e-15);
        assert!((s.values[0] - 0.5585).abs() < 1e-4 && (s.values[1] - 0.4415).abs() < 1e-4);
        // oracle: golden-section search of 0.8/x + 0.5/(1−x)
        let f = |x: f64| 0.8 / x + 0.5 / (1.0 - x);
        let (mut a, mut b) = (1e-6, 1.0 - 1e-6);
        for _ in 0..200 {
            let c = b - 0.618_033_988_749_895 * (b - a);
            let d = a + 0.618_033_988_749_895 * (b - a);
            if f(c) < f(d) {
                b = d
            } else {
                a = c
            }
        }
        assert!((s.values[0] - 0.5 * (a + b)).abs() / s.values[0] < 5e-3);
    }

    #[test]
    fn optimum_beats_random_allocations() {
        for seed in 0..3 {
            let g = erdos_renyi(20, 0.25, seed).unwrap();
            let w: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * 1.7).sin().abs()).collect();
            let p = NodeDensity::normalized(w).unwrap();
            let opt = neighborhood_optimum(&g, &p, 5.0).unwrap();
            let best = neighborhood_action(&g, &p, &opt.values).unwrap();
            let mut r = crate::rng::stream(seed, "random_alloc_test", 0);
            for _ in 0..200 {
                let a = random_feasible_allocation(&g, 5.0, &mut r);
                assert!(best <= neighborhood_action(&g, &p, &a).unwrap());
            }
        }
    }

    #[test]
    fn degree_approximation_examples() {
        // 4-cycle is 2-regular
        let ring = UGraph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert!(degree_approx(&ring, 2.0).unwrap().iter().all(|v| (v - 0.5).abs() < 1e-15));
        let star = UGraph::new(6, (1..6).map(|l| (0, l))).unwrap();
        let d = degree_approx(&star, 1.0).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let s = neighborhood_optimum(&star, &NodeDensity::uniform(6), 1.0).unwrap();
        assert!((incident_sums(&star, &s.values).iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degree_fit_with_degree_independent_density() {
        let g = barabasi_albert(300, 3, 17).unwrap();
        assert!(g.edge_count() >= 500);
        let mut r = crate::rng::stream(17, "degree_fit_test", 0);
        let p = NodeDensity::normalized((0..300).map(|_| r.random_range(0.5..1.5)).collect()).unwrap();
        let pe: Vec<f64> = g.edges().iter().map(|&(u, v)| p.values()[u] + p.values()[v]).collect();
        let m = crate::stats::mean(&pe);
        assert!(crate::stats::std_dev(&pe) / m < 0.5);
        let s = neighborhood_optimum(&g, &p, 10.0).unwrap();
        let fit = linear_fit(&degree_approx(&g, 10.0).unwrap(), &incident_sums(&g, &s.values)).unwrap();
        assert!(fit.r_squared > 0.95, "{fit:?}");
    }

    proptest::proptest! {
        #[test]
        fn budget_exact_and_scale_covariant(seed in 0u64..1000, k in 0.1f64..100.0) {
            let g = erdos_renyi(15, 0.3, seed).unwrap();
            proptest::prop_assume!(g.edge_count() > 0);
            let p = NodeDensity::normalized((0..15).map(|i| 1.0 + ((i as u64 * 7 + seed) % 5) as f64).collect()).unwrap();
            let a = neighborhood_optimum(&g, &p, k).unwrap();
            let b = neighborhood_optimum(&g, &p, 2.0 * k).unwrap();
            proptest::prop_assert!((a.values.iter().sum::<f64>() - k).abs() <= 1e-12 * k);
            for (x, y) in a.values.iter().zip(&b.values) {
                proptest::prop_assert!((2.0 * x - y).abs() <= 1e-12 * y);
            }
        }
    }
}
