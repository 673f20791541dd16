use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::domain::AxisBox;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::linear_fit;

#[derive(Debug, Clone, PartialEq)]
pub struct KMediansResult {
    pub facilities: Vec<Vec<f64>>,
    /// Facility index of each point.
    pub assignment: Vec<usize>,
    /// Objective after initialization and after every iteration.
    pub objective_trace: Vec<f64>,
}

impl KMediansResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts with the initial objective")
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest facility, lowest index on ties.
fn nearest(x: &[f64], facilities: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, f) in facilities.iter().enumerate() {
        let d = dist(x, f);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Sum of Euclidean distances from each point to its nearest facility.
pub fn kmedians_objective(points: &[Vec<f64>], facilities: &[Vec<f64>]) -> f64 {
    points.iter().map(|x| nearest(x, facilities).1).sum()
}

fn coordinate_median(members: &[&Vec<f64>], dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|d| {
            let mut v: Vec<f64> = members.iter().map(|x| x[d]).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        })
        .collect()
}

/// Distance-weighted seeding: the first facility is a uniform draw, each
/// further one a point drawn with probability proportional to its distance
/// from the facilities chosen so far.
fn seed_facilities(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(seed, "kmedians_init", 0);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut gap: Vec<f64> = points.iter().map(|x| dist(x, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&gap) {
            Ok(w) => w.sample(&mut rng),
            // every remaining point coincides with a facility: take the lowest unused index
            Err(_) => (0..points.len()).find(|i| !chosen.contains(i)).expect("k ≤ number of points"),
        };
        chosen.push(next);
        for (g, x) in gap.iter_mut().zip(points) {
            *g = g.min(dist(x, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Alternating k-medians: Euclidean assignment, coordinatewise-median update.
///
/// Facilities start at `k` distance-weighted draws from the points. A
/// median move is kept only when it does not raise the cluster's distance
/// sum, so the objective never increases. An empty facility is moved to the
/// point farthest from its current facility.
pub fn kmedians_em(points: &[Vec<f64>], k: usize, seed: u64, iters: usize) -> Result<KMediansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={}", points.len())));
    }
    let dims = points[0].len();
    if dims == 0 || points.iter().any(|p| p.len() != dims || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("points must be finite and share one dimension"));
    }
    let mut facilities = seed_facilities(points, k, seed);
    let assign = |facilities: &[Vec<f64>]| -> Vec<usize> { points.iter().map(|x| nearest(x, facilities).0).collect() };
    let mut assignment = assign(&facilities);
    let mut trace = vec![kmedians_objective(points, &facilities)];

    for _ in 0..iters {
        let mut moved = false;
        for j in 0..k {
            let members: Vec<&Vec<f64>> =
                points.iter().zip(&assignment).filter(|(_, &a)| a == j).map(|(p, _)| p).collect();
            if members.is_empty() {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = dist(&points[a], &facilities[assignment[a]]);
                        let db = dist(&points[b], &facilities[assignment[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty point set");
                if dist(&points[far], &facilities[assignment[far]]) > 0.0 {
                    facilities[j] = points[far].clone();
                    assignment[far] = j;
                    moved = true;
                }
                continue;
            }
            let candidate = coordinate_median(&members, dims);
            let old: f64 = members.iter().map(|x| dist(x, &facilities[j])).sum();
            let new: f64 = members.iter().map(|x| dist(x, &candidate)).sum();
            if new < old && candidate != facilities[j] {
                facilities[j] = candidate;
                moved = true;
            }
        }
        let next = assign(&facilities);
        let changed = next != assignment;
        assignment = next;
        trace.push(kmedians_objective(points, &facilities));
        if !moved && !changed {
            break;
        }
    }
    Ok(KMediansResult { facilities, assignment, objective_trace: trace })
}

/// Scaling exponent of facility density against the true density.
///
/// Voronoi cells are rasterized on a `resolution`-per-axis grid over the box;
/// each facility contributes `(ln p̄, −ln A)` to a least-squares fit, with `A`
/// the cell area and `p̄` the mean density over the cell. Cells catching no
/// grid point or no density are skipped.
pub fn voronoi_scaling_exponent(
    facilities: &[Vec<f64>],
    bounds: &AxisBox,
    density: impl Fn(&[f64]) -> f64,
    resolution: usize,
) -> Result<f64> {
    let dims = bounds.dims();
    if resolution == 0 || facilities.iter().any(|f| f.len() != dims) {
        return Err(Error::invalid("facilities must match the box dimension and resolution must be positive"));
    }
    let total = resolution.pow(dims as u32);
    let cell = bounds.volume() / total as f64;
    let mut counts = vec![0usize; facilities.len()];
    let mut mass = vec![0.0; facilities.len()];
    let mut x = vec![0.0; dims];
    for flat in 0..total {
        let mut r = flat;
        for d in (0..dims).rev() {
            let i = r % resolution;
            r /= resolution;
            x[d] = bounds.lower[d] + (i as f64 + 0.5) * bounds.extent(d) / resolution as f64;
        }
        let j = nearest(&x, facilities).0;
        counts[j] += 1;
        mass[j] += density(&x);
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (&c, &m) in counts.iter().zip(&mass) {
        if c > 0 && m > 0.0 {
            lx.push((m / c as f64).ln());
            ly.push(-(c as f64 * cell).ln());
        }
    }
    linear_fit(&lx, &ly).map(|f| f.slope).ok_or_else(|| Error::Degenerate("fit: too few usable facilities".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn blobs(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { 10.0 };
                vec![c + r.random_range(-0.5..0.5), c + r.random_range(-0.5..0.5)]
            })
            .collect()
    }

    #[test]
    fn one_facility_per_point() {
        let pts = blobs(7, 1);
        let res = kmedians_em(&pts, 7, 3, 10).unwrap();
        assert_eq!(res.objective(), 0.0);
    }

    #[test]
    fn separated_blobs_match_brute_force() {
        let pts = blobs(8, 2);
        let res = kmedians_em(&pts, 2, 11, 50).unwrap();
        // oracle: best 2-partition over all assignments, each cluster scored at its coordinate median
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1..(1u32 << 8) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<&Vec<f64>> =
                    (0..8).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| &pts[i]).collect();
                let m = coordinate_median(&members, 2);
                cost += members.iter().map(|x| dist(x, &m)).sum::<f64>();
            }
            if cost < best.0 {
                best = (cost, mask);
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                let same_oracle = (best.1 >> i & 1) == (best.1 >> j & 1);
                assert_eq!(res.assignment[i] == res.assignment[j], same_oracle);
            }
        }
        let a0 = res.assignment[0];
        assert!((0..8).all(|i| (res.assignment[i] == a0) == (i % 2 == 0)));
    }

    #[test]
    fn rejects_too_many_facilities() {
        assert!(kmedians_em(&blobs(3, 0), 4, 0, 5).is_err());
    }

    #[test]
    fn regular_lattice_gives_flat_exponent() {
        // a regular lattice of facilities under uniform density has equal areas
        let mut f = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                f.push(vec![(i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0]);
            }
        }
        let e = voronoi_scaling_exponent(&f, &AxisBox::unit(2), |x| 1.0 + x[0], 64).unwrap();
        assert!(e.abs() < 1e-9, "{e}");
    }

    proptest::proptest! {
        #[test]
        fn objective_never_increases(seed in 0u64..500, k in 1usize..6) {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![r.random::<f64>(), r.random::<f64>().powi(3)]).collect();
            let res = kmedians_em(&pts, k, seed, 30).unwrap();
            for w in res.objective_trace.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
