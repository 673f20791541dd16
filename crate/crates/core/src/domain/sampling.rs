use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use super::grid::{BoxDomain, DensityField};
use crate::error::{Error, Result};
use crate::rng;

/// `n` points distributed according to `p`: alias-method draw of a cell,
/// then a uniform position inside it. Deterministic per seed.
pub fn sample_density(p: &DensityField, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let field = p.field();
    let alias = WeightedAliasIndex::new(p.cell_masses())
        .map_err(|e| Error::Degenerate(format!("density: cannot sample ({e})")))?;
    let mut rng = rng::stream(seed, "sample_density", 0);
    let points = (0..n)
        .map(|_| {
            let cell = alias.sample(&mut rng);
            let (lo, hi) = field.cell_bounds(cell);
            lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
        })
        .collect();
    Ok(points)
}

/// Uniform point in a possibly disconnected domain: volume-weighted box choice, then uniform in the box.
pub fn sample_uniform_in_domain<R: Rng + ?Sized>(domain: &BoxDomain, rng: &mut R) -> Vec<f64> {
    let total = domain.volume();
    let mut u = rng.random::<f64>() * total;
    let boxes = domain.boxes();
    let mut chosen = &boxes[boxes.len() - 1];
    for b in boxes {
        let v = b.volume();
        if u < v {
            chosen = b;
            break;
        }
        u -= v;
    }
    chosen.lower.iter().zip(&chosen.upper).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_density, AxisBox, GridField};
    use crate::stats::chi_square_uniform_pvalue;

    #[test]
    fn uniform_density_passes_chi_square() {
        let p = normalize_density(&GridField::constant(BoxDomain::unit(2), vec![vec![10, 10]], 1.0).unwrap()).unwrap();
        let pts = sample_density(&p, 100_000, 11).unwrap();
        let mut counts = vec![0usize; 100];
        for x in &pts {
            counts[p.field().locate(x).unwrap()] += 1;
        }
        assert!(chi_square_uniform_pvalue(&counts) > 0.01);
    }

    #[test]
    fn point_mass_stays_in_its_cell() {
        let mut v = vec![0.0; 16];
        v[5] = 1.0;
        let p = normalize_density(&GridField::new(BoxDomain::unit(2), vec![vec![4, 4]], v).unwrap()).unwrap();
        for x in sample_density(&p, 500, 3).unwrap() {
            assert_eq!(p.field().locate(&x), Some(5));
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let p =
            normalize_density(&GridField::from_fn(BoxDomain::unit(1), vec![vec![8]], |x| 1.0 + x[0]).unwrap()).unwrap();
        assert_eq!(sample_density(&p, 50, 9).unwrap(), sample_density(&p, 50, 9).unwrap());
        assert_ne!(sample_density(&p, 50, 9).unwrap(), sample_density(&p, 50, 10).unwrap());
    }

    #[test]
    fn empirical_frequencies_converge() {
        let f =
            GridField::from_fn(BoxDomain::unit(2), vec![vec![5, 5]], |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let p = normalize_density(&f).unwrap();
        let masses = p.cell_masses();
        for (seed, n) in [(1u64, 10_000usize), (2, 40_000)] {
            let mut counts = vec![0.0; masses.len()];
            for x in sample_density(&p, n, seed).unwrap() {
                counts[p.field().locate(&x).unwrap()] += 1.0;
            }
            let l1: f64 = counts.iter().zip(&masses).map(|(c, m)| (c / n as f64 - m).abs()).sum();
            assert!(l1 < 5.0 / (n as f64).sqrt(), "n={n}: L1 {l1}");
        }
    }

    #[test]
    fn uniform_domain_sampling_respects_volume() {
        let dom = BoxDomain::new(vec![
            AxisBox::new(vec![0.0], vec![1.0]).unwrap(),
            AxisBox::new(vec![2.0], vec![5.0]).unwrap(),
        ])
        .unwrap();
        let mut r = crate::rng::stream(1, "t", 0);
        let n = 40_000;
        let in_second = (0..n).filter(|_| sample_uniform_in_domain(&dom, &mut r)[0] >= 2.0).count();
        let frac = in_second as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }
}
