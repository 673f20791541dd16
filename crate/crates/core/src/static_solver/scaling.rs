use crate::domain::{DensityField, GridField};
use crate::error::{Error, Result};
use crate::stats::linear_fit;

/// Least-squares slope of `ln S` against `ln p` over all cells.
pub fn fit_scaling_exponent(s: &GridField, p: &DensityField) -> Result<f64> {
    if !s.same_lattice(p.field()) {
        return Err(Error::invalid("field and density live on different lattices"));
    }
    if s.values().iter().chain(p.values()).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("scaling fit needs strictly positive S and p"));
    }
    let x: Vec<f64> = p.values().iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = s.values().iter().map(|v| v.ln()).collect();
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::Degenerate("fit: fewer than two distinct density values".into()));
    }
    linear_fit(&x, &y).map(|f| f.slope).ok_or_else(|| Error::Degenerate("fit: singular design".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_density, BoxDomain, LossFamily, VariationalProblem};
    use crate::static_solver::analytic_power_optimum;

    fn ramp() -> DensityField {
        let f = GridField::from_fn(BoxDomain::unit(2), vec![vec![6, 5]], |x| 0.1 + x[0] + x[1] * x[1]).unwrap();
        normalize_density(&f).unwrap()
    }

    #[test]
    fn exact_power_data() {
        let p = ramp();
        let s = p.field().map(|v| 3.0 * v.powf(2.0 / 3.0)).unwrap();
        assert!((fit_scaling_exponent(&s, &p).unwrap() - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let p = ramp();
        let s = p.field().map(|_| 0.4).unwrap();
        assert!(fit_scaling_exponent(&s, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn closed_form_exponents() {
        let cases = [
            (LossFamily::PowerLaw { gamma: 1.0 }, 0.5),
            (LossFamily::VolumeMedian { dims: 2 }, 2.0 / 3.0),
            (LossFamily::VolumeMedian { dims: 3 }, 0.75),
            (LossFamily::VolumeMean { dims: 2 }, 0.5),
            (LossFamily::VolumeMean { dims: 3 }, 0.6),
        ];
        for (loss, e) in cases {
            let prob = VariationalProblem::budgeted(ramp(), loss.clone(), 2.0).unwrap();
            let sol = analytic_power_optimum(&prob).unwrap();
            let fit = fit_scaling_exponent(&sol.s, &prob.density).unwrap();
            assert!((fit - e).abs() < 1e-9, "{loss:?}: {fit}");
        }
    }

    #[test]
    fn uniform_density_is_degenerate() {
        let f = GridField::constant(BoxDomain::unit(1), vec![vec![10]], 1.0).unwrap();
        let p = DensityField::new(f.clone()).unwrap();
        let err = fit_scaling_exponent(&f, &p).unwrap_err();
        assert!(err.to_string().contains("degenerate fit"));
    }
}
