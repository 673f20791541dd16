use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower_k, upper_k]` on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("box bounds must be non-empty and of equal length"));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::invalid(format!("box axis {k}: need finite lower < upper, got {l}..{u}")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dims: usize) -> Self {
        Self { lower: vec![0.0; dims], upper: vec![1.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dims()).map(|k| self.extent(k)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    fn overlap_volume(&self, other: &AxisBox) -> f64 {
        (0..self.dims())
            .map(|k| {
                let lo = self.lower[k].max(other.lower[k]);
                let hi = self.upper[k].min(other.upper[k]);
                (hi - lo).max(0.0)
            })
            .product()
    }
}

/// Union of pairwise-disjoint boxes in `dims` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    dims: usize,
    boxes: Vec<AxisBox>,
}

impl BoxDomain {
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        let dims = boxes.first().ok_or_else(|| Error::invalid("domain needs at least one box"))?.dims();
        for (i, b) in boxes.iter().enumerate() {
            if b.dims() != dims {
                return Err(Error::invalid(format!("box {i} has {} axes, expected {dims}", b.dims())));
            }
            for (j, c) in boxes.iter().enumerate().skip(i + 1) {
                if b.overlap_volume(c) > 0.0 {
                    return Err(Error::invalid(format!("boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { dims, boxes })
    }

    pub fn single(b: AxisBox) -> Self {
        Self { dims: b.dims(), boxes: vec![b] }
    }

    pub fn unit(dims: usize) -> Self {
        Self::single(AxisBox::unit(dims))
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    /// Index of the first box containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(x))
    }
}

/// Scalar field, piecewise constant on a regular lattice inside each box.
///
/// Cells are stored box by box; within a box the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: BoxDomain,
    resolution: Vec<Vec<usize>>,
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl GridField {
    pub fn new(domain: BoxDomain, resolution: Vec<Vec<usize>>, values: Vec<f64>) -> Result<Self> {
        if resolution.len() != domain.boxes().len() {
            return Err(Error::invalid(format!("{} resolutions for {} boxes", resolution.len(), domain.boxes().len())));
        }
        let mut offsets = Vec::with_capacity(resolution.len() + 1);
        offsets.push(0);
        for (i, res) in resolution.iter().enumerate() {
            if res.len() != domain.dims() || res.iter().any(|&n| n == 0) {
                return Err(Error::invalid(format!("box {i}: resolution needs {} positive counts", domain.dims())));
            }
            let last = *offsets.last().unwrap();
            offsets.push(last + res.iter().product::<usize>());
        }
        let expected = *offsets.last().unwrap();
        if values.len() != expected {
            return Err(Error::invalid(format!("expected {expected} cell values, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell {i} holds {}", values[i])));
        }
        Ok(Self { domain, resolution, values, offsets })
    }

    /// Same resolution on every box.
    pub fn uniform_resolution(domain: BoxDomain, res: &[usize], values: Vec<f64>) -> Result<Self> {
        let resolution = vec![res.to_vec(); domain.boxes().len()];
        Self::new(domain, resolution, values)
    }

    pub fn from_fn(domain: BoxDomain, resolution: Vec<Vec<usize>>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let shell = Self::new(
            domain,
            resolution.clone(),
            vec![0.0; resolution.iter().map(|r| r.iter().product::<usize>()).sum()],
        )?;
        let values = (0..shell.len()).map(|c| f(&shell.cell_center(c))).collect();
        shell.with_values(values)
    }

    pub fn constant(domain: BoxDomain, resolution: Vec<Vec<usize>>, value: f64) -> Result<Self> {
        Self::from_fn(domain, resolution, |_| value)
    }

    /// A field on the same lattice with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.domain.clone(), self.resolution.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn resolution(&self) -> &[Vec<usize>] {
        &self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_lattice(&self, other: &GridField) -> bool {
        self.domain == other.domain && self.resolution == other.resolution
    }

    /// Cell index range occupied by box `b`.
    pub fn box_cells(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn box_of_cell(&self, cell: usize) -> usize {
        self.offsets.partition_point(|&o| o <= cell) - 1
    }

    pub fn cell_spacing(&self, b: usize) -> Vec<f64> {
        let bx = &self.domain.boxes()[b];
        (0..self.domain.dims()).map(|k| bx.extent(k) / self.resolution[b][k] as f64).collect()
    }

    pub fn box_cell_volume(&self, b: usize) -> f64 {
        self.cell_spacing(b).iter().product()
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.box_cell_volume(self.box_of_cell(cell))
    }

    pub fn cell_volumes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in 0..self.resolution.len() {
            let v = self.box_cell_volume(b);
            out.extend(std::iter::repeat_n(v, self.box_cells(b).len()));
        }
        out
    }

    /// Multi-index of a cell inside its box.
    pub fn cell_index(&self, cell: usize) -> (usize, Vec<usize>) {
        let b = self.box_of_cell(cell);
        let mut local = cell - self.offsets[b];
        let res = &self.resolution[b];
        let mut idx = vec![0; res.len()];
        for k in (0..res.len()).rev() {
            idx[k] = local % res[k];
            local /= res[k];
        }
        (b, idx)
    }

    pub fn flat_index(&self, b: usize, idx: &[usize]) -> usize {
        let res = &self.resolution[b];
        let mut flat = 0;
        for k in 0..res.len() {
            flat = flat * res[k] + idx[k];
        }
        self.offsets[b] + flat
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let (b, idx) = self.cell_index(cell);
        let bx = &self.domain.boxes()[b];
        let h = self.cell_spacing(b);
        idx.iter().enumerate().map(|(k, &i)| bx.lower[k] + (i as f64 + 0.5) * h[k]).collect()
    }

    pub fn cell_bounds(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        let (b, idx) = self.cell_index(cell);
        let bx = &self.domain.boxes()[b];
        let h = self.cell_spacing(b);
        let lo: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| bx.lower[k] + i as f64 * h[k]).collect();
        let hi = lo.iter().zip(&h).map(|(l, d)| l + d).collect();
        (lo, hi)
    }

    /// Cell containing `x`, if any. Points on the upper face belong to the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let b = self.domain.locate(x)?;
        let bx = &self.domain.boxes()[b];
        let res = &self.resolution[b];
        let idx: Vec<usize> = (0..res.len())
            .map(|k| {
                let u = (x[k] - bx.lower[k]) / bx.extent(k);
                ((u * res[k] as f64).floor() as usize).min(res[k] - 1)
            })
            .collect();
        Some(self.flat_index(b, &idx))
    }

    /// Value at `x` under the piecewise-constant representation; zero outside the domain.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.locate(x).map_or(0.0, |c| self.values[c])
    }
}

/// Non-negative field integrating to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField(GridField);

const DENSITY_MASS_TOL: f64 = 1e-9;

impl DensityField {
    /// Wraps a field that is already a density.
    pub fn new(field: GridField) -> Result<Self> {
        if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!("density negative at cell {i}")));
        }
        let mass = integrate(&field);
        if (mass - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(Error::invalid(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self(field))
    }

    pub fn field(&self) -> &GridField {
        &self.0
    }

    pub fn into_field(self) -> GridField {
        self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean density `1/|Ω|`, the value every density relaxes to under zero-flux diffusion.
    pub fn mean(&self) -> f64 {
        1.0 / self.0.domain().volume()
    }

    /// Probability mass of each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.0.values().iter().zip(self.0.cell_volumes()).map(|(p, v)| p * v).collect()
    }
}

/// Midpoint-rule integral `Σ value · cellVolume`.
pub fn integrate(field: &GridField) -> f64 {
    let mut total = 0.0;
    for b in 0..field.resolution().len() {
        let vol = field.box_cell_volume(b);
        let s: f64 = field.values()[field.box_cells(b)].iter().sum();
        total += s * vol;
    }
    total
}

pub fn normalize_density(field: &GridField) -> Result<DensityField> {
    if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
        return Err(Error::invalid(format!("negative value at cell {i}")));
    }
    let mass = integrate(field);
    if mass <= 0.0 {
        return Err(Error::Degenerate("density: field integrates to zero".into()));
    }
    let scaled = field.map(|v| v / mass)?;
    // one correction pass brings the rounding error of the division well below the tolerance
    let residual = integrate(&scaled);
    let scaled = scaled.map(|v| v / residual)?;
    DensityField::new(scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_unit_boxes() -> BoxDomain {
        BoxDomain::new(vec![AxisBox::new(vec![0.0], vec![1.0]).unwrap(), AxisBox::new(vec![2.0], vec![3.0]).unwrap()])
            .unwrap()
    }

    #[test]
    fn integrate_constant_one_on_unit_box() {
        for n in [1, 7, 64] {
            let f = GridField::constant(BoxDomain::unit(2), vec![vec![n, n + 1]], 1.0).unwrap();
            assert_abs_diff_eq!(integrate(&f), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_is_additive_over_boxes() {
        let f = GridField::constant(two_unit_boxes(), vec![vec![3], vec![5]], 2.0).unwrap();
        assert_abs_diff_eq!(integrate(&f), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_linear_field() {
        let f = GridField::from_fn(BoxDomain::unit(1), vec![vec![1000]], |x| x[0]).unwrap();
        assert_abs_diff_eq!(integrate(&f), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn normalize_constant_five() {
        let f = GridField::constant(BoxDomain::unit(2), vec![vec![4, 4]], 5.0).unwrap();
        let d = normalize_density(&f).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn normalize_three_unit_cells() {
        let dom = BoxDomain::single(AxisBox::new(vec![0.0], vec![3.0]).unwrap());
        let f = GridField::new(dom, vec![vec![3]], vec![2.0, 0.0, 2.0]).unwrap();
        let d = normalize_density(&f).unwrap();
        assert_abs_diff_eq!(d.values()[0], 0.5, epsilon = 1e-15);
        assert_eq!(d.values()[1], 0.0);
        assert_abs_diff_eq!(d.values()[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn normalize_all_zero_is_degenerate() {
        let f = GridField::constant(BoxDomain::unit(1), vec![vec![4]], 0.0).unwrap();
        let err = normalize_density(&f).unwrap_err();
        assert!(err.to_string().contains("degenerate density"), "{err}");
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let r = BoxDomain::new(vec![
            AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            AxisBox::new(vec![0.5, 0.5], vec![2.0, 2.0]).unwrap(),
        ]);
        assert!(r.is_err());
        // touching faces are fine
        assert!(BoxDomain::new(vec![
            AxisBox::new(vec![0.0], vec![1.0]).unwrap(),
            AxisBox::new(vec![1.0], vec![2.0]).unwrap(),
        ])
        .is_ok());
    }

    #[test]
    fn inverted_bounds_rejected() {
        assert!(AxisBox::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn value_count_must_match_resolution() {
        assert!(GridField::new(BoxDomain::unit(2), vec![vec![2, 3]], vec![0.0; 5]).is_err());
        assert!(GridField::new(BoxDomain::unit(1), vec![vec![2]], vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn cell_indexing_round_trips() {
        let f = GridField::constant(two_unit_boxes(), vec![vec![3], vec![4]], 0.0).unwrap();
        for c in 0..f.len() {
            let (b, idx) = f.cell_index(c);
            assert_eq!(f.flat_index(b, &idx), c);
            assert_eq!(f.locate(&f.cell_center(c)), Some(c));
        }
        assert_eq!(f.locate(&[1.5]), None);
        assert_eq!(f.box_of_cell(3), 1);
    }

    #[test]
    fn row_major_first_axis_slowest() {
        let f = GridField::from_fn(BoxDomain::unit(2), vec![vec![2, 3]], |x| x[0] * 10.0 + x[1]).unwrap();
        assert_eq!(f.cell_index(1), (0, vec![0, 1]));
        assert_eq!(f.cell_index(3), (0, vec![1, 0]));
    }
}
