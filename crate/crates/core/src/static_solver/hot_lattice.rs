use rayon::prelude::*;

use crate::domain::DensityField;
use crate::error::{Error, Result};

/// A 2-D lattice with fire breaks placed greedily.
#[derive(Debug, Clone, PartialEq)]
pub struct HotLattice {
    pub rows: usize,
    pub cols: usize,
    /// Row-major mask, `true` marks a break cell.
    pub breaks: Vec<bool>,
    pub density: DensityField,
    pub budget: usize,
    /// Expected cost after 0, 1, ..., `budget` breaks.
    pub cost_trace: Vec<f64>,
}

impl HotLattice {
    pub fn expected_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace holds the empty lattice")
    }
}

fn lattice_shape(density: &DensityField) -> Result<(usize, usize)> {
    let field = density.field();
    match field.resolution() {
        [res] if res.len() == 2 => Ok((res[0], res[1])),
        _ => Err(Error::invalid("a HOT lattice needs a density on a single 2-D box")),
    }
}

fn neighbours(cell: usize, rows: usize, cols: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (cell / cols, cell % cols);
    [
        (r > 0).then(|| cell - cols),
        (r + 1 < rows).then(|| cell + cols),
        (c > 0).then(|| cell - 1),
        (c + 1 < cols).then(|| cell + 1),
    ]
    .into_iter()
    .flatten()
}

struct Components {
    label: Vec<usize>,
    mass: Vec<f64>,
    size: Vec<usize>,
}

const BREAK: usize = usize::MAX;

fn components(breaks: &[bool], masses: &[f64], rows: usize, cols: usize) -> Components {
    let mut label = vec![BREAK; breaks.len()];
    let (mut mass, mut size) = (Vec::new(), Vec::new());
    let mut stack = Vec::new();
    for start in 0..breaks.len() {
        if breaks[start] || label[start] != BREAK {
            continue;
        }
        let id = mass.len();
        let (mut m, mut n) = (0.0, 0);
        label[start] = id;
        stack.push(start);
        while let Some(c) = stack.pop() {
            m += masses[c];
            n += 1;
            for nb in neighbours(c, rows, cols) {
                if !breaks[nb] && label[nb] == BREAK {
                    label[nb] = id;
                    stack.push(nb);
                }
            }
        }
        mass.push(m);
        size.push(n);
    }
    Components { label, mass, size }
}

/// `Σ_C P(C)·Area(C)` over 4-connected non-break components.
pub fn lattice_expected_cost(density: &DensityField, breaks: &[bool]) -> Result<f64> {
    let (rows, cols) = lattice_shape(density)?;
    if breaks.len() != rows * cols {
        return Err(Error::invalid("break mask does not match the lattice"));
    }
    let comps = components(breaks, &density.cell_masses(), rows, cols);
    let area = density.field().cell_volume(0);
    Ok(comps.mass.iter().zip(&comps.size).map(|(m, &n)| m * n as f64 * area).sum())
}

/// Cost change from turning `cell` into a break: only its own component splits.
fn split_delta(cell: usize, comps: &Components, masses: &[f64], rows: usize, cols: usize, area: f64) -> f64 {
    let id = comps.label[cell];
    let mut seen = vec![false; masses.len()];
    seen[cell] = true;
    let mut after = 0.0;
    let mut stack = Vec::new();
    for start in neighbours(cell, rows, cols) {
        if comps.label[start] != id || seen[start] {
            continue;
        }
        let (mut m, mut n) = (0.0, 0usize);
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            m += masses[c];
            n += 1;
            for nb in neighbours(c, rows, cols) {
                if comps.label[nb] == id && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        after += m * n as f64 * area;
    }
    after - comps.mass[id] * comps.size[id] as f64 * area
}

/// Adds `budget` break cells one at a time, each the cell whose removal most
/// lowers the expected burned area. Ties go to the lowest row-major index.
pub fn hot_lattice_evolve(density: &DensityField, budget: usize) -> Result<HotLattice> {
    let (rows, cols) = lattice_shape(density)?;
    if budget >= rows * cols {
        return Err(Error::invalid(format!("budget {budget} must be below the {} cells", rows * cols)));
    }
    let masses = density.cell_masses();
    let area = density.field().cell_volume(0);
    let mut breaks = vec![false; rows * cols];
    let mut cost_trace = vec![lattice_expected_cost(density, &breaks)?];
    for _ in 0..budget {
        let comps = components(&breaks, &masses, rows, cols);
        let best = (0..breaks.len())
            .into_par_iter()
            .filter(|&c| !breaks[c])
            .map(|c| (split_delta(c, &comps, &masses, rows, cols, area), c))
            .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
            .expect("budget leaves at least one open cell");
        breaks[best.1] = true;
        cost_trace.push(lattice_expected_cost(density, &breaks)?);
    }
    Ok(HotLattice { rows, cols, breaks, density: density.clone(), budget, cost_trace })
}
