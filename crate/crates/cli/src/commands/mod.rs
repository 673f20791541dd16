pub mod anneal;
pub mod diffuse;
pub mod dynamics;
pub mod hot_lattice;
pub mod infer;
pub mod invert;
pub mod kmedians;
pub mod misspec;
pub mod network;
pub mod static_opt;

use std::path::Path;

use equipart_core::domain::{normalize_density, parse_grid_field, DensityField, GridField, LossFamily};

use crate::error::{invalid, CliResult};
use crate::output::Run;

pub fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| invalid(format!("missing required option --{flag}")))
}

/// `powerlaw:<gamma>`, `median:<N>` or `mean:<N>`.
pub fn parse_loss(spec: &str) -> CliResult<LossFamily> {
    let bad = || invalid(format!("loss `{spec}`: expected powerlaw:<gamma>, median:<N> or mean:<N>"));
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "powerlaw" => Ok(LossFamily::PowerLaw { gamma: arg.parse().map_err(|_| bad())? }),
        "median" => Ok(LossFamily::VolumeMedian { dims: arg.parse().map_err(|_| bad())? }),
        "mean" => Ok(LossFamily::VolumeMean { dims: arg.parse().map_err(|_| bad())? }),
        _ => Err(bad()),
    }
}

pub fn load_field(run: &mut Run, path: &Path) -> CliResult<GridField> {
    let text = run.input(path)?;
    parse_grid_field(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Grid field normalized to unit mass on load.
pub fn load_density(run: &mut Run, path: &Path) -> CliResult<DensityField> {
    let field = load_field(run, path)?;
    normalize_density(&field).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Numeric rows of a comma- or whitespace-separated file. Blank lines and
/// lines starting with `#` are skipped, as is a first line that does not parse.
pub fn parse_rows(text: &str, origin: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(str::parse).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => return Err(invalid(format!("{}:{}: expected numbers, got `{line}`", origin.display(), i + 1))),
        }
    }
    Ok(rows)
}

/// Column headers `prefix1, prefix2, …`.
pub fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
