//! GridField text format.
//!
//! Each box starts with a header line
//! `# box=<index> res=<n1,...,nN> bounds=<l1:u1,...,lN:uN>`
//! followed by one value per line in row-major cell order.

use std::fmt::Write as _;
use std::path::Path;

use super::grid::{AxisBox, BoxDomain, GridField};
use crate::error::{Error, Result};

/// Round-trip decimal formatting with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn grid_field_to_string(field: &GridField) -> String {
    let mut out = String::new();
    for (b, bx) in field.domain().boxes().iter().enumerate() {
        let res: Vec<String> = field.resolution()[b].iter().map(|n| n.to_string()).collect();
        let bounds: Vec<String> =
            bx.lower.iter().zip(&bx.upper).map(|(l, u)| format!("{}:{}", format_real(*l), format_real(*u))).collect();
        let _ = writeln!(out, "# box={b} res={} bounds={}", res.join(","), bounds.join(","));
        for v in &field.values()[field.box_cells(b)] {
            let _ = writeln!(out, "{}", format_real(*v));
        }
    }
    out
}

pub fn write_grid_field(path: impl AsRef<Path>, field: &GridField) -> Result<()> {
    std::fs::write(path, grid_field_to_string(field))?;
    Ok(())
}

pub fn read_grid_field(path: impl AsRef<Path>) -> Result<GridField> {
    parse_grid_field(&std::fs::read_to_string(path)?)
}

struct Header {
    line: usize,
    res: Vec<usize>,
    bounds: AxisBox,
}

fn parse_header(line_no: usize, text: &str, expected_box: usize) -> Result<Header> {
    let perr = |message: String| Error::Parse { line: line_no, message };
    let mut index = None;
    let mut res = None;
    let mut bounds = None;
    for token in text.trim_start_matches('#').split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| perr(format!("expected key=value, got `{token}`")))?;
        match key {
            "box" => index = Some(value.parse::<usize>().map_err(|e| perr(format!("box index: {e}")))?),
            "res" => {
                let counts = value
                    .split(',')
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| perr(format!("resolution: {e}")))?;
                res = Some(counts);
            }
            "bounds" => {
                let mut lower = Vec::new();
                let mut upper = Vec::new();
                for pair in value.split(',') {
                    let (l, u) =
                        pair.split_once(':').ok_or_else(|| perr(format!("bounds entry `{pair}` is not l:u")))?;
                    lower.push(l.parse::<f64>().map_err(|e| perr(format!("bound: {e}")))?);
                    upper.push(u.parse::<f64>().map_err(|e| perr(format!("bound: {e}")))?);
                }
                bounds = Some(AxisBox::new(lower, upper).map_err(|e| perr(e.to_string()))?);
            }
            other => return Err(perr(format!("unknown header key `{other}`"))),
        }
    }
    let index = index.ok_or_else(|| perr("header missing box=".into()))?;
    if index != expected_box {
        return Err(perr(format!("expected box={expected_box}, found box={index}")));
    }
    let res = res.ok_or_else(|| perr("header missing res=".into()))?;
    let bounds = bounds.ok_or_else(|| perr("header missing bounds=".into()))?;
    if res.len() != bounds.dims() {
        return Err(perr("res and bounds disagree on dimension".into()));
    }
    Ok(Header { line: line_no, res, bounds })
}

pub fn parse_grid_field(text: &str) -> Result<GridField> {
    let mut headers: Vec<Header> = Vec::new();
    let mut per_box: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            headers.push(parse_header(line_no, line, headers.len())?);
            per_box.push(Vec::new());
            continue;
        }
        let values = per_box
            .last_mut()
            .ok_or_else(|| Error::Parse { line: line_no, message: "value before the first box header".into() })?;
        let v: f64 =
            line.parse().map_err(|e| Error::Parse { line: line_no, message: format!("bad value `{line}`: {e}") })?;
        values.push(v);
    }
    if headers.is_empty() {
        return Err(Error::Parse { line: 1, message: "no box header found".into() });
    }
    for (h, vals) in headers.iter().zip(&per_box) {
        let expected: usize = h.res.iter().product();
        if vals.len() != expected {
            return Err(Error::Parse {
                line: h.line,
                message: format!("box declares {expected} cells but has {} values", vals.len()),
            });
        }
    }
    let resolution = headers.iter().map(|h| h.res.clone()).collect();
    let domain = BoxDomain::new(headers.into_iter().map(|h| h.bounds).collect())?;
    GridField::new(domain, resolution, per_box.concat())
}
