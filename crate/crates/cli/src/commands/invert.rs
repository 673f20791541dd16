use std::path::PathBuf;

use clap::Args;
use equipart_core::diffusion::{inverse_select, PowerModel};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_density, load_field, required};
use crate::error::{invalid, CliResult};
use crate::output::{real_json, Run};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InvertArgs {
    /// Observed response field Y
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Candidate densities, comma separated
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<PathBuf>>,
    /// Candidate model exponents e in Y = c·p^e, comma separated [default: 0.5]
    #[arg(long, value_delimiter = ',')]
    pub exponents: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InvertConfig {
    pub response: PathBuf,
    pub candidates: Vec<PathBuf>,
    pub exponents: Vec<f64>,
}

impl InvertArgs {
    pub fn resolve(self) -> CliResult<InvertConfig> {
        let cfg = InvertConfig {
            response: required(self.response, "response")?,
            candidates: required(self.candidates, "candidates")?,
            exponents: self.exponents.unwrap_or_else(|| vec![0.5]),
        };
        if cfg.candidates.is_empty() || cfg.exponents.is_empty() {
            return Err(invalid("need at least one candidate and one exponent"));
        }
        Ok(cfg)
    }
}

pub fn run(cfg: &InvertConfig, run: &mut Run) -> CliResult<()> {
    let y = load_field(run, &cfg.response)?;
    let candidates = cfg.candidates.iter().map(|p| load_density(run, p)).collect::<CliResult<Vec<_>>>()?;
    let models: Vec<PowerModel> = cfg.exponents.iter().map(|&exponent| PowerModel { exponent }).collect();
    let sel = inverse_select(&y, &candidates, &models)?;
    let mut ranking = Vec::new();
    for (i, path) in cfg.candidates.iter().enumerate() {
        for (j, m) in models.iter().enumerate() {
            ranking.push((sel.norms[i][j], i, j, path, m.exponent, sel.scales[i][j]));
        }
    }
    ranking.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let ranked: Vec<serde_json::Value> = ranking
        .iter()
        .map(|(norm, i, j, path, e, c)| {
            json!({
                "candidate": i,
                "file": path.display().to_string(),
                "model": j,
                "exponent": real_json(*e),
                "scale": real_json(*c),
                "norm": real_json(*norm),
            })
        })
        .collect();
    run.write_json(
        "ranking.json",
        &json!({
            "selected": { "candidate": sel.density, "model": sel.model, "exponent": real_json(models[sel.model].exponent) },
            "ranking": ranked,
        }),
    )
}
