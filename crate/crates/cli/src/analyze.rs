//! Slope extraction from previously written error curves.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use socialdetect_core::exponents::empirical_exponent;

#[derive(Debug, Deserialize)]
struct ErrorRow {
    #[allow(dead_code)]
    scenario: String,
    node: usize,
    t: usize,
    alpha: f64,
    beta: f64,
    bayes_risk: f64,
    #[allow(dead_code)]
    stderr_alpha: f64,
    #[allow(dead_code)]
    stderr_beta: f64,
    trials: u64,
}

/// Fits the empirical exponent of one column of an `errors.csv`, per node,
/// over the trailing `window` of cells carrying at least `min_count`
/// observed events. Returns a JSON report.
pub fn analyze(csv_path: &Path, window: usize, column: &str, min_count: f64) -> Result<String> {
    let mut reader = csv::Reader::from_path(csv_path)
        .with_context(|| format!("reading {}", csv_path.display()))?;
    let mut by_node: BTreeMap<usize, Vec<(usize, f64, u64)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: ErrorRow = row?;
        let value = match column {
            "alpha" => row.alpha,
            "beta" => row.beta,
            "bayes_risk" => row.bayes_risk,
            other => bail!("unknown column '{other}' (expected alpha, beta, or bayes_risk)"),
        };
        by_node.entry(row.node).or_default().push((row.t, value, row.trials));
    }
    if by_node.is_empty() {
        bail!("{} contains no rows", csv_path.display());
    }

    let mut out = Vec::new();
    for (node, mut rows) in by_node {
        rows.sort_by_key(|&(t, _, _)| t);
        let series: Vec<(usize, f64)> = rows
            .iter()
            .filter(|&&(_, p, trials)| p * trials as f64 >= min_count)
            .map(|&(t, p, _)| (t, p))
            .collect();
        match empirical_exponent(&series, window) {
            Ok(fit) => out.push(serde_json::json!({
                "node": node,
                "column": column,
                "slope": fit.slope,
                "stderr": fit.stderr,
                "r_squared": fit.r_squared,
                "points": series.len().min(window.max(3)),
            })),
            Err(e) => out.push(serde_json::json!({
                "node": node,
                "column": column,
                "error": e.to_string(),
            })),
        }
    }
    Ok(serde_json::to_string_pretty(&out)?)
}
