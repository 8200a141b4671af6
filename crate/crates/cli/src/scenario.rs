//! Scenario execution: Monte Carlo campaigns, estimation traces, exponent
//! reports, per-trial traces, and the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use socialdetect_core::detection::{monte_carlo_errors, McReport, MonteCarloConfig, TestPolicy};
use socialdetect_core::exponents;
use socialdetect_core::graph_markov::{imbalance, DeviationFactor, ImbalanceNorm};
use socialdetect_core::learning::{
    estimation_error_bound, run_estimation, run_trace, GeometricWeights, RuleSpec,
};
use socialdetect_core::seed::{subseed, STREAM_TRIAL};

use crate::config::{resolve, ExperimentConfig, RPolicy, ResolvedExperiment, TestKind,
    ValidationReport,
};
use crate::formats::{hash_file, output_path, ExponentReportDoc, Manifest};

/// Runs one scenario end to end; returns the manifest path.
pub fn run_scenario(config: &ExperimentConfig, base_dir: &Path) -> Result<PathBuf> {
    let resolved = resolve(config, base_dir)?;
    execute(config, &resolved)
}

/// Executes an already validated scenario.
pub fn execute(config: &ExperimentConfig, resolved: &ResolvedExperiment) -> Result<PathBuf> {
    let dir = &config.output_dir;
    let mut written: Vec<PathBuf> = Vec::new();

    // Error curves.
    if let Some(rule) = &resolved.rule {
        let test = match resolved.test {
            TestKind::Np => TestPolicy::Np {
                epsilon: config.epsilon,
                calibration_trials: config.calibration_trials,
            },
            TestKind::Bayes => TestPolicy::Bayes { xi0: config.xi0, xi1: config.xi1 },
        };
        let report = monte_carlo_errors(&MonteCarloConfig {
            model: &resolved.model,
            w: &resolved.w,
            rule: rule.clone(),
            quantizer: resolved.quantizer,
            horizon: config.horizon,
            trials: config.trials,
            master_seed: config.seed,
            test,
            sample_times: config.sample_times.clone(),
            nodes: config.nodes_of_interest.clone(),
        })?;
        let path = output_path(dir, "errors.csv")?;
        write_errors_csv(&path, &config.scenario, &report)?;
        written.push(path);
    }

    // Analytic report under the policy's weights (the combined rule's
    // limiting weights are the oracle ones).
    let r = match (resolved.r_policy, &resolved.rule) {
        (RPolicy::InversePiOracle, _) | (_, Some(RuleSpec::Combined { .. })) => {
            GeometricWeights::inverse_of(&resolved.w.stationary_distribution()?)?
        }
        (RPolicy::Ones, _) => GeometricWeights::ones(resolved.w.n()),
        (RPolicy::InversePiEstimated, _) => {
            let run = run_estimation(&resolved.w, config.t_e, config.seed)?;
            GeometricWeights::inverse_of(&run.pi_hat)?
        }
    };
    let path = output_path(dir, "exponents.json")?;
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&build_report_doc(config, resolved, &r)?)?,
    )?;
    written.push(path);

    // Estimation trace where the stationary distribution is being learned.
    let estimating = matches!(resolved.rule, Some(RuleSpec::Combined { .. }) | None)
        || resolved.r_policy == RPolicy::InversePiEstimated;
    if estimating {
        let rounds = if config.t_e > 0 { config.t_e } else { config.horizon };
        let run = run_estimation(&resolved.w, rounds, config.seed)?;
        let path = output_path(dir, "estimation.csv")?;
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(["t", "l1_error", "bound"])?;
        for (t, err) in run.error_trace.iter().enumerate() {
            let bound =
                estimation_error_bound(&run.pi, &run.init, run.rho, t, DeviationFactor::default());
            writer.write_record(&[t.to_string(), format!("{err:.17e}"), format!("{bound:.17e}")])?;
        }
        writer.flush()?;
        written.push(path);
    }

    // Optional per-trial traces under the alternative hypothesis, using the
    // same per-trial seeds as the evaluation runs.
    if config.trace_trials > 0 {
        let rule = resolved
            .rule
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("estimation-only scenarios have no trial traces"))?;
        let path = output_path(dir, "trace.csv")?;
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(["trial", "t", "node", "ell", "mu", "pi_hat"])?;
        for trial in 0..config.trace_trials {
            let seed = subseed(config.seed, STREAM_TRIAL, trial);
            let trace = run_trace(
                &resolved.model,
                &resolved.w,
                rule,
                1,
                config.horizon,
                seed,
                &resolved.quantizer,
            )?;
            for (t, snapshot) in trace.snapshots.iter().enumerate() {
                for (node, state) in snapshot.iter().enumerate() {
                    writer.write_record(&[
                        trial.to_string(),
                        t.to_string(),
                        node.to_string(),
                        format!("{:.17e}", state.ell),
                        format!("{:.17e}", state.mu),
                        format!("{:.17e}", state.pi_hat),
                    ])?;
                }
            }
        }
        writer.flush()?;
        written.push(path);
    }

    // Manifest last, covering every output.
    let manifest_path = output_path(dir, "manifest.json")?;
    let manifest = Manifest {
        scenario: config.scenario.clone(),
        master_seed: config.seed,
        config: serde_json::to_value(config)?,
        outputs: written
            .iter()
            .map(|p| hash_file(p))
            .collect::<Result<Vec<_>>>()?,
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

fn build_report_doc(
    config: &ExperimentConfig,
    resolved: &ResolvedExperiment,
    r: &GeometricWeights,
) -> Result<ExponentReportDoc> {
    let model = &resolved.model;
    let w = &resolved.w;
    let factor = DeviationFactor::default();
    let profile = w.spectral_profile();
    let optimal = exponents::exponent_optimal(model)?;
    let (bayes, theta_star) = exponents::exponent_bayes(model)?;
    let (general, lambda_star) = if profile.aperiodic {
        let (g, l) = exponents::exponent_general(model, w, r.as_slice())?;
        (Some(g), Some(l))
    } else {
        (None, None)
    };
    let periodic_exponent = match profile.period {
        Some(t) if t > 1 => Some(exponents::periodic_exponent(model, t)?),
        _ => None,
    };
    let per_node = |f: &dyn Fn(usize) -> socialdetect_core::Result<f64>| -> Option<Vec<f64>> {
        (0..w.n()).map(|i| f(i).ok()).collect()
    };
    Ok(ExponentReportDoc {
        scenario: config.scenario.clone(),
        r_policy: resolved.r_policy.name().into(),
        general,
        lambda_star,
        optimal,
        bayes,
        theta_star,
        periodic_exponent,
        period: profile.period,
        rho: profile.rho,
        imbalance_l2: profile.pi.as_deref().map(|pi| imbalance(pi, ImbalanceNorm::L2)),
        imbalance_tv: profile.pi.as_deref().map(|pi| imbalance(pi, ImbalanceNorm::Tv)),
        cnp: per_node(&|i| exponents::cnp_constant(model, w, i, factor)),
        cb: per_node(&|i| exponents::cb_constant(model, w, i, factor)),
        delay: per_node(&|i| exponents::delay(model, w, i, factor)),
        gaussian_bound: per_node(&|i| exponents::gaussian_bound_constant(model, w, i, factor)),
    })
}

fn write_errors_csv(path: &Path, scenario: &str, report: &McReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "scenario",
        "node",
        "t",
        "alpha",
        "beta",
        "bayes_risk",
        "stderr_alpha",
        "stderr_beta",
        "trials",
    ])?;
    for (ni, &node) in report.nodes.iter().enumerate() {
        for (ti, &t) in report.times.iter().enumerate() {
            let cell = &report.cells[ni][ti];
            writer.write_record(&[
                scenario.to_string(),
                node.to_string(),
                t.to_string(),
                format!("{:.17e}", cell.alpha),
                format!("{:.17e}", cell.beta),
                format!("{:.17e}", cell.bayes_risk),
                format!("{:.17e}", cell.stderr_alpha),
                format!("{:.17e}", cell.stderr_beta),
                cell.trials.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// One run per axis value; every leg shares the base master seed (common
/// random numbers) except when the axis is the seed itself.
pub fn sweep(
    base: &ExperimentConfig,
    base_dir: &Path,
    axis: &str,
    values: &[String],
) -> Result<PathBuf> {
    if values.is_empty() {
        bail!(ValidationReport(vec!["sweep needs at least one value".into()]));
    }
    let mut runs = Vec::new();
    for value in values {
        let mut config = base.clone();
        apply_axis(&mut config, axis, value)?;
        config.scenario = format!("{}/{axis}={value}", base.scenario);
        config.output_dir = base.output_dir.join(format!("{axis}={value}"));
        let manifest = run_scenario(&config, base_dir)
            .with_context(|| format!("sweep leg {axis}={value}"))?;
        runs.push(serde_json::json!({
            "value": value,
            "dir": config.output_dir,
            "manifest": manifest,
        }));
    }
    let index_path = output_path(&base.output_dir, "index.json")?;
    std::fs::write(
        &index_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "scenario": base.scenario,
            "axis": axis,
            "values": values,
            "runs": runs,
        }))?,
    )?;
    Ok(index_path)
}

fn apply_axis(config: &mut ExperimentConfig, axis: &str, value: &str) -> Result<()> {
    let invalid = |msg: String| anyhow::Error::from(ValidationReport(vec![msg]));
    let parse_err =
        |axis: &str, value: &str| invalid(format!("cannot parse '{value}' for axis {axis}"));
    match axis {
        "quantizer_b" | "b" => {
            config.quantizer_b = if value == "none" {
                None
            } else {
                Some(value.parse().map_err(|_| parse_err(axis, value))?)
            };
        }
        "t_e" => {
            // "oracle" plays the role of infinitely many estimation rounds.
            if value == "oracle" {
                config.r_policy = "inverse-pi-oracle".into();
                config.t_e = 0;
            } else {
                config.t_e = value.parse().map_err(|_| parse_err(axis, value))?;
            }
        }
        "seed" => config.seed = value.parse().map_err(|_| parse_err(axis, value))?,
        "trials" => config.trials = value.parse().map_err(|_| parse_err(axis, value))?,
        "horizon" => config.horizon = value.parse().map_err(|_| parse_err(axis, value))?,
        "nodes" => config.nodes = value.parse().map_err(|_| parse_err(axis, value))?,
        "attach" => config.attach = value.parse().map_err(|_| parse_err(axis, value))?,
        "epsilon" => config.epsilon = value.parse().map_err(|_| parse_err(axis, value))?,
        "p0" => config.p0 = value.parse().map_err(|_| parse_err(axis, value))?,
        "p1" => config.p1 = value.parse().map_err(|_| parse_err(axis, value))?,
        "mu" => config.mu = value.parse().map_err(|_| parse_err(axis, value))?,
        "sigma2" => config.sigma2 = value.parse().map_err(|_| parse_err(axis, value))?,
        "rule" => config.rule = value.into(),
        "r_policy" => config.r_policy = value.into(),
        other => {
            return Err(invalid(format!("unknown sweep axis '{other}'")));
        }
    }
    Ok(())
}
