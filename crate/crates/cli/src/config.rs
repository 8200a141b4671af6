//! Declarative scenario configuration: one flat TOML document per run.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use socialdetect_core::graph_markov::generate_scale_free;
use socialdetect_core::hypothesis_model::NetworkModel;
use socialdetect_core::learning::{GeometricWeights, QuantizerConfig, RuleSpec};
use socialdetect_core::WeightMatrix;

use crate::formats::{GraphDoc, ModelDoc};

/// All validation problems found in one configuration, reported together.
#[derive(Debug)]
pub struct ValidationReport(pub Vec<String>);

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problems):", self.0.len())?;
        for p in &self.0 {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

fn default_rule() -> String {
    "modified".into()
}
fn default_r_policy() -> String {
    "ones".into()
}
fn default_test() -> String {
    "np".into()
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_prior() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_network() -> String {
    "scale-free".into()
}
fn default_model() -> String {
    "bernoulli".into()
}
fn default_p0() -> f64 {
    0.5
}
fn default_p1() -> f64 {
    0.6
}
fn default_mu() -> f64 {
    1.0
}
fn default_sigma2() -> f64 {
    1.0
}

/// One scenario, as written in a TOML recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Master seed; every random quantity in the run derives from it.
    pub seed: u64,
    pub trials: u64,
    pub horizon: usize,

    /// `original`, `modified`, `combined`, or `estimation-only`.
    #[serde(default = "default_rule")]
    pub rule: String,
    /// `ones`, `inverse-pi-oracle`, or `inverse-pi-estimated`.
    #[serde(default = "default_r_policy")]
    pub r_policy: String,
    /// Estimation rounds before learning (combined rule or estimated
    /// weights).
    #[serde(default)]
    pub t_e: usize,

    /// Significand bits of transported messages; omit for exact messaging.
    #[serde(default)]
    pub quantizer_b: Option<u32>,
    /// Whether stationary-estimate messages are quantized too.
    #[serde(default = "default_true")]
    pub quantize_pi_messages: bool,

    /// `np` or `bayes`.
    #[serde(default = "default_test")]
    pub test: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_prior")]
    pub xi0: f64,
    #[serde(default = "default_prior")]
    pub xi1: f64,
    /// Null-calibration sample size for the NP test; 0 means `trials`.
    #[serde(default)]
    pub calibration_trials: u64,

    /// Nodes whose error curves are recorded; empty means all.
    #[serde(default)]
    pub nodes_of_interest: Vec<usize>,
    /// Explicit reporting rounds; empty means every round up to 200 and
    /// every 5th beyond.
    #[serde(default)]
    pub sample_times: Vec<usize>,

    /// `scale-free` or `file`.
    #[serde(default = "default_network")]
    pub network: String,
    #[serde(default)]
    pub nodes: usize,
    #[serde(default)]
    pub attach: usize,
    /// Seed for the network generator; 0 means reuse `seed`.
    #[serde(default)]
    pub network_seed: u64,
    #[serde(default)]
    pub network_file: Option<PathBuf>,

    /// `bernoulli`, `gaussian`, or `file`.
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default = "default_p1")]
    pub p1: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub model_file: Option<PathBuf>,

    pub output_dir: PathBuf,
    /// Number of per-trial traces exported to CSV.
    #[serde(default)]
    pub trace_trials: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }
}

/// Which test the campaign runs.
#[derive(Debug, Clone, Copy)]
pub enum TestKind {
    Np,
    Bayes,
}

/// A validated, fully materialized scenario.
pub struct ResolvedExperiment {
    pub w: WeightMatrix,
    pub model: NetworkModel,
    /// `None` for estimation-only scenarios.
    pub rule: Option<RuleSpec>,
    pub r_policy: RPolicy,
    pub quantizer: QuantizerConfig,
    pub test: TestKind,
}

/// How geometric weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RPolicy {
    Ones,
    InversePiOracle,
    InversePiEstimated,
}

impl RPolicy {
    pub fn name(self) -> &'static str {
        match self {
            RPolicy::Ones => "ones",
            RPolicy::InversePiOracle => "inverse-pi-oracle",
            RPolicy::InversePiEstimated => "inverse-pi-estimated",
        }
    }
}

/// Validates the whole configuration, reporting every problem at once,
/// and materializes the network, model, and rule.
pub fn resolve(config: &ExperimentConfig, base_dir: &Path) -> Result<ResolvedExperiment> {
    let mut problems = Vec::new();

    if config.trials == 0 {
        problems.push("trials must be at least 1".into());
    }
    if config.horizon == 0 {
        problems.push("horizon must be at least 1".into());
    }
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        problems.push(format!("epsilon {} must lie in (0,1)", config.epsilon));
    }
    if config.test == "bayes" && !(config.xi0 > 0.0 && config.xi1 > 0.0) {
        problems.push("bayes prior must be strictly positive".into());
    }
    if config.test == "bayes" && (config.xi0 + config.xi1 - 1.0).abs() > 1e-12 {
        problems.push(format!("prior ({}, {}) must sum to 1", config.xi0, config.xi1));
    }
    if let Some(0) = config.quantizer_b {
        problems.push("quantizer_b must be at least 1".into());
    }
    if config.rule == "estimation-only" && config.trace_trials > 0 {
        problems.push("estimation-only scenarios have no trial traces".into());
    }

    let test = match config.test.as_str() {
        "np" => TestKind::Np,
        "bayes" => TestKind::Bayes,
        other => {
            problems.push(format!("unknown test '{other}' (expected np or bayes)"));
            TestKind::Np
        }
    };

    let r_policy = match config.r_policy.as_str() {
        "ones" => RPolicy::Ones,
        "inverse-pi-oracle" => RPolicy::InversePiOracle,
        "inverse-pi-estimated" => RPolicy::InversePiEstimated,
        other => {
            problems.push(format!(
                "unknown r_policy '{other}' (expected ones, inverse-pi-oracle, or inverse-pi-estimated)"
            ));
            RPolicy::Ones
        }
    };

    let w = match config.network.as_str() {
        "scale-free" => {
            let seed = if config.network_seed == 0 { config.seed } else { config.network_seed };
            if config.nodes < 2 || config.attach == 0 || config.attach >= config.nodes.max(1) {
                problems.push(format!(
                    "scale-free generator needs 1 <= attach < nodes, got attach={} nodes={}",
                    config.attach, config.nodes
                ));
                None
            } else {
                match generate_scale_free(config.nodes, config.attach, seed)
                    .map_err(anyhow::Error::from)
                    .and_then(|g| Ok(WeightMatrix::uniform(&g)?))
                {
                    Ok(w) => Some(w),
                    Err(e) => {
                        problems.push(format!("network generation failed: {e}"));
                        None
                    }
                }
            }
        }
        "file" => match &config.network_file {
            Some(path) => {
                let path = base_dir.join(path);
                match GraphDoc::load(&path).and_then(|doc| doc.weight_matrix()) {
                    Ok(w) => Some(w),
                    Err(e) => {
                        problems.push(format!("network file {}: {e}", path.display()));
                        None
                    }
                }
            }
            None => {
                problems.push("network = \"file\" needs network_file".into());
                None
            }
        },
        other => {
            problems.push(format!("unknown network '{other}' (expected scale-free or file)"));
            None
        }
    };

    let model = match config.model.as_str() {
        "bernoulli" => {
            let n = w.as_ref().map(|w| w.n()).unwrap_or(config.nodes.max(1));
            match NetworkModel::bernoulli_network(n, config.p0, config.p1) {
                Ok(m) => Some(m),
                Err(e) => {
                    problems.push(format!("bernoulli model: {e}"));
                    None
                }
            }
        }
        "gaussian" => {
            let n = w.as_ref().map(|w| w.n()).unwrap_or(config.nodes.max(1));
            match NetworkModel::symmetric_gaussian_network(n, config.mu, config.sigma2) {
                Ok(m) => Some(m),
                Err(e) => {
                    problems.push(format!("gaussian model: {e}"));
                    None
                }
            }
        }
        "file" => match &config.model_file {
            Some(path) => {
                let path = base_dir.join(path);
                match ModelDoc::load(&path).and_then(|doc| doc.model()) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        problems.push(format!("model file {}: {e}", path.display()));
                        None
                    }
                }
            }
            None => {
                problems.push("model = \"file\" needs model_file".into());
                None
            }
        },
        other => {
            problems.push(format!(
                "unknown model '{other}' (expected bernoulli, gaussian, or file)"
            ));
            None
        }
    };

    if let (Some(w), Some(model)) = (&w, &model) {
        if w.n() != model.node_count() {
            problems.push(format!(
                "network has {} nodes but the model has {}",
                w.n(),
                model.node_count()
            ));
        }
        if let Some(&bad) = config.nodes_of_interest.iter().find(|&&i| i >= w.n()) {
            problems.push(format!("nodes_of_interest contains {bad}, network has {} nodes", w.n()));
        }
        if config.rule != "estimation-only" && !model.is_binary() {
            problems.push("error-curve scenarios need a binary model".into());
        }
        if !w.support().is_strongly_connected() {
            problems.push(
                "the consensus chain is reducible; learning rules reject such networks".into(),
            );
        }
    }

    let quantizer = match config.quantizer_b {
        Some(b) if b >= 1 => {
            let mut q = QuantizerConfig::with_bits(b).expect("b >= 1");
            q.pi_messages = config.quantize_pi_messages;
            q
        }
        _ => QuantizerConfig::exact(),
    };

    // Geometric weights per policy; the stationary distribution only
    // matters once the network resolved.
    let rule = match (config.rule.as_str(), &w) {
        ("estimation-only", _) => None,
        (_, None) => None,
        ("original", _) => Some(RuleSpec::Original),
        ("combined", _) => Some(RuleSpec::Combined { t_e: config.t_e }),
        ("modified", Some(w)) => {
            let r = match r_policy {
                RPolicy::Ones => Ok(GeometricWeights::ones(w.n())),
                RPolicy::InversePiOracle => w
                    .stationary_distribution()
                    .and_then(|pi| GeometricWeights::inverse_of(&pi)),
                RPolicy::InversePiEstimated => {
                    socialdetect_core::learning::run_estimation(w, config.t_e, config.seed)
                        .and_then(|run| GeometricWeights::inverse_of(&run.pi_hat))
                }
            };
            match r {
                Ok(r) => Some(RuleSpec::Modified { r }),
                Err(e) => {
                    problems.push(format!("geometric weights: {e}"));
                    None
                }
            }
        }
        (other, _) => {
            problems.push(format!(
                "unknown rule '{other}' (expected original, modified, combined, or estimation-only)"
            ));
            None
        }
    };

    if !problems.is_empty() {
        return Err(ValidationReport(problems).into());
    }
    Ok(ResolvedExperiment {
        w: w.expect("validated"),
        model: model.expect("validated"),
        rule,
        r_policy,
        quantizer,
        test,
    })
}
