//! On-disk formats: graph and model JSON documents, the exponent report,
//! CSV emitters, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use socialdetect_core::hypothesis_model::{NetworkModel, NodeDistribution};
use socialdetect_core::{DirectedGraph, WeightMatrix};

/// Graph document: `{"n": .., "edges": [[i,j],..], "weights": [[row],..]?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
}

impl GraphDoc {
    pub fn from_graph(g: &DirectedGraph) -> Self {
        Self { n: g.node_count(), edges: g.edges().collect(), weights: None }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading graph file {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn graph(&self) -> Result<DirectedGraph> {
        Ok(DirectedGraph::new(self.n, self.edges.iter().copied())?)
    }

    /// The weight matrix: explicit rows when present, uniform confidence
    /// over the listed edges otherwise.
    pub fn weight_matrix(&self) -> Result<WeightMatrix> {
        match &self.weights {
            Some(rows) => {
                let w = WeightMatrix::from_rows(rows)?;
                let g = self.graph()?;
                for (i, j) in w.support().edges() {
                    if !g.has_edge(i, j) {
                        bail!("weight ({i},{j}) is positive but the edge list omits it");
                    }
                }
                Ok(w)
            }
            None => Ok(WeightMatrix::uniform(&self.graph()?)?),
        }
    }
}

/// Model document: `{"n": .., "M": .., "nodes": [{"kind": .., "params": ..}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum NodeDoc {
    /// Binary Bernoulli pair.
    Bernoulli { p0: f64, p1: f64 },
    /// Binary Gaussian pair with a common variance.
    Gaussian { mean0: f64, mean1: f64, variance: f64 },
    /// One probability row per hypothesis.
    Categorical { probs: Vec<Vec<f64>> },
}

impl ModelDoc {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model file {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn model(&self) -> Result<NetworkModel> {
        if self.nodes.len() != self.n {
            bail!("model file lists {} nodes but declares n={}", self.nodes.len(), self.n);
        }
        let mut dist = Vec::with_capacity(self.n);
        for node in &self.nodes {
            let row = match node {
                NodeDoc::Bernoulli { p0, p1 } => {
                    if self.m != 2 {
                        bail!("bernoulli nodes describe exactly two hypotheses, M={}", self.m);
                    }
                    vec![NodeDistribution::bernoulli(*p0)?, NodeDistribution::bernoulli(*p1)?]
                }
                NodeDoc::Gaussian { mean0, mean1, variance } => {
                    if self.m != 2 {
                        bail!("gaussian nodes describe exactly two hypotheses, M={}", self.m);
                    }
                    vec![
                        NodeDistribution::gaussian(*mean0, *variance)?,
                        NodeDistribution::gaussian(*mean1, *variance)?,
                    ]
                }
                NodeDoc::Categorical { probs } => {
                    if probs.len() != self.m {
                        bail!(
                            "categorical node lists {} hypotheses, expected M={}",
                            probs.len(),
                            self.m
                        );
                    }
                    probs
                        .iter()
                        .map(|p| Ok(NodeDistribution::categorical(p.clone())?))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            dist.push(row);
        }
        Ok(NetworkModel::new(dist)?)
    }
}

/// JSON mirror of the analytic layer, annotated with the run identity and
/// the network's chain profile so every output directory is
/// self-describing.
///
/// `general`/`lambda_star` are absent on periodic chains (the variational
/// exponent assumes aperiodicity); `periodic_exponent` is present instead
/// when the period exceeds one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentReportDoc {
    pub scenario: String,
    pub r_policy: String,
    pub general: Option<f64>,
    pub lambda_star: Option<f64>,
    pub optimal: f64,
    pub bayes: f64,
    pub theta_star: f64,
    pub periodic_exponent: Option<f64>,
    pub period: Option<usize>,
    pub rho: Option<f64>,
    pub imbalance_l2: Option<f64>,
    pub imbalance_tv: Option<f64>,
    pub cnp: Option<Vec<f64>>,
    pub cb: Option<Vec<f64>>,
    pub delay: Option<Vec<f64>>,
    pub gaussian_bound: Option<Vec<f64>>,
}

/// Manifest tying a run's outputs to its configuration and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Content hash of a written file, recorded in the manifest.
pub fn hash_file(path: &Path) -> Result<OutputRecord> {
    let data = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&data);
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(OutputRecord {
        file: path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex,
        bytes: data.len() as u64,
    })
}

/// Creates the output directory, returning the joined path of one file.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.join(name))
}
