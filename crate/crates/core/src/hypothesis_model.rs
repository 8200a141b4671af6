//! Per-node observation models under each hypothesis.
//!
//! A [`NetworkModel`] assigns every node `i` one distribution per hypothesis
//! `theta`, all of the same kind at a given node so that supports coincide
//! and log-likelihood ratios are well defined. Discrete kinds keep all
//! probabilities strictly interior, which bounds the log-likelihood ratio;
//! Gaussian nodes have unbounded ratios and are flagged as such by
//! [`NetworkModel::llr_bounds`].
//!
//! All logarithms are natural; divergences and exponents are in nats.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::{substream_rng, STREAM_OBS};
use crate::stats::{log_sum_exp, maximize_concave};

/// Observation model of one node under one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeDistribution {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, variance: f64 },
    Categorical { probs: Vec<f64> },
}

impl NodeDistribution {
    /// Bernoulli success probability, rejected at the boundary so the
    /// log-likelihood ratio stays finite.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "bernoulli parameter must lie strictly inside (0,1), got {p}"
            )));
        }
        Ok(NodeDistribution::Bernoulli { p })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !mean.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "gaussian requires finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(NodeDistribution::Gaussian { mean, variance })
    }

    /// Categorical over a finite alphabet; probabilities must be strictly
    /// positive and sum to one.
    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter("categorical needs an alphabet of size >= 2".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidParameter(
                "categorical probabilities must be strictly positive".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-12 {
            return Err(Error::InvalidParameter(alloc::format!(
                "categorical probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(NodeDistribution::Categorical { probs })
    }

    fn kind_matches(&self, other: &Self) -> bool {
        match (self, other) {
            (NodeDistribution::Bernoulli { .. }, NodeDistribution::Bernoulli { .. }) => true,
            (NodeDistribution::Gaussian { .. }, NodeDistribution::Gaussian { .. }) => true,
            (NodeDistribution::Categorical { probs: a }, NodeDistribution::Categorical { probs: b }) => {
                a.len() == b.len()
            }
            _ => false,
        }
    }

    /// Probability mass on a symbol; `None` for continuous kinds.
    fn mass(&self, symbol: usize) -> Option<f64> {
        match self {
            NodeDistribution::Bernoulli { p } => match symbol {
                0 => Some(1.0 - p),
                1 => Some(*p),
                _ => None,
            },
            NodeDistribution::Categorical { probs } => probs.get(symbol).copied(),
            NodeDistribution::Gaussian { .. } => None,
        }
    }

    fn alphabet_len(&self) -> Option<usize> {
        match self {
            NodeDistribution::Bernoulli { .. } => Some(2),
            NodeDistribution::Categorical { probs } => Some(probs.len()),
            NodeDistribution::Gaussian { .. } => None,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Observation {
        match self {
            NodeDistribution::Bernoulli { p } => {
                Observation::Symbol(usize::from(rng.gen::<f64>() < *p))
            }
            NodeDistribution::Categorical { probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Observation::Symbol(k);
                    }
                }
                Observation::Symbol(probs.len() - 1)
            }
            NodeDistribution::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                Observation::Real(mean + libm::sqrt(*variance) * z)
            }
        }
    }

    /// Natural log of the density / mass at an observation.
    pub(crate) fn log_density(&self, x: &Observation) -> Option<f64> {
        match (self, x) {
            (NodeDistribution::Gaussian { mean, variance }, Observation::Real(v)) => {
                if !v.is_finite() {
                    return None;
                }
                let d = v - mean;
                Some(-0.5 * libm::log(2.0 * core::f64::consts::PI * variance)
                    - d * d / (2.0 * variance))
            }
            (_, Observation::Symbol(k)) => self.mass(*k).map(libm::log),
            _ => None,
        }
    }
}

/// One observation: an alphabet index for discrete kinds, a real for
/// Gaussian kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Symbol(usize),
    Real(f64),
}

/// Per-node bound on the absolute log-likelihood ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrBounds {
    /// `l[i] = sup_x |log(P_{i,1}(x) / P_{i,0}(x))|` (infinite for Gaussian).
    pub l: Vec<f64>,
    /// Whether the bound is finite at each node.
    pub finite: Vec<bool>,
}

impl LlrBounds {
    pub fn all_finite(&self) -> bool {
        self.finite.iter().all(|&f| f)
    }
}

/// Observation distributions for every `(node, hypothesis)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    // dist[node][theta]
    dist: Vec<Vec<NodeDistribution>>,
    hypotheses: usize,
}

impl NetworkModel {
    /// Builds a model from the `n x M` distribution table, enforcing a
    /// common hypothesis count and a single kind per node.
    pub fn new(dist: Vec<Vec<NodeDistribution>>) -> Result<Self> {
        if dist.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one node".into()));
        }
        let hypotheses = dist[0].len();
        if hypotheses < 2 {
            return Err(Error::InvalidParameter("model needs at least two hypotheses".into()));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != hypotheses {
                return Err(Error::DimensionMismatch { expected: hypotheses, got: row.len() });
            }
            for d in &row[1..] {
                if !row[0].kind_matches(d) {
                    return Err(Error::KindMismatch { node: i });
                }
            }
        }
        Ok(Self { dist, hypotheses })
    }

    /// Binary model with the same Bernoulli pair at every node.
    pub fn bernoulli_network(n: usize, p0: f64, p1: f64) -> Result<Self> {
        let row = vec![NodeDistribution::bernoulli(p0)?, NodeDistribution::bernoulli(p1)?];
        Self::new(vec![row; n])
    }

    /// Binary model with `N(-mu, sigma2)` vs `N(+mu, sigma2)` at every node.
    pub fn symmetric_gaussian_network(n: usize, mu: f64, sigma2: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter("symmetric gaussian needs mu > 0".into()));
        }
        let row = vec![
            NodeDistribution::gaussian(-mu, sigma2)?,
            NodeDistribution::gaussian(mu, sigma2)?,
        ];
        Self::new(vec![row; n])
    }

    pub fn node_count(&self) -> usize {
        self.dist.len()
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn distribution(&self, node: usize, theta: usize) -> &NodeDistribution {
        &self.dist[node][theta]
    }

    pub fn is_binary(&self) -> bool {
        self.hypotheses == 2
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::NotBinary { hypotheses: self.hypotheses })
        }
    }

    /// Draws the `n x t` observation table under hypothesis `theta`,
    /// i.i.d. over rounds and independent across nodes; deterministic per
    /// seed.
    pub fn sample(&self, theta: usize, rounds: usize, seed: u64) -> Result<Vec<Vec<Observation>>> {
        if theta >= self.hypotheses {
            return Err(Error::InvalidParameter(alloc::format!(
                "hypothesis index {theta} out of range"
            )));
        }
        let mut rng = substream_rng(seed, STREAM_OBS, theta as u64);
        Ok(self
            .dist
            .iter()
            .map(|row| (0..rounds).map(|_| row[theta].sample(&mut rng)).collect())
            .collect())
    }

    /// Draws one round of observations (one per node) from a caller-owned
    /// generator; this is the per-trial hot path.
    pub fn sample_round(&self, theta: usize, rng: &mut ChaCha8Rng) -> Vec<Observation> {
        self.dist.iter().map(|row| row[theta].sample(rng)).collect()
    }

    /// Log-likelihood ratio `log(P_{i,1}(x) / P_{i,0}(x))` for binary
    /// models.
    pub fn llr(&self, node: usize, x: &Observation) -> Result<f64> {
        self.require_binary()?;
        let d0 = &self.dist[node][0];
        let d1 = &self.dist[node][1];
        match (d1.log_density(x), d0.log_density(x)) {
            (Some(a), Some(b)) => Ok(a - b),
            _ => Err(Error::OutsideSupport { node }),
        }
    }

    /// `D_KL(P_{node,from} || P_{node,to})` in closed form.
    pub fn kl(&self, node: usize, from: usize, to: usize) -> f64 {
        match (&self.dist[node][from], &self.dist[node][to]) {
            (NodeDistribution::Bernoulli { p }, NodeDistribution::Bernoulli { p: q }) => {
                p * libm::log(p / q) + (1.0 - p) * libm::log((1.0 - p) / (1.0 - q))
            }
            (
                NodeDistribution::Categorical { probs: p },
                NodeDistribution::Categorical { probs: q },
            ) => p
                .iter()
                .zip(q)
                .map(|(&a, &b)| a * libm::log(a / b))
                .sum(),
            (
                NodeDistribution::Gaussian { mean: mf, variance: vf },
                NodeDistribution::Gaussian { mean: mt, variance: vt },
            ) => {
                let dm = mf - mt;
                0.5 * (vf / vt + dm * dm / vt - 1.0 + libm::log(vt / vf))
            }
            _ => unreachable!("kinds are uniform per node by construction"),
        }
    }

    /// Sum over nodes of `D_KL(P_{j,0} || P_{j,1})`, the centralized
    /// Neyman-Pearson rate.
    pub fn total_kl(&self) -> f64 {
        (0..self.node_count()).map(|j| self.kl(j, 0, 1)).sum()
    }

    /// Per-node term `-log E_{P_0}[ (P_1/P_0)^lambda ]` of the Chernoff
    /// objective, in closed form.
    pub(crate) fn chernoff_term(&self, node: usize, lambda: f64) -> f64 {
        match (&self.dist[node][0], &self.dist[node][1]) {
            (NodeDistribution::Bernoulli { p: p0 }, NodeDistribution::Bernoulli { p: p1 }) => {
                let terms = [
                    (1.0 - lambda) * libm::log(1.0 - p0) + lambda * libm::log(1.0 - p1),
                    (1.0 - lambda) * libm::log(*p0) + lambda * libm::log(*p1),
                ];
                -log_sum_exp(&terms)
            }
            (
                NodeDistribution::Categorical { probs: p0 },
                NodeDistribution::Categorical { probs: p1 },
            ) => {
                let terms: Vec<f64> = p0
                    .iter()
                    .zip(p1)
                    .map(|(&a, &b)| (1.0 - lambda) * libm::log(a) + lambda * libm::log(b))
                    .collect();
                -log_sum_exp(&terms)
            }
            (
                NodeDistribution::Gaussian { mean: m0, variance: v0 },
                NodeDistribution::Gaussian { mean: m1, variance: v1 },
            ) => {
                let v_bar = (1.0 - lambda) * v0 + lambda * v1;
                if v_bar <= 0.0 {
                    return f64::INFINITY;
                }
                let dm = m1 - m0;
                lambda * (1.0 - lambda) * dm * dm / (2.0 * v_bar)
                    + 0.5 * libm::log(v_bar / (libm::pow(*v0, 1.0 - lambda) * libm::pow(*v1, lambda)))
            }
            _ => unreachable!("kinds are uniform per node by construction"),
        }
    }

    /// Chernoff information of the product distribution,
    /// `max_{lambda in [0,1]} -log E_{P_0}[(P_1/P_0)^lambda]`, with the
    /// maximizing `lambda`.
    ///
    /// The objective vanishes at both endpoints and is concave, so a
    /// derivative-free concave search suffices.
    pub fn chernoff_information(&self) -> Result<(f64, f64)> {
        self.require_binary()?;
        let objective = |lambda: f64| -> f64 {
            (0..self.node_count()).map(|j| self.chernoff_term(j, lambda)).sum()
        };
        let (theta_star, value) = maximize_concave(&objective, 0.0, 1.0, 1e-10);
        Ok((value.max(0.0), theta_star))
    }

    /// `log E_{P_1}[ (P_{j,0}/P_{j,1})^s ]` for `s >= 0`, the moment term in
    /// the variational exponent; `+inf` where the moment diverges.
    pub(crate) fn tilt_log_moment(&self, node: usize, s: f64) -> f64 {
        match (&self.dist[node][0], &self.dist[node][1]) {
            (NodeDistribution::Bernoulli { p: p0 }, NodeDistribution::Bernoulli { p: p1 }) => {
                let terms = [
                    s * libm::log(1.0 - p0) + (1.0 - s) * libm::log(1.0 - p1),
                    s * libm::log(*p0) + (1.0 - s) * libm::log(*p1),
                ];
                log_sum_exp(&terms)
            }
            (
                NodeDistribution::Categorical { probs: p0 },
                NodeDistribution::Categorical { probs: p1 },
            ) => {
                let terms: Vec<f64> = p0
                    .iter()
                    .zip(p1)
                    .map(|(&a, &b)| s * libm::log(a) + (1.0 - s) * libm::log(b))
                    .collect();
                log_sum_exp(&terms)
            }
            (
                NodeDistribution::Gaussian { mean: m0, variance: v0 },
                NodeDistribution::Gaussian { mean: m1, variance: v1 },
            ) => {
                let v_bar = (1.0 - s) * v1 + s * v0;
                if v_bar <= 0.0 {
                    return f64::INFINITY;
                }
                let dm = m0 - m1;
                -(s * (1.0 - s) * dm * dm / (2.0 * v_bar)
                    + 0.5 * libm::log(v_bar / (libm::pow(*v1, 1.0 - s) * libm::pow(*v0, s))))
            }
            _ => unreachable!("kinds are uniform per node by construction"),
        }
    }

    /// Normalized geometric mixture `P_theta ∝ P_0^{1-theta} P_1^{theta}`
    /// at one node.
    pub fn tilted_node(&self, node: usize, theta: f64) -> Result<NodeDistribution> {
        self.require_binary()?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(alloc::format!(
                "tilt parameter must lie in [0,1], got {theta}"
            )));
        }
        match (&self.dist[node][0], &self.dist[node][1]) {
            (NodeDistribution::Bernoulli { p: p0 }, NodeDistribution::Bernoulli { p: p1 }) => {
                let one = libm::pow(*p0, 1.0 - theta) * libm::pow(*p1, theta);
                let zero = libm::pow(1.0 - p0, 1.0 - theta) * libm::pow(1.0 - p1, theta);
                NodeDistribution::bernoulli(one / (one + zero))
            }
            (
                NodeDistribution::Categorical { probs: p0 },
                NodeDistribution::Categorical { probs: p1 },
            ) => {
                let raw: Vec<f64> = p0
                    .iter()
                    .zip(p1)
                    .map(|(&a, &b)| libm::pow(a, 1.0 - theta) * libm::pow(b, theta))
                    .collect();
                let z: f64 = raw.iter().sum();
                NodeDistribution::categorical(raw.into_iter().map(|x| x / z).collect())
            }
            (
                NodeDistribution::Gaussian { mean: m0, variance: v0 },
                NodeDistribution::Gaussian { mean: m1, variance: v1 },
            ) => {
                // Geometric mixtures of Gaussians are Gaussian with
                // precision-weighted parameters.
                let precision = (1.0 - theta) / v0 + theta / v1;
                let mean = ((1.0 - theta) * m0 / v0 + theta * m1 / v1) / precision;
                NodeDistribution::gaussian(mean, 1.0 / precision)
            }
            _ => unreachable!("kinds are uniform per node by construction"),
        }
    }

    /// Per-node bounds on the absolute log-likelihood ratio; Gaussian nodes
    /// are flagged infinite.
    pub fn llr_bounds(&self) -> Result<LlrBounds> {
        self.require_binary()?;
        let mut l = Vec::with_capacity(self.node_count());
        let mut finite = Vec::with_capacity(self.node_count());
        for i in 0..self.node_count() {
            match self.dist[i][0].alphabet_len() {
                Some(len) => {
                    let mut max = 0.0f64;
                    for k in 0..len {
                        let ratio = libm::fabs(
                            libm::log(self.dist[i][1].mass(k).expect("alphabet sizes match"))
                                - libm::log(self.dist[i][0].mass(k).expect("alphabet sizes match")),
                        );
                        max = max.max(ratio);
                    }
                    l.push(max);
                    finite.push(true);
                }
                None => {
                    l.push(f64::INFINITY);
                    finite.push(false);
                }
            }
        }
        Ok(LlrBounds { l, finite })
    }

    /// Mean, variance, and third central moment of the node's
    /// log-likelihood ratio under hypothesis `theta`, in closed form.
    pub(crate) fn llr_moments(&self, node: usize, theta: usize) -> (f64, f64, f64) {
        match (&self.dist[node][0], &self.dist[node][1]) {
            (NodeDistribution::Gaussian { .. }, NodeDistribution::Gaussian { .. }) => {
                // llr(x) = a x^2 + b x + c; moments of a Gaussian quadratic.
                let (a, b, c) = gaussian_llr_coeffs(&self.dist[node][0], &self.dist[node][1]);
                let (m, v) = match &self.dist[node][theta] {
                    NodeDistribution::Gaussian { mean, variance } => (*mean, *variance),
                    _ => unreachable!(),
                };
                let mean = a * (v + m * m) + b * m + c;
                let w = 2.0 * a * m + b;
                let var = 2.0 * a * a * v * v + w * w * v;
                let third = 8.0 * a * a * a * v * v * v + 6.0 * a * w * w * v * v;
                (mean, var, third)
            }
            _ => {
                let len = self.dist[node][0].alphabet_len().expect("discrete kind");
                let p = &self.dist[node][theta];
                let mut mean = 0.0;
                let mut llrs = Vec::with_capacity(len);
                for k in 0..len {
                    let llr = libm::log(self.dist[node][1].mass(k).expect("in alphabet"))
                        - libm::log(self.dist[node][0].mass(k).expect("in alphabet"));
                    let w = p.mass(k).expect("in alphabet");
                    mean += w * llr;
                    llrs.push((w, llr));
                }
                let mut var = 0.0;
                let mut third = 0.0;
                for (w, llr) in llrs {
                    let d = llr - mean;
                    var += w * d * d;
                    third += w * d * d * d;
                }
                (mean, var, third)
            }
        }
    }

    /// Precomputed per-node log-likelihood ratio evaluator for simulation
    /// hot paths; agrees with [`NetworkModel::llr`] on the support.
    pub(crate) fn llr_evaluator(&self) -> Result<LlrEvaluator> {
        self.require_binary()?;
        let nodes = (0..self.node_count())
            .map(|i| match self.dist[i][0].alphabet_len() {
                Some(len) => {
                    let table = (0..len)
                        .map(|k| self.llr(i, &Observation::Symbol(k)).expect("in alphabet"))
                        .collect();
                    Ok(NodeLlr::Table(table))
                }
                None => {
                    let (a, b, c) = gaussian_llr_coeffs(&self.dist[i][0], &self.dist[i][1]);
                    Ok(NodeLlr::Quadratic { a, b, c })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LlrEvaluator { nodes })
    }

    /// Requires every node to be the same `N(-mu, sigma^2)` vs
    /// `N(+mu, sigma^2)` pair; returns `(mu, sigma^2)`.
    pub fn symmetric_gaussian_params(&self) -> Result<(f64, f64)> {
        self.require_binary()?;
        let mut params = None;
        for i in 0..self.node_count() {
            match (&self.dist[i][0], &self.dist[i][1]) {
                (
                    NodeDistribution::Gaussian { mean: m0, variance: v0 },
                    NodeDistribution::Gaussian { mean: m1, variance: v1 },
                ) if (m0 + m1).abs() < 1e-12 && (v0 - v1).abs() < 1e-12 && *m1 > 0.0 => {
                    let p = (*m1, *v1);
                    match params {
                        None => params = Some(p),
                        Some(prev) if (prev.0 - p.0).abs() < 1e-12 && (prev.1 - p.1).abs() < 1e-12 => {}
                        _ => return Err(Error::NotGaussian { node: i }),
                    }
                }
                _ => return Err(Error::NotGaussian { node: i }),
            }
        }
        Ok(params.expect("model has at least one node"))
    }
}

/// Coefficients of the Gaussian log-likelihood ratio `a x^2 + b x + c`.
fn gaussian_llr_coeffs(d0: &NodeDistribution, d1: &NodeDistribution) -> (f64, f64, f64) {
    match (d0, d1) {
        (
            NodeDistribution::Gaussian { mean: m0, variance: v0 },
            NodeDistribution::Gaussian { mean: m1, variance: v1 },
        ) => {
            let a = 0.5 / v0 - 0.5 / v1;
            let b = m1 / v1 - m0 / v0;
            let c = m0 * m0 / (2.0 * v0) - m1 * m1 / (2.0 * v1) - 0.5 * libm::log(v1 / v0);
            (a, b, c)
        }
        _ => unreachable!("caller checked the kinds"),
    }
}

pub(crate) enum NodeLlr {
    Table(Vec<f64>),
    Quadratic { a: f64, b: f64, c: f64 },
}

pub(crate) struct LlrEvaluator {
    nodes: Vec<NodeLlr>,
}

impl LlrEvaluator {
    #[inline]
    pub(crate) fn eval(&self, node: usize, x: &Observation) -> f64 {
        match (&self.nodes[node], x) {
            (NodeLlr::Table(t), Observation::Symbol(k)) => t[*k],
            (NodeLlr::Quadratic { a, b, c }, Observation::Real(v)) => (a * v + b) * v + c,
            _ => f64::NAN,
        }
    }
}
