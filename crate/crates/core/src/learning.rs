//! The iterative protocols: belief-consensus learning rules, the
//! decentralized stationary-distribution estimator, and the message
//! quantizer.
//!
//! Every node `i` keeps a private log-belief ratio `ell_i` and a public one
//! `mu_i`. One round of the geometric-weighted rule is
//!
//! ```text
//! mu_i  = ell_i + r_i * log( P_{i,1}(x_i) / P_{i,0}(x_i) )
//! ell_i = w[i][i] * mu_i + sum_{j != i} w[i][j] * Q_b(mu_j)
//! ```
//!
//! where `Q_b` truncates transported messages to `b` significand bits (a
//! node's own message is never quantized). With `r = 1` the rule is the
//! log-belief-ratio view of the original belief-consensus update, and the
//! two trajectories coincide for binary models.
//!
//! The stationary estimator forwards `w[i][j] * pi_hat_i` along each edge;
//! the total mass `s = sum_i pi_hat_i` is conserved and `pi_hat -> s * pi`
//! geometrically. The combined rule interleaves that estimator with the
//! learning rule, weighting each fresh log-likelihood ratio by the current
//! `1 / pi_hat_i`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph_markov::{DeviationFactor, WeightMatrix};
use crate::hypothesis_model::{NetworkModel, Observation};
use crate::seed::{substream_rng, STREAM_INIT, STREAM_OBS};
use crate::stats::log_sum_exp;

// ---------------------------------------------------------------------------
// Quantizer
// ---------------------------------------------------------------------------

/// Truncates the magnitude of `x` to `bits` significand bits (the leading
/// 1-bit counts as the first), preserving sign. `quantize(0, b) = 0` and the
/// map is idempotent.
pub fn quantize(x: f64, bits: u32) -> f64 {
    assert!(bits >= 1, "quantizer needs at least one significand bit");
    if x == 0.0 || !x.is_finite() || bits > 52 {
        return x;
    }
    let raw = x.to_bits();
    let exponent = (raw >> 52) & 0x7ff;
    if exponent != 0 {
        // Normal: implicit leading bit, keep bits-1 stored mantissa bits.
        let drop = 52 - (bits as u64 - 1);
        return f64::from_bits(raw & !((1u64 << drop) - 1));
    }
    // Subnormal: locate the explicit leading bit first.
    let mantissa = raw & ((1u64 << 52) - 1);
    let top = 63 - mantissa.leading_zeros() as u64;
    if top + 1 <= bits as u64 {
        return x;
    }
    let drop = top + 1 - bits as u64;
    f64::from_bits((raw & !((1u64 << drop) - 1)) | (raw & (1u64 << 63)))
}

/// Message quantization settings for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizerConfig {
    bits: Option<u32>,
    /// Whether stationary-estimate messages in the combined rule are
    /// quantized too; transported log-belief messages always are. Both
    /// behaviors are supported.
    pub pi_messages: bool,
}

impl QuantizerConfig {
    /// Exact messaging.
    pub fn exact() -> Self {
        Self { bits: None, pi_messages: true }
    }

    pub fn with_bits(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::InvalidParameter("quantizer needs bits >= 1".into()));
        }
        Ok(Self { bits: Some(bits), pi_messages: true })
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self::exact()
    }
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// Geometric weights `r_i > 0` applied to each node's fresh log-likelihood
/// ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricWeights(Vec<f64>);

impl GeometricWeights {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = r.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "geometric weights must be strictly positive, got {bad}"
            )));
        }
        Ok(Self(r))
    }

    /// The unweighted rule, `r = 1`.
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// The influence-equalizing choice `r_i = 1 / pi_i`.
    pub fn inverse_of(pi: &[f64]) -> Result<Self> {
        Self::new(pi.iter().map(|&p| 1.0 / p).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Working state of one network during a run (structure-of-arrays).
///
/// `log_beliefs` is present only for the belief-vector rule; each node's row
/// is kept normalized in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningState {
    pub ell: Vec<f64>,
    pub mu: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub log_beliefs: Option<Vec<f64>>,
    hypotheses: usize,
}

/// Snapshot of one node for traces.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub ell: f64,
    pub mu: f64,
    pub pi_hat: f64,
    pub beliefs: Option<Vec<f64>>,
}

impl LearningState {
    /// Scalar log-belief state, `ell = mu = 0`, unit stationary estimates.
    pub fn new_binary(n: usize) -> Self {
        Self {
            ell: vec![0.0; n],
            mu: vec![0.0; n],
            pi_hat: vec![1.0; n],
            log_beliefs: None,
            hypotheses: 2,
        }
    }

    /// Belief-vector state with uniform priors over `m` hypotheses.
    pub fn new_with_beliefs(n: usize, m: usize) -> Self {
        let uniform = -libm::log(m as f64);
        Self {
            ell: vec![0.0; n],
            mu: vec![0.0; n],
            pi_hat: vec![1.0; n],
            log_beliefs: Some(vec![uniform; n * m]),
            hypotheses: m,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ell.len()
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    /// Log-belief row of one node.
    pub fn log_beliefs_of(&self, i: usize) -> Option<&[f64]> {
        let m = self.hypotheses;
        self.log_beliefs.as_ref().map(|b| &b[i * m..(i + 1) * m])
    }

    pub fn node(&self, i: usize) -> NodeState {
        NodeState {
            ell: self.ell[i],
            mu: self.mu[i],
            pi_hat: self.pi_hat[i],
            beliefs: self
                .log_beliefs_of(i)
                .map(|row| row.iter().map(|&x| libm::exp(x)).collect()),
        }
    }
}

// ---------------------------------------------------------------------------
// Rule steps
// ---------------------------------------------------------------------------

fn check_dims(state: &LearningState, w: &WeightMatrix, obs: &[Observation]) -> Result<()> {
    if state.node_count() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: state.node_count() });
    }
    if obs.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: obs.len() });
    }
    Ok(())
}

/// Consensus averaging of public messages with transported-message
/// quantization; a node's own message enters unquantized.
fn consensus(w: &WeightMatrix, mu: &[f64], q: &QuantizerConfig) -> Vec<f64> {
    match q.bits() {
        None => w.mul_vec(mu),
        Some(b) => {
            let quantized: Vec<f64> = mu.iter().map(|&x| quantize(x, b)).collect();
            let mut out = w.mul_vec(&quantized);
            for i in 0..w.n() {
                out[i] += w.get(i, i) * (mu[i] - quantized[i]);
            }
            out
        }
    }
}

/// One round of the geometric-weighted log-belief rule.
pub fn step_modified(
    state: &mut LearningState,
    w: &WeightMatrix,
    r: &GeometricWeights,
    obs: &[Observation],
    model: &NetworkModel,
    q: &QuantizerConfig,
) -> Result<()> {
    check_dims(state, w, obs)?;
    if r.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: r.len() });
    }
    for i in 0..w.n() {
        state.mu[i] = state.ell[i] + r.as_slice()[i] * model.llr(i, &obs[i])?;
    }
    state.ell = consensus(w, &state.mu, q);
    Ok(())
}

/// One round of the original belief-vector rule (Bayes update on the public
/// beliefs, weighted geometric averaging on the private ones), in log space
/// so beliefs never underflow.
///
/// For binary models the induced log-belief ratios coincide with
/// [`step_modified`] at `r = 1`; `ell`/`mu` always mirror the first two
/// hypotheses' ratio.
pub fn step_original(
    state: &mut LearningState,
    w: &WeightMatrix,
    obs: &[Observation],
    model: &NetworkModel,
) -> Result<()> {
    check_dims(state, w, obs)?;
    let n = w.n();
    let m = state.hypotheses;
    if m != model.hypotheses() {
        return Err(Error::DimensionMismatch { expected: model.hypotheses(), got: m });
    }
    let beliefs = state
        .log_beliefs
        .as_mut()
        .ok_or_else(|| Error::InvalidParameter(String::from(
            "belief-vector rule needs a state built with new_with_beliefs",
        )))?;

    // Public update: log b_i(k) = log q_i(k) + log P_{i,k}(x_i), normalized.
    let mut public = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut public[i * m..(i + 1) * m];
        for (k, slot) in row.iter_mut().enumerate() {
            let log_like = model
                .distribution(i, k)
                .log_density(&obs[i])
                .ok_or(Error::OutsideSupport { node: i })?;
            *slot = beliefs[i * m + k] + log_like;
        }
        let z = log_sum_exp(row);
        for slot in row.iter_mut() {
            *slot -= z;
        }
    }

    // Private update: log q_i(k) = sum_j w[i][j] log b_j(k), normalized.
    for i in 0..n {
        let row = &mut beliefs[i * m..(i + 1) * m];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = (0..n).map(|j| w.get(i, j) * public[j * m + k]).sum();
        }
        let z = log_sum_exp(row);
        for slot in row.iter_mut() {
            *slot -= z;
        }
    }

    for i in 0..n {
        state.mu[i] = public[i * m + 1] - public[i * m];
        state.ell[i] = beliefs[i * m + 1] - beliefs[i * m];
    }
    Ok(())
}

/// One round of the stationary-estimate forwarding protocol,
/// `pi_hat <- pi_hat W`; total mass is conserved because `W` is row
/// stochastic.
pub fn estimate_pi_step(state: &mut LearningState, w: &WeightMatrix) {
    state.pi_hat = w.left_mul(&state.pi_hat);
}

fn estimate_pi_quantized(w: &WeightMatrix, pi_hat: &[f64], q: &QuantizerConfig) -> Vec<f64> {
    match q.bits() {
        Some(b) if q.pi_messages => {
            let n = w.n();
            let mut out = vec![0.0; n];
            for i in 0..n {
                for (j, out_j) in out.iter_mut().enumerate() {
                    let weight = w.get(i, j);
                    if weight == 0.0 {
                        continue;
                    }
                    let message = weight * pi_hat[i];
                    *out_j += if i == j { message } else { quantize(message, b) };
                }
            }
            out
        }
        _ => w.left_mul(pi_hat),
    }
}

/// One round of the estimate-while-learning rule: the public update weights
/// the fresh log-likelihood ratio by the current `1 / pi_hat_i`, then the
/// estimate forwarding and the log-belief consensus both fire from the
/// pre-step values.
pub fn step_combined(
    state: &mut LearningState,
    w: &WeightMatrix,
    model: &NetworkModel,
    obs: &[Observation],
    q: &QuantizerConfig,
) -> Result<()> {
    check_dims(state, w, obs)?;
    if let Some(node) = state.pi_hat.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::NonPositivePiHat { node });
    }
    for i in 0..w.n() {
        state.mu[i] = state.ell[i] + model.llr(i, &obs[i])? / state.pi_hat[i];
    }
    state.pi_hat = estimate_pi_quantized(w, &state.pi_hat, q);
    state.ell = consensus(w, &state.mu, q);
    Ok(())
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

/// Which learning rule a run executes.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSpec {
    /// Belief-vector consensus, geometric weights fixed at one.
    Original,
    /// Log-belief rule with explicit geometric weights.
    Modified { r: GeometricWeights },
    /// Estimate the stationary distribution for `t_e` rounds, then keep
    /// estimating while learning with `r_i = 1 / pi_hat_i`.
    Combined { t_e: usize },
}

impl RuleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RuleSpec::Original => "original",
            RuleSpec::Modified { .. } => "modified",
            RuleSpec::Combined { .. } => "combined",
        }
    }
}

/// Runs one seeded trial of a rule for `horizon` rounds, invoking
/// `on_round(t, state)` after initialization (`t = 0`) and after every
/// round.
///
/// Randomness is drawn from substreams of `trial_seed`, so a trial is fully
/// reproducible and independent of scheduling.
pub fn run_rule(
    model: &NetworkModel,
    w: &WeightMatrix,
    rule: &RuleSpec,
    theta_true: usize,
    horizon: usize,
    trial_seed: u64,
    q: &QuantizerConfig,
    mut on_round: impl FnMut(usize, &LearningState),
) -> Result<()> {
    let n = w.n();
    if model.node_count() != n {
        return Err(Error::DimensionMismatch { expected: n, got: model.node_count() });
    }
    if theta_true >= model.hypotheses() {
        return Err(Error::InvalidParameter(alloc::format!(
            "hypothesis index {theta_true} out of range"
        )));
    }

    let evaluator = match rule {
        RuleSpec::Original => None,
        _ => Some(model.llr_evaluator()?),
    };

    let mut state = match rule {
        RuleSpec::Original => LearningState::new_with_beliefs(n, model.hypotheses()),
        RuleSpec::Modified { r } => {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            LearningState::new_binary(n)
        }
        RuleSpec::Combined { t_e } => {
            let mut state = LearningState::new_binary(n);
            let mut init_rng = substream_rng(trial_seed, STREAM_INIT, 0);
            for p in &mut state.pi_hat {
                *p = 0.5 + init_rng.gen::<f64>();
            }
            for _ in 0..*t_e {
                state.pi_hat = estimate_pi_quantized(w, &state.pi_hat, q);
            }
            state
        }
    };

    on_round(0, &state);
    let mut obs_rng = substream_rng(trial_seed, STREAM_OBS, theta_true as u64);
    for t in 1..=horizon {
        let obs = model.sample_round(theta_true, &mut obs_rng);
        match rule {
            RuleSpec::Original => step_original(&mut state, w, &obs, model)?,
            RuleSpec::Modified { r } => {
                let eval = evaluator.as_ref().expect("built above");
                for i in 0..n {
                    state.mu[i] = state.ell[i] + r.as_slice()[i] * eval.eval(i, &obs[i]);
                }
                state.ell = consensus(w, &state.mu, q);
            }
            RuleSpec::Combined { .. } => {
                if let Some(node) = state.pi_hat.iter().position(|&p| !(p > 0.0)) {
                    return Err(Error::NonPositivePiHat { node });
                }
                let eval = evaluator.as_ref().expect("built above");
                for i in 0..n {
                    state.mu[i] = state.ell[i] + eval.eval(i, &obs[i]) / state.pi_hat[i];
                }
                state.pi_hat = estimate_pi_quantized(w, &state.pi_hat, q);
                state.ell = consensus(w, &state.mu, q);
            }
        }
        on_round(t, &state);
    }
    Ok(())
}

/// Full per-round record of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rule: String,
    pub horizon: usize,
    pub seed: u64,
    /// `horizon + 1` snapshots, round 0 included.
    pub snapshots: Vec<Vec<NodeState>>,
}

/// Runs one trial and records every node's state at every round.
pub fn run_trace(
    model: &NetworkModel,
    w: &WeightMatrix,
    rule: &RuleSpec,
    theta_true: usize,
    horizon: usize,
    trial_seed: u64,
    q: &QuantizerConfig,
) -> Result<RunTrace> {
    let mut snapshots = Vec::with_capacity(horizon + 1);
    run_rule(model, w, rule, theta_true, horizon, trial_seed, q, |_, state| {
        snapshots.push((0..state.node_count()).map(|i| state.node(i)).collect());
    })?;
    Ok(RunTrace { rule: rule.name().into(), horizon, seed: trial_seed, snapshots })
}

// ---------------------------------------------------------------------------
// Stationary estimation as a standalone protocol
// ---------------------------------------------------------------------------

/// Outcome of the standalone stationary-estimation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    /// Final estimates `pi_hat^{(T)}`.
    pub pi_hat: Vec<f64>,
    /// The random initial values.
    pub init: Vec<f64>,
    /// Conserved total mass `s = sum_i pi_hat^{(0)}_i`.
    pub s: f64,
    /// True stationary distribution of the chain.
    pub pi: Vec<f64>,
    /// Convergence rate of the chain.
    pub rho: f64,
    /// `sum_i |pi_hat^{(t)}_i - s pi_i|` for `t = 0..=rounds`.
    pub error_trace: Vec<f64>,
}

/// Runs `rounds` rounds of estimate forwarding from the given initial
/// values, recording the l1 distance to `s * pi` each round.
pub fn run_estimation_from(w: &WeightMatrix, init: &[f64], rounds: usize) -> Result<EstimationRun> {
    if init.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: init.len() });
    }
    if let Some(node) = init.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::NonPositivePiHat { node });
    }
    let profile = w.spectral_profile();
    if !profile.irreducible {
        return Err(Error::Reducible { components: w.support().scc_decomposition() });
    }
    if !profile.aperiodic {
        return Err(Error::Periodic { period: profile.period.unwrap_or(0) });
    }
    let pi = profile.pi.expect("irreducible");
    let rho = profile.rho.expect("irreducible");
    let s: f64 = init.iter().sum();

    let l1_err = |v: &[f64]| -> f64 {
        v.iter().zip(&pi).map(|(&x, &p)| libm::fabs(x - s * p)).sum()
    };
    let mut pi_hat = init.to_vec();
    let mut error_trace = Vec::with_capacity(rounds + 1);
    error_trace.push(l1_err(&pi_hat));
    for _ in 0..rounds {
        pi_hat = w.left_mul(&pi_hat);
        error_trace.push(l1_err(&pi_hat));
    }
    Ok(EstimationRun { pi_hat, init: init.to_vec(), s, pi, rho, error_trace })
}

/// Seeded wrapper over [`run_estimation_from`]; initial values are uniform
/// on `(0.5, 1.5)` per node.
pub fn run_estimation(w: &WeightMatrix, rounds: usize, seed: u64) -> Result<EstimationRun> {
    let mut rng = substream_rng(seed, STREAM_INIT, 0);
    let init: Vec<f64> = (0..w.n()).map(|_| 0.5 + rng.gen::<f64>()).collect();
    run_estimation_from(w, &init, rounds)
}

/// The displayed geometric bound on the estimation error,
/// `(sum_i sqrt(factor_i)) * (sum_i pi_i init_i^2) * rho^t`.
pub fn estimation_error_bound(
    pi: &[f64],
    init: &[f64],
    rho: f64,
    t: usize,
    factor: DeviationFactor,
) -> f64 {
    let lead: f64 = pi.iter().map(|&p| libm::sqrt(factor.factor(p))).sum();
    let mass: f64 = pi.iter().zip(init).map(|(&p, &x)| p * x * x).sum();
    lead * mass * libm::pow(rho, t as f64)
}
