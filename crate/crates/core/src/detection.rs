//! Decision layer: randomized log-belief-ratio tests, threshold selection,
//! Bayes and M-ary decisions, and the seeded Monte Carlo error estimator.
//!
//! The basic test at a node compares its private log-belief ratio `ell`
//! against a threshold `gamma`, deciding for the alternative above it,
//! for the null below it, and flipping an `eta`-weighted coin on exact
//! ties. Error rates over a sample are accounted exactly: a tie
//! contributes `eta` to the type-I rate and `1 - eta` to the type-II
//! rate, which is the expectation over the randomization.
//!
//! Thresholds come from three places: an asymptotic analytic form (the
//! law-of-large-numbers threshold used by the exponent theory), empirical
//! quantile calibration on a disjoint sample, and closed-form Gaussian
//! expressions when every node observes a symmetric Gaussian pair.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph_markov::WeightMatrix;
use crate::hypothesis_model::NetworkModel;
use crate::learning::{run_rule, QuantizerConfig, RuleSpec};
use crate::seed::{subseed, STREAM_CAL, STREAM_TRIAL};
use crate::stats::{ln_q, q_inv};

/// A randomized threshold test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSpec {
    pub gamma: f64,
    /// Probability of deciding 1 on an exact tie.
    pub eta: f64,
}

/// Decides 1 if `ell > gamma`, 0 if `ell < gamma`, and Bernoulli(`eta`)
/// via the uniform draw `u` on ties.
pub fn decide(ell: f64, spec: &TestSpec, u: f64) -> u8 {
    if ell > spec.gamma {
        1
    } else if ell < spec.gamma {
        0
    } else {
        u8::from(u < spec.eta)
    }
}

/// Bayes decision with prior `(xi0, xi1)`: decide 1 iff
/// `ell >= log(xi0 / xi1)` (ties to 1).
pub fn bayes_decide(ell: f64, prior: (f64, f64)) -> u8 {
    u8::from(ell >= libm::log(prior.0 / prior.1))
}

/// The asymptotic threshold `t * (sum_j pi_j r_j E_{P0}[llr_j] + delta)`;
/// it pins the type-I error below any fixed level for large `t`, not at
/// finite `t`.
pub fn np_threshold_analytic(
    model: &NetworkModel,
    w: &WeightMatrix,
    r: &[f64],
    t: usize,
    delta: f64,
) -> Result<f64> {
    model.require_binary()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("slack delta must be positive".into()));
    }
    if r.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: r.len() });
    }
    let pi = w.stationary_distribution()?;
    let drift: f64 = (0..w.n())
        .map(|j| -pi[j] * r[j] * model.kl(j, 0, 1))
        .sum();
    Ok(t as f64 * (drift + delta))
}

// ---------------------------------------------------------------------------
// Empirical calibration
// ---------------------------------------------------------------------------

/// A tagged sample of log-belief values; the tag prevents a calibrated test
/// from being scored on its own calibration data.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub set_id: u64,
    pub values: Vec<f64>,
}

/// A test calibrated on a specific sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedTest {
    pub spec: TestSpec,
    calibration_id: u64,
}

/// Minimum calibration sample size for quantile thresholds.
pub const MIN_CALIBRATION_TRIALS: usize = 1000;

/// Calibrates `(gamma, eta)` so the empirical type-I error on the null
/// sample equals `epsilon` exactly: `gamma` is the `ceil(eps N)`-th largest
/// value and `eta` absorbs the remainder on ties.
pub fn np_threshold_empirical(h0: &CalibrationSample, epsilon: f64) -> Result<CalibratedTest> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0,1)".into()));
    }
    let n = h0.values.len();
    if n < MIN_CALIBRATION_TRIALS {
        return Err(Error::TooFewTrials { needed: MIN_CALIBRATION_TRIALS, got: n });
    }
    let mut sorted = h0.values.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite log-beliefs"));
    let target = epsilon * n as f64;
    let k = libm::ceil(target) as usize;
    let k = k.clamp(1, n);
    let gamma = sorted[k - 1];
    let above = sorted.iter().take_while(|&&v| v > gamma).count();
    let ties = sorted[above..].iter().take_while(|&&v| v == gamma).count();
    let eta = ((target - above as f64) / ties as f64).clamp(0.0, 1.0);
    Ok(CalibratedTest { spec: TestSpec { gamma, eta }, calibration_id: h0.set_id })
}

fn guard_reuse(test: &CalibratedTest, sample: &CalibrationSample) -> Result<()> {
    if test.calibration_id == sample.set_id {
        return Err(Error::CalibrationReuse);
    }
    Ok(())
}

/// Expected type-I rate of the test on a fresh null sample.
pub fn empirical_alpha(test: &CalibratedTest, h0: &CalibrationSample) -> Result<f64> {
    guard_reuse(test, h0)?;
    Ok(alpha_weight(&test.spec, &h0.values))
}

/// Expected type-II rate of the test on a fresh alternative sample.
pub fn empirical_beta(test: &CalibratedTest, h1: &CalibrationSample) -> Result<f64> {
    guard_reuse(test, h1)?;
    Ok(beta_weight(&test.spec, &h1.values))
}

fn alpha_weight(spec: &TestSpec, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        if v > spec.gamma {
            acc += 1.0;
        } else if v == spec.gamma {
            acc += spec.eta;
        }
    }
    acc / values.len() as f64
}

fn beta_weight(spec: &TestSpec, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        if v < spec.gamma {
            acc += 1.0;
        } else if v == spec.gamma {
            acc += 1.0 - spec.eta;
        }
    }
    acc / values.len() as f64
}

// ---------------------------------------------------------------------------
// Exact Gaussian Neyman-Pearson quantities
// ---------------------------------------------------------------------------

/// Closed-form threshold and type-II error for symmetric Gaussian
/// observations under the influence-equalized rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNp {
    pub gamma: f64,
    pub beta: f64,
    /// `ln beta`, finite far past floating-point underflow of `beta`.
    pub ln_beta: f64,
    pub mu_tilde: f64,
    pub sigma_tilde: f64,
}

/// With every node observing `N(-mu, s2)` vs `N(mu, s2)` and geometric
/// weights `1/pi`, node `i`'s statistic after `t` rounds is exactly
/// Gaussian: `N(-~mu, ~s^2)` under the null and `N(+~mu, ~s^2)` under the
/// alternative, with
///
/// ```text
/// ~mu  = ( sum_{tau<=t, j} [W^tau]_{ij} / pi_j )   * 2 mu^2 / s2
/// ~s^2 = ( sum_{tau<=t, j} ([W^tau]_{ij} / pi_j)^2 ) * 4 mu^2 / s2
/// ```
///
/// The threshold holding the type-I error at `epsilon` and the induced
/// type-II error follow from the Gaussian tail function.
pub fn gaussian_np_exact(
    model: &NetworkModel,
    w: &WeightMatrix,
    t: usize,
    node: usize,
    epsilon: f64,
) -> Result<GaussianNp> {
    if t == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let (mu, s2) = model.symmetric_gaussian_params()?;
    if model.node_count() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: model.node_count() });
    }
    let pi = w.stationary_distribution()?;
    let mut coeff_sum = 0.0;
    let mut coeff_sq_sum = 0.0;
    let mut row = vec![0.0; w.n()];
    row[node] = 1.0;
    for _ in 1..=t {
        row = w.left_mul(&row);
        for (j, &p) in row.iter().enumerate() {
            let c = p / pi[j];
            coeff_sum += c;
            coeff_sq_sum += c * c;
        }
    }
    Ok(gaussian_np_from_coeffs(mu, s2, coeff_sum, coeff_sq_sum, epsilon))
}

/// The centralized benchmark: a fusion node sees all `n * t` observations
/// with unit coefficients.
pub fn gaussian_np_centralized(model: &NetworkModel, t: usize, epsilon: f64) -> Result<GaussianNp> {
    if t == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let (mu, s2) = model.symmetric_gaussian_params()?;
    let terms = (model.node_count() * t) as f64;
    Ok(gaussian_np_from_coeffs(mu, s2, terms, terms, epsilon))
}

fn gaussian_np_from_coeffs(
    mu: f64,
    s2: f64,
    coeff_sum: f64,
    coeff_sq_sum: f64,
    epsilon: f64,
) -> GaussianNp {
    let d = 2.0 * mu * mu / s2;
    let mu_tilde = coeff_sum * d;
    let sigma_tilde = libm::sqrt(coeff_sq_sum * 2.0 * d);
    let lambda = q_inv(epsilon);
    let gamma = -mu_tilde + sigma_tilde * lambda;
    let ln_beta = ln_q(2.0 * mu_tilde / sigma_tilde - lambda);
    GaussianNp { gamma, beta: libm::exp(ln_beta), ln_beta, mu_tilde, sigma_tilde }
}

// ---------------------------------------------------------------------------
// M-ary decisions with rejection
// ---------------------------------------------------------------------------

/// Outcome of an M-ary test with a rejection option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaryDecision {
    Hypothesis(usize),
    Reject,
}

/// Declares the lowest-index hypothesis `k` whose log-belief beats every
/// rival `l` by at least `thresholds[k][l]`; rejects when none does.
pub fn mary_decide_with_rejection(log_beliefs: &[f64], thresholds: &[Vec<f64>]) -> MaryDecision {
    let m = log_beliefs.len();
    assert!(m >= 2, "need at least two hypotheses");
    assert_eq!(thresholds.len(), m, "threshold matrix must be M x M");
    for (k, &lb_k) in log_beliefs.iter().enumerate() {
        debug_assert_eq!(thresholds[k].len(), m);
        let wins = (0..m)
            .filter(|&l| l != k)
            .all(|l| lb_k - log_beliefs[l] >= thresholds[k][l]);
        if wins {
            return MaryDecision::Hypothesis(k);
        }
    }
    MaryDecision::Reject
}

/// Calibrates the pairwise rejection thresholds: `thresholds[k][l]` is the
/// largest value with `P_k{ log b_k - log b_l < gamma } < epsilon
/// <= P_k{ log b_k - log b_l <= gamma }`, estimated on the given samples
/// (`pairwise[k][l]` holds draws of `log b_k - log b_l` under hypothesis
/// `k`; diagonals are ignored).
pub fn mary_calibrate_thresholds(
    pairwise: &[Vec<Vec<f64>>],
    epsilon: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0,1)".into()));
    }
    let m = pairwise.len();
    let mut thresholds = vec![vec![0.0; m]; m];
    for k in 0..m {
        if pairwise[k].len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: pairwise[k].len() });
        }
        for l in 0..m {
            if l == k {
                continue;
            }
            let mut sorted = pairwise[k][l].clone();
            let n = sorted.len();
            if n == 0 {
                return Err(Error::TooFewTrials { needed: 1, got: 0 });
            }
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite margins"));
            let idx = (libm::ceil(epsilon * n as f64) as usize).clamp(1, n);
            thresholds[k][l] = sorted[idx - 1];
        }
    }
    Ok(thresholds)
}

// ---------------------------------------------------------------------------
// Monte Carlo error estimation
// ---------------------------------------------------------------------------

/// How decisions are made in a Monte Carlo campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestPolicy {
    /// Per-(node, round) thresholds calibrated to hit `epsilon` on a
    /// disjoint null calibration sample of `calibration_trials` runs
    /// (`0` means: as many as the evaluation trials).
    Np { epsilon: f64, calibration_trials: u64 },
    /// Fixed threshold `log(xi0/xi1)`, ties to 1.
    Bayes { xi0: f64, xi1: f64 },
    /// An externally supplied fixed threshold.
    Fixed { gamma: f64, eta: f64 },
}

/// A fully resolved Monte Carlo campaign.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig<'a> {
    pub model: &'a NetworkModel,
    pub w: &'a WeightMatrix,
    pub rule: RuleSpec,
    pub quantizer: QuantizerConfig,
    pub horizon: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub test: TestPolicy,
    /// Rounds at which errors are recorded, ascending; empty means the
    /// default grid (every round up to 200, every 5th beyond).
    pub sample_times: Vec<usize>,
    /// Nodes whose errors are recorded; empty means all nodes.
    pub nodes: Vec<usize>,
}

/// Error estimates for one `(node, round)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub alpha: f64,
    pub beta: f64,
    /// `xi0 * alpha + xi1 * beta` under the policy's prior (uniform for
    /// non-Bayes policies).
    pub bayes_risk: f64,
    pub stderr_alpha: f64,
    pub stderr_beta: f64,
    pub trials: u64,
}

/// Monte Carlo error surface over the sampled `(node, round)` grid.
#[derive(Debug, Clone)]
pub struct McReport {
    pub nodes: Vec<usize>,
    pub times: Vec<usize>,
    /// `cells[node_index][time_index]`.
    pub cells: Vec<Vec<ErrorEstimate>>,
    /// The thresholds actually applied, same indexing as `cells`.
    pub thresholds: Vec<Vec<TestSpec>>,
}

impl McReport {
    pub fn cell(&self, node: usize, t: usize) -> Option<&ErrorEstimate> {
        let ni = self.nodes.iter().position(|&x| x == node)?;
        let ti = self.times.iter().position(|&x| x == t)?;
        Some(&self.cells[ni][ti])
    }

    /// `(t, value)` series of one column for a node, for slope fitting.
    pub fn series(&self, node: usize, column: impl Fn(&ErrorEstimate) -> f64) -> Vec<(usize, f64)> {
        let ni = self.nodes.iter().position(|&x| x == node).expect("node recorded");
        self.times
            .iter()
            .zip(&self.cells[ni])
            .map(|(&t, cell)| (t, column(cell)))
            .collect()
    }
}

/// The default reporting grid: every round up to 200, every 5th beyond.
pub fn default_sample_grid(horizon: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (1..=horizon.min(200)).collect();
    let mut t = 205;
    while t <= horizon {
        grid.push(t);
        t += 5;
    }
    grid
}

/// Runs seeded, reproducible Monte Carlo trials under both hypotheses and
/// reports empirical error rates per sampled `(node, round)` cell.
///
/// Trial `k` under either hypothesis is driven by the substream
/// `(master_seed, trial stream, k)`, so results are independent of
/// scheduling and identical across repeated invocations. Calibration (for
/// the `Np` policy) runs on its own stream, disjoint from evaluation by
/// construction.
pub fn monte_carlo_errors(cfg: &MonteCarloConfig) -> Result<McReport> {
    cfg.model.require_binary()?;
    let n = cfg.w.n();
    if cfg.model.node_count() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cfg.model.node_count() });
    }
    if cfg.trials == 0 {
        return Err(Error::TooFewTrials { needed: 1, got: 0 });
    }
    if cfg.horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let times = if cfg.sample_times.is_empty() {
        default_sample_grid(cfg.horizon)
    } else {
        let mut t = cfg.sample_times.clone();
        t.sort_unstable();
        t.dedup();
        if *t.last().expect("nonempty") > cfg.horizon || t[0] == 0 {
            return Err(Error::InvalidParameter(
                "sample times must lie in 1..=horizon".into(),
            ));
        }
        t
    };
    let nodes: Vec<usize> = if cfg.nodes.is_empty() {
        (0..n).collect()
    } else {
        let mut v = cfg.nodes.clone();
        v.sort_unstable();
        v.dedup();
        if *v.last().expect("nonempty") >= n {
            return Err(Error::InvalidParameter("node index out of range".into()));
        }
        v
    };

    let thresholds = resolve_thresholds(cfg, &nodes, &times)?;
    let prior = match cfg.test {
        TestPolicy::Bayes { xi0, xi1 } => (xi0, xi1),
        _ => (0.5, 0.5),
    };

    // Fractional decision counts; ties contribute their randomization
    // weight exactly.
    let mut alpha_acc = vec![vec![0.0f64; times.len()]; nodes.len()];
    let mut beta_acc = vec![vec![0.0f64; times.len()]; nodes.len()];

    for trial in 0..cfg.trials {
        let trial_seed = subseed(cfg.master_seed, STREAM_TRIAL, trial);
        for theta in 0..2usize {
            let mut cursor = 0usize;
            run_rule(
                cfg.model,
                cfg.w,
                &cfg.rule,
                theta,
                *times.last().expect("nonempty"),
                trial_seed,
                &cfg.quantizer,
                |t, state| {
                    if cursor < times.len() && t == times[cursor] {
                        for (ni, &node) in nodes.iter().enumerate() {
                            let spec = &thresholds[ni][cursor];
                            let ell = state.ell[node];
                            if theta == 0 {
                                if ell > spec.gamma {
                                    alpha_acc[ni][cursor] += 1.0;
                                } else if ell == spec.gamma {
                                    alpha_acc[ni][cursor] += spec.eta;
                                }
                            } else if ell < spec.gamma {
                                beta_acc[ni][cursor] += 1.0;
                            } else if ell == spec.gamma {
                                beta_acc[ni][cursor] += 1.0 - spec.eta;
                            }
                        }
                        cursor += 1;
                    }
                },
            )?;
        }
    }

    let trials_f = cfg.trials as f64;
    let stderr = |p: f64| libm::sqrt(p * (1.0 - p) / trials_f);
    let cells: Vec<Vec<ErrorEstimate>> = alpha_acc
        .iter()
        .zip(&beta_acc)
        .map(|(arow, brow)| {
            arow.iter()
                .zip(brow)
                .map(|(&a, &b)| {
                    let alpha = a / trials_f;
                    let beta = b / trials_f;
                    ErrorEstimate {
                        alpha,
                        beta,
                        bayes_risk: prior.0 * alpha + prior.1 * beta,
                        stderr_alpha: stderr(alpha),
                        stderr_beta: stderr(beta),
                        trials: cfg.trials,
                    }
                })
                .collect()
        })
        .collect();

    Ok(McReport { nodes, times, cells, thresholds })
}

fn resolve_thresholds(
    cfg: &MonteCarloConfig,
    nodes: &[usize],
    times: &[usize],
) -> Result<Vec<Vec<TestSpec>>> {
    match cfg.test {
        TestPolicy::Bayes { xi0, xi1 } => {
            if !(xi0 > 0.0 && xi1 > 0.0) || libm::fabs(xi0 + xi1 - 1.0) > 1e-12 {
                return Err(Error::InvalidParameter(
                    "bayes prior must be positive and sum to 1".into(),
                ));
            }
            let spec = TestSpec { gamma: libm::log(xi0 / xi1), eta: 1.0 };
            Ok(vec![vec![spec; times.len()]; nodes.len()])
        }
        TestPolicy::Fixed { gamma, eta } => {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParameter("eta must lie in [0,1]".into()));
            }
            Ok(vec![vec![TestSpec { gamma, eta }; times.len()]; nodes.len()])
        }
        TestPolicy::Np { epsilon, calibration_trials } => {
            let cal_trials = if calibration_trials == 0 { cfg.trials } else { calibration_trials };
            if (cal_trials as usize) < MIN_CALIBRATION_TRIALS {
                return Err(Error::TooFewTrials {
                    needed: MIN_CALIBRATION_TRIALS,
                    got: cal_trials as usize,
                });
            }
            let mut samples =
                vec![vec![Vec::with_capacity(cal_trials as usize); times.len()]; nodes.len()];
            for trial in 0..cal_trials {
                let trial_seed = subseed(cfg.master_seed, STREAM_CAL, trial);
                let mut cursor = 0usize;
                run_rule(
                    cfg.model,
                    cfg.w,
                    &cfg.rule,
                    0,
                    *times.last().expect("nonempty"),
                    trial_seed,
                    &cfg.quantizer,
                    |t, state| {
                        if cursor < times.len() && t == times[cursor] {
                            for (ni, &node) in nodes.iter().enumerate() {
                                samples[ni][cursor].push(state.ell[node]);
                            }
                            cursor += 1;
                        }
                    },
                )?;
            }
            samples
                .into_iter()
                .enumerate()
                .map(|(ni, per_time)| {
                    per_time
                        .into_iter()
                        .enumerate()
                        .map(|(ti, values)| {
                            let sample = CalibrationSample {
                                set_id: subseed(cfg.master_seed, STREAM_CAL, (ni * times.len() + ti) as u64),
                                values,
                            };
                            np_threshold_empirical(&sample, epsilon).map(|t| t.spec)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        }
    }
}
