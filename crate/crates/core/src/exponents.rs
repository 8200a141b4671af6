//! Analytic error-exponent layer.
//!
//! The type-II exponent of the log-belief ratio test under geometric
//! weights `r` is the concave program
//!
//! ```text
//! sup_{lambda >= 0} sum_j { lambda pi_j r_j E_{P0}[ log(P_{j,0}/P_{j,1}) ]
//!                           - log E_{P1}[ (P_{j,0}/P_{j,1})^{lambda pi_j r_j} ] }
//! ```
//!
//! which collapses to the centralized rate `sum_j KL(P_{j,0} || P_{j,1})`
//! exactly when `r` is proportional to `1/pi`, with maximizer
//! `lambda = 1/c` for `r = c/pi`. The Bayes-risk analogue is the Chernoff
//! information of the product model.
//!
//! Beyond the first order, decentralization costs at most a constant
//! factor. The per-node log-constants below quantify it through the
//! spectral gap and the stationary distribution; all of them are returned
//! in the log domain (never exponentiated), so the equivalent round delay
//! is just `log-constant / total KL`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph_markov::{DeviationFactor, WeightMatrix};
use crate::hypothesis_model::NetworkModel;
use crate::stats::{maximize_concave, ols_fit, q_inv, SlopeFit};

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Checks the higher-order assumptions and returns `(pi, rho)`.
fn reversible_profile(w: &WeightMatrix) -> Result<(Vec<f64>, f64)> {
    let profile = w.spectral_profile();
    if !profile.irreducible {
        return Err(Error::Reducible { components: w.support().scc_decomposition() });
    }
    if !profile.aperiodic {
        return Err(Error::Periodic { period: profile.period.unwrap_or(0) });
    }
    if !profile.reversible {
        return Err(Error::NotReversible);
    }
    Ok((profile.pi.expect("irreducible"), profile.rho.expect("irreducible")))
}

/// Type-II error exponent for arbitrary geometric weights, with the
/// maximizing `lambda`.
///
/// The bracket is grown geometrically until the objective stops climbing
/// (the derivative has flipped sign), then a ternary search resolves the
/// concave maximum to 1e-10 in `lambda`. The value is the same at every
/// node.
pub fn exponent_general(
    model: &NetworkModel,
    w: &WeightMatrix,
    r: &[f64],
) -> Result<(f64, f64)> {
    model.require_binary()?;
    if r.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: r.len() });
    }
    if let Some(&bad) = r.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(alloc::format!(
            "geometric weights must be strictly positive, got {bad}"
        )));
    }
    let profile = w.spectral_profile();
    if !profile.irreducible {
        return Err(Error::Reducible { components: w.support().scc_decomposition() });
    }
    if !profile.aperiodic {
        return Err(Error::Periodic { period: profile.period.unwrap_or(0) });
    }
    let pi = profile.pi.expect("irreducible");

    let n = w.n();
    let divergence: f64 =
        (0..n).map(|j| model.kl(j, 0, 1) + model.kl(j, 1, 0)).sum();
    if divergence == 0.0 {
        return Ok((0.0, 0.0));
    }

    let weights: Vec<f64> = (0..n).map(|j| pi[j] * r[j]).collect();
    let drifts: Vec<f64> = (0..n).map(|j| model.kl(j, 0, 1)).collect();
    let objective = |lambda: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            let s = lambda * weights[j];
            let moment = model.tilt_log_moment(j, s);
            if moment.is_infinite() {
                return f64::NEG_INFINITY;
            }
            acc += s * drifts[j] - moment;
        }
        acc
    };

    // Grow the bracket until the concave objective turns over.
    let mut hi = 1.0f64;
    let mut prev = objective(hi * 0.5);
    for _ in 0..60 {
        let cur = objective(hi);
        if !cur.is_finite() || cur < prev {
            break;
        }
        prev = cur;
        hi *= 2.0;
    }
    let (lambda_star, value) = maximize_concave(&objective, 0.0, hi, 1e-10);
    Ok((value.max(0.0), lambda_star))
}

/// The centralized Neyman-Pearson rate `sum_j KL(P_{j,0} || P_{j,1})`,
/// attained by `r = c / pi`.
pub fn exponent_optimal(model: &NetworkModel) -> Result<f64> {
    model.require_binary()?;
    Ok(model.total_kl())
}

/// The centralized Bayes rate: Chernoff information of the product model,
/// with the maximizing tilt.
pub fn exponent_bayes(model: &NetworkModel) -> Result<(f64, f64)> {
    model.chernoff_information()
}

/// Log-domain type-II constant of decentralization at node `i`:
///
/// ```text
/// rho/(1-rho) * sqrt(factor_i) * ( sqrt(sum_j KL_j^2/pi_j) + sqrt(sum_j L_j^2/pi_j) )
/// ```
///
/// Requires bounded log-likelihood ratios and a reversible, irreducible,
/// aperiodic chain.
pub fn cnp_constant(
    model: &NetworkModel,
    w: &WeightMatrix,
    node: usize,
    factor: DeviationFactor,
) -> Result<f64> {
    model.require_binary()?;
    let bounds = model.llr_bounds()?;
    if let Some(bad) = bounds.finite.iter().position(|&f| !f) {
        return Err(Error::UnboundedLlr { node: bad });
    }
    let (pi, rho) = reversible_profile(w)?;
    let d_term: f64 = (0..w.n())
        .map(|j| {
            let d = model.kl(j, 0, 1);
            d * d / pi[j]
        })
        .sum();
    let l_term: f64 = (0..w.n()).map(|j| bounds.l[j] * bounds.l[j] / pi[j]).sum();
    Ok(rho / (1.0 - rho)
        * libm::sqrt(factor.factor(pi[node]))
        * (libm::sqrt(d_term) + libm::sqrt(l_term)))
}

/// The decentralization penalty expressed as a constant round delay,
/// `log-constant / total KL`.
pub fn delay(
    model: &NetworkModel,
    w: &WeightMatrix,
    node: usize,
    factor: DeviationFactor,
) -> Result<f64> {
    let log_c = cnp_constant(model, w, node, factor)?;
    let rate = model.total_kl();
    if rate == 0.0 {
        return Err(Error::ZeroDivergence);
    }
    Ok(log_c / rate)
}

/// Log-domain Bayes-risk constant at node `i`:
///
/// ```text
/// max{theta*, 1-theta*} * rho/(1-rho) * sqrt( factor_i * sum_j L_j^2/pi_j )
/// ```
pub fn cb_constant(
    model: &NetworkModel,
    w: &WeightMatrix,
    node: usize,
    factor: DeviationFactor,
) -> Result<f64> {
    model.require_binary()?;
    let bounds = model.llr_bounds()?;
    if let Some(bad) = bounds.finite.iter().position(|&f| !f) {
        return Err(Error::UnboundedLlr { node: bad });
    }
    let (pi, rho) = reversible_profile(w)?;
    let (_, theta_star) = model.chernoff_information()?;
    let l_term: f64 = (0..w.n()).map(|j| bounds.l[j] * bounds.l[j] / pi[j]).sum();
    Ok(theta_star.max(1.0 - theta_star)
        * rho
        / (1.0 - rho)
        * libm::sqrt(factor.factor(pi[node]) * l_term))
}

/// Log-domain constant for the symmetric-Gaussian special case:
///
/// ```text
/// (2 mu / sigma) * rho^2/(1-rho^2) * factor_i * sum_j 1/pi_j
/// ```
///
/// The per-node prefactor goes through the same [`DeviationFactor`] switch
/// as the deviation lemma it descends from: the `Odds` form
/// `pi_i/(1-pi_i)` is the one sometimes quoted, but it is not a valid
/// bound at low-influence nodes (`pi_i < 1/2`); the pinned default
/// `(1-pi_i)/pi_i` dominates the exact error ratio on the Gaussian
/// testbed.
///
/// Only meaningful against the centralized Gaussian curve; single-node
/// networks are rejected (`pi_i = 1` is singular and there is nothing
/// decentralized about them).
pub fn gaussian_bound_constant(
    model: &NetworkModel,
    w: &WeightMatrix,
    node: usize,
    factor: DeviationFactor,
) -> Result<f64> {
    let (mu, s2) = model.symmetric_gaussian_params()?;
    if w.n() < 2 {
        return Err(Error::DegenerateSingleNode);
    }
    let (pi, rho) = reversible_profile(w)?;
    let inv_pi_sum: f64 = pi.iter().map(|&p| 1.0 / p).sum();
    Ok(2.0 * mu / libm::sqrt(s2) * (rho * rho / (1.0 - rho * rho))
        * factor.factor(pi[node])
        * inv_pi_sum)
}

/// Error exponent on a periodic network of period `t_period`: each node
/// effectively sees a `1/T` share of the observations.
pub fn periodic_exponent(model: &NetworkModel, t_period: usize) -> Result<f64> {
    if t_period == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    Ok(exponent_optimal(model)? / t_period as f64)
}

/// Log of the centralized finite-horizon type-II error reference curve at
/// type-I level `epsilon`:
///
/// ```text
/// H t + lambda S sqrt(t) - (1/2) log t - (1/2) log(2 pi) - log S
///   - phi(lambda) - lambda^2 / 2
/// ```
///
/// with `H = -sum_j KL_j`, `S^2` and `a` the second and third central
/// moments of the summed log-likelihood ratio under the null,
/// `lambda = Q^{-1}(epsilon)`, and the skewness correction
/// `phi(x) = a/(6 S^2) * (1 - x^2)`.
///
/// This is an asymptotic expansion: a reference curve, not a bound. Its
/// accuracy is validated against the exact Gaussian expressions (where the
/// third moment vanishes); discrete log-likelihood ratios are lattice
/// variables, for which the expansion is only indicative.
pub fn centralized_reference_ln_beta(model: &NetworkModel, t: usize, epsilon: f64) -> Result<f64> {
    model.require_binary()?;
    if t == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0,1)".into()));
    }
    let mut variance = 0.0;
    let mut third = 0.0;
    for j in 0..model.node_count() {
        let (_, v, a) = model.llr_moments(j, 0);
        variance += v;
        third += a;
    }
    if variance == 0.0 {
        return Err(Error::ZeroDivergence);
    }
    let s = libm::sqrt(variance);
    let h = -model.total_kl();
    let lambda = q_inv(epsilon);
    let phi = third / (6.0 * variance) * (1.0 - lambda * lambda);
    let tf = t as f64;
    Ok(h * tf + lambda * s * libm::sqrt(tf)
        - 0.5 * libm::log(tf)
        - 0.5 * LN_2PI
        - libm::log(s)
        - phi
        - lambda * lambda / 2.0)
}

/// Convenience wrapper over [`centralized_reference_ln_beta`].
pub fn centralized_reference_beta(model: &NetworkModel, t: usize, epsilon: f64) -> Result<f64> {
    Ok(libm::exp(centralized_reference_ln_beta(model, t, epsilon)?))
}

/// Least-squares slope of `-log p_t` against `t` over the trailing
/// `window` points with `p_t > 0` (zero-count cells are discarded).
pub fn empirical_exponent(series: &[(usize, f64)], window: usize) -> Result<SlopeFit> {
    let usable: Vec<(usize, f64)> = series
        .iter()
        .filter(|&&(_, p)| p > 0.0 && p.is_finite())
        .copied()
        .collect();
    let start = usable.len().saturating_sub(window.max(3));
    let tail = &usable[start..];
    if tail.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: tail.len() });
    }
    let xs: Vec<f64> = tail.iter().map(|&(t, _)| t as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&(_, p)| -libm::log(p)).collect();
    ols_fit(&xs, &ys)
}

/// Analytic exponents and higher-order constants for one
/// `(network, model, weights)` triple. Constants that need assumptions the
/// instance does not satisfy (bounded ratios, reversibility) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    /// Exponent under the given geometric weights.
    pub general: f64,
    /// Maximizer behind `general`.
    pub lambda_star: f64,
    /// Centralized Neyman-Pearson rate (total KL).
    pub optimal: f64,
    /// Centralized Bayes rate (Chernoff information).
    pub bayes: f64,
    /// Maximizing tilt behind `bayes`.
    pub theta_star: f64,
    /// Per-node log-domain type-II constants.
    pub cnp: Option<Vec<f64>>,
    /// Per-node log-domain Bayes constants.
    pub cb: Option<Vec<f64>>,
    /// Per-node round delays.
    pub delay: Option<Vec<f64>>,
    /// Per-node Gaussian-case constants.
    pub gaussian_bound: Option<Vec<f64>>,
}

/// Builds the full analytic report for one instance.
pub fn exponent_report(
    model: &NetworkModel,
    w: &WeightMatrix,
    r: &[f64],
    factor: DeviationFactor,
) -> Result<ExponentReport> {
    let (general, lambda_star) = exponent_general(model, w, r)?;
    let optimal = exponent_optimal(model)?;
    let (bayes, theta_star) = exponent_bayes(model)?;
    let per_node = |f: &dyn Fn(usize) -> Result<f64>| -> Option<Vec<f64>> {
        (0..w.n()).map(|i| f(i).ok()).collect()
    };
    Ok(ExponentReport {
        general,
        lambda_star,
        optimal,
        bayes,
        theta_star,
        cnp: per_node(&|i| cnp_constant(model, w, i, factor)),
        cb: per_node(&|i| cb_constant(model, w, i, factor)),
        delay: per_node(&|i| delay(model, w, i, factor)),
        gaussian_bound: per_node(&|i| gaussian_bound_constant(model, w, i, factor)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::gaussian_np_exact;
    use crate::hypothesis_model::NodeDistribution;
    use crate::seed::substream_rng;
    use alloc::vec;
    use rand::Rng;

    fn two_node_w() -> WeightMatrix {
        WeightMatrix::from_rows(&[vec![0.8, 0.2], vec![0.5, 0.5]]).unwrap()
    }

    fn bern78(n: usize) -> NetworkModel {
        NetworkModel::bernoulli_network(n, 0.7, 0.8).unwrap()
    }

    const D_78: f64 = 0.028167557595283554; // KL(Ber(0.7) || Ber(0.8))
    const SUM_KL_78: f64 = 2.0 * D_78;

    #[test]
    fn inverse_pi_weights_recover_the_centralized_rate() {
        let model = bern78(2);
        let w = two_node_w();
        let pi = w.stationary_distribution().unwrap();
        for &c in &[1.0, 2.5, 0.3] {
            let r: Vec<f64> = pi.iter().map(|p| c / p).collect();
            let (value, lambda) = exponent_general(&model, &w, &r).unwrap();
            assert!((value - SUM_KL_78).abs() < 1e-9, "c={c} value={value}");
            assert!((lambda - 1.0 / c).abs() < 1e-6, "c={c} lambda={lambda}");
        }
    }

    #[test]
    fn identical_hypotheses_have_zero_exponent() {
        let model = NetworkModel::bernoulli_network(2, 0.4, 0.4).unwrap();
        let (value, _) = exponent_general(&model, &two_node_w(), &[1.0, 1.0]).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn unit_weights_lose_strictly_under_imbalance() {
        let model = bern78(2);
        let w = two_node_w();
        let (value, _) = exponent_general(&model, &w, &[1.0, 1.0]).unwrap();
        // Frozen from a dense-grid evaluation of the objective.
        assert!((value - 0.04717166296829141).abs() < 1e-6);
        assert!(value < SUM_KL_78 - 9e-3);

        // In-test dense grid oracle over the same objective.
        let pi = w.stationary_distribution().unwrap();
        let mut best = f64::NEG_INFINITY;
        for k in 0..=30_000 {
            let lambda = k as f64 * 1e-4;
            let mut acc = 0.0;
            for j in 0..2 {
                let s = lambda * pi[j];
                acc += s * model.kl(j, 0, 1) - model.tilt_log_moment(j, s);
            }
            best = best.max(acc);
        }
        assert!((value - best).abs() < 1e-6);
    }

    #[test]
    fn optimal_exponent_composes_node_divergences() {
        let model = NetworkModel::bernoulli_network(2, 0.5, 0.6).unwrap();
        let expect = 2.0 * 0.020410997260127586;
        assert!((exponent_optimal(&model).unwrap() - expect).abs() < 1e-14);
        assert_eq!(
            exponent_optimal(&NetworkModel::bernoulli_network(3, 0.3, 0.3).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn optimal_exponent_gaussian_term_matches_quadrature() {
        let model = NetworkModel::new(vec![
            vec![
                NodeDistribution::bernoulli(0.5).unwrap(),
                NodeDistribution::bernoulli(0.6).unwrap(),
            ],
            vec![
                NodeDistribution::gaussian(-0.7, 1.3).unwrap(),
                NodeDistribution::gaussian(0.7, 1.3).unwrap(),
            ],
        ])
        .unwrap();
        // Simpson quadrature of p0 log(p0/p1) for the gaussian node.
        let (m0, v) = (-0.7, 1.3);
        let logpdf = |x: f64, m: f64| -0.5 * ((x - m) * (x - m) / v + (2.0 * core::f64::consts::PI * v).ln());
        let f = |x: f64| (logpdf(x, m0) - logpdf(x, 0.7)) * (logpdf(x, m0)).exp();
        let (lo, hi, steps) = (m0 - 12.0 * v.sqrt(), m0 + 12.0 * v.sqrt(), 40_000);
        let h = (hi - lo) / steps as f64;
        let mut quad = f(lo) + f(hi);
        for k in 1..steps {
            quad += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        quad *= h / 3.0;
        let expect = 0.020410997260127586 + quad;
        assert!((exponent_optimal(&model).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn bayes_exponent_delegates_to_chernoff() {
        let model = bern78(2);
        let (value, theta) = exponent_bayes(&model).unwrap();
        let (ci, ts) = model.chernoff_information().unwrap();
        assert_eq!(value, ci);
        assert_eq!(theta, ts);
        assert!(value <= exponent_optimal(&model).unwrap());
    }

    #[test]
    fn cnp_vanishes_without_spectral_gap_penalty() {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| vec![1.0 / 3.0; 3]).collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let c = cnp_constant(&bern78(3), &w, 0, DeviationFactor::default()).unwrap();
        assert!(c.abs() < 1e-8);

        let same = NetworkModel::bernoulli_network(2, 0.4, 0.4).unwrap();
        let c = cnp_constant(&same, &two_node_w(), 0, DeviationFactor::default()).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cnp_two_node_hand_assembly() {
        let model = bern78(2);
        let w = two_node_w();
        let pi = [5.0 / 7.0, 2.0 / 7.0];
        let l: f64 = 1.5f64.ln();
        let d_term = (D_78 * D_78 / pi[0] + D_78 * D_78 / pi[1]).sqrt();
        let l_term = (l * l / pi[0] + l * l / pi[1]).sqrt();
        for i in 0..2 {
            let expect = 0.3 / 0.7 * ((1.0 - pi[i]) / pi[i]).sqrt() * (d_term + l_term);
            let got = cnp_constant(&model, &w, i, DeviationFactor::InverseOdds).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
        // frozen composites
        assert!(
            (cnp_constant(&model, &w, 0, DeviationFactor::InverseOdds).unwrap()
                - 0.2601795994220688)
                .abs()
                < 1e-10
        );
        assert!(
            (cnp_constant(&model, &w, 1, DeviationFactor::InverseOdds).unwrap()
                - 0.6504489985551719)
                .abs()
                < 1e-10
        );
    }

    #[test]
    fn higher_order_constants_enforce_assumptions() {
        let gauss = NetworkModel::symmetric_gaussian_network(2, 1.0, 1.0).unwrap();
        assert!(matches!(
            cnp_constant(&gauss, &two_node_w(), 0, DeviationFactor::default()),
            Err(Error::UnboundedLlr { .. })
        ));
        let spinner = WeightMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        assert!(matches!(
            cnp_constant(&bern78(3), &spinner, 0, DeviationFactor::default()),
            Err(Error::NotReversible)
        ));
    }

    #[test]
    fn delay_is_the_log_constant_in_round_units() {
        let model = bern78(2);
        let w = two_node_w();
        for i in 0..2 {
            let c = cnp_constant(&model, &w, i, DeviationFactor::default()).unwrap();
            let d = delay(&model, &w, i, DeviationFactor::default()).unwrap();
            assert!((d - c / SUM_KL_78).abs() < 1e-12);
        }
        let rows: Vec<Vec<f64>> = (0..2).map(|_| vec![0.5; 2]).collect();
        let flat = WeightMatrix::from_rows(&rows).unwrap();
        assert!(delay(&model, &flat, 0, DeviationFactor::default()).unwrap().abs() < 1e-8);

        let same = NetworkModel::bernoulli_network(2, 0.4, 0.4).unwrap();
        assert!(matches!(
            delay(&same, &two_node_w(), 0, DeviationFactor::default()),
            Err(Error::ZeroDivergence)
        ));
    }

    #[test]
    fn cb_symmetric_model_uses_half_tilt() {
        // symmetric bernoulli pair: theta* = 1/2 by symmetry
        let model = NetworkModel::bernoulli_network(2, 0.3, 0.7).unwrap();
        let w = two_node_w();
        let (_, theta) = model.chernoff_information().unwrap();
        assert!((theta - 0.5).abs() < 1e-7);
        let pi = [5.0 / 7.0, 2.0 / 7.0];
        let l: f64 = (0.7f64 / 0.3).ln();
        for i in 0..2 {
            let l_term = l * l / pi[0] + l * l / pi[1];
            let expect = 0.5 * (0.3 / 0.7) * ((1.0 - pi[i]) / pi[i] * l_term).sqrt();
            let got = cb_constant(&model, &w, i, DeviationFactor::InverseOdds).unwrap();
            // theta* is located to ~1e-7 by the concave search
            assert!((got - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_constant_examples() {
        let model = NetworkModel::symmetric_gaussian_network(2, 1.0, 1.0).unwrap();
        let w = two_node_w();
        // The odds form reproduces the quoted product
        // (2)(0.09/0.91)(pi_i/(1-pi_i))(7/5 + 7/2):
        let got0 = gaussian_bound_constant(&model, &w, 0, DeviationFactor::Odds).unwrap();
        let got1 = gaussian_bound_constant(&model, &w, 1, DeviationFactor::Odds).unwrap();
        assert!((got0 - 2.423076923076923).abs() < 1e-12);
        assert!((got1 - 0.3876923076923077).abs() < 1e-12);
        // The pinned default swaps the per-node prefactor.
        let def0 = gaussian_bound_constant(&model, &w, 0, DeviationFactor::default()).unwrap();
        let def1 = gaussian_bound_constant(&model, &w, 1, DeviationFactor::default()).unwrap();
        assert!((def0 - 0.3876923076923077).abs() < 1e-12);
        assert!((def1 - 2.423076923076923).abs() < 1e-12);

        let flat = WeightMatrix::from_rows(&(0..2).map(|_| vec![0.5; 2]).collect::<Vec<_>>())
            .unwrap();
        assert!(gaussian_bound_constant(&model, &flat, 0, DeviationFactor::default())
            .unwrap()
            .abs()
            < 1e-8);

        let single = NetworkModel::symmetric_gaussian_network(1, 1.0, 1.0).unwrap();
        let unit = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            gaussian_bound_constant(&single, &unit, 0, DeviationFactor::default()),
            Err(Error::DegenerateSingleNode)
        ));
    }

    #[test]
    fn constants_grow_with_rho() {
        // W_rho = (1-rho)/n 11^T + rho I: doubly stochastic, reversible,
        // second eigenvalue exactly rho.
        let model = bern78(3);
        let gauss = NetworkModel::symmetric_gaussian_network(3, 1.0, 1.0).unwrap();
        let mut last = (-1.0, -1.0, -1.0);
        for &rho in &[0.0, 0.2, 0.5, 0.8] {
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|i| {
                    (0..3)
                        .map(|j| (1.0 - rho) / 3.0 + if i == j { rho } else { 0.0 })
                        .collect()
                })
                .collect();
            let w = WeightMatrix::from_rows(&rows).unwrap();
            let profile = w.spectral_profile();
            assert!((profile.rho.unwrap() - rho).abs() < 1e-10);
            let cnp = cnp_constant(&model, &w, 0, DeviationFactor::default()).unwrap();
            let cb = cb_constant(&model, &w, 0, DeviationFactor::default()).unwrap();
            let gb = gaussian_bound_constant(&gauss, &w, 0, DeviationFactor::default()).unwrap();
            assert!(cnp > last.0 && cb > last.1 && gb > last.2, "rho={rho}");
            last = (cnp, cb, gb);
        }
    }

    #[test]
    fn periodic_exponent_divides_the_rate() {
        let model = bern78(3);
        let rate = exponent_optimal(&model).unwrap();
        assert_eq!(periodic_exponent(&model, 1).unwrap(), rate);
        assert!((periodic_exponent(&model, 2).unwrap() - rate / 2.0).abs() < 1e-15);
        assert!((periodic_exponent(&model, 3).unwrap() - rate / 3.0).abs() < 1e-15);
        assert!(periodic_exponent(&model, 0).is_err());
    }

    #[test]
    fn reference_curve_tracks_the_exact_gaussian_error() {
        let model = NetworkModel::symmetric_gaussian_network(1, 1.0, 1.0).unwrap();
        let w = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        let exact = gaussian_np_exact(&model, &w, 100, 0, 0.05).unwrap();
        let approx = centralized_reference_ln_beta(&model, 100, 0.05).unwrap();
        let rel = libm::exp(approx - exact.ln_beta) - 1.0;
        assert!(rel.abs() < 0.10, "relative error {rel}");
    }

    #[test]
    fn reference_curve_median_case_drops_the_sqrt_term() {
        let model = NetworkModel::symmetric_gaussian_network(1, 1.0, 1.0).unwrap();
        // At eps = 1/2 the quantile vanishes: ln beta = H t - (1/2) log t
        //   - (1/2) log(2 pi) - log S - phi.
        let t = 64;
        let got = centralized_reference_ln_beta(&model, t, 0.5).unwrap();
        let s = 2.0f64; // sqrt(4 mu^2 / sigma^2)
        let expect = -2.0 * t as f64 - 0.5 * (t as f64).ln() - 0.5 * LN_2PI - s.ln();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn reference_curve_slope_approaches_the_rate() {
        let model = NetworkModel::symmetric_gaussian_network(1, 1.0, 1.0).unwrap();
        let t = 1000;
        let ln_beta = centralized_reference_ln_beta(&model, t, 0.5).unwrap();
        let slope = -ln_beta / t as f64;
        let rate = exponent_optimal(&model).unwrap();
        assert!((slope - rate).abs() / rate < 0.02, "slope {slope} vs rate {rate}");
    }

    #[test]
    fn empirical_exponent_recovers_exact_and_noisy_decay() {
        let c = 0.37;
        let series: Vec<(usize, f64)> =
            (1..=60).map(|t| (t, libm::exp(-c * t as f64))).collect();
        let fit = empirical_exponent(&series, 40).unwrap();
        assert!((fit.slope - c).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let mut rng = substream_rng(8, 3, 0);
        let noisy: Vec<(usize, f64)> = (1..=60)
            .map(|t| {
                let jitter = 1.0 + 0.2 * (rng.gen::<f64>() - 0.5);
                (t, libm::exp(-c * t as f64) * jitter)
            })
            .collect();
        let fit = empirical_exponent(&noisy, 30).unwrap();
        assert!((fit.slope - c).abs() / c < 0.05, "noisy slope {}", fit.slope);

        let flat: Vec<(usize, f64)> = (1..=30).map(|t| (t, 0.25)).collect();
        let fit = empirical_exponent(&flat, 20).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn empirical_exponent_discards_zero_cells_and_needs_three_points() {
        let series = vec![(1, 0.5), (2, 0.0), (3, 0.25), (4, 0.0), (5, 0.125)];
        let fit = empirical_exponent(&series, 10).unwrap();
        assert!((fit.slope - core::f64::consts::LN_2 / 2.0).abs() < 1e-12);

        let too_short = vec![(1, 0.5), (2, 0.0), (3, 0.2)];
        assert!(matches!(
            empirical_exponent(&too_short, 5),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn report_marks_unavailable_constants() {
        let gauss = NetworkModel::symmetric_gaussian_network(2, 1.0, 1.0).unwrap();
        let w = two_node_w();
        let pi = w.stationary_distribution().unwrap();
        let r: Vec<f64> = pi.iter().map(|p| 1.0 / p).collect();
        let report = exponent_report(&gauss, &w, &r, DeviationFactor::default()).unwrap();
        assert!(report.cnp.is_none()); // unbounded ratios
        assert!(report.gaussian_bound.is_some());
        assert!((report.general - report.optimal).abs() < 1e-8);

        let bern = bern78(2);
        let report = exponent_report(&bern, &w, &r, DeviationFactor::default()).unwrap();
        assert!(report.cnp.is_some());
        assert!(report.gaussian_bound.is_none());
        assert!(report.bayes <= report.optimal);
    }

    // ----- randomized invariants --------------------------------------------

    fn random_instance(seed: u64) -> (NetworkModel, WeightMatrix, Vec<f64>) {
        let mut rng = substream_rng(seed, 40, 0);
        let n = 2 + (rng.gen::<u64>() % 4) as usize;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let dist: Vec<Vec<NodeDistribution>> = (0..n)
            .map(|_| {
                if rng.gen::<bool>() {
                    let p0 = 0.15 + 0.7 * rng.gen::<f64>();
                    let p1 = 0.15 + 0.7 * rng.gen::<f64>();
                    vec![
                        NodeDistribution::bernoulli(p0).unwrap(),
                        NodeDistribution::bernoulli(p1).unwrap(),
                    ]
                } else {
                    let raw = |rng: &mut rand_chacha::ChaCha8Rng| {
                        let v: Vec<f64> = (0..3).map(|_| 0.1 + rng.gen::<f64>()).collect();
                        let s: f64 = v.iter().sum();
                        NodeDistribution::categorical(v.into_iter().map(|x| x / s).collect())
                            .unwrap()
                    };
                    vec![raw(&mut rng), raw(&mut rng)]
                }
            })
            .collect();
        let model = NetworkModel::new(dist).unwrap();
        let r: Vec<f64> = (0..n).map(|_| 0.1 + 2.9 * rng.gen::<f64>()).collect();
        (model, w, r)
    }

    #[test]
    fn decentralization_never_helps_on_random_instances() {
        for seed in 0..200u64 {
            let (model, w, r) = random_instance(seed);
            let (value, _) = exponent_general(&model, &w, &r).unwrap();
            let optimal = exponent_optimal(&model).unwrap();
            assert!(value <= optimal + 1e-9, "seed {seed}: {value} > {optimal}");
            let (bayes, _) = exponent_bayes(&model).unwrap();
            assert!(bayes <= optimal + 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn exponent_is_invariant_under_weight_scaling() {
        for seed in 0..40u64 {
            let (model, w, r) = random_instance(seed);
            let (v1, l1) = exponent_general(&model, &w, &r).unwrap();
            let scaled: Vec<f64> = r.iter().map(|x| 3.7 * x).collect();
            let (v2, l2) = exponent_general(&model, &w, &scaled).unwrap();
            assert!((v1 - v2).abs() < 1e-9, "seed {seed}");
            if v1 > 1e-6 {
                assert!((l1 / 3.7 - l2).abs() < 1e-5 * l1.max(1.0), "seed {seed}");
            }
        }
    }

    #[test]
    fn doubly_stochastic_chains_need_no_reweighting() {
        // Convex combinations of cyclic permutations are doubly stochastic.
        for seed in 0..20u64 {
            let mut rng = substream_rng(seed, 41, 0);
            let n = 4;
            let raw: Vec<f64> = (0..n).map(|_| 0.1 + rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let coeffs: Vec<f64> = raw.into_iter().map(|x| x / total).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut row = vec![0.0; n];
                    for (shift, &c) in coeffs.iter().enumerate() {
                        row[(i + shift) % n] += c;
                    }
                    row
                })
                .collect();
            let w = WeightMatrix::from_rows(&rows).unwrap();
            let pi = w.stationary_distribution().unwrap();
            assert!(
                crate::graph_markov::imbalance(&pi, crate::graph_markov::ImbalanceNorm::Tv)
                    < 1e-10
            );

            let p0 = 0.2 + 0.6 * rng.gen::<f64>();
            let p1 = 0.2 + 0.6 * rng.gen::<f64>();
            let model = NetworkModel::bernoulli_network(n, p0, p1).unwrap();
            let (value, _) = exponent_general(&model, &w, &vec![1.0; n]).unwrap();
            let optimal = exponent_optimal(&model).unwrap();
            assert!((value - optimal).abs() < 1e-8, "seed {seed}");
        }
    }
}
