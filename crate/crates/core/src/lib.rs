#![cfg_attr(not(feature = "std"), no_std)]
//! Decentralized binary (and M-ary) hypothesis testing over directed
//! networks.
//!
//! A group of nodes repeatedly observes private data, exchanges log-belief
//! messages along a directed graph weighted by a row-stochastic confidence
//! matrix `W`, and each node runs a threshold test on its own log-belief
//! ratio. This crate provides:
//!
//! - [`graph_markov`]: topology, weight matrices, and every Markov-chain
//!   quantity the analysis needs (stationary distribution, spectral radius
//!   of the non-principal spectrum, period, strongly connected components,
//!   deviation bounds, imbalance).
//! - [`hypothesis_model`]: per-node observation models under each
//!   hypothesis, sampling, log-likelihood ratios, KL divergence, Chernoff
//!   information, and exponential tilting.
//! - [`learning`]: the belief-consensus rules (original, geometric-weighted,
//!   combined with on-line stationary estimation), the decentralized
//!   stationary-distribution estimator, and the significand quantizer.
//! - [`detection`]: randomized log-belief ratio tests, Neyman-Pearson
//!   threshold selection, Bayes decisions, M-ary decisions with rejection,
//!   and the seeded Monte Carlo error estimator.
//! - [`exponents`]: the analytic error-exponent layer (variational exponent
//!   for arbitrary geometric weights, optimal exponents, higher-order
//!   decentralization constants, delay, Gaussian bound, periodic-network
//!   exponent, a centralized reference curve, and empirical-exponent
//!   extraction).
//!
//! Everything is deterministic given explicit seeds; see [`seed`] for the
//! counter-based splitting scheme. All state is immutable after
//! construction or owned by a single run, so independent trials can safely
//! run concurrently.

extern crate alloc;

pub mod detection;
pub mod error;
pub mod exponents;
pub mod graph_markov;
pub mod hypothesis_model;
pub mod learning;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use graph_markov::{
    deviation_bound, generate_scale_free, imbalance, DeviationBound, DeviationFactor,
    DirectedGraph, ImbalanceNorm, SpectralProfile, WeightMatrix,
};
pub use hypothesis_model::{LlrBounds, NetworkModel, NodeDistribution, Observation};
pub use learning::{quantize, GeometricWeights, LearningState, NodeState, QuantizerConfig,
    RuleSpec, RunTrace,
};
