//! Error type shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong when building models, analyzing chains, or
/// running protocols.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A node has no one to listen to, so its consensus row cannot be formed.
    EmptyNeighborhood { node: usize },
    /// Generic parameter violation with a human-readable description.
    InvalidParameter(String),
    /// A weight-matrix row does not sum to one.
    NotStochastic { row: usize, sum: f64 },
    /// A weight-matrix entry is negative.
    NegativeEntry { row: usize, col: usize },
    /// The consensus chain is reducible; carries the strongly connected
    /// components in information-flow order.
    Reducible { components: Vec<Vec<usize>> },
    /// The consensus chain is periodic with the given period.
    Periodic { period: usize },
    /// The operation requires a reversible consensus chain.
    NotReversible,
    /// The operation requires a binary hypothesis model.
    NotBinary { hypotheses: usize },
    /// Distribution kinds differ across hypotheses at one node.
    KindMismatch { node: usize },
    /// An observation falls outside the node's support.
    OutsideSupport { node: usize },
    /// The node's log-likelihood ratio is unbounded (continuous support).
    UnboundedLlr { node: usize },
    /// The operation requires Gaussian observation models.
    NotGaussian { node: usize },
    /// Single-node networks have a degenerate stationary distribution and no
    /// meaningful decentralization constant.
    DegenerateSingleNode,
    /// The hypotheses are indistinguishable, so a rate ratio is undefined.
    ZeroDivergence,
    /// A calibration routine was handed fewer samples than it needs.
    TooFewTrials { needed: usize, got: usize },
    /// A calibrated test was evaluated on its own calibration sample.
    CalibrationReuse,
    /// A regression was attempted on fewer points than it needs.
    TooFewPoints { needed: usize, got: usize },
    /// Vector or matrix dimensions disagree.
    DimensionMismatch { expected: usize, got: usize },
    /// A stationary estimate hit a non-positive value where an inverse is
    /// required.
    NonPositivePiHat { node: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyNeighborhood { node } => {
                write!(f, "node {node} has an empty neighborhood")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NotStochastic { row, sum } => {
                write!(f, "row {row} sums to {sum}, expected 1")
            }
            Error::NegativeEntry { row, col } => {
                write!(f, "negative weight at ({row}, {col})")
            }
            Error::Reducible { components } => {
                write!(f, "chain is reducible ({} components)", components.len())
            }
            Error::Periodic { period } => write!(f, "chain is periodic with period {period}"),
            Error::NotReversible => write!(f, "chain is not reversible"),
            Error::NotBinary { hypotheses } => {
                write!(f, "operation requires a binary model, got {hypotheses} hypotheses")
            }
            Error::KindMismatch { node } => {
                write!(f, "node {node} mixes distribution kinds across hypotheses")
            }
            Error::OutsideSupport { node } => {
                write!(f, "observation outside the support of node {node}")
            }
            Error::UnboundedLlr { node } => {
                write!(f, "node {node} has an unbounded log-likelihood ratio")
            }
            Error::NotGaussian { node } => {
                write!(f, "node {node} is not Gaussian")
            }
            Error::DegenerateSingleNode => {
                write!(f, "single-node network has no decentralization constant")
            }
            Error::ZeroDivergence => write!(f, "hypotheses are indistinguishable"),
            Error::TooFewTrials { needed, got } => {
                write!(f, "needs at least {needed} trials, got {got}")
            }
            Error::CalibrationReuse => {
                write!(f, "calibration sample reused for evaluation")
            }
            Error::TooFewPoints { needed, got } => {
                write!(f, "needs at least {needed} usable points, got {got}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonPositivePiHat { node } => {
                write!(f, "stationary estimate at node {node} is not strictly positive")
            }
        }
    }
}

impl core::error::Error for Error {}
