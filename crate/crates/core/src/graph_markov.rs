//! Directed network topology, consensus weight matrices, and Markov-chain
//! analysis.
//!
//! The consensus weight matrix `W` is row stochastic: entry `w[i][j]` is the
//! relative confidence node `i` places in node `j`, and `w[i][j] > 0` exactly
//! when `i` grabs information from `j`. Viewed as a Markov transition matrix,
//! `W` carries all the structure the learning rules care about:
//!
//! ```text
//! pi     stationary distribution (pi W = pi), the long-run influence weights
//! rho    max { lambda_2, |lambda_n| }, the convergence rate of W^t
//! T      period, gcd of return times; T = 1 iff the chain is aperiodic
//! ```
//!
//! Reversible chains (`pi_i w[i][j] = pi_j w[j][i]`) admit a symmetrized
//! eigenproblem and a deviation bound of the form
//!
//! ```text
//! sum_j |[W^t]_{ij} - pi_j| r_j  <=  sqrt( factor_i * sum_j pi_j r_j^2 ) * rho^t
//! ```
//!
//! with a per-node prefactor `factor_i` selectable between the two forms that
//! circulate for this bound; see [`DeviationFactor`].

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{substream_rng, STREAM_GRAPH};

/// Tolerance for row sums of a stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Tolerance for linear-algebra residuals (stationary fixed point,
/// reversibility checks).
pub const RESIDUAL_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// A directed graph on nodes `0..n`; the edge `(i, j)` means node `i` grabs
/// information from node `j`.
///
/// Self-loops are allowed, duplicate edges are collapsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph from an edge list, rejecting out-of-range indices.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut edge_count = 0;
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(alloc::format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if sets[i].insert(j) {
                edge_count += 1;
            }
        }
        let adjacency = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(Self { n, adjacency, edge_count })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// The neighborhood `N(i)`: the nodes `i` grabs information from.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// All edges in deterministic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (i, j)))
    }

    /// True iff a single strongly connected component spans all nodes.
    pub fn is_strongly_connected(&self) -> bool {
        self.scc_decomposition().len() == 1
    }

    /// Strongly connected components, ordered so that information only flows
    /// from later components to earlier ones: every edge `(i, j)` satisfies
    /// `component(i) <= component(j)`. Closed components (those that read
    /// from no one else) therefore sort last.
    pub fn scc_decomposition(&self) -> Vec<Vec<usize>> {
        // Iterative Tarjan; components pop in reverse information-flow order.
        const UNVISITED: usize = usize::MAX;
        let n = self.n;
        let mut index = vec![UNVISITED; n];
        let mut lowlink = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        let mut next_index = 0usize;
        let mut components: Vec<Vec<usize>> = Vec::new();
        // call stack entries: (node, position in its adjacency list)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            lowlink[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.adjacency[v].len() {
                    let w = self.adjacency[v][*pos];
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next_index;
                        lowlink[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        lowlink[v] = lowlink[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        lowlink[parent] = lowlink[parent].min(lowlink[v]);
                    }
                    if lowlink[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        components.push(comp);
                    }
                }
            }
        }
        // Tarjan emits a component only after everything it reads from; the
        // required order is the reverse.
        components.reverse();
        components
    }
}

/// Generates a random scale-free network by preferential attachment, then
/// makes every edge bidirectional and adds self-loops so that uniform
/// confidence weights are well defined.
///
/// Deterministic for a fixed `(n, m, seed)` triple.
pub fn generate_scale_free(n: usize, m: usize, seed: u64) -> Result<DirectedGraph> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(alloc::format!(
            "attachment parameter m={m} must satisfy 1 <= m < n={n}"
        )));
    }
    let mut rng = substream_rng(seed, STREAM_GRAPH, 0);
    let mut skeleton: BTreeSet<(usize, usize)> = BTreeSet::new();
    // Endpoint multiset; each node appears once per incident skeleton edge,
    // so uniform picks are degree-proportional.
    let mut endpoints: Vec<usize> = Vec::new();
    let mut targets: Vec<usize> = (0..m).collect();

    for source in m..n {
        for &t in &targets {
            let (a, b) = if source < t { (source, t) } else { (t, source) };
            skeleton.insert((a, b));
        }
        endpoints.extend_from_slice(&targets);
        endpoints.extend(core::iter::repeat(source).take(m));

        // m distinct degree-proportional picks
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            let pick = endpoints[rng.gen_range(0..endpoints.len())];
            chosen.insert(pick);
        }
        targets = chosen.into_iter().collect();
    }

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * skeleton.len() + n);
    for &(a, b) in &skeleton {
        edges.push((a, b));
        edges.push((b, a));
    }
    for i in 0..n {
        edges.push((i, i));
    }
    DirectedGraph::new(n, edges)
}

// ---------------------------------------------------------------------------
// Weight matrix
// ---------------------------------------------------------------------------

/// Row-stochastic consensus weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>, // row major
}

impl WeightMatrix {
    /// Builds a weight matrix from explicit rows, validating row
    /// stochasticity and nonnegativity.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut w = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            let mut sum = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if x < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j });
                }
                sum += x;
            }
            if libm::fabs(sum - 1.0) > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { row: i, sum });
            }
            w.extend_from_slice(row);
        }
        Ok(Self { n, w })
    }

    /// Uniform confidence: `w[i][j] = 1 / |N(i)|` for `j` in `N(i)`.
    pub fn uniform(g: &DirectedGraph) -> Result<Self> {
        let n = g.node_count();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            let nbrs = g.neighbors(i);
            if nbrs.is_empty() {
                return Err(Error::EmptyNeighborhood { node: i });
            }
            let share = 1.0 / nbrs.len() as f64;
            for &j in nbrs {
                w[i * n + j] = share;
            }
        }
        Ok(Self { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// The support digraph: edge `(i, j)` iff `w[i][j] > 0`.
    pub fn support(&self) -> DirectedGraph {
        let n = self.n;
        let edges = (0..n).flat_map(|i| {
            (0..n).filter_map(move |j| (self.get(i, j) > 0.0).then_some((i, j)))
        });
        DirectedGraph::new(n, edges).expect("support edges are in range")
    }

    /// Right multiplication `(W v)_i = sum_j w[i][j] v_j`, the consensus
    /// averaging step.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// Left multiplication `(v W)_j = sum_i v_i w[i][j]`, one step of the
    /// stationary-estimate forwarding protocol.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, out_j) in out.iter_mut().enumerate() {
                *out_j += vi * self.get(i, j);
            }
        }
        out
    }

    /// Row `i` of `W^t`, computed by `t` vector-matrix products; `W^t` is
    /// never materialized.
    pub fn power_row(&self, i: usize, t: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        v[i] = 1.0;
        for _ in 0..t {
            v = self.left_mul(&v);
        }
        v
    }

    /// Unique stationary distribution of an irreducible chain, solved as the
    /// least-squares system `(W' - I) pi = 0` with a normalization row
    /// appended.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let support = self.support();
        let components = support.scc_decomposition();
        if components.len() != 1 {
            return Err(Error::Reducible { components });
        }
        let n = self.n;
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let a = DMatrix::from_fn(n + 1, n, |r, c| {
            if r < n {
                self.get(c, r) - if r == c { 1.0 } else { 0.0 }
            } else {
                1.0
            }
        });
        let mut b = DVector::zeros(n + 1);
        b[n] = 1.0;
        let svd = a.svd(true, true);
        let x = svd
            .solve(&b, 1e-13)
            .map_err(|_| Error::InvalidParameter("stationary solve failed".into()))?;

        let mut pi: Vec<f64> = x.iter().copied().collect();
        for p in &mut pi {
            if *p < 0.0 {
                if *p < -1e-9 {
                    return Err(Error::InvalidParameter(
                        "stationary solve produced a negative entry".into(),
                    ));
                }
                *p = 0.0;
            }
        }
        let total: f64 = pi.iter().sum();
        for p in &mut pi {
            *p /= total;
        }
        let fixed = self.left_mul(&pi);
        let residual: f64 =
            fixed.iter().zip(&pi).map(|(a, b)| libm::fabs(a - b)).sum();
        if residual > RESIDUAL_TOL {
            return Err(Error::InvalidParameter("stationary residual above tolerance".into()));
        }
        Ok(pi)
    }

    /// Common period of the (irreducible) chain, via gcd of cycle-length
    /// defects over a BFS level assignment on the support digraph.
    pub fn period(&self) -> Result<usize> {
        let support = self.support();
        let components = support.scc_decomposition();
        if components.len() != 1 {
            return Err(Error::Reducible { components });
        }
        let n = self.n;
        let mut dist = vec![usize::MAX; n];
        let mut queue = alloc::collections::VecDeque::new();
        dist[0] = 0;
        queue.push_back(0usize);
        while let Some(u) = queue.pop_front() {
            for &v in support.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g: u64 = 0;
        for (u, v) in support.edges() {
            let defect = (dist[u] as i64 + 1 - dist[v] as i64).unsigned_abs();
            g = gcd(g, defect);
        }
        debug_assert!(g > 0, "strongly connected chain must close a cycle");
        Ok(g as usize)
    }

    /// Full spectral/stationary analysis; degeneracies are reported through
    /// the flags rather than errors.
    pub fn spectral_profile(&self) -> SpectralProfile {
        let support = self.support();
        if support.scc_decomposition().len() != 1 {
            return SpectralProfile {
                irreducible: false,
                aperiodic: false,
                reversible: false,
                period: None,
                pi: None,
                rho: None,
            };
        }
        let period = self.period().expect("irreducibility just checked");
        let pi = self
            .stationary_distribution()
            .expect("irreducibility just checked");
        let reversible = self.is_reversible(&pi);
        let rho = if self.n == 1 {
            0.0
        } else if reversible {
            self.rho_reversible(&pi)
        } else {
            self.rho_general()
        };
        SpectralProfile {
            irreducible: true,
            aperiodic: period == 1,
            reversible,
            period: Some(period),
            pi: Some(pi),
            rho: Some(rho),
        }
    }

    fn is_reversible(&self, pi: &[f64]) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let flow = pi[i] * self.get(i, j) - pi[j] * self.get(j, i);
                if libm::fabs(flow) > RESIDUAL_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// Reversible case: `D^{1/2} W D^{-1/2}` is symmetric with the same
    /// (real) spectrum, which keeps the eigenproblem numerically robust.
    fn rho_reversible(&self, pi: &[f64]) -> f64 {
        let n = self.n;
        let sqrt_pi: Vec<f64> = pi.iter().map(|&p| libm::sqrt(p)).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| {
            let denom = sqrt_pi[j];
            if denom == 0.0 {
                0.0
            } else {
                sqrt_pi[i] * self.get(i, j) / denom
            }
        });
        // Enforce exact symmetry against rounding before decomposing.
        let sym = (&sym + sym.transpose()) * 0.5;
        let mut eigen: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigen.sort_by(|a, b| b.partial_cmp(a).expect("real eigenvalues"));
        debug_assert!(libm::fabs(eigen[0] - 1.0) < 1e-8);
        let lambda_2 = eigen[1];
        let lambda_n = eigen[n - 1];
        lambda_2.max(libm::fabs(lambda_n)).max(0.0)
    }

    /// General case: second-largest modulus over the complex spectrum, with
    /// the Perron root (the eigenvalue nearest 1) removed.
    fn rho_general(&self) -> f64 {
        let modulus = |z: Complex<f64>| libm::sqrt(z.re * z.re + z.im * z.im);
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| self.get(i, j));
        let eigen = m.complex_eigenvalues();
        let one = Complex::new(1.0, 0.0);
        let perron = (0..n)
            .min_by(|&a, &b| {
                let da = modulus(eigen[a] - one);
                let db = modulus(eigen[b] - one);
                da.partial_cmp(&db).expect("finite eigenvalues")
            })
            .expect("nonempty spectrum");
        (0..n)
            .filter(|&k| k != perron)
            .map(|k| modulus(eigen[k]))
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// ---------------------------------------------------------------------------
// Spectral profile and derived quantities
// ---------------------------------------------------------------------------

/// Stationary and spectral summary of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub reversible: bool,
    /// Common period of all states; `None` when reducible.
    pub period: Option<usize>,
    /// Stationary distribution; `None` when reducible.
    pub pi: Option<Vec<f64>>,
    /// `max { lambda_2, |lambda_n| }`; `None` when reducible.
    pub rho: Option<f64>,
}

/// Distance norm for the network-imbalance quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImbalanceNorm {
    L2,
    /// Total variation, `(1/2) * l1`.
    Tv,
}

/// Distance between a stationary distribution and the uniform one.
pub fn imbalance(pi: &[f64], norm: ImbalanceNorm) -> f64 {
    let n = pi.len() as f64;
    let uniform = 1.0 / n;
    match norm {
        ImbalanceNorm::L2 => {
            libm::sqrt(pi.iter().map(|&p| (p - uniform) * (p - uniform)).sum())
        }
        ImbalanceNorm::Tv => 0.5 * pi.iter().map(|&p| libm::fabs(p - uniform)).sum::<f64>(),
    }
}

/// Per-node prefactor in the reversible deviation bound.
///
/// The two forms below both circulate for this bound; they coincide only at
/// `pi_i = 1/2`. Which one is actually a valid upper bound is settled
/// empirically by the acceptance suite, and [`DeviationFactor::default`]
/// pins the winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationFactor {
    /// `(1 - pi_i) / pi_i`
    InverseOdds,
    /// `pi_i / (1 - pi_i)`
    Odds,
}

impl DeviationFactor {
    pub fn factor(self, pi_i: f64) -> f64 {
        match self {
            DeviationFactor::InverseOdds => (1.0 - pi_i) / pi_i,
            DeviationFactor::Odds => pi_i / (1.0 - pi_i),
        }
    }
}

impl Default for DeviationFactor {
    /// The dominance study (acceptance criterion on random reversible
    /// chains) validates the `(1 - pi_i) / pi_i` form.
    fn default() -> Self {
        DeviationFactor::InverseOdds
    }
}

/// Deviation of `[W^t]_{i.}` from `pi`, weighted by `r`, together with its
/// geometric bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationBound {
    /// `sqrt( factor_i * sum_j pi_j r_j^2 ) * rho^t`
    pub bound: f64,
    /// `sum_j |[W^t]_{ij} - pi_j| r_j`
    pub exact: f64,
}

/// Evaluates the reversible-chain deviation bound at node `i` and time `t`
/// with nonnegative weights `r`, alongside the exact deviation.
pub fn deviation_bound(
    w: &WeightMatrix,
    i: usize,
    t: usize,
    r: &[f64],
    factor: DeviationFactor,
) -> Result<DeviationBound> {
    if r.len() != w.n() {
        return Err(Error::DimensionMismatch { expected: w.n(), got: r.len() });
    }
    if let Some(&bad) = r.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "deviation weights must be finite and nonnegative, got {bad}"
        )));
    }
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
    let pi = profile.pi.expect("irreducible profile has pi");
    let rho = profile.rho.expect("irreducible profile has rho");

    let row = w.power_row(i, t);
    let exact: f64 = row
        .iter()
        .zip(&pi)
        .zip(r)
        .map(|((&p, &q), &rj)| libm::fabs(p - q) * rj)
        .sum();
    let weighted: f64 = pi.iter().zip(r).map(|(&p, &rj)| p * rj * rj).sum();
    let bound = libm::sqrt(factor.factor(pi[i]) * weighted) * libm::pow(rho, t as f64);
    Ok(DeviationBound { bound, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ring_graph(n: usize, bidirectional: bool, self_loops: bool) -> DirectedGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n));
            if bidirectional {
                edges.push(((i + 1) % n, i));
            }
            if self_loops {
                edges.push((i, i));
            }
        }
        DirectedGraph::new(n, edges).unwrap()
    }

    fn two_node() -> WeightMatrix {
        WeightMatrix::from_rows(&[vec![0.8, 0.2], vec![0.5, 0.5]]).unwrap()
    }

    // ----- uniform weights ---------------------------------------------

    #[test]
    fn uniform_on_complete_graph_is_flat() {
        let edges = (0..4).flat_map(|i| (0..4).map(move |j| (i, j)));
        let g = DirectedGraph::new(4, edges).unwrap();
        let w = WeightMatrix::uniform(&g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(w.get(i, j), 0.25);
            }
        }
    }

    #[test]
    fn uniform_on_two_node_mutual_graph() {
        let g = DirectedGraph::new(2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let w = WeightMatrix::uniform(&g).unwrap();
        assert_eq!(w.row(0), &[0.5, 0.5]);
        assert_eq!(w.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn uniform_on_directed_ring_is_permutation() {
        let g = ring_graph(3, false, false);
        let w = WeightMatrix::uniform(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if j == (i + 1) % 3 { 1.0 } else { 0.0 };
                assert_eq!(w.get(i, j), expect);
            }
        }
    }

    #[test]
    fn uniform_reports_the_starved_node() {
        let g = DirectedGraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(
            WeightMatrix::uniform(&g).unwrap_err(),
            Error::EmptyNeighborhood { node: 1 }
        );
    }

    // ----- scale-free generator ----------------------------------------

    #[test]
    fn scale_free_minimal_attachment_yields_tree_skeleton() {
        let g = generate_scale_free(3, 1, 99).unwrap();
        // 2 undirected skeleton edges (4 directed) + 3 self-loops
        assert_eq!(g.edge_count(), 7);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn scale_free_is_strongly_connected() {
        let g = generate_scale_free(100, 2, 7).unwrap();
        // Independent reachability oracle: directed BFS from every node.
        for start in 0..100 {
            let mut seen = vec![false; 100];
            let mut queue = alloc::collections::VecDeque::from([start]);
            seen[start] = true;
            while let Some(u) = queue.pop_front() {
                for &v in g.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            assert!(seen.iter().all(|&s| s), "node {start} cannot reach everyone");
        }
    }

    #[test]
    fn scale_free_is_deterministic_per_seed() {
        let a = generate_scale_free(40, 2, 5).unwrap();
        let b = generate_scale_free(40, 2, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_scale_free(40, 2, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scale_free_rejects_bad_attachment() {
        assert!(matches!(generate_scale_free(3, 3, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_scale_free(3, 0, 0), Err(Error::InvalidParameter(_))));
    }

    // ----- stationary distribution --------------------------------------

    #[test]
    fn stationary_of_two_node_chain() {
        let pi = two_node().stationary_distribution().unwrap();
        assert!((pi[0] - 5.0 / 7.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_has_uniform_stationary() {
        let w = WeightMatrix::from_rows(&[
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let pi = w.stationary_distribution().unwrap();
        for &p in &pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(imbalance(&pi, ImbalanceNorm::Tv) < 1e-10);
        assert!(imbalance(&pi, ImbalanceNorm::L2) < 1e-10);
    }

    #[test]
    fn rank_one_matrix_has_uniform_stationary() {
        let n = 5;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0 / n as f64; n]).collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let pi = w.stationary_distribution().unwrap();
        for &p in &pi {
            assert!((p - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_rejects_reducible_chain_with_components() {
        let w = WeightMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        match w.stationary_distribution() {
            Err(Error::Reducible { components }) => {
                assert_eq!(components, vec![vec![1], vec![0]]);
            }
            other => panic!("expected reducible error, got {other:?}"),
        }
    }

    // ----- spectral profile ----------------------------------------------

    #[test]
    fn rank_one_matrix_has_zero_rho() {
        let rows: Vec<Vec<f64>> = (0..4).map(|_| vec![0.25; 4]).collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let p = w.spectral_profile();
        assert!(p.irreducible && p.aperiodic && p.reversible);
        assert!(p.rho.unwrap().abs() < 1e-9);
    }

    #[test]
    fn symmetric_ring_spectrum() {
        // Odd ring, half confidence to each neighbor. The full real spectrum
        // is cos(2 pi k / n); the second-largest eigenvalue is cos(2 pi / n)
        // and the largest magnitude below one is cos(pi / n).
        let n = 5;
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[(i + 1) % n] = 0.5;
            row[(i + n - 1) % n] = 0.5;
        }
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let p = w.spectral_profile();
        assert!(p.reversible && p.irreducible && p.aperiodic);
        let rho = p.rho.unwrap();
        let pi = core::f64::consts::PI;
        assert!((rho - libm::cos(pi / n as f64)).abs() < 1e-10);
    }

    #[test]
    fn two_node_chain_spectrum() {
        let p = two_node().spectral_profile();
        assert!(p.reversible);
        assert!((p.rho.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(p.period, Some(1));
    }

    #[test]
    fn non_reversible_circulant_rho() {
        // Circulant with first row (0.5, 0.5, 0): eigenvalues 0.5 (1 + w^k),
        // so the non-Perron moduli are both 0.5.
        let w = WeightMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        let p = w.spectral_profile();
        assert!(!p.reversible);
        assert!((p.rho.unwrap() - 0.5).abs() < 1e-10);
    }

    // ----- connectivity and components -----------------------------------

    #[test]
    fn strong_connectivity_basics() {
        assert!(ring_graph(6, true, false).is_strongly_connected());
        let mut edges = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                edges.push((i, j));
                edges.push((i + 3, j + 3));
            }
        }
        let disjoint = DirectedGraph::new(6, edges).unwrap();
        assert!(!disjoint.is_strongly_connected());
        let singleton = DirectedGraph::new(1, [(0, 0)]).unwrap();
        assert!(singleton.is_strongly_connected());
    }

    #[test]
    fn scc_on_strongly_connected_graph_is_single() {
        let comps = ring_graph(5, true, true).scc_decomposition();
        assert_eq!(comps, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn scc_chain_orders_reader_before_source() {
        // Component {0,1} reads from component {2,3}; sources sort last.
        let g = DirectedGraph::new(
            4,
            [(0, 1), (1, 0), (2, 3), (3, 2), (0, 2)],
        )
        .unwrap();
        let comps = g.scc_decomposition();
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3]]);
        // No information flows from the source block back into the reader.
        for &i in &comps[1] {
            for &j in &comps[0] {
                assert!(!g.has_edge(i, j));
            }
        }
    }

    #[test]
    fn scc_four_component_structure() {
        // a={0,1} reads c; b={2} reads c and d; c={3,4} reads d; d={5} closed.
        let g = DirectedGraph::new(
            6,
            [
                (0, 1),
                (1, 0),
                (3, 4),
                (4, 3),
                (0, 3),
                (2, 4),
                (2, 5),
                (3, 5),
                (5, 5),
            ],
        )
        .unwrap();
        let comps = g.scc_decomposition();
        assert_eq!(comps.len(), 4);
        // Topological property: every edge stays within or moves rightward.
        let mut index = vec![0usize; 6];
        for (k, comp) in comps.iter().enumerate() {
            for &v in comp {
                index[v] = k;
            }
        }
        for (i, j) in g.edges() {
            assert!(index[i] <= index[j], "edge ({i},{j}) flows backwards");
        }
        // The closed component sorts last.
        assert_eq!(comps.last().unwrap(), &vec![5]);
    }

    // ----- period ---------------------------------------------------------

    fn brute_force_period(w: &WeightMatrix) -> usize {
        // gcd of { t <= 2 n^2 : [W^t]_{00} > 0 } on the support digraph.
        let n = w.n();
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            reach[i][i] = true;
        }
        let mut g = 0u64;
        for t in 1..=(2 * n * n) {
            let mut next = vec![vec![false; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if reach[i][k] {
                        for j in 0..n {
                            if w.get(k, j) > 0.0 {
                                next[i][j] = true;
                            }
                        }
                    }
                }
            }
            reach = next;
            if reach[0][0] {
                g = gcd(g, t as u64);
            }
        }
        g as usize
    }

    #[test]
    fn period_one_with_any_self_loop() {
        assert_eq!(two_node().period().unwrap(), 1);
    }

    #[test]
    fn period_of_even_bidirectional_ring_is_two() {
        let g = ring_graph(4, true, false);
        let w = WeightMatrix::uniform(&g).unwrap();
        assert_eq!(w.period().unwrap(), 2);
        assert_eq!(brute_force_period(&w), 2);
        let p = w.spectral_profile();
        assert!(!p.aperiodic);
        assert!((p.rho.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn period_of_directed_three_cycle_is_three() {
        let g = ring_graph(3, false, false);
        let w = WeightMatrix::uniform(&g).unwrap();
        assert_eq!(w.period().unwrap(), 3);
        assert_eq!(brute_force_period(&w), 3);
    }

    #[test]
    fn period_rejects_reducible_chains() {
        let w = WeightMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(w.period(), Err(Error::Reducible { .. })));
    }

    // ----- imbalance -------------------------------------------------------

    #[test]
    fn imbalance_examples() {
        let uniform = vec![0.25; 4];
        assert_eq!(imbalance(&uniform, ImbalanceNorm::L2), 0.0);
        assert_eq!(imbalance(&uniform, ImbalanceNorm::Tv), 0.0);

        let pi = vec![5.0 / 7.0, 2.0 / 7.0];
        assert!((imbalance(&pi, ImbalanceNorm::Tv) - 3.0 / 14.0).abs() < 1e-15);

        let n = 6;
        let mut point = vec![0.0; n];
        point[0] = 1.0;
        let expect = (n as f64 - 1.0) / n as f64;
        assert!((imbalance(&point, ImbalanceNorm::Tv) - expect).abs() < 1e-15);
    }

    // ----- matrix powers and deviation -------------------------------------

    #[test]
    fn power_row_at_zero_and_one() {
        let w = two_node();
        assert_eq!(w.power_row(0, 0), vec![1.0, 0.0]);
        assert_eq!(w.power_row(1, 1), vec![0.5, 0.5]);
    }

    #[test]
    fn power_row_converges_to_stationary() {
        let w = two_node();
        let pi = w.stationary_distribution().unwrap();
        let row = w.power_row(1, 10_000);
        let l1: f64 = row.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 1e-8);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn deviation_bound_at_time_zero_with_pi_weights() {
        // Reversible 3-node birth-death chain.
        let w = WeightMatrix::from_rows(&[
            vec![0.6, 0.4, 0.0],
            vec![0.2, 0.5, 0.3],
            vec![0.0, 0.6, 0.4],
        ])
        .unwrap();
        let pi = w.stationary_distribution().unwrap();
        for i in 0..3 {
            let d = deviation_bound(&w, i, 0, &pi, DeviationFactor::InverseOdds).unwrap();
            let expect: f64 = (0..3)
                .map(|j| pi[j] * (if i == j { 1.0 - pi[j] } else { pi[j] }).abs())
                .sum();
            assert!((d.exact - expect).abs() < 1e-14);
            assert!(d.bound + 1e-12 >= d.exact);
        }
    }

    #[test]
    fn deviation_vanishes_on_rank_one_matrix() {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| vec![1.0 / 3.0; 3]).collect();
        let w = WeightMatrix::from_rows(&rows).unwrap();
        let r = vec![1.0, 2.0, 3.0];
        let d = deviation_bound(&w, 0, 1, &r, DeviationFactor::InverseOdds).unwrap();
        assert!(d.exact < 1e-14);
        assert!(d.bound < 1e-12);
    }

    #[test]
    fn deviation_bound_dominates_explicit_fifth_power() {
        let w = two_node();
        // Independent oracle: explicit 2x2 matrix powers.
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        let base = [[0.8, 0.2], [0.5, 0.5]];
        for _ in 0..5 {
            let mut next = [[0.0; 2]; 2];
            for (row_next, row_m) in next.iter_mut().zip(&m) {
                for (k, &mk) in row_m.iter().enumerate() {
                    row_next[0] += mk * base[k][0];
                    row_next[1] += mk * base[k][1];
                }
            }
            m = next;
        }
        let pi = [5.0f64 / 7.0, 2.0 / 7.0];
        let expect: f64 = (m[0][0] - pi[0]).abs() + (m[0][1] - pi[1]).abs();
        let d = deviation_bound(&w, 0, 5, &[1.0, 1.0], DeviationFactor::InverseOdds).unwrap();
        assert!((d.exact - expect).abs() < 1e-13);
        assert!(d.bound >= d.exact);
        // frozen from the oracle above
        assert!((d.exact - 1.3885714285716277e-3).abs() < 1e-12);
    }

    #[test]
    fn deviation_bound_rejects_periodic_and_non_reversible() {
        let ring = WeightMatrix::uniform(&ring_graph(4, true, false)).unwrap();
        assert!(matches!(
            deviation_bound(&ring, 0, 1, &[1.0; 4], DeviationFactor::InverseOdds),
            Err(Error::Periodic { period: 2 })
        ));
        let spinner = WeightMatrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        assert!(matches!(
            deviation_bound(&spinner, 0, 1, &[1.0; 3], DeviationFactor::InverseOdds),
            Err(Error::NotReversible)
        ));
    }

    // ----- randomized invariants -------------------------------------------

    use proptest::prelude::*;

    prop_compose! {
        /// Random reversible chain: random walk on a connected weighted
        /// undirected graph with self-loops.
        fn reversible_chain(max_n: usize)
            (n in 2..=max_n)
            (n in Just(n),
             weights in proptest::collection::vec(0.1f64..1.0, (max_n * (max_n + 1)) / 2),
             loops in proptest::collection::vec(0.05f64..0.5, max_n))
            -> WeightMatrix
        {
            let mut sym = vec![vec![0.0; n]; n];
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    // keep a path backbone always present, thin other edges
                    let keep = j == i + 1 || weights[k] > 0.5;
                    if keep {
                        sym[i][j] = weights[k];
                        sym[j][i] = weights[k];
                    }
                    k += 1;
                }
                sym[i][i] = loops[i];
            }
            let rows: Vec<Vec<f64>> = sym
                .iter()
                .map(|row| {
                    let s: f64 = row.iter().sum();
                    row.iter().map(|x| x / s).collect()
                })
                .collect();
            WeightMatrix::from_rows(&rows).unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn powers_stay_row_stochastic(w in reversible_chain(5), t in 0usize..40) {
            for i in 0..w.n() {
                let row = w.power_row(i, t);
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&x| x >= -1e-15));
            }
        }

        #[test]
        fn stationary_is_a_fixed_point(w in reversible_chain(6)) {
            let pi = w.stationary_distribution().unwrap();
            let next = w.left_mul(&pi);
            let l1: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(l1 < 1e-10);
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn classical_deviation_factor_dominates(
            w in reversible_chain(5),
            i in 0usize..5,
            t in 0usize..50,
            r in proptest::collection::vec(0.0f64..3.0, 5),
        ) {
            let i = i % w.n();
            let r = &r[..w.n()];
            let d = deviation_bound(&w, i, t, r, DeviationFactor::InverseOdds).unwrap();
            prop_assert!(d.exact <= d.bound + 1e-12);
        }

        #[test]
        fn deviation_contracts_in_the_chain_norm(w in reversible_chain(5)) {
            // Reversibility makes right multiplication self-adjoint in the
            // 1/pi-weighted l2 norm, so the deviation contracts by exactly
            // rho per step there. (The plain l1 ratio can transiently exceed
            // rho when positive and negative spectrum branches interleave.)
            let profile = w.spectral_profile();
            let rho = profile.rho.unwrap();
            let pi = profile.pi.unwrap();
            let norm = |row: &[f64]| -> f64 {
                libm::sqrt(
                    row.iter()
                        .zip(&pi)
                        .map(|(&x, &p)| (x - p) * (x - p) / p)
                        .sum(),
                )
            };
            for i in 0..w.n() {
                let mut prev = norm(&w.power_row(i, 0));
                for t in 1..20 {
                    let cur = norm(&w.power_row(i, t));
                    prop_assert!(cur <= rho * prev * (1.0 + 1e-9) + 1e-12);
                    prev = cur;
                }
            }
        }

        #[test]
        fn period_matches_brute_force(w in reversible_chain(4)) {
            prop_assert_eq!(w.period().unwrap(), brute_force_period(&w));
        }
    }
}
