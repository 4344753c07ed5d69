//! Communication graphs and Metropolis consensus matrices.
//!
//! Agents exchange iterates along the edges of a connected undirected graph.
//! The Metropolis rule turns any such graph into a symmetric doubly
//! stochastic matrix W whose consensus contraction factor
//! rho = ||W - (1/n) 11^T|| is strictly below 1; rho drives how fast the
//! network forgets disagreement.

use nalgebra::DMatrix;

use crate::rng::RandomStream;
use crate::{Error, Result};

/// Maximum attempts at sampling a connected Erdos-Renyi graph.
const ER_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Complete,
    Ring,
    Path,
    /// Square lattice with 4-neighbor adjacency; n must be a perfect square.
    Grid,
    /// G(n, p), resampled until connected.
    ErdosRenyi,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Complete => "complete",
            GraphKind::Ring => "ring",
            GraphKind::Path => "path",
            GraphKind::Grid => "grid",
            GraphKind::ErdosRenyi => "erdos_renyi",
        }
    }
}

/// Undirected simple graph on nodes 0..n.
#[derive(Debug, Clone)]
pub struct GraphTopology {
    n: usize,
    /// Normalized edge list: i < j, sorted, no duplicates.
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl GraphTopology {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }
}

fn normalize_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for e in edges.iter_mut() {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
    }
    edges.retain(|&(i, j)| i != j && j < n);
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Builds a topology. `param` is the edge probability for `ErdosRenyi` and
/// must be absent for the deterministic kinds; `stream` is only consumed for
/// random graphs.
pub fn build_topology(
    kind: GraphKind,
    n: usize,
    param: Option<f64>,
    stream: &mut RandomStream,
) -> Result<GraphTopology> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if param.is_some() && kind != GraphKind::ErdosRenyi {
        return Err(Error::UnexpectedParam(kind.name()));
    }
    let edges = match kind {
        GraphKind::Complete => {
            let mut e = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    e.push((i, j));
                }
            }
            e
        }
        GraphKind::Ring => {
            // A 2-cycle would duplicate the edge; normalization dedupes it.
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        }
        GraphKind::Path => (1..n).map(|i| (i - 1, i)).collect(),
        GraphKind::Grid => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n {
                return Err(Error::GridShape(n));
            }
            let mut e = Vec::new();
            for r in 0..m {
                for c in 0..m {
                    let v = r * m + c;
                    if c + 1 < m {
                        e.push((v, v + 1));
                    }
                    if r + 1 < m {
                        e.push((v, v + m));
                    }
                }
            }
            e
        }
        GraphKind::ErdosRenyi => {
            let p = param.ok_or(Error::EdgeProbability(f64::NAN))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::EdgeProbability(p));
            }
            let mut found = None;
            for _ in 0..ER_ATTEMPTS {
                let mut e = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if stream.sample_unit() < p {
                            e.push((i, j));
                        }
                    }
                }
                let g = GraphTopology { n, edges: normalize_edges(n, e), kind };
                if g.is_connected() {
                    found = Some(g.edges);
                    break;
                }
            }
            found.ok_or(Error::Connectivity(ER_ATTEMPTS))?
        }
    };
    let g = GraphTopology { n, edges: normalize_edges(n, edges), kind };
    debug_assert!(g.is_connected());
    Ok(g)
}

/// Symmetric doubly stochastic mixing matrix with its contraction factor.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    n: usize,
    /// Row-major n x n entries.
    w: Vec<f64>,
    rho: f64,
}

impl MixingMatrix {
    /// Wraps explicit row-major entries, for custom or diagnostic weights
    /// (e.g. W = I). Requires a square shape, symmetry, nonnegative entries,
    /// and unit row sums, all to 1e-12.
    pub fn from_entries(n: usize, w: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if w.len() != n * n {
            return Err(Error::Shape { expected: n * n, got: w.len() });
        }
        for i in 0..n {
            let row_sum: f64 = w[i * n..(i + 1) * n].iter().sum();
            if (row_sum - 1.0).abs() > 1e-12 {
                return Err(Error::Mixing(format!("row {i} sums to {row_sum}, expected 1")));
            }
            for j in 0..n {
                let v = w[i * n + j];
                if !(v >= 0.0) || (v - w[j * n + i]).abs() > 1e-12 {
                    return Err(Error::Mixing(format!(
                        "entry ({i},{j}) = {v} breaks symmetry or sign"
                    )));
                }
            }
        }
        let rho = spectral_gap(&w, n);
        Ok(Self { n, w, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Contraction factor rho = ||W - (1/n) 11^T||.
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Metropolis weights: W_ij = 1 / (2 max(deg_i, deg_j)) on edges, zero off
/// edges, diagonal filling each row to sum one. The complete graph is the
/// special case where averaging is exact, W = (1/n) 11^T, built directly so
/// its entries and rho = 0 are exact.
pub fn metropolis_matrix(g: &GraphTopology) -> MixingMatrix {
    let n = g.n();
    let mut w = vec![0.0; n * n];
    if g.kind() == GraphKind::Complete {
        let v = 1.0 / n as f64;
        w.fill(v);
        return MixingMatrix { n, w, rho: 0.0 };
    }
    let deg = g.degrees();
    for &(i, j) in g.edges() {
        let v = 1.0 / (2.0 * deg[i].max(deg[j]) as f64);
        w[i * n + j] = v;
        w[j * n + i] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[i * n + j]).sum();
        w[i * n + i] = 1.0 - off;
    }
    let rho = spectral_gap(&w, n);
    MixingMatrix { n, w, rho }
}

/// Operator norm of W - (1/n) 11^T for symmetric W, via eigendecomposition
/// of the deflated matrix itself (subtracting the consensus projector
/// removes the trivial eigenvalue 1).
pub fn spectral_gap(w: &[f64], n: usize) -> f64 {
    assert_eq!(w.len(), n * n, "matrix shape");
    let c = 1.0 / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| {
        // Symmetrize defensively; inputs are symmetric up to rounding.
        0.5 * (w[i * n + j] + w[j * n + i]) - c
    });
    let eig = m.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamFactory};
    use approx::assert_relative_eq;

    fn stream() -> RandomStream {
        StreamFactory::new(12345).stream(Purpose::Instance, 0, 0)
    }

    fn build(kind: GraphKind, n: usize, p: Option<f64>) -> GraphTopology {
        build_topology(kind, n, p, &mut stream()).unwrap()
    }

    #[test]
    fn deterministic_topologies_have_expected_edge_counts() {
        assert_eq!(build(GraphKind::Complete, 6, None).edges().len(), 15);
        assert_eq!(build(GraphKind::Ring, 6, None).edges().len(), 6);
        assert_eq!(build(GraphKind::Path, 6, None).edges().len(), 5);
        assert_eq!(build(GraphKind::Grid, 9, None).edges().len(), 12);
        // Degenerate rings: n = 2 collapses to a single edge, n = 1 to none.
        assert_eq!(build(GraphKind::Ring, 2, None).edges().len(), 1);
        assert_eq!(build(GraphKind::Ring, 1, None).edges().len(), 0);
    }

    #[test]
    fn grid_needs_square_node_count() {
        assert!(matches!(
            build_topology(GraphKind::Grid, 8, None, &mut stream()),
            Err(Error::GridShape(8))
        ));
    }

    #[test]
    fn param_only_for_random_graphs() {
        assert!(matches!(
            build_topology(GraphKind::Ring, 5, Some(0.5), &mut stream()),
            Err(Error::UnexpectedParam(_))
        ));
        assert!(matches!(
            build_topology(GraphKind::ErdosRenyi, 5, Some(1.5), &mut stream()),
            Err(Error::EdgeProbability(_))
        ));
        assert!(matches!(
            build_topology(GraphKind::ErdosRenyi, 5, None, &mut stream()),
            Err(Error::EdgeProbability(_))
        ));
    }

    #[test]
    fn erdos_renyi_is_connected_and_deterministic_per_stream() {
        let g1 = build_topology(GraphKind::ErdosRenyi, 12, Some(0.4), &mut stream()).unwrap();
        let g2 = build_topology(GraphKind::ErdosRenyi, 12, Some(0.4), &mut stream()).unwrap();
        assert!(g1.is_connected());
        assert_eq!(g1.edges(), g2.edges());
        // p = 1 must reproduce the complete edge set on the first attempt.
        let full = build_topology(GraphKind::ErdosRenyi, 7, Some(1.0), &mut stream()).unwrap();
        assert_eq!(full.edges().len(), 21);
    }

    #[test]
    fn erdos_renyi_gives_up_after_bounded_attempts() {
        // p tiny on a sizable graph: With 100 attempts at p = 1e-9 the chance
        // of connectivity is astronomically small, so this must error rather
        // than loop forever.
        let r = build_topology(GraphKind::ErdosRenyi, 20, Some(1e-9), &mut stream());
        assert!(matches!(r, Err(Error::Connectivity(100))));
    }

    #[test]
    fn metropolis_path_three_matches_hand_computation() {
        // Degrees (1, 2, 1): off-diagonals 1/4, diagonal fills to one.
        let g = build(GraphKind::Path, 3, None);
        let w = metropolis_matrix(&g);
        let expected = [[0.75, 0.25, 0.0], [0.25, 0.5, 0.25], [0.0, 0.25, 0.75]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(w.entry(i, j), expected[i][j], epsilon = 1e-15);
            }
        }
        // Eigenvalues of W are {1, 3/4, 1/4}, so rho = 3/4.
        assert_relative_eq!(w.rho(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn metropolis_ring_four_has_rho_one_half() {
        // All degrees 2: off-diagonal 1/4, diagonal 1/2; spectrum
        // {1, 1/2, 1/2, 0}.
        let g = build(GraphKind::Ring, 4, None);
        let w = metropolis_matrix(&g);
        assert_relative_eq!(w.entry(0, 0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(w.entry(0, 1), 0.25, epsilon = 1e-15);
        assert_relative_eq!(w.rho(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn complete_graph_averages_exactly() {
        let g = build(GraphKind::Complete, 5, None);
        let w = metropolis_matrix(&g);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(w.entry(i, j), 0.2);
            }
        }
        assert_eq!(w.rho(), 0.0);
    }

    #[test]
    fn single_node_graph_mixes_trivially() {
        let g = build(GraphKind::Path, 1, None);
        let w = metropolis_matrix(&g);
        assert_eq!(w.entry(0, 0), 1.0);
        assert_eq!(w.rho(), 0.0);
    }

    #[test]
    fn mixing_matrices_are_doubly_stochastic_and_supported_on_edges() {
        let mut s = stream();
        let graphs = vec![
            build(GraphKind::Ring, 10, None),
            build(GraphKind::Path, 7, None),
            build(GraphKind::Grid, 16, None),
            build_topology(GraphKind::ErdosRenyi, 15, Some(0.3), &mut s).unwrap(),
        ];
        for g in &graphs {
            let n = g.n();
            let w = metropolis_matrix(g);
            for i in 0..n {
                let row: f64 = (0..n).map(|j| w.entry(i, j)).sum();
                let col: f64 = (0..n).map(|j| w.entry(j, i)).sum();
                assert!((row - 1.0).abs() < 1e-12);
                assert!((col - 1.0).abs() < 1e-12);
                for j in 0..n {
                    assert_eq!(w.entry(i, j), w.entry(j, i));
                    assert!(w.entry(i, j) >= -1e-15);
                    if i != j && w.entry(i, j) != 0.0 {
                        let e = (i.min(j), i.max(j));
                        assert!(g.edges().contains(&e), "nonzero off edge {e:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn rho_respects_the_universal_bound() {
        // rho < 1 - 1/(71 n^2) for Metropolis on connected graphs.
        let mut s = stream();
        let mut cases: Vec<GraphTopology> = Vec::new();
        for n in [2, 3, 5, 10, 25, 50] {
            cases.push(build(GraphKind::Ring, n, None));
            cases.push(build(GraphKind::Path, n, None));
            cases.push(build(GraphKind::Complete, n, None));
        }
        for n in [4, 9, 16, 25, 49] {
            cases.push(build(GraphKind::Grid, n, None));
        }
        for _ in 0..5 {
            cases.push(build_topology(GraphKind::ErdosRenyi, 20, Some(0.2), &mut s).unwrap());
        }
        for g in &cases {
            let w = metropolis_matrix(g);
            let bound = 1.0 - 1.0 / (71.0 * (g.n() * g.n()) as f64);
            assert!(
                w.rho() < bound,
                "{} n={}: rho {} vs bound {}",
                g.kind().name(),
                g.n(),
                w.rho(),
                bound
            );
        }
    }

    #[test]
    fn matrix_powers_contract_at_rate_rho() {
        // ||W^k - (1/n)11^T|| = rho^k for symmetric W; verify numerically.
        let g = build(GraphKind::Path, 6, None);
        let w = metropolis_matrix(&g);
        let n = g.n();
        let dm = DMatrix::from_fn(n, n, |i, j| w.entry(i, j));
        let mut pk = DMatrix::identity(n, n);
        for k in 1..=40 {
            pk = &pk * &dm;
            let mut flat = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    flat[i * n + j] = pk[(i, j)];
                }
            }
            let dev = spectral_gap(&flat, n);
            assert!(dev <= w.rho().powi(k) + 1e-9, "k={k}: {dev} > {}", w.rho().powi(k));
        }
    }
}
