//! Matrix-weighted, time-scaled graphs and their incidence algebra.
//!
//! Nodes are 0-based internally. For an edge `{i, j}` with `i < j` the
//! incidence column carries `-1` at node `i` and `+1` at node `j`, so the
//! edge state is `x_j - x_i`.

use std::collections::{HashSet, VecDeque};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

const SPD_ATTEMPTS: usize = 1000;

/// Connected graph with SPD `k×k` edge weights and per-substate time scales.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixWeightedGraph {
    n: usize,
    k: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<Mat>,
    timescales: Vec<Vec<f64>>,
}

impl MatrixWeightedGraph {
    /// Validates and builds a graph. `edges` use 0-based node indices.
    pub fn new(
        n: usize,
        k: usize,
        edges: Vec<(usize, usize)>,
        weights: Vec<Mat>,
        timescales: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("n and k must be positive".into()));
        }
        if weights.len() != edges.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} edges",
                weights.len(),
                edges.len()
            )));
        }
        if timescales.len() != n {
            return Err(Error::Dimension(format!("{} timescale rows for {n} nodes", timescales.len())));
        }
        let mut seen = HashSet::new();
        for &(i, j) in &edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i, j));
            }
        }
        for (e, w) in weights.iter().enumerate() {
            if w.nrows() != k || w.ncols() != k {
                return Err(Error::Dimension(format!("weight on edge {e} is {}x{}, expected {k}x{k}", w.nrows(), w.ncols())));
            }
            if !linalg::is_spd(w) {
                return Err(Error::NonSpdWeight { edge: e });
            }
        }
        for (i, row) in timescales.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Dimension(format!("node {i} has {} time scales, expected {k}", row.len())));
            }
            if let Some(j) = row.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(Error::NonPositiveScale { node: i, substate: j });
            }
        }
        let weights = weights.iter().map(linalg::symmetrize).collect();
        let g = Self { n, k, edges, weights, timescales };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Graph with identical weight `w` on every edge and unit time scales.
    pub fn uniform(n: usize, edges: Vec<(usize, usize)>, w: &Mat) -> Result<Self> {
        let k = w.nrows();
        let weights = vec![w.clone(); edges.len()];
        Self::new(n, k, edges, weights, vec![vec![1.0; k]; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn timescales(&self) -> &[Vec<f64>] {
        &self.timescales
    }

    /// Unweighted degree of node `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n
    }

    pub fn with_weights(&self, weights: Vec<Mat>) -> Result<Self> {
        Self::new(self.n, self.k, self.edges.clone(), weights, self.timescales.clone())
    }

    pub fn with_timescales(&self, timescales: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.n, self.k, self.edges.clone(), self.weights.clone(), timescales)
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Per-node list of `(neighbor, edge index)` in edge input order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        adj
    }

    /// `𝐖 = Blkdiag(W_1, …, W_|E|)`.
    pub fn weight_blocks(&self) -> BlockDiagonal {
        BlockDiagonal::new(self.k, self.weights.clone())
    }

    /// `𝐄 = Blkdiag(E_1, …, E_n)`.
    pub fn timescale_blocks(&self) -> BlockDiagonal {
        let blocks = self
            .timescales
            .iter()
            .map(|row| Mat::from_diagonal(&DVector::from_column_slice(row)))
            .collect();
        BlockDiagonal::new(self.k, blocks)
    }

    /// Diagonal of `𝐄` in node-major order.
    pub fn timescale_diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n * self.k, self.timescales.iter().flatten().copied())
    }

    /// Signed incidence matrix `D` (n × |E|).
    pub fn incidence_matrix(&self) -> Mat {
        let mut d = Mat::zeros(self.n, self.edges.len());
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (lo, hi) = (a.min(b), a.max(b));
            d[(lo, e)] = -1.0;
            d[(hi, e)] = 1.0;
        }
        d
    }
}

/// Block-diagonal matrix of equally sized `k×k` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    k: usize,
    blocks: Vec<Mat>,
}

impl BlockDiagonal {
    pub fn new(k: usize, blocks: Vec<Mat>) -> Self {
        debug_assert!(blocks.iter().all(|b| b.nrows() == k && b.ncols() == k));
        Self { k, blocks }
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.k * self.blocks.len()
    }

    pub fn assemble(&self) -> Mat {
        let refs: Vec<&Mat> = self.blocks.iter().collect();
        linalg::block_diag(&refs)
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self::new(self.k, self.blocks.iter().map(f).collect())
    }

    pub fn inverse(&self) -> Result<Self> {
        let blocks = self.blocks.iter().map(linalg::spd_inverse).collect::<Result<_>>()?;
        Ok(Self::new(self.k, blocks))
    }

    pub fn sqrt(&self) -> Self {
        self.map(linalg::sym_sqrt)
    }

    /// Extreme eigenvalues over all blocks.
    pub fn eig_range(&self) -> (f64, f64) {
        self.blocks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            let ev = linalg::sym_eigenvalues(b);
            (lo.min(ev[0]), hi.max(ev[ev.len() - 1]))
        })
    }
}

/// Incidence matrix split along a spanning tree, with Kronecker expansions.
///
/// Columns of `r` follow the original edge order, so `D = D_τ R` holds without
/// permutation; tree edge columns of `r` are unit vectors.
#[derive(Debug, Clone)]
pub struct IncidenceDecomposition {
    pub k: usize,
    pub d: Mat,
    pub tree_edges: Vec<usize>,
    pub cotree_edges: Vec<usize>,
    pub d_tau: Mat,
    pub d_c: Mat,
    pub t_tau_c: Mat,
    pub r: Mat,
}

impl IncidenceDecomposition {
    pub fn new(graph: &MatrixWeightedGraph) -> Self {
        let d = graph.incidence_matrix();
        let tree_edges = spanning_tree(graph);
        let in_tree: HashSet<usize> = tree_edges.iter().copied().collect();
        let cotree_edges: Vec<usize> = (0..graph.edge_count()).filter(|e| !in_tree.contains(e)).collect();
        let d_tau = d.select_columns(&tree_edges);
        let d_c = d.select_columns(&cotree_edges);
        let gram = d_tau.transpose() * &d_tau;
        // D_τᵀD_τ is the tree edge Laplacian, always SPD; entries of T are in {-1, 0, 1}.
        let t_raw = linalg::spd_solve(&gram, &(d_tau.transpose() * &d_c)).expect("tree edge Laplacian is SPD");
        let t_tau_c = t_raw.map(|v| {
            let r = v.round();
            debug_assert!((v - r).abs() < 1e-9);
            r
        });
        let m = graph.n() - 1;
        let mut r = Mat::zeros(m, graph.edge_count());
        for (col, &e) in tree_edges.iter().enumerate() {
            r[(col, e)] = 1.0;
        }
        for (col, &e) in cotree_edges.iter().enumerate() {
            r.column_mut(e).copy_from(&t_tau_c.column(col));
        }
        Self { k: graph.k(), d, tree_edges, cotree_edges, d_tau, d_c, t_tau_c, r }
    }

    /// `𝐃 = D ⊗ I_k`.
    pub fn d_k(&self) -> Mat {
        linalg::kron_eye(&self.d, self.k)
    }

    pub fn d_tau_k(&self) -> Mat {
        linalg::kron_eye(&self.d_tau, self.k)
    }

    pub fn d_c_k(&self) -> Mat {
        linalg::kron_eye(&self.d_c, self.k)
    }

    pub fn t_tau_c_k(&self) -> Mat {
        linalg::kron_eye(&self.t_tau_c, self.k)
    }

    pub fn r_k(&self) -> Mat {
        linalg::kron_eye(&self.r, self.k)
    }

    /// `‖D − D_τ R‖_∞`.
    pub fn reconstruction_error(&self) -> f64 {
        (&self.d - &self.d_tau * &self.r).amax()
    }
}

/// Breadth-first spanning tree rooted at node 0, scanning edges in input
/// order; returned edge indices are sorted.
pub fn spanning_tree(graph: &MatrixWeightedGraph) -> Vec<usize> {
    let adj = graph.adjacency();
    let mut seen = vec![false; graph.n()];
    let mut tree = Vec::with_capacity(graph.n().saturating_sub(1));
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        let mut incident = adj[u].clone();
        incident.sort_by_key(|&(_, e)| e);
        for (v, e) in incident {
            if !seen[v] {
                seen[v] = true;
                tree.push(e);
                queue.push_back(v);
            }
        }
    }
    tree.sort_unstable();
    tree
}

pub fn incidence(graph: &MatrixWeightedGraph) -> IncidenceDecomposition {
    IncidenceDecomposition::new(graph)
}

/// `L_w = 𝐃𝐖𝐃ᵀ`.
pub fn weighted_laplacian(graph: &MatrixWeightedGraph) -> Mat {
    let d = linalg::kron_eye(&graph.incidence_matrix(), graph.k());
    let w = graph.weight_blocks().assemble();
    linalg::symmetrize(&(&d * w * d.transpose()))
}

/// `L_w` assembled block by block from neighbor sums.
pub fn blockwise_laplacian(graph: &MatrixWeightedGraph) -> Mat {
    let k = graph.k();
    let mut l = Mat::zeros(graph.n() * k, graph.n() * k);
    for (&(a, b), w) in graph.edges().iter().zip(graph.weights()) {
        for (p, q, s) in [(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)] {
            let mut blk = l.view_mut((p * k, q * k), (k, k));
            blk += w * s;
        }
    }
    l
}

/// Unweighted Laplacian `L ⊗ I_k`.
pub fn unweighted_laplacian(graph: &MatrixWeightedGraph) -> Mat {
    let d = graph.incidence_matrix();
    linalg::kron_eye(&(&d * d.transpose()), graph.k())
}

/// `L_{e,s} = 𝐃_τᵀ𝐄⁻¹𝐃_τ`.
pub fn scaled_edge_laplacian(graph: &MatrixWeightedGraph, decomp: &IncidenceDecomposition) -> Mat {
    let d_tau = decomp.d_tau_k();
    let e_inv = graph.timescale_diagonal().map(|v| 1.0 / v);
    let scaled = Mat::from_diagonal(&e_inv) * &d_tau;
    linalg::symmetrize(&(d_tau.transpose() * scaled))
}

/// `α[(G+Gᵀ)/2 + 2I]` for a given draw `G`.
pub fn spd_weight_from_draw(alpha: f64, g: &Mat) -> Mat {
    let k = g.nrows();
    (linalg::symmetrize(g) + Mat::identity(k, k) * 2.0) * alpha
}

/// Random SPD weight from the Gaussian generator, resampled until SPD.
pub fn random_spd_weight<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Mat> {
    if !(alpha > 0.0) || k == 0 {
        return Err(Error::InvalidArgument(format!("alpha = {alpha}, k = {k}")));
    }
    for _ in 0..SPD_ATTEMPTS {
        let g = Mat::from_fn(k, k, |_, _| rng.sample(StandardNormal));
        let w = spd_weight_from_draw(alpha, &g);
        if linalg::is_spd(&w) {
            return Ok(w);
        }
    }
    Err(Error::GenerationFailed { attempts: SPD_ATTEMPTS })
}

/// Random connected graph: node `i > 0` attaches to a uniformly chosen
/// earlier node, then each remaining pair is added with probability
/// `extra_edge_prob`. Weights come from [`random_spd_weight`] with `alpha`;
/// time scales are uniform in `eps_range`.
pub fn random_graph<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    extra_edge_prob: f64,
    alpha: f64,
    eps_range: (f64, f64),
    rng: &mut R,
) -> Result<MatrixWeightedGraph> {
    if n < 2 || !(0.0..=1.0).contains(&extra_edge_prob) || !(0.0 < eps_range.0 && eps_range.0 <= eps_range.1) {
        return Err(Error::InvalidArgument(format!("n = {n}, p = {extra_edge_prob}, eps_range = {eps_range:?}")));
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    let present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    for i in 0..n {
        for j in i + 1..n {
            if !present.contains(&(i, j)) && rng.random_bool(extra_edge_prob) {
                edges.push((i, j));
            }
        }
    }
    let weights = edges.iter().map(|_| random_spd_weight(alpha, k, rng)).collect::<Result<Vec<_>>>()?;
    let timescales = (0..n)
        .map(|_| (0..k).map(|_| rng.random_range(eps_range.0..=eps_range.1)).collect())
        .collect();
    MatrixWeightedGraph::new(n, k, edges, weights, timescales)
}

/// Angular step between consecutive formation points.
pub const SPIRAL_STEP: f64 = std::f64::consts::FRAC_PI_3;

/// Points on the Archimedean spiral `r = spacing·θ`, `θ_i = i·SPIRAL_STEP`,
/// starting at the origin.
pub fn spiral_formation(n: usize, spacing: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let theta = i as f64 * SPIRAL_STEP;
            let r = spacing * theta;
            [r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn triangle() -> MatrixWeightedGraph {
        MatrixWeightedGraph::uniform(3, vec![(0, 1), (1, 2), (0, 2)], &scalar(1.0)).unwrap()
    }

    #[test]
    fn minimal_path_is_valid() {
        let g = MatrixWeightedGraph::new(2, 1, vec![(0, 1)], vec![scalar(2.0)], vec![vec![1.0]; 2]).unwrap();
        assert!(g.is_tree());
        assert_eq!(g.degree(0), 1);
    }

    #[test]
    fn rejects_indefinite_weight() {
        let w = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = MatrixWeightedGraph::new(2, 2, vec![(0, 1)], vec![w], vec![vec![1.0; 2]; 2]).unwrap_err();
        assert!(matches!(err, Error::NonSpdWeight { edge: 0 }));
    }

    #[test]
    fn rejects_isolated_node() {
        let err = MatrixWeightedGraph::new(3, 1, vec![(0, 1)], vec![scalar(1.0)], vec![vec![1.0]; 3]).unwrap_err();
        assert!(matches!(err, Error::Disconnected));
    }

    #[test]
    fn rejects_bad_scales_and_duplicates() {
        let err = MatrixWeightedGraph::new(2, 1, vec![(0, 1)], vec![scalar(1.0)], vec![vec![1.0], vec![0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveScale { node: 1, substate: 0 }));
        let err = MatrixWeightedGraph::new(2, 1, vec![(0, 1), (1, 0)], vec![scalar(1.0); 2], vec![vec![1.0]; 2]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge(1, 0)));
        let err = MatrixWeightedGraph::new(2, 1, vec![(0, 0)], vec![scalar(1.0)], vec![vec![1.0]; 2]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop(0)));
    }

    #[test]
    fn path_incidence_and_cut_basis() {
        let g = MatrixWeightedGraph::uniform(2, vec![(0, 1)], &scalar(2.0)).unwrap();
        let dec = incidence(&g);
        assert_eq!(dec.d, Mat::from_column_slice(2, 1, &[-1.0, 1.0]));
        assert_eq!(dec.r, Mat::identity(1, 1));
    }

    #[test]
    fn triangle_cut_basis_reconstructs_incidence() {
        let g = triangle();
        let dec = incidence(&g);
        assert_eq!(dec.tree_edges, vec![0, 2]);
        assert_eq!(dec.cotree_edges, vec![1]);
        // D_τ T = D_c exactly, checked column by column.
        let resid = &dec.d_tau * &dec.t_tau_c - &dec.d_c;
        assert_eq!(resid.amax(), 0.0);
        for e in 0..3 {
            assert_eq!((dec.d.column(e) - &dec.d_tau * dec.r.column(e)).amax(), 0.0);
        }
    }

    #[test]
    fn bfs_tree_follows_input_order() {
        // Path 0-1-2 listed with the chord first: BFS from 0 takes (0,2) then (0,1).
        let g = MatrixWeightedGraph::uniform(3, vec![(0, 2), (1, 2), (0, 1)], &scalar(1.0)).unwrap();
        assert_eq!(spanning_tree(&g), vec![0, 2]);
    }

    #[test]
    fn kron_incidence_identity() {
        let g = MatrixWeightedGraph::uniform(3, vec![(0, 1), (1, 2), (0, 2)], &Mat::identity(2, 2)).unwrap();
        let dec = incidence(&g);
        assert_eq!(dec.d_k(), linalg::kron(&dec.d, &Mat::identity(2, 2)));
        assert!((dec.d_k() - dec.d_tau_k() * dec.r_k()).amax() < 1e-12);
    }

    #[test]
    fn laplacian_examples() {
        let g = MatrixWeightedGraph::uniform(2, vec![(0, 1)], &scalar(2.0)).unwrap();
        assert_eq!(weighted_laplacian(&g), Mat::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));

        let g = MatrixWeightedGraph::uniform(2, vec![(0, 1)], &Mat::identity(2, 2)).unwrap();
        let i2 = Mat::identity(2, 2);
        let expect = linalg::kron(&Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]), &i2);
        assert_eq!(weighted_laplacian(&g), expect);

        let l = weighted_laplacian(&triangle());
        let expect = Mat::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l, expect);
    }

    #[test]
    fn edge_laplacian_path_and_unit_scales() {
        let g = MatrixWeightedGraph::new(2, 1, vec![(0, 1)], vec![scalar(1.0)], vec![vec![0.5], vec![4.0]]).unwrap();
        let le = scaled_edge_laplacian(&g, &incidence(&g));
        assert!((le[(0, 0)] - (2.0 + 0.25)).abs() < 1e-15);

        let g = triangle();
        let dec = incidence(&g);
        let plain = dec.d_tau_k().transpose() * dec.d_tau_k();
        assert_eq!(scaled_edge_laplacian(&g, &dec), plain);
    }

    #[test]
    fn star_edge_laplacian_matches_edge_vector_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 2;
        let eps: Vec<Vec<f64>> = (0..4).map(|_| (0..k).map(|_| rng.random_range(0.1..10.0)).collect()).collect();
        let g = MatrixWeightedGraph::new(4, k, vec![(0, 1), (0, 2), (0, 3)], vec![Mat::identity(k, k); 3], eps.clone()).unwrap();
        let le = scaled_edge_laplacian(&g, &incidence(&g));
        // Entry (q·k+s, p·k+s) = Σ_i a_q[i] a_p[i] / ε_{i,s}.
        let d = g.incidence_matrix();
        for q in 0..3 {
            for p in 0..3 {
                for s in 0..k {
                    for t in 0..k {
                        let expect = if s == t { (0..4).map(|i| d[(i, q)] * d[(i, p)] / eps[i][s]).sum() } else { 0.0 };
                        assert!((le[(q * k + s, p * k + t)] - expect).abs() < 1e-14);
                    }
                }
            }
        }
        assert!(linalg::is_spd(&le));
    }

    #[test]
    fn generator_zero_draw() {
        let w = spd_weight_from_draw(0.7, &Mat::zeros(3, 3));
        assert_eq!(w, Mat::identity(3, 3) * 1.4);
    }

    #[test]
    fn generator_always_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_spd_weight(0.3, 2, &mut rng).unwrap();
        assert!(linalg::is_spd(&w));
        for _ in 0..10_000 {
            let w = random_spd_weight(1.0, 2, &mut rng).unwrap();
            assert_eq!(w, w.transpose());
            assert!(linalg::min_eig(&w) > 0.0);
        }
    }

    #[test]
    fn spiral_properties() {
        assert_eq!(spiral_formation(1, 1.0), vec![[0.0, 0.0]]);
        let pts = spiral_formation(10, 1.0);
        let radii: Vec<f64> = pts.iter().map(|p| p[0].hypot(p[1])).collect();
        assert!(radii.windows(2).all(|w| w[1] > w[0]));
        assert!((radii[9] - 9.0 * SPIRAL_STEP).abs() < 1e-12);
        for i in 0..10 {
            for j in 0..i {
                assert!((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) > 1e-6);
            }
        }
    }
}
