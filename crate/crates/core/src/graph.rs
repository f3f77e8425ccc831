//! Random bipartite d-regular graphs, the sampling schedule built from them,
//! and spectral checks on their bi-adjacency matrices.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TamError};
use crate::linalg::thin_qr;
use crate::seed;
use crate::sparse::SparseMatrix;

/// Simple bipartite d-regular graph on `n + n` vertices.
///
/// Adjacency is stored flat: the neighbors of left vertex `i` are
/// `left[i*d .. (i+1)*d]`, sorted ascending, and likewise for the right side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteRegularGraph {
    n: usize,
    d: usize,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl BipartiteRegularGraph {
    /// Builds a graph from the right-neighbor list of every left vertex and
    /// checks regularity and simplicity on both sides.
    pub fn from_left_adjacency(n: usize, d: usize, adj: &[Vec<usize>]) -> Result<Self> {
        if d == 0 || d > n {
            return Err(invalid(format!("degree must satisfy 1 <= d <= n, got d={d}, n={n}")));
        }
        if adj.len() != n {
            return Err(TamError::Inconsistency(format!("expected {n} left vertices, got {}", adj.len())));
        }
        let mut left = Vec::with_capacity(n * d);
        for (i, row) in adj.iter().enumerate() {
            let mut row = row.clone();
            row.sort_unstable();
            if row.len() != d {
                return Err(TamError::Inconsistency(format!("left vertex {i} has degree {}", row.len())));
            }
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(TamError::Inconsistency(format!("left vertex {i} has a parallel edge")));
            }
            if row.last().is_some_and(|&j| j >= n) {
                return Err(TamError::Inconsistency(format!("left vertex {i} has an out-of-range neighbor")));
            }
            left.extend(row);
        }
        let right = transpose_adjacency(n, d, &left)?;
        Ok(BipartiteRegularGraph { n, d, left, right })
    }

    fn from_sorted_left(n: usize, d: usize, left: Vec<usize>) -> Self {
        let right = transpose_adjacency(n, d, &left).expect("regular by construction");
        BipartiteRegularGraph { n, d, left, right }
    }

    pub fn complete(n: usize) -> Self {
        let left = (0..n).flat_map(|_| 0..n).collect();
        Self::from_sorted_left(n, n, left)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `S_i^R`: right neighbors of left vertex `i`.
    pub fn right_neighbors_of_left(&self, i: usize) -> &[usize] {
        &self.left[i * self.d..(i + 1) * self.d]
    }

    /// `S_j^L`: left neighbors of right vertex `j`.
    pub fn left_neighbors_of_right(&self, j: usize) -> &[usize] {
        &self.right[j * self.d..(j + 1) * self.d]
    }

    /// Edges `(i, j)` in left-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.right_neighbors_of_left(i).iter().map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.d
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.right_neighbors_of_left(i).binary_search(&j).is_ok()
    }

    /// Bi-adjacency matrix `G_n` (left vertices index rows).
    pub fn biadjacency(&self) -> SparseMatrix {
        let trip: Vec<_> = self.edges().map(|(i, j)| (i, j, 1.0)).collect();
        SparseMatrix::from_triplets(self.n, self.n, &trip)
    }

    pub fn left_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.right_neighbors_of_left(i).to_vec()).collect()
    }

    /// The same edge set with the two sides swapped.
    pub fn transposed(&self) -> Self {
        BipartiteRegularGraph {
            n: self.n,
            d: self.d,
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

fn transpose_adjacency(n: usize, d: usize, left: &[usize]) -> Result<Vec<usize>> {
    let mut fill = vec![0usize; n];
    let mut right = vec![0usize; n * d];
    for i in 0..n {
        for &j in &left[i * d..(i + 1) * d] {
            if fill[j] == d {
                return Err(TamError::Inconsistency(format!("right vertex {j} has degree > {d}")));
            }
            right[j * d + fill[j]] = i;
            fill[j] += 1;
        }
    }
    if let Some(j) = fill.iter().position(|&f| f != d) {
        return Err(TamError::Inconsistency(format!("right vertex {j} has degree {}", fill[j])));
    }
    // Left vertices are visited in increasing order, so each right list is
    // already sorted.
    Ok(right)
}

/// How parallel edges produced by the configuration model are removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimpleStrategy {
    /// Redraw the whole matching until it is simple. Exactly uniform.
    Rejection,
    /// Keep the matching and swap each parallel edge with a random edge
    /// elsewhere in the graph.
    Switching,
    /// Rejection when the expected number of redraws is small (d <= 4),
    /// switching otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub strategy: SimpleStrategy,
    pub max_attempts: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            strategy: SimpleStrategy::Auto,
            max_attempts: 10_000,
        }
    }
}

/// Draws a random simple bipartite d-regular graph with `n` vertices per side.
pub fn sample_bipartite_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<BipartiteRegularGraph> {
    sample_bipartite_regular_with(n, d, SamplerOptions::default(), rng)
}

pub fn sample_bipartite_regular_with<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    opts: SamplerOptions,
    rng: &mut R,
) -> Result<BipartiteRegularGraph> {
    if d == 0 || d > n {
        return Err(invalid(format!("degree must satisfy 1 <= d <= n, got d={d}, n={n}")));
    }
    if d == n {
        return Ok(BipartiteRegularGraph::complete(n));
    }
    // The complement of a uniform (n-d)-regular bipartite graph is uniform
    // d-regular, and far sparser to generate when d > n/2.
    if 2 * d > n {
        let g = sample_bipartite_regular_with(n, n - d, opts, rng)?;
        let mut left = Vec::with_capacity(n * d);
        for i in 0..n {
            let nb = g.right_neighbors_of_left(i);
            let mut p = 0;
            for j in 0..n {
                if p < nb.len() && nb[p] == j {
                    p += 1;
                } else {
                    left.push(j);
                }
            }
        }
        return Ok(BipartiteRegularGraph::from_sorted_left(n, d, left));
    }
    let strategy = match opts.strategy {
        SimpleStrategy::Auto if d <= 4 => SimpleStrategy::Rejection,
        SimpleStrategy::Auto => SimpleStrategy::Switching,
        s => s,
    };
    let left = match strategy {
        SimpleStrategy::Rejection => rejection_matching(n, d, opts.max_attempts, rng)?,
        _ => switching_matching(n, d, opts.max_attempts, rng)?,
    };
    Ok(BipartiteRegularGraph::from_sorted_left(n, d, left))
}

/// Uniform perfect matching between the `d·n` left and right replicas.
/// Entry `r` is the right vertex paired with left replica `r` (left vertex
/// `r / d`).
fn random_pairing<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<usize> {
    let mut right: Vec<usize> = (0..n).flat_map(|j| std::iter::repeat_n(j, d)).collect();
    right.shuffle(rng);
    right
}

fn rejection_matching<R: Rng + ?Sized>(n: usize, d: usize, max_attempts: usize, rng: &mut R) -> Result<Vec<usize>> {
    for _ in 0..max_attempts {
        let mut pairing = random_pairing(n, d, rng);
        let mut simple = true;
        for row in pairing.chunks_mut(d) {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                simple = false;
                break;
            }
        }
        if simple {
            return Ok(pairing);
        }
    }
    Err(TamError::SamplingFailure {
        n,
        d,
        attempts: max_attempts,
    })
}

/// Multiplicity of each (left, right) pair: a dense table for small `n`,
/// one map per left vertex otherwise.
enum Multiplicity {
    Dense { n: usize, counts: Vec<u32> },
    Sparse(Vec<HashMap<usize, u32>>),
}

impl Multiplicity {
    const DENSE_LIMIT: usize = 1 << 22;

    fn new(n: usize, d: usize, edges: &[usize]) -> Self {
        let mut m = if n * n <= Self::DENSE_LIMIT {
            Multiplicity::Dense {
                n,
                counts: vec![0; n * n],
            }
        } else {
            Multiplicity::Sparse((0..n).map(|_| HashMap::with_capacity(d)).collect())
        };
        for (e, &j) in edges.iter().enumerate() {
            m.add(e / d, j);
        }
        m
    }

    fn get(&self, i: usize, j: usize) -> u32 {
        match self {
            Multiplicity::Dense { n, counts } => counts[i * n + j],
            Multiplicity::Sparse(maps) => maps[i].get(&j).copied().unwrap_or(0),
        }
    }

    fn add(&mut self, i: usize, j: usize) {
        match self {
            Multiplicity::Dense { n, counts } => counts[i * *n + j] += 1,
            Multiplicity::Sparse(maps) => *maps[i].entry(j).or_insert(0) += 1,
        }
    }

    fn remove(&mut self, i: usize, j: usize) {
        match self {
            Multiplicity::Dense { n, counts } => counts[i * *n + j] -= 1,
            Multiplicity::Sparse(maps) => {
                if let Some(c) = maps[i].get_mut(&j) {
                    *c -= 1;
                }
            }
        }
    }
}

fn switching_matching<R: Rng + ?Sized>(n: usize, d: usize, max_attempts: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut edges = random_pairing(n, d, rng);
    let mut mult = Multiplicity::new(n, d, &edges);
    let total = n * d;
    for e in 0..total {
        let i = e / d;
        if mult.get(i, edges[e]) < 2 {
            continue;
        }
        // edges[e] = (i, j) is a repeated copy; swap it against a random
        // edge (i2, j2) so that both new edges (i, j2) and (i2, j) are absent.
        let j = edges[e];
        let mut fixed = false;
        for _ in 0..max_attempts {
            let f = rng.random_range(0..total);
            let i2 = f / d;
            let j2 = edges[f];
            if i2 == i || j2 == j || mult.get(i, j2) > 0 || mult.get(i2, j) > 0 {
                continue;
            }
            edges[e] = j2;
            edges[f] = j;
            mult.remove(i, j);
            mult.add(i, j2);
            mult.remove(i2, j2);
            mult.add(i2, j);
            fixed = true;
            break;
        }
        if !fixed {
            return Err(TamError::SamplingFailure {
                n,
                d,
                attempts: max_attempts,
            });
        }
    }
    for row in edges.chunks_mut(d) {
        row.sort_unstable();
        debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
    }
    Ok(edges)
}

/// Observed entries `M_ij` on the edges of one graph, stored in both the
/// left-major and right-major edge orders of that graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedValues {
    d: usize,
    by_left: Vec<f64>,
    by_right: Vec<f64>,
}

impl ObservedValues {
    pub fn from_oracle(graph: &BipartiteRegularGraph, oracle: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let n = graph.n();
        let d = graph.d();
        let by_left: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| graph.right_neighbors_of_left(i).iter().map(move |&j| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| oracle(i, j))
            .collect();
        let by_right = Self::right_order(graph, &by_left);
        ObservedValues { d, by_left, by_right }
    }

    /// Builds from `(i, j, value)` triplets whose coordinates must be exactly
    /// the edge set of `graph`.
    pub fn from_triplets(graph: &BipartiteRegularGraph, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let n = graph.n();
        let d = graph.d();
        let mut by_left = vec![f64::NAN; n * d];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(TamError::Inconsistency(format!("entry ({i},{j}) out of range")));
            }
            let pos = graph
                .right_neighbors_of_left(i)
                .binary_search(&j)
                .map_err(|_| TamError::Inconsistency(format!("entry ({i},{j}) is not an edge of the graph")))?;
            let slot = &mut by_left[i * d + pos];
            if !slot.is_nan() {
                return Err(TamError::Inconsistency(format!("entry ({i},{j}) given twice")));
            }
            *slot = v;
        }
        if let Some(p) = by_left.iter().position(|v| v.is_nan()) {
            let i = p / d;
            let j = graph.right_neighbors_of_left(i)[p % d];
            return Err(TamError::Inconsistency(format!("edge ({i},{j}) has no observed value")));
        }
        let by_right = Self::right_order(graph, &by_left);
        Ok(ObservedValues { d, by_left, by_right })
    }

    fn right_order(graph: &BipartiteRegularGraph, by_left: &[f64]) -> Vec<f64> {
        let n = graph.n();
        let d = graph.d();
        let mut by_right = vec![0.0; n * d];
        let mut fill = vec![0usize; n];
        // Right lists are sorted by left index, matching this visit order.
        for i in 0..n {
            for (p, &j) in graph.right_neighbors_of_left(i).iter().enumerate() {
                by_right[j * d + fill[j]] = by_left[i * d + p];
                fill[j] += 1;
            }
        }
        by_right
    }

    /// Values on the edges of left vertex `i`, aligned with
    /// `graph.right_neighbors_of_left(i)`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.by_left[i * self.d..(i + 1) * self.d]
    }

    /// Values on the edges of right vertex `j`, aligned with
    /// `graph.left_neighbors_of_right(j)`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.by_right[j * self.d..(j + 1) * self.d]
    }

    pub fn get(&self, graph: &BipartiteRegularGraph, i: usize, j: usize) -> Option<f64> {
        graph
            .right_neighbors_of_left(i)
            .binary_search(&j)
            .ok()
            .map(|p| self.by_left[i * self.d + p])
    }

    pub fn triplets(&self, graph: &BipartiteRegularGraph) -> Vec<(usize, usize, f64)> {
        graph.edges().zip(self.by_left.iter()).map(|((i, j), &v)| (i, j, v)).collect()
    }

    pub fn len(&self) -> usize {
        self.by_left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_left.is_empty()
    }
}

/// The `2N + 1` graphs of the sampling model with observed values on each.
/// Graph 0 drives initialization, graphs `1..=N` the V-updates and graphs
/// `N+1..=2N` the U-updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSchedule {
    pub n: usize,
    pub d: usize,
    pub iterations: usize,
    pub graphs: Vec<BipartiteRegularGraph>,
    pub values: Vec<ObservedValues>,
}

impl SampleSchedule {
    pub fn new(
        n: usize,
        d: usize,
        iterations: usize,
        graphs: Vec<BipartiteRegularGraph>,
        values: Vec<ObservedValues>,
    ) -> Result<Self> {
        if iterations == 0 {
            return Err(invalid("schedule needs N >= 1"));
        }
        if graphs.len() != 2 * iterations + 1 || values.len() != graphs.len() {
            return Err(TamError::Inconsistency(format!(
                "schedule with N={iterations} needs {} graphs and value sets, got {} and {}",
                2 * iterations + 1,
                graphs.len(),
                values.len()
            )));
        }
        for (t, (g, v)) in graphs.iter().zip(&values).enumerate() {
            if g.n() != n || g.d() != d {
                return Err(TamError::Inconsistency(format!("graph {t} has shape (n={}, d={})", g.n(), g.d())));
            }
            if v.len() != g.edge_count() {
                return Err(TamError::Inconsistency(format!("value set {t} does not match its graph")));
            }
        }
        Ok(SampleSchedule {
            n,
            d,
            iterations,
            graphs,
            values,
        })
    }

    pub fn init_graph(&self) -> (&BipartiteRegularGraph, &ObservedValues) {
        (&self.graphs[0], &self.values[0])
    }

    /// Graph used for the V-update of iteration `t` (0-based).
    pub fn v_graph(&self, t: usize) -> (&BipartiteRegularGraph, &ObservedValues) {
        (&self.graphs[t + 1], &self.values[t + 1])
    }

    /// Graph used for the U-update of iteration `t` (0-based).
    pub fn u_graph(&self, t: usize) -> (&BipartiteRegularGraph, &ObservedValues) {
        let idx = self.iterations + t + 1;
        (&self.graphs[idx], &self.values[idx])
    }

    pub fn total_observations(&self) -> usize {
        self.graphs.iter().map(|g| g.edge_count()).sum()
    }
}

/// Samples the `2N + 1` independent graphs and records `oracle(i, j)` on
/// every edge. Graph `t` is drawn from the stream `derive(seed, "graph", t)`,
/// so the schedule does not depend on how many threads build it.
pub fn sample_rrg_schedule(
    n: usize,
    d: usize,
    iterations: usize,
    oracle: impl Fn(usize, usize) -> f64 + Sync,
    seed: u64,
) -> Result<SampleSchedule> {
    sample_rrg_schedule_with(n, d, iterations, oracle, seed, SamplerOptions::default())
}

pub fn sample_rrg_schedule_with(
    n: usize,
    d: usize,
    iterations: usize,
    oracle: impl Fn(usize, usize) -> f64 + Sync,
    seed: u64,
    opts: SamplerOptions,
) -> Result<SampleSchedule> {
    if iterations == 0 {
        return Err(invalid("schedule needs N >= 1"));
    }
    let count = 2 * iterations + 1;
    let graphs: Vec<BipartiteRegularGraph> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::child_rng(seed, seed::GRAPH, t as u64);
            sample_bipartite_regular_with(n, d, opts, &mut rng)
        })
        .collect::<Result<_>>()?;
    let values = graphs.iter().map(|g| ObservedValues::from_oracle(g, &oracle)).collect();
    SampleSchedule::new(n, d, iterations, graphs, values)
}

/// `P_Ω(M)` as a sparse matrix. Every triplet must sit on an edge of
/// `graph`; positions outside the edge set are structural zeros.
pub fn apply_sampling_operator(graph: &BipartiteRegularGraph, values: &[(usize, usize, f64)]) -> Result<SparseMatrix> {
    if let Some(&(i, j, _)) = values.iter().find(|&&(i, j, _)| !graph.contains(i, j)) {
        return Err(TamError::Inconsistency(format!("entry ({i},{j}) is not an edge of the graph")));
    }
    Ok(SparseMatrix::from_triplets(graph.n(), graph.n(), values))
}

/// `P_Ω(M)` for a full set of observed values.
pub fn observed_matrix(graph: &BipartiteRegularGraph, values: &ObservedValues) -> SparseMatrix {
    SparseMatrix::from_triplets(graph.n(), graph.n(), &values.triplets(graph))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `max_i | x_i − 1/√n |` for the top left singular vector `x`, sign
    /// chosen so that `Σ x_i ≥ 0`.
    pub top_vector_flatness: f64,
    pub iterations: usize,
}

/// Spectral bound on the second singular value that random d-regular
/// bipartite graphs satisfy with high probability for `d >= 3`.
pub fn sigma2_bound(d: usize) -> f64 {
    7.0 * (d as f64).sqrt() / 3.0
}

/// Estimates `σ1` and `σ2` of the bi-adjacency matrix.
///
/// `σ1` comes from power iteration on `G Gᵀ`; `σ2` from block subspace
/// iteration on the same operator with the top vector deflated. Both stop
/// once the eigen-residual is below `tol · σ1²`.
pub fn spectral_check(graph: &BipartiteRegularGraph, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    let g = graph.biadjacency();
    let n = graph.n();
    let gram = |x: &DMatrix<f64>| g.mul_dense(&g.tr_mul_dense(x));
    let mut rng = seed::rng(seed::derive(n as u64, "spectral", graph.d() as u64));

    // Top pair. Vectors are driven to 0.1·tol so the flatness reading is
    // not dominated by the stopping rule.
    let mut x = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    x /= x.norm();
    let mut theta1 = 0.0;
    let mut it1 = 0;
    let mut converged = false;
    while it1 < max_iter {
        it1 += 1;
        let hx = gram(&x);
        theta1 = x.dot(&hx);
        let resid = (&hx - &x * theta1).norm();
        let nrm = hx.norm();
        if nrm == 0.0 {
            break;
        }
        x = hx / nrm;
        if resid <= 0.1 * tol * theta1.abs() {
            converged = true;
            break;
        }
    }
    let sigma1 = theta1.max(0.0).sqrt();
    if !converged {
        return Err(TamError::Convergence {
            what: "spectral check (sigma1)",
            iterations: it1,
            residual: f64::NAN,
            best: vec![sigma1],
        });
    }
    let top = DVector::from_column_slice(x.as_slice());
    let sign = if top.sum() < 0.0 { -1.0 } else { 1.0 };
    let flat = 1.0 / (n as f64).sqrt();
    let top_vector_flatness = top.iter().map(|v| (sign * v - flat).abs()).fold(0.0, f64::max);

    if n < 2 {
        return Ok(SpectralReport {
            sigma1,
            sigma2: 0.0,
            top_vector_flatness,
            iterations: it1,
        });
    }

    // Second pair: subspace iteration orthogonal to `top`.
    let block = 8.min(n - 1);
    let deflate = |y: &mut DMatrix<f64>| {
        for c in 0..y.ncols() {
            let proj = top.dot(&y.column(c));
            let mut col = y.column_mut(c);
            col.axpy(-proj, &top, 1.0);
        }
    };
    let mut y = DMatrix::from_fn(n, block, |_, _| rng.sample::<f64, _>(StandardNormal));
    deflate(&mut y);
    y = thin_qr(&y).q;
    let mut theta2 = 0.0;
    let mut last_resid = f64::INFINITY;
    for it in 1..=max_iter {
        let mut hy = gram(&y);
        deflate(&mut hy);
        let t = y.transpose() * &hy;
        let t = (&t + t.transpose()) * 0.5;
        let eig = SymmetricEigen::new(t);
        let (imax, &lmax) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("block is nonempty");
        theta2 = lmax;
        let ritz = &y * eig.eigenvectors.column(imax);
        let mut hr = gram(&DMatrix::from_column_slice(n, 1, ritz.as_slice()));
        deflate(&mut hr);
        last_resid = (hr.column(0) - &ritz * lmax).norm();
        if last_resid <= tol * theta1 {
            return Ok(SpectralReport {
                sigma1,
                sigma2: theta2.max(0.0).sqrt(),
                top_vector_flatness,
                iterations: it1 + it,
            });
        }
        y = thin_qr(&hy).q;
    }
    Err(TamError::Convergence {
        what: "spectral check (sigma2)",
        iterations: max_iter,
        residual: last_resid,
        best: vec![sigma1, theta2.max(0.0).sqrt()],
    })
}

/// Each pair `(i, j)` kept independently with probability `p`.
pub fn sample_erdos_renyi_bipartite<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability must lie in [0, 1], got {p}")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}
