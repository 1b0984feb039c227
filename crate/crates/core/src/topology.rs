//! Random undirected communication graphs and their Laplacians.

use std::borrow::Cow;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default threshold for `λ2(L̄) > tol`.
pub const CONNECTIVITY_TOL: f64 = 1e-8;
const EIGEN_MAX_ITER: usize = 10_000;

/// One undirected simple graph with its Laplacian `L = D - W`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    n: usize,
    adjacency: DMatrix<u8>,
    laplacian: DMatrix<f64>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl GraphSample {
    pub fn from_adjacency(adjacency: DMatrix<u8>) -> Result<Self> {
        let laplacian = laplacian(&adjacency)?;
        let n = adjacency.nrows();
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[(i, j)] == 1).collect())
            .collect();
        let degrees = neighbors.iter().map(Vec::len).collect();
        Ok(Self {
            n,
            adjacency,
            laplacian,
            degrees,
            neighbors,
        })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = DMatrix::<u8>::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::BadAdjacency(format!("edge ({u}, {v}) on {n} nodes")));
            }
            adjacency[(u, v)] = 1;
            adjacency[(v, u)] = 1;
        }
        Self::from_adjacency(adjacency)
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = DMatrix::from_fn(n, n, |i, j| u8::from(i != j));
        Self::from_adjacency(adjacency).expect("complete graph adjacency is valid")
    }

    pub fn edgeless(n: usize) -> Self {
        Self::from_adjacency(DMatrix::zeros(n, n)).expect("empty adjacency is valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    /// `G(n, p)`: each of the `n(n-1)/2` possible edges present with probability `p`.
    pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Self {
        let mut adjacency = DMatrix::<u8>::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    adjacency[(i, j)] = 1;
                    adjacency[(j, i)] = 1;
                }
            }
        }
        Self::from_adjacency(adjacency).expect("sampled adjacency is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &DMatrix<u8> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.neighbors[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

/// `L = D - W` for a symmetric 0/1 adjacency matrix with zero diagonal.
pub fn laplacian(adjacency: &DMatrix<u8>) -> Result<DMatrix<f64>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n {
        return Err(Error::BadAdjacency(format!(
            "matrix is {}x{}",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if adjacency[(i, i)] != 0 {
            return Err(Error::BadAdjacency(format!("non-zero diagonal at node {i}")));
        }
        for j in 0..n {
            let w = adjacency[(i, j)];
            if w > 1 {
                return Err(Error::BadAdjacency(format!("entry ({i}, {j}) = {w}")));
            }
            if w != adjacency[(j, i)] {
                return Err(Error::BadAdjacency(format!("asymmetric at ({i}, {j})")));
            }
            if w == 1 {
                lap[(i, j)] = -1.0;
                lap[(i, i)] += 1.0;
            }
        }
    }
    Ok(lap)
}

/// Second-smallest eigenvalue of a Laplacian-like symmetric PSD matrix whose
/// null vector is `1/√n · 1`.
///
/// The known eigenvector is deflated by shifting it past the spectrum
/// (`L + σ/n · 11ᵀ`, σ above a Gershgorin bound), so the smallest eigenvalue
/// of the shifted matrix is `λ2(L)`.
pub fn lambda2(matrix: &DMatrix<f64>, tol: f64) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::InvalidParameter(format!(
            "lambda2 needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("lambda2 needs at least 2 nodes".into()));
    }
    let gershgorin = (0..n)
        .map(|i| matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let shift = 1.0 + 2.0 * gershgorin;
    let shifted = matrix + DMatrix::from_element(n, n, shift / n as f64);
    let eigen = SymmetricEigen::try_new(shifted, tol.max(f64::EPSILON) * 1e-3, EIGEN_MAX_ITER)
        .ok_or(Error::NoConvergence {
            iterations: EIGEN_MAX_ITER,
        })?;
    Ok(eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// How graphs are drawn each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkModel {
    /// Uniform i.i.d. choice from a fixed pool.
    Pool(Vec<GraphSample>),
    /// A fresh `G(n, p)` every iteration with `p ~ U[p_lo, p_hi]`.
    Fresh { n: usize, p_range: (f64, f64) },
    /// The same graph every iteration.
    Single(GraphSample),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub passed: bool,
    pub lambda2_bar: f64,
    pub tol: f64,
}

fn check_p_range(n: usize, p_range: (f64, f64)) -> Result<()> {
    let (lo, hi) = p_range;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "edge probability range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
        )));
    }
    Ok(())
}

fn draw_p(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// A pool of `pool_size` independent `G(n, p)` graphs, each with its own
/// `p ~ U[p_lo, p_hi]`.
pub fn erdos_renyi_pool(n: usize, pool_size: usize, p_range: (f64, f64), seed: u64) -> Result<NetworkModel> {
    check_p_range(n, p_range)?;
    if pool_size == 0 {
        return Err(Error::InvalidParameter("pool_size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = (0..pool_size)
        .map(|_| {
            let p = draw_p(&mut rng, p_range);
            GraphSample::erdos_renyi(n, p, &mut rng)
        })
        .collect();
    Ok(NetworkModel::Pool(pool))
}

impl NetworkModel {
    pub fn fresh(n: usize, p_range: (f64, f64)) -> Result<Self> {
        check_p_range(n, p_range)?;
        Ok(NetworkModel::Fresh { n, p_range })
    }

    pub fn complete(n: usize) -> Self {
        NetworkModel::Single(GraphSample::complete(n))
    }

    pub fn n(&self) -> usize {
        match self {
            NetworkModel::Pool(pool) => pool[0].n(),
            NetworkModel::Fresh { n, .. } => *n,
            NetworkModel::Single(g) => g.n(),
        }
    }

    /// Largest degree any drawn graph can have.
    pub fn max_degree(&self) -> usize {
        match self {
            NetworkModel::Pool(pool) => pool.iter().map(GraphSample::max_degree).max().unwrap_or(0),
            NetworkModel::Fresh { n, p_range } => {
                if p_range.1 > 0.0 {
                    n - 1
                } else {
                    0
                }
            }
            NetworkModel::Single(g) => g.max_degree(),
        }
    }

    /// `L̄ = E[L^k]`: the pool average, or `p̄ (nI - 11ᵀ)` for fresh draws.
    pub fn mean_laplacian(&self) -> DMatrix<f64> {
        match self {
            NetworkModel::Pool(pool) => {
                let n = pool[0].n();
                let sum = pool
                    .iter()
                    .fold(DMatrix::<f64>::zeros(n, n), |acc, g| acc + g.laplacian());
                sum / pool.len() as f64
            }
            NetworkModel::Fresh { n, p_range } => {
                let p_bar = 0.5 * (p_range.0 + p_range.1);
                let n = *n;
                DMatrix::from_fn(n, n, |i, j| if i == j { p_bar * (n as f64 - 1.0) } else { -p_bar })
            }
            NetworkModel::Single(g) => g.laplacian().clone(),
        }
    }

    /// Draw the graph for one iteration. Only `rng` is consulted, so draws are
    /// independent of the optimisation state.
    pub fn sample_graph(&self, rng: &mut impl Rng) -> Cow<'_, GraphSample> {
        match self {
            NetworkModel::Pool(pool) => Cow::Borrowed(&pool[rng.random_range(0..pool.len())]),
            NetworkModel::Fresh { n, p_range } => {
                let p = draw_p(rng, *p_range);
                Cow::Owned(GraphSample::erdos_renyi(*n, p, rng))
            }
            NetworkModel::Single(g) => Cow::Borrowed(g),
        }
    }

    pub fn pool(&self) -> Option<&[GraphSample]> {
        match self {
            NetworkModel::Pool(pool) => Some(pool),
            _ => None,
        }
    }
}

/// `λ2(L̄) > tol`, i.e. the graph process is connected in expectation.
pub fn check_connected_in_expectation(model: &NetworkModel, tol: f64) -> Result<ConnectivityReport> {
    let lambda2_bar = lambda2(&model.mean_laplacian(), tol)?;
    Ok(ConnectivityReport {
        passed: lambda2_bar > tol,
        lambda2_bar,
        tol,
    })
}

/// Edge-list text: a `#k` header per graph followed by one `u v` line per edge.
pub fn export_edge_list(graphs: &[GraphSample]) -> String {
    let mut out = String::new();
    for (k, g) in graphs.iter().enumerate() {
        let _ = writeln!(out, "#{k}");
        for (u, v) in g.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
    }
    out
}

pub fn import_edge_list(n: usize, text: &str) -> Result<Vec<GraphSample>> {
    let mut graphs = Vec::new();
    let mut current: Option<Vec<(usize, usize)>> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            rest.trim()
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("line {}: bad header `{line}`", lineno + 1)))?;
            if let Some(edges) = current.take() {
                graphs.push(GraphSample::from_edges(n, &edges)?);
            }
            current = Some(Vec::new());
            continue;
        }
        let edges = current
            .as_mut()
            .ok_or_else(|| Error::Format(format!("line {}: edge before first `#k` header", lineno + 1)))?;
        let mut parts = line.split_whitespace().map(str::parse::<usize>);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
            _ => return Err(Error::Format(format!("line {}: expected `u v`, got `{line}`", lineno + 1))),
        }
    }
    if let Some(edges) = current.take() {
        graphs.push(GraphSample::from_edges(n, &edges)?);
    }
    Ok(graphs)
}
