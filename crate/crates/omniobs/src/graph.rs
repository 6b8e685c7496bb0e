//! Weighted undirected communication graphs.
//!
//! Nodes are `0..n`. Edge weights are strictly positive; the Laplacian is
//! `L = D - W` with `D` the diagonal of row sums. Connectivity is decided by
//! breadth-first traversal; the spectral characterization (second-smallest
//! Laplacian eigenvalue) is exposed separately so tests can cross-check the
//! two.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{precision_tol, Scalar};

/// Node index set (ordered, deterministic iteration).
pub type NodeSet = BTreeSet<usize>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph needs at least one node")]
    Empty,
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight ({i},{j}) must be symmetric")]
    Asymmetric { i: usize, j: usize },
    #[error("weight ({i},{j}) is negative")]
    NegativeWeight { i: usize, j: usize },
    #[error("self-loop at node {i}")]
    SelfLoop { i: usize },
    #[error("edge ({i},{j}) is out of bounds for {n} nodes")]
    EdgeOutOfBounds { i: usize, j: usize, n: usize },
    #[error("edge ({i},{j}) given twice")]
    DuplicateEdge { i: usize, j: usize },
    #[error("edge ({i},{j}) has non-positive weight")]
    NonPositiveEdge { i: usize, j: usize },
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("node set references node {i}, graph has {n}")]
    NodeOutOfBounds { i: usize, n: usize },
}

/// Undirected weighted graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T: Scalar> {
    n: usize,
    w: DMatrix<T>,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph from a full adjacency matrix. The matrix must be
    /// square and symmetric with zero diagonal and non-negative entries.
    pub fn new(w: DMatrix<T>) -> Result<Self, GraphError> {
        let (rows, cols) = w.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(GraphError::Empty);
        }
        for i in 0..rows {
            if w[(i, i)] != T::zero() {
                return Err(GraphError::SelfLoop { i });
            }
            for j in (i + 1)..cols {
                if w[(i, j)] < T::zero() {
                    return Err(GraphError::NegativeWeight { i, j });
                }
                if w[(i, j)] != w[(j, i)] {
                    return Err(GraphError::Asymmetric { i, j });
                }
            }
        }
        Ok(Self { n: rows, w })
    }

    /// Builds a graph from an undirected edge list with 0-based endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize, T)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, weight) in edges {
            if i >= n || j >= n {
                return Err(GraphError::EdgeOutOfBounds { i, j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop { i });
            }
            if weight <= T::zero() {
                return Err(GraphError::NonPositiveEdge { i, j });
            }
            if w[(i, j)] != T::zero() {
                return Err(GraphError::DuplicateEdge { i, j });
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        Ok(Self { n, w })
    }

    /// Unweighted ring on `n >= 3` nodes (falls back to a single edge for
    /// `n == 2` and an isolated node for `n == 1`).
    pub fn ring(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut edges = Vec::new();
        if n == 2 {
            edges.push((0, 1, T::one()));
        } else if n > 2 {
            for i in 0..n {
                edges.push((i, (i + 1) % n, T::one()));
            }
        }
        Self::from_edges(n, &edges)
    }

    /// Unweighted path `0 - 1 - ... - n-1`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, T::one())).collect();
        Self::from_edges(n, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.w[(i, j)]
    }

    pub fn adjacency(&self) -> &DMatrix<T> {
        &self.w
    }

    /// Neighbours of `i` with their edge weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (0..self.n).filter_map(move |j| {
            let w = self.w[(i, j)];
            (w > T::zero()).then_some((j, w))
        })
    }

    /// Graph Laplacian `L = D - W`. Row sums are zero.
    pub fn laplacian(&self) -> DMatrix<T> {
        let mut l = -self.w.clone();
        for i in 0..self.n {
            let degree = self.w.row(i).iter().fold(T::zero(), |acc, &x| acc + x);
            l[(i, i)] = degree;
        }
        l
    }

    /// Connectivity by breadth-first traversal over positive-weight edges.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(0);
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for (j, _) in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n
    }

    /// Second-smallest Laplacian eigenvalue. `None` for a single node.
    ///
    /// Positive (beyond roundoff) exactly when the graph is connected; used
    /// in tests as an independent check on [`Graph::is_connected`].
    pub fn algebraic_connectivity(&self) -> Option<T> {
        if self.n < 2 {
            return None;
        }
        let eig = self.laplacian().symmetric_eigen();
        let mut vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Some(vals[1])
    }

    /// Smallest eigenvalue of `L + diag(w_extra)`; used to size the coupling
    /// strength of the auxiliary-observer layer.
    pub fn min_eigenvalue_shifted(&self, w_extra: &[T]) -> Option<T> {
        if w_extra.len() != self.n {
            return None;
        }
        let mut m = self.laplacian();
        for i in 0..self.n {
            m[(i, i)] += w_extra[i];
        }
        let eig = m.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Per-node measurement rows: row `i` is the `i`-th Laplacian row for
    /// nodes outside `r`, and the `i`-th unit row for nodes in `r` (the nodes
    /// with access to their own absolute information).
    ///
    /// The stack of all rows is nonsingular whenever the graph is connected
    /// and `r` is nonempty.
    pub fn bar_rows(&self, r: &NodeSet) -> Result<Vec<DVector<T>>, GraphError> {
        if r.is_empty() {
            return Err(GraphError::EmptyNodeSet);
        }
        if let Some(&i) = r.iter().find(|&&i| i >= self.n) {
            return Err(GraphError::NodeOutOfBounds { i, n: self.n });
        }
        let l = self.laplacian();
        Ok((0..self.n)
            .map(|i| {
                if r.contains(&i) {
                    let mut e = DVector::zeros(self.n);
                    e[i] = T::one();
                    e
                } else {
                    l.row(i).transpose()
                }
            })
            .collect())
    }
}

/// Whether the stacked measurement rows form a nonsingular matrix, judged by
/// the smallest singular value relative to the largest (tolerance `1e-10`).
pub fn verify_bar_nonsingular<T: Scalar>(rows: &[DVector<T>]) -> bool {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return false;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.max();
    if max <= T::zero() {
        return false;
    }
    let min = sv.min();
    min > precision_tol::<T>(1e-10, 1e-5) * max
}
