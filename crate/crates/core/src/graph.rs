//! Undirected communication graphs and their matrix representations.
//!
//! Node ids are 1-based everywhere in the public API. Internally nodes are
//! stored 0-based in sorted adjacency lists.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, symmetric_eigendecomposition, SquareMatrix};

/// Undirected simple graph over nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Normalized `(i, j)` with `i < j`, 1-based.
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from 1-based node pairs.
    ///
    /// Self-loops, ids outside `[1, n]` and repeated edges (in either
    /// orientation) are rejected; the error names the offending `edges[k]`.
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::InvalidGraph {
                field: "n".into(),
                message: "node count must be positive".into(),
            });
        }
        let mut set = BTreeSet::new();
        let mut neighbors = vec![Vec::new(); n];
        for (k, (i, j)) in edges.into_iter().enumerate() {
            let field = format!("edges[{k}]");
            for id in [i, j] {
                if id == 0 || id > n {
                    return Err(Error::InvalidGraph {
                        field,
                        message: format!("node id {id} outside [1, {n}]"),
                    });
                }
            }
            if i == j {
                return Err(Error::InvalidGraph {
                    field,
                    message: format!("self-loop on node {i}"),
                });
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph {
                    field,
                    message: format!("duplicate edge ({i}, {j})"),
                });
            }
            neighbors[i - 1].push(j - 1);
            neighbors[j - 1].push(i - 1);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: set,
            neighbors,
        })
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i, i + 1))).expect("path graph is valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)));
        Graph::new(n, edges).expect("complete graph is valid")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Edges as 1-based `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// 1-based neighbor ids of 1-based node `i`, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i - 1].iter().map(|j| j + 1)
    }

    pub(crate) fn neighbors0(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.neighbors[i - 1].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Relabels node `i` as `perm[i - 1]` (1-based permutation).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        Graph::new(self.n, self.edges().map(|(i, j)| (perm[i - 1], perm[j - 1])))
    }
}

pub fn adjacency(g: &Graph) -> SquareMatrix {
    let mut a = SquareMatrix::zeros(g.n, g.n);
    for (i, j) in g.edges() {
        a[(i - 1, j - 1)] = 1.0;
        a[(j - 1, i - 1)] = 1.0;
    }
    a
}

pub fn degree(g: &Graph) -> SquareMatrix {
    SquareMatrix::from_fn(g.n, g.n, |i, j| {
        if i == j {
            g.neighbors[i].len() as f64
        } else {
            0.0
        }
    })
}

/// `D - A`, assembled in integers so every row sums to exactly zero.
pub fn laplacian(g: &Graph) -> SquareMatrix {
    let mut l = vec![0i64; g.n * g.n];
    for (i, list) in g.neighbors.iter().enumerate() {
        l[i * g.n + i] = list.len() as i64;
        for &j in list {
            l[i * g.n + j] -= 1;
        }
    }
    SquareMatrix::from_row_iterator(g.n, g.n, l.into_iter().map(|v| v as f64))
}

/// Breadth-first reachability from node 1.
pub fn is_connected(g: &Graph) -> bool {
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &g.neighbors[i] {
            if !seen[j] {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == g.n
}

/// Second-smallest Laplacian eigenvalue; 0 for a single node.
pub fn algebraic_connectivity(l: &SquareMatrix) -> Result<f64> {
    let eig = symmetric_eigendecomposition(l)?;
    Ok(if eig.eigenvalues.len() < 2 {
        0.0
    } else {
        eig.eigenvalues[1]
    })
}

/// Spectral connectivity test: `lambda_2 > 1e-8`. Only used to cross-check
/// [`is_connected`].
pub fn is_connected_spectral(g: &Graph) -> Result<bool> {
    if g.n == 1 {
        return Ok(true);
    }
    Ok(algebraic_connectivity(&laplacian(g))? > 1e-8)
}

fn check_laplacian(l: &SquareMatrix) -> Result<()> {
    check_symmetric(l).map_err(|e| Error::NotLaplacian(e.to_string()))?;
    let n = l.nrows();
    for i in 0..n {
        let row = l.row(i);
        let scale = 1.0 + row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let sum: f64 = row.iter().sum();
        if sum.abs() > 1e-12 * scale {
            return Err(Error::NotLaplacian(format!("row {} sums to {sum:e}", i + 1)));
        }
        for j in 0..n {
            if i != j && l[(i, j)] > 0.0 {
                return Err(Error::NotLaplacian(format!(
                    "positive off-diagonal entry at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Moore-Penrose pseudoinverse of a graph Laplacian.
///
/// Eigenvalues at or below `1e-9 * lambda_max` are treated as zero.
pub fn laplacian_pseudoinverse(l: &SquareMatrix) -> Result<SquareMatrix> {
    check_laplacian(l)?;
    let n = l.nrows();
    let eig = symmetric_eigendecomposition(l)?;
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let threshold = 1e-9 * lambda_max;
    let mut pinv = SquareMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > threshold {
            let v = eig.eigenvectors.column(k);
            pinv += (v * v.transpose()) / lambda;
        }
    }
    // exact symmetry
    Ok(SquareMatrix::from_fn(n, n, |i, j| 0.5 * (pinv[(i, j)] + pinv[(j, i)])))
}
