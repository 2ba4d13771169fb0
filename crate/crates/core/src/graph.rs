//! Directed follower topology with leader pinning.
//!
//! Followers are indexed `0..n` internally. The leader is the virtual node
//! that feeds every pinned follower.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::matops::{self, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// `adjacency[i][j]` is true iff follower `i` receives from follower `j`.
    adjacency: Vec<Vec<bool>>,
    pinned: Vec<bool>,
}

impl Graph {
    /// Builds a graph from directed `(from, to)` follower pairs and the list of
    /// followers that receive from the leader.
    pub fn new(n: usize, edges: &[(usize, usize)], pinned: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one follower"));
        }
        let mut adjacency = vec![vec![false; n]; n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(invalid(format!(
                    "edge ({from}, {to}) out of range for {n} followers"
                )));
            }
            if from == to {
                return Err(invalid(format!("self-loop on follower {from}")));
            }
            adjacency[to][from] = true;
        }
        let mut pin = vec![false; n];
        for &p in pinned {
            if p >= n {
                return Err(invalid(format!("pinned follower {p} out of range")));
            }
            pin[p] = true;
        }
        Ok(Self {
            n,
            adjacency,
            pinned: pin,
        })
    }

    /// Builds a graph from an `n x n` 0/1 adjacency matrix (`a_ij = 1` iff `i`
    /// receives from `j`) and a 0/1 pinning vector.
    pub fn from_weights(adjacency: &Matrix, pinning: &[f64]) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n || pinning.len() != n {
            return Err(invalid(
                "adjacency must be n x n with a length-n pinning vector",
            ));
        }
        let as_bit = |x: f64, what: &str| -> Result<bool> {
            if x == 0.0 {
                Ok(false)
            } else if x == 1.0 {
                Ok(true)
            } else {
                Err(invalid(format!("{what} weight {x} is not 0 or 1")))
            }
        };
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                adj[i][j] = as_bit(adjacency[(i, j)], "edge")?;
            }
            if adj[i][i] {
                return Err(invalid(format!("self-loop on follower {i}")));
            }
        }
        let pinned = pinning
            .iter()
            .map(|&p| as_bit(p, "pinning"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            adjacency: adj,
            pinned,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn receives(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    /// Followers `j` that agent `i` listens to, ascending.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adjacency[i][j])
    }

    /// Followers that listen to agent `j`, ascending.
    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.adjacency[i][j])
    }

    /// Directed `(from, to)` pairs in row-major order of the receiver.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for i in self.out_neighbors(j) {
                out.push((j, i));
            }
        }
        out
    }

    pub fn pinned_followers(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.pinned[i]).collect()
    }
}

/// `H = L + B`: in-degree Laplacian plus the leader-pinning diagonal.
pub fn build_h(g: &Graph) -> Matrix {
    let n = g.len();
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in g.in_neighbors(i) {
            h[(i, j)] = -1.0;
            degree += 1.0;
        }
        h[(i, i)] = degree + if g.is_pinned(i) { 1.0 } else { 0.0 };
    }
    h
}

/// Breadth-first reachability from the leader.
pub fn check_spanning_tree(g: &Graph) -> bool {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = g.pinned_followers().into();
    for &p in &queue {
        seen[p] = true;
    }
    while let Some(j) = queue.pop_front() {
        for i in g.out_neighbors(j) {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Symmetric positive-definite `P` with `P·H + Hᵀ·P = 2I`.
pub fn solve_p(h: &Matrix) -> Result<Matrix> {
    let neg = -h;
    if !matops::is_hurwitz(&neg)? {
        return Err(Error::Precondition(
            "-H is not Hurwitz; run check_spanning_tree on the graph first".into(),
        ));
    }
    matops::solve_sym_lyapunov(h, 2.0)
}

/// Supremum of admissible communication periods:
/// `1 / (max(mu1, mu2) · (‖P·H‖ + 1) · ‖H‖)`.
pub fn observer_period_bound(g: &Graph, mu1: f64, mu2: f64) -> Result<f64> {
    if !(mu1 > 0.0 && mu2 > 0.0 && mu1.is_finite() && mu2.is_finite()) {
        return Err(invalid("observer gains must be positive and finite"));
    }
    let h = build_h(g);
    let p = solve_p(&h)?;
    let ph = matops::spectral_norm(&(&p * &h))?;
    let hn = matops::spectral_norm(&h)?;
    Ok(1.0 / (mu1.max(mu2) * (ph + 1.0) * hn))
}

/// Largest round decimal (at most three significant digits) strictly below `bound`.
pub fn snap_below(bound: f64) -> f64 {
    if !(bound > 0.0) || !bound.is_finite() {
        return 0.0;
    }
    let scale = 10f64.powi(bound.log10().floor() as i32 - 2);
    let mut snapped = (bound / scale).floor() * scale;
    if snapped >= bound {
        snapped -= scale;
    }
    // trim floating noise in the decimal representation
    let digits = (-(scale.log10().floor())).max(0.0) as i32;
    let f = 10f64.powi(digits);
    let snapped = (snapped * f).round() / f;
    if snapped >= bound {
        snapped - scale
    } else {
        snapped
    }
}
