//! Slow, literal reference implementations for cross-checking `nask`.
//!
//! Nothing here calls into the production kernel, similarity, PSD or SVM
//! code. Only the graph and schema types are shared.

use std::collections::VecDeque;

use nask::{AttributeSchema, AttributeValue, AttributeVector, AttributedGraph, DimensionKind, DimensionSpec};

/// Largest graph the kernel oracles accept.
pub const MAX_NODES: usize = 12;
/// Largest depth the kernel oracles accept.
pub const MAX_DEPTH: usize = 4;
/// Largest problem the SVM oracle accepts (3^n active-set patterns).
pub const MAX_SVM_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge { nodes: usize },
    TooDeep { depth: usize },
    TooManyPoints { points: usize },
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TooLarge { nodes } => write!(f, "graph with {nodes} nodes exceeds the oracle limit of {MAX_NODES}"),
            Self::TooDeep { depth } => write!(f, "depth {depth} exceeds the oracle limit of {MAX_DEPTH}"),
            Self::TooManyPoints { points } => {
                write!(f, "{points} points exceed the oracle limit of {MAX_SVM_POINTS}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

fn gower_term(dim: &DimensionSpec, a: &AttributeValue, b: &AttributeValue, gamma: f64) -> f64 {
    let s = match (dim.kind, a, b) {
        (DimensionKind::Categorical, AttributeValue::Symbol(x), AttributeValue::Symbol(y)) => {
            if x == y {
                1.0
            } else {
                0.0
            }
        }
        (DimensionKind::Numerical, AttributeValue::Real(x), AttributeValue::Real(y)) => {
            let (lo, hi) = dim.range.expect("oracle needs ranged numerical dimensions");
            let width = hi - lo;
            if width == 0.0 {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            } else {
                let d = (x - y).abs() / width;
                if d > 1.0 {
                    0.0
                } else {
                    1.0 - d
                }
            }
        }
        _ => panic!("value kind does not match dimension {}", dim.name),
    };
    (-gamma * (1.0 - s)).exp()
}

/// Mean transformed Gower similarity; 1 when there are no dimensions.
pub fn oracle_similarity(dims: &[DimensionSpec], x: &AttributeVector, y: &AttributeVector, gamma: f64) -> f64 {
    if dims.is_empty() {
        return 1.0;
    }
    let mut total = 0.0;
    for d in 0..dims.len() {
        total += gower_term(&dims[d], &x.values()[d], &y.values()[d], gamma);
    }
    total / dims.len() as f64
}

/// Hop distances from `source`; unreachable nodes get `usize::MAX`.
pub fn bfs_distances(g: &AttributedGraph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_nodes()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &(a, b) in g.edges() {
            let other = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if dist[other] == usize::MAX {
                dist[other] = dist[u] + 1;
                queue.push_back(other);
            }
        }
    }
    dist
}

/// Nodes within `depth` hops of `center`, and edge indices (into
/// `g.edges()`) with an endpoint within `depth - 1` hops.
pub fn bfs_ball(g: &AttributedGraph, center: usize, depth: usize) -> (Vec<usize>, Vec<usize>) {
    let dist = bfs_distances(g, center);
    let nodes = (0..g.num_nodes()).filter(|&v| dist[v] <= depth).collect();
    let edges = (0..g.num_edges())
        .filter(|&e| {
            let (a, b) = g.edges()[e];
            dist[a] < depth || dist[b] < depth
        })
        .collect();
    (nodes, edges)
}

fn guard(g: &AttributedGraph) -> Result<(), OracleError> {
    if g.num_nodes() > MAX_NODES {
        return Err(OracleError::TooLarge { nodes: g.num_nodes() });
    }
    Ok(())
}

fn depth_term(
    g: &AttributedGraph,
    h: &AttributedGraph,
    schema: &AttributeSchema,
    gamma: f64,
    include_edges: bool,
    depth: usize,
) -> f64 {
    let mut total = 0.0;
    for v in 0..g.num_nodes() {
        for w in 0..h.num_nodes() {
            let (nodes_v, edges_v) = bfs_ball(g, v, depth);
            let (nodes_w, edges_w) = bfs_ball(h, w, depth);
            let mut inner = 0.0;
            for &a in &nodes_v {
                for &b in &nodes_w {
                    inner += oracle_similarity(&schema.node_dims, &g.node_attrs()[a], &h.node_attrs()[b], gamma);
                }
            }
            if include_edges {
                for &e in &edges_v {
                    for &f in &edges_w {
                        inner += match (g.edge_attrs(), h.edge_attrs()) {
                            (Some(ga), Some(ha)) => oracle_similarity(&schema.edge_dims, &ga[e], &ha[f], gamma),
                            _ => 1.0,
                        };
                    }
                }
            }
            let centers = oracle_similarity(&schema.node_dims, &g.node_attrs()[v], &h.node_attrs()[w], gamma);
            total += centers * inner;
        }
    }
    total
}

/// Star kernel summed over every pair of one-hop stars.
pub fn oracle_ks(
    g: &AttributedGraph,
    h: &AttributedGraph,
    schema: &AttributeSchema,
    gamma: f64,
    include_edges: bool,
) -> Result<f64, OracleError> {
    guard(g)?;
    guard(h)?;
    Ok(depth_term(g, h, schema, gamma, include_edges, 1))
}

/// Star kernel summed over depths `1..=min(depth, |V_g|, |V_h|)`, each
/// family rebuilt from scratch by BFS.
pub fn oracle_nask(
    g: &AttributedGraph,
    h: &AttributedGraph,
    schema: &AttributeSchema,
    gamma: f64,
    include_edges: bool,
    depth: usize,
) -> Result<f64, OracleError> {
    guard(g)?;
    guard(h)?;
    if depth > MAX_DEPTH {
        return Err(OracleError::TooDeep { depth });
    }
    let effective = depth.min(g.num_nodes()).min(h.num_nodes());
    let mut total = 0.0;
    for d in 1..=effective {
        total += depth_term(g, h, schema, gamma, include_edges, d);
    }
    Ok(total)
}

/// Attempts a Cholesky factorization of `k + jitter * I` (row-major `n x n`).
pub fn cholesky_succeeds(k: &[f64], n: usize, jitter: f64) -> bool {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            if i == j {
                s += jitter;
            }
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// PSD verdict by Cholesky of `k + tol * max(1, max diagonal) * I`.
pub fn oracle_is_psd(k: &[f64], n: usize, tol: f64) -> bool {
    let scale = (0..n).map(|i| k[i * n + i]).fold(1.0f64, f64::max);
    cholesky_succeeds(k, n, tol * scale)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when a pivot is (numerically) zero.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}

/// `Σα - ½ ΣΣ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(k: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        linear += alpha[i];
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    linear - 0.5 * quad
}

/// Exact maximizer of the soft-margin dual for small `n`.
///
/// Every assignment of each `α_i` to lower bound, upper bound or free is
/// tried. For the free set the stationarity equations together with
/// `Σ α_i y_i = 0` form a linear system; feasible solutions are candidate
/// points and the best objective among them is returned with its `α`.
pub fn oracle_svm_dual(k: &[f64], y: &[f64], c: f64) -> Result<(f64, Vec<f64>), OracleError> {
    let n = y.len();
    if n > MAX_SVM_POINTS {
        return Err(OracleError::TooManyPoints { points: n });
    }
    let slack = 1e-9 * c.max(1.0);
    let mut best = (0.0, vec![0.0; n]);
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let feasible = if free.is_empty() {
            (0..n).map(|i| alpha[i] * y[i]).sum::<f64>().abs() <= slack
        } else {
            // Unknowns: α_F then the bias b.
            let m = free.len() + 1;
            let mut a = vec![0.0; m * m];
            let mut rhs = vec![0.0; m];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r * m + s] = y[i] * y[j] * k[i * n + j];
                }
                a[r * m + free.len()] = y[i];
                let mut bound = 0.0;
                for j in 0..n {
                    if state[j] == 1 {
                        bound += y[i] * y[j] * k[i * n + j] * c;
                    }
                }
                rhs[r] = 1.0 - bound;
            }
            for (s, &j) in free.iter().enumerate() {
                a[free.len() * m + s] = y[j];
            }
            rhs[free.len()] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
            match solve_dense(a, rhs, m) {
                Some(x) if free.iter().enumerate().all(|(r, _)| x[r] >= -slack && x[r] <= c + slack) => {
                    for (r, &i) in free.iter().enumerate() {
                        alpha[i] = x[r].clamp(0.0, c);
                    }
                    true
                }
                _ => false,
            }
        };
        if feasible {
            let value = dual_objective(k, y, &alpha);
            if value > best.0 {
                best = (value, alpha);
            }
        }
        let mut pos = 0;
        while pos < n && state[pos] == 2 {
            state[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
        state[pos] += 1;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_verdicts() {
        assert!(oracle_is_psd(&[1.0, 0.0, 0.0, 1.0], 2, 1e-8));
        assert!(!oracle_is_psd(&[1.0, 2.0, 2.0, 1.0], 2, 1e-8));
        assert!(oracle_is_psd(&[1.0, 1.0, 1.0, 1.0], 2, 1e-8));
    }

    #[test]
    fn svm_dual_two_points() {
        // Identity kernel, opposite labels: α = (1, 1) for C ≥ 1, objective 1.
        let (value, alpha) = oracle_svm_dual(&[1.0, 0.0, 0.0, 1.0], &[1.0, -1.0], 10.0).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
        assert!((alpha[0] - 1.0).abs() < 1e-12 && (alpha[1] - 1.0).abs() < 1e-12);
        let (value, _) = oracle_svm_dual(&[1.0, 0.0, 0.0, 1.0], &[1.0, -1.0], 0.5).unwrap();
        assert!((value - (1.0 - 0.25)).abs() < 1e-12);
    }
}
