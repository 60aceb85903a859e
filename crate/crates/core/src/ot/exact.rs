use ndarray::{Array1, Array2};

use super::scaling::xlogx;
use crate::error::{Result, SwiftError};

/// Largest marginal length accepted by [`exact_ot`].
pub const MAX_EXACT_DIM: usize = 6;

/// A materialized transport plan with its cost and entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitTransport {
    pub plan: Array2<f64>,
    /// `⟨C, T⟩`
    pub cost: f64,
    /// `E(T) = -Σ T log T`
    pub entropy: f64,
}

impl ExplicitTransport {
    pub fn from_plan(plan: Array2<f64>, cost: &Array2<f64>) -> Self {
        let c = (&plan * cost).sum();
        let entropy = -plan.iter().map(|&t| xlogx(t)).sum::<f64>();
        ExplicitTransport {
            plan,
            cost: c,
            entropy,
        }
    }
}

pub(crate) fn check_balanced(a: &[f64], b: &[f64]) -> Result<f64> {
    if let Some(v) = a.iter().chain(b).find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(SwiftError::Unbalanced(format!("invalid marginal entry {v}")));
    }
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(SwiftError::Unbalanced(format!("total mass {sa} vs {sb}")));
    }
    Ok(sa)
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Exact minimizer of `⟨C, T⟩` over plans with row sums `a` and column sums
/// `b`, by successive shortest augmenting paths.
pub fn exact_ot(a: &Array1<f64>, b: &Array1<f64>, cost: &Array2<f64>) -> Result<ExplicitTransport> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(SwiftError::Shape("empty marginal".into()));
    }
    if m > MAX_EXACT_DIM || n > MAX_EXACT_DIM {
        return Err(SwiftError::TooLarge(format!(
            "exact transport limited to {MAX_EXACT_DIM} bins, got {m}x{n}"
        )));
    }
    if cost.dim() != (m, n) {
        return Err(SwiftError::Shape(format!(
            "cost {:?} does not match marginals {m}x{n}",
            cost.dim()
        )));
    }
    let a = a.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| a.to_vec());
    let b = b.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| b.to_vec());
    let total = check_balanced(&a, &b)?;

    // source 0, rows 1..=m, columns m+1..=m+n, sink m+n+1
    let nodes = m + n + 2;
    let sink = nodes - 1;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |from: usize, to: usize, cap: f64, cost: f64| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost });
        adj[to].push(edges.len());
        edges.push(Edge {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
    };
    for (i, &ai) in a.iter().enumerate() {
        add(0, 1 + i, ai, 0.0);
    }
    // each add() creates a forward/backward pair; cell (i, j) is pair m + i*n + j
    let cell_edge = |i: usize, j: usize| 2 * (m + i * n + j);
    for i in 0..m {
        for j in 0..n {
            add(1 + i, 1 + m + j, f64::INFINITY, cost[[i, j]]);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        add(1 + m + j, sink, bj, 0.0);
    }

    let tol = 1e-14 * total.max(1.0);
    let mut sent = 0.0;
    while total - sent > tol {
        // Bellman-Ford on the residual graph (no negative cycles: SSP invariant).
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > tol && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        prev[edge.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == f64::INFINITY {
            break;
        }
        let mut push = f64::INFINITY;
        let mut node = sink;
        while node != 0 {
            let e = prev[node];
            push = push.min(edges[e].cap);
            node = edges[e ^ 1].to;
        }
        let mut node = sink;
        while node != 0 {
            let e = prev[node];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            node = edges[e ^ 1].to;
        }
        sent += push;
    }

    let plan = Array2::from_shape_fn((m, n), |(i, j)| {
        let flow = edges[cell_edge(i, j) ^ 1].cap;
        if flow > tol {
            flow
        } else {
            0.0
        }
    });
    Ok(ExplicitTransport::from_plan(plan, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_marginals_stay_put() {
        let a = array![0.2, 0.5, 0.3];
        let c = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let t = exact_ot(&a, &a, &c).unwrap();
        assert_eq!(t.cost, 0.0);
        assert_eq!(t.plan, Array2::from_diag(&a));
    }

    #[test]
    fn forced_single_move() {
        let t = exact_ot(
            &array![1.0, 0.0],
            &array![0.0, 1.0],
            &array![[0.0, 1.0], [1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(t.cost, 1.0);
        assert_eq!(t.plan, array![[0.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn rejects_unbalanced_and_large() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            exact_ot(&array![1.0, 0.0], &array![0.0, 2.0], &c),
            Err(SwiftError::Unbalanced(_))
        ));
        let big = Array1::ones(7);
        assert!(matches!(
            exact_ot(&big, &big, &Array2::zeros((7, 7))),
            Err(SwiftError::TooLarge(_))
        ));
    }
}
