//! Directed weighted interaction graphs.
//!
//! Convention: `weights[(i, j)] > 0` means agent `i` receives from agent `j`.
//! Directed paths follow edges listener -> source, so a root is a vertex that
//! every other vertex can reach along such edges, i.e. a source of
//! information for the whole network.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Vector2};
use crate::error::{Error, Result, Violation};

/// Relative threshold on singular values of the transposed Laplacian used to
/// decide the dimension of its null space.
const NULLITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    weights: DMatrix<f64>,
    delays: DMatrix<f64>,
}

impl DirectedGraph {
    pub fn new(weights: DMatrix<f64>, delays: DMatrix<f64>) -> Result<Self> {
        let g = Self { weights, delays };
        let violations = g.violations();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    /// Graph without communication delays.
    pub fn undelayed(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        Self::new(weights, DMatrix::zeros(n, n))
    }

    /// Builds a graph from row-major nested vectors, as found in scenario files.
    pub fn from_rows(weights: &[Vec<f64>], delays: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix("weights", weights)?, rows_to_matrix("delays", delays)?)
    }

    /// Directed ring where agent `i` listens to agent `(i + 1) mod n`, with
    /// uniform weight and delay.
    pub fn ring(n: usize, weight: f64, delay: f64) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        let mut t = DMatrix::zeros(n, n);
        if n > 1 {
            for i in 0..n {
                w[(i, (i + 1) % n)] = weight;
                t[(i, (i + 1) % n)] = delay;
            }
        }
        Self::new(w, t)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn delays(&self) -> &DMatrix<f64> {
        &self.delays
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn delay(&self, i: usize, j: usize) -> f64 {
        self.delays[(i, j)]
    }

    /// Iterates over `(j, w_ij, T_ij)` for every source `j` that agent `i`
    /// listens to, in increasing `j`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.n()).filter_map(move |j| {
            let w = self.weights[(i, j)];
            (w > 0.0).then(|| (j, w, self.delays[(i, j)]))
        })
    }

    /// Same graph with every delay set to zero.
    pub fn without_delays(&self) -> Self {
        let n = self.n();
        Self {
            weights: self.weights.clone(),
            delays: DMatrix::zeros(n, n),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (r, c) = self.weights.shape();
        if r != c {
            out.push(Violation::new("graph.weights", format!("must be square, got {r}x{c}")));
            return out;
        }
        if self.delays.shape() != (r, c) {
            out.push(Violation::new(
                "graph.delays",
                format!("shape {:?} does not match weights {r}x{c}", self.delays.shape()),
            ));
            return out;
        }
        for i in 0..r {
            if self.weights[(i, i)] != 0.0 {
                out.push(Violation::new(
                    format!("graph.weights[{i}][{i}]"),
                    "self-loops are not allowed (w_ii must be 0)",
                ));
            }
            for j in 0..c {
                let w = self.weights[(i, j)];
                if !(w.is_finite() && w >= 0.0) {
                    out.push(Violation::new(
                        format!("graph.weights[{i}][{j}]"),
                        format!("must be finite and nonnegative, got {w}"),
                    ));
                }
                let t = self.delays[(i, j)];
                if !(t.is_finite() && t >= 0.0) {
                    out.push(Violation::new(
                        format!("graph.delays[{i}][{j}]"),
                        format!("must be finite and nonnegative, got {t}"),
                    ));
                }
            }
        }
        out
    }
}

fn rows_to_matrix(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::InvalidConfig(vec![Violation::new(
            format!("graph.{name}[{i}]"),
            format!("expected {n} entries, got {}", row.len()),
        )]));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Weighted Laplacian. Diagonal entries are the negated sum of the row's
/// off-diagonal entries, so rows sum to exactly zero.
pub fn laplacian(g: &DirectedGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                l[(i, j)] = -g.weights[(i, j)];
                off += l[(i, j)];
            }
        }
        l[(i, i)] = -off;
    }
    l
}

/// Vertices that `start` can reach following listener -> source edges.
fn reachable_from(g: &DirectedGraph, start: usize) -> Vec<bool> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for (j, _, _) in g.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Vertices reachable from every vertex along directed paths.
pub fn roots(g: &DirectedGraph) -> Vec<usize> {
    let n = g.n();
    let mut reached_by_all = vec![true; n];
    for i in 0..n {
        let r = reachable_from(g, i);
        for (k, hit) in r.into_iter().enumerate() {
            reached_by_all[k] &= hit;
        }
    }
    (0..n).filter(|&k| reached_by_all[k]).collect()
}

pub fn has_spanning_tree(g: &DirectedGraph) -> bool {
    g.n() > 0 && !roots(g).is_empty()
}

/// Normalized nonnegative left null vector of the Laplacian.
///
/// Found from the singular value decomposition of the transposed Laplacian;
/// fails unless exactly one singular value is numerically zero.
pub fn left_eigenvector_gamma(g: &DirectedGraph) -> Result<DVector<f64>> {
    let n = g.n();
    if n == 0 {
        return Err(Error::NoSpanningTree { nullity: 0 });
    }
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let lt = laplacian(g).transpose();
    let scale = lt.amax().max(1.0);
    let svd = lt.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;

    let nullity = sv.iter().filter(|&&s| s <= NULLITY_TOL * scale).count();
    if nullity != 1 {
        return Err(Error::NoSpanningTree { nullity });
    }
    let k = sv.imin();
    let mut gamma: DVector<f64> = v_t.row(k).transpose();
    let sum = gamma.sum();
    gamma /= sum;
    // Entries at non-root vertices come out at rounding level with either sign.
    gamma.iter_mut().for_each(|x| {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    });
    Ok(gamma)
}

/// Scale factor `1 / (1 + sum_k sum_l gamma_k w_kl T_kl)` of the delayed
/// consensus equilibrium.
pub fn delay_scale(g: &DirectedGraph, gamma: &DVector<f64>) -> f64 {
    let n = g.n();
    let mut acc = 0.0;
    for k in 0..n {
        for (_, w, t) in g.neighbors(k) {
            acc += gamma[k] * w * t;
        }
    }
    1.0 / (1.0 + acc)
}

/// Equilibrium predicted for the observed positions when the integral gain on
/// the consensus sliding vector is positive and no external input acts.
pub fn predicted_consensus_value(g: &DirectedGraph, x_o0: &[Vector2<f64>]) -> Result<Vector2<f64>> {
    if x_o0.len() != g.n() {
        return Err(Error::InvalidParameter {
            name: "x_o0",
            reason: format!("expected {} initial positions, got {}", g.n(), x_o0.len()),
        });
    }
    let gamma = left_eigenvector_gamma(g)?;
    let weighted = x_o0
        .iter()
        .zip(gamma.iter())
        .fold(Vector2::zeros(), |acc, (x, &gk)| acc + x * gk);
    Ok(weighted * delay_scale(g, &gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        let n = rows.len();
        DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn laplacian_of_mutual_pair() {
        let g = DirectedGraph::undelayed(m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(laplacian(&g), m(&[&[1.0, -1.0], &[-1.0, 1.0]]));
    }

    #[test]
    fn laplacian_of_empty_graph_is_zero() {
        let g = DirectedGraph::undelayed(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(laplacian(&g), DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_of_ring_is_circulant() {
        let g = DirectedGraph::ring(6, 0.5, 0.5).unwrap();
        let l = laplacian(&g);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j {
                    0.5
                } else if j == (i + 1) % 6 {
                    -0.5
                } else {
                    0.0
                };
                assert_eq!(l[(i, j)], expected);
            }
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn spanning_tree_cases() {
        assert!(has_spanning_tree(&DirectedGraph::ring(6, 0.5, 0.0).unwrap()));

        let mut w = DMatrix::zeros(6, 6);
        for block in [0usize, 3] {
            for i in block..block + 3 {
                for j in block..block + 3 {
                    if i != j {
                        w[(i, j)] = 1.0;
                    }
                }
            }
        }
        assert!(!has_spanning_tree(&DirectedGraph::undelayed(w).unwrap()));

        // Agent 0 listens to everyone else; nobody listens to agent 0.
        let mut star = DMatrix::zeros(6, 6);
        for j in 1..6 {
            star[(0, j)] = 1.0;
        }
        let g = DirectedGraph::undelayed(star).unwrap();
        assert!(!has_spanning_tree(&g));
        assert!(roots(&g).is_empty());
    }

    #[test]
    fn star_listener_with_single_source_has_that_source_as_root() {
        // Agent 0 listens to 1..5 and each of 1..5 listens to 1: every vertex
        // reaches vertex 1.
        let mut w = DMatrix::zeros(6, 6);
        for j in 1..6 {
            w[(0, j)] = 1.0;
        }
        for i in 2..6 {
            w[(i, 1)] = 1.0;
        }
        let g = DirectedGraph::undelayed(w).unwrap();
        assert_eq!(roots(&g), vec![1]);
    }

    #[test]
    fn gamma_examples() {
        let ring = DirectedGraph::ring(6, 0.5, 0.5).unwrap();
        let gamma = left_eigenvector_gamma(&ring).unwrap();
        for &gk in gamma.iter() {
            assert!((gk - 1.0 / 6.0).abs() < 1e-14);
        }

        let leader = DirectedGraph::undelayed(m(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        let gamma = left_eigenvector_gamma(&leader).unwrap();
        assert!((gamma[0] - 1.0).abs() < 1e-14 && gamma[1].abs() < 1e-14);

        let mutual = DirectedGraph::undelayed(m(&[&[0.0, 1.0], &[3.0, 0.0]])).unwrap();
        let gamma = left_eigenvector_gamma(&mutual).unwrap();
        assert!((gamma[0] - 0.75).abs() < 1e-14);
        assert!((gamma[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn gamma_fails_without_spanning_tree() {
        let g = DirectedGraph::undelayed(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(
            left_eigenvector_gamma(&g),
            Err(Error::NoSpanningTree { nullity: 3 })
        ));
    }

    #[test]
    fn single_agent_is_its_own_consensus() {
        let g = DirectedGraph::undelayed(DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(left_eigenvector_gamma(&g).unwrap()[0], 1.0);
        let x = Vector2::new(1.25, -0.5);
        assert_eq!(predicted_consensus_value(&g, &[x]).unwrap(), x);
    }

    #[test]
    fn predicted_value_on_delayed_ring() {
        let g = DirectedGraph::ring(6, 0.5, 0.5).unwrap();
        let xs: Vec<_> = (0..6).map(|k| Vector2::new(k as f64, 1.0)).collect();
        let mean = xs.iter().sum::<Vector2<f64>>() / 6.0;
        let p = predicted_consensus_value(&g, &xs).unwrap();
        assert!((p - 0.8 * mean).amax() < 1e-12);

        let p0 = predicted_consensus_value(&g.without_delays(), &xs).unwrap();
        assert!((p0 - mean).amax() < 1e-12);
    }

    #[test]
    fn predicted_value_uses_only_root_delays() {
        // Agent 1 listens to the root 0 with a delay; the root has no
        // incoming edges, so the scale stays 1.
        let w = m(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let t = m(&[&[0.0, 0.0], &[0.7, 0.0]]);
        let g = DirectedGraph::new(w, t).unwrap();
        let xs = [Vector2::new(1.0, 2.0), Vector2::new(5.0, 5.0)];
        let p = predicted_consensus_value(&g, &xs).unwrap();
        assert!((p - xs[0]).amax() < 1e-14);

        // Mutual pair with only the root-side edge delayed: gamma = [0.75, 0.25]
        // and scale = 1 / (1 + 0.75 * 1 * 0.4).
        let w = m(&[&[0.0, 1.0], &[3.0, 0.0]]);
        let t = m(&[&[0.0, 0.4], &[0.0, 0.0]]);
        let g = DirectedGraph::new(w, t).unwrap();
        let p = predicted_consensus_value(&g, &xs).unwrap();
        let expected = (xs[0] * 0.75 + xs[1] * 0.25) / 1.3;
        assert!((p - expected).amax() < 1e-12);
    }

    #[test]
    fn rejects_self_loops_and_negative_entries() {
        let err = DirectedGraph::undelayed(m(&[&[1.0, 0.0], &[-1.0, 0.0]])).unwrap_err();
        match err {
            Error::InvalidConfig(v) => {
                assert!(v.iter().any(|v| v.field == "graph.weights[0][0]"));
                assert!(v.iter().any(|v| v.field == "graph.weights[1][0]"));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
