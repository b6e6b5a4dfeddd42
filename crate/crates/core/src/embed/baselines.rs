//! Embeddings of the proximity kernel without diffusion: Isomap on a k-NN
//! graph and MDS directly on the proximity dissimilarities. Both use
//! d_ij = √(1 − K_ij).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;

use super::mds::{classical_mds, metric_mds, DEFAULT_MAX_ITER, DEFAULT_TOL};
use super::{Embedding, EmbeddingMethod};
use crate::error::{Error, Result};
use crate::forest::ProximityKernel;

pub fn proximity_dissimilarity(kernel: &ProximityKernel) -> DMatrix<f64> {
    let mut d = kernel.k.map(|k| (1.0 - k).max(0.0).sqrt());
    d.fill_diagonal(0.0);
    d
}

/// Symmetrized k-NN adjacency. Only pairs with positive proximity can be
/// neighbours; distance ties go to the smaller index.
pub(crate) fn knn_graph(kernel: &ProximityKernel, d: &DMatrix<f64>, n_neighbors: usize) -> Vec<Vec<(usize, f64)>> {
    let n = d.nrows();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i && kernel.k[(i, j)] > 0.0).collect();
        cand.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
        for &j in cand.iter().take(n_neighbors) {
            adj[i].push((j, d[(i, j)]));
            adj[j].push((i, d[(i, j)]));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|e| e.0);
        list.dedup_by(|a, b| a.0 == b.0);
    }
    adj
}

pub(crate) fn components(adj: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            comp.push(u);
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([State { dist: 0.0, node: source }]);
    while let Some(State { dist: du, node: u }) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = du + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(State { dist: nd, node: v });
            }
        }
    }
    dist
}

/// All-pairs shortest paths on the proximity k-NN graph.
pub fn geodesic_distances(kernel: &ProximityKernel, n_neighbors: usize) -> Result<DMatrix<f64>> {
    if n_neighbors == 0 {
        return Err(Error::InvalidParameter("n_neighbors must be positive".into()));
    }
    let d = proximity_dissimilarity(kernel);
    let adj = knn_graph(kernel, &d, n_neighbors);
    let comps = components(&adj);
    if comps.len() > 1 {
        return Err(Error::DisconnectedGraph(comps));
    }
    let n = d.nrows();
    let rows: Vec<Vec<f64>> = par_map_range!(0..n, |s| dijkstra(&adj, s));
    let mut g = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    // Dijkstra from each end can differ in the last bit; keep the matrix exactly symmetric
    for i in 0..n {
        for j in i + 1..n {
            let v = g[(i, j)].min(g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Isomap on the proximity dissimilarities.
pub fn isomap_prox(kernel: &ProximityKernel, n_neighbors: usize, m: usize) -> Result<Embedding> {
    let g = geodesic_distances(kernel, n_neighbors)?;
    let mut e = classical_mds(&g, m)?;
    e.method = EmbeddingMethod::IsomapProx;
    Ok(e)
}

/// Classical MDS on the proximity dissimilarities, optionally refined by SMACOF.
pub fn mds_prox(kernel: &ProximityKernel, m: usize, metric: bool) -> Result<Embedding> {
    let d = proximity_dissimilarity(kernel);
    let init = classical_mds(&d, m)?;
    let mut e = if metric {
        metric_mds(&d, m, &init, DEFAULT_TOL, DEFAULT_MAX_ITER)?
    } else {
        init
    };
    e.method = EmbeddingMethod::MdsProx;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_kernel(n: usize) -> ProximityKernel {
        let k = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => 0.75,
            _ => 0.0,
        });
        ProximityKernel::from_matrix(k)
    }

    #[test]
    fn chain_geodesics_follow_hops() {
        let g = geodesic_distances(&chain_kernel(6), 2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((g[(i, j)] - 0.5 * i.abs_diff(j) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disconnected_graph_names_components() {
        let mut k = DMatrix::identity(4, 4);
        k[(0, 1)] = 0.5;
        k[(1, 0)] = 0.5;
        k[(2, 3)] = 0.5;
        k[(3, 2)] = 0.5;
        match geodesic_distances(&ProximityKernel::from_matrix(k), 3) {
            Err(Error::DisconnectedGraph(c)) => assert_eq!(c, vec![vec![0, 1], vec![2, 3]]),
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }

    #[test]
    fn full_proximity_collapses() {
        let k = ProximityKernel::from_matrix(DMatrix::from_element(3, 3, 1.0));
        let e = isomap_prox(&k, 2, 1).unwrap();
        assert!(e.y.iter().all(|&v| v == 0.0));
        let e = mds_prox(&k, 2, false).unwrap();
        assert!(e.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_gives_regular_simplex() {
        let k = ProximityKernel::from_matrix(DMatrix::identity(4, 4));
        let e = mds_prox(&k, 3, false).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let d = (e.y.row(i) - e.y.row(j)).norm();
                assert!((d - 1.0).abs() < 1e-8);
            }
        }
    }
}
