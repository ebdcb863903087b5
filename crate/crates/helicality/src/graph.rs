//! k-nearest-neighbor graph and geodesic (shortest-path) distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;
use rayon::prelude::*;

use crate::correlation::{DistanceKind, DistanceMatrix};
use crate::error::{Error, Result};

/// Undirected weighted graph over the P subbands.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub n_vertices: usize,
    /// Adjacency lists; each edge (u, v, w) appears in both lists.
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            for &(v, w) in nbrs {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Connected components as sorted vertex lists, largest first.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n_vertices];
        let mut components = Vec::new();
        for start in 0..self.n_vertices {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components.sort_by_key(|c| std::cmp::Reverse(c.len()));
        components
    }

    /// Subgraph induced on `vertices` (which must be sorted), reindexed 0..len.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> NeighborGraph {
        let mut index = vec![usize::MAX; self.n_vertices];
        for (new, &old) in vertices.iter().enumerate() {
            index[old] = new;
        }
        let adjacency = vertices
            .iter()
            .map(|&u| {
                self.adjacency[u]
                    .iter()
                    .filter(|(v, _)| index[*v] != usize::MAX)
                    .map(|&(v, w)| (index[v], w))
                    .collect()
            })
            .collect();
        NeighborGraph {
            n_vertices: vertices.len(),
            adjacency,
        }
    }
}

/// Connect each vertex to its k nearest neighbors (ties to the smaller
/// index), then symmetrize by union: the edge stays if either endpoint
/// selected the other.
pub fn knn_graph(d: &DistanceMatrix, k: usize) -> NeighborGraph {
    let p = d.len();
    assert!(k >= 1 && k < p, "need 1 <= k < P");

    let mut selected = vec![vec![false; p]; p];
    for u in 0..p {
        let mut order: Vec<usize> = (0..p).filter(|&v| v != u).collect();
        order.sort_by(|&a, &b| {
            d.d[(u, a)]
                .partial_cmp(&d.d[(u, b)])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &v in order.iter().take(k) {
            selected[u][v] = true;
        }
    }

    let mut adjacency = vec![Vec::new(); p];
    for u in 0..p {
        for v in (u + 1)..p {
            if selected[u][v] || selected[v][u] {
                let w = d.d[(u, v)];
                adjacency[u].push((v, w));
                adjacency[v].push((u, w));
            }
        }
    }
    NeighborGraph {
        n_vertices: p,
        adjacency,
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then(other.vertex.cmp(&self.vertex))
    }
}

/// Single-source shortest paths; unreachable vertices get +inf.
pub fn dijkstra(g: &NeighborGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n_vertices];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(HeapEntry { dist: du, vertex: u }) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &g.adjacency[u] {
            let alt = du + w;
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(HeapEntry {
                    dist: alt,
                    vertex: v,
                });
            }
        }
    }
    dist
}

/// All-pairs shortest paths by repeated Dijkstra.
///
/// Errors with the component decomposition when the graph is disconnected.
pub fn geodesic_distances(g: &NeighborGraph) -> Result<DistanceMatrix> {
    let components = g.connected_components();
    if components.len() > 1 {
        return Err(Error::DisconnectedGraph {
            component_sizes: components.iter().map(|c| c.len()).collect(),
        });
    }
    let p = g.n_vertices;
    let rows: Vec<Vec<f64>> = (0..p).into_par_iter().map(|u| dijkstra(g, u)).collect();
    let mut d = Array2::zeros((p, p));
    for (u, row) in rows.iter().enumerate() {
        for (v, &w) in row.iter().enumerate() {
            d[(u, v)] = w;
        }
    }
    // symmetry can drift by float round-off in path sums; enforce exactly
    for u in 0..p {
        for v in (u + 1)..p {
            let w = d[(u, v)].min(d[(v, u)]);
            d[(u, v)] = w;
            d[(v, u)] = w;
        }
    }
    Ok(DistanceMatrix {
        d,
        kind: DistanceKind::Geodesic,
    })
}
