//! Classical multidimensional scaling: double-center the squared distance
//! matrix and eigendecompose it with a cyclic Jacobi solver.

use ndarray::{Array1, Array2};

use crate::correlation::DistanceMatrix;
use crate::error::{Error, Result};

/// Chroma layout carried alongside the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctaveLayout {
    pub bins_per_octave: usize,
    pub n_octaves: usize,
}

/// MDS embedding: P points whose column m is e_m * sqrt(lambda_m).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub coords: Array2<f64>,
    /// Retained eigenvalues, decreasing and strictly positive.
    pub eigenvalues: Vec<f64>,
    pub layout: OctaveLayout,
    /// Original bin index (0-based, within the retained octave window) of
    /// each row. Differs from 0..P only when bins were dropped upstream.
    pub bin_indices: Vec<usize>,
}

impl Embedding {
    pub fn new(coords: Array2<f64>, eigenvalues: Vec<f64>, layout: OctaveLayout) -> Self {
        let bin_indices = (0..coords.nrows()).collect();
        Embedding {
            coords,
            eigenvalues,
            layout,
            bin_indices,
        }
    }

    /// True when no bins were dropped: indices are exactly 0..P.
    pub fn has_contiguous_bins(&self) -> bool {
        self.bin_indices.iter().enumerate().all(|(i, &b)| i == b)
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    /// Planar part (e1, e2) of point p.
    pub fn planar(&self, p: usize) -> [f64; 2] {
        [self.coords[(p, 0)], self.coords[(p, 1)]]
    }

    /// Height coordinate z[p] (the third embedding column).
    pub fn height(&self, p: usize) -> f64 {
        self.coords[(p, 2)]
    }
}

// Relative off-diagonal residual at which Jacobi sweeps stop.
const JACOBI_TOLERANCE: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), unordered.
pub fn jacobi_eigen(matrix: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    let mut a = matrix.clone();
    let mut v = Array2::eye(n);

    let frobenius = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frobenius == 0.0 {
        return (Array1::zeros(n), v);
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[(p, q)] * a[(p, q)];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= JACOBI_TOLERANCE * frobenius {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::EPSILON * frobenius {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let eigenvalues = Array1::from_iter((0..n).map(|i| a[(i, i)]));
    (eigenvalues, v)
}

/// Classical MDS of a symmetric zero-diagonal distance matrix.
///
/// B = -1/2 J D^2 J with J the centering projector. The `dims` largest
/// eigenvalues are retained; negative eigenvalues (the distances are only
/// pseudo-Euclidean) are discarded. Each eigenvector's sign is fixed so its
/// largest-magnitude entry is positive.
pub fn classical_mds(d: &DistanceMatrix, dims: usize, layout: OctaveLayout) -> Result<Embedding> {
    let p = d.len();
    assert!(dims >= 1);

    // double-centered Gram matrix
    let d2 = d.d.mapv(|x| x * x);
    let row_means: Vec<f64> = (0..p).map(|i| d2.row(i).sum() / p as f64).collect();
    let grand_mean: f64 = row_means.iter().sum::<f64>() / p as f64;
    let mut b = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            b[(i, j)] = -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand_mean);
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(&b);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        eigenvalues[j]
            .partial_cmp(&eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let lambda_max = eigenvalues[order[0]].max(0.0);
    let positive: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eigenvalues[i] > JACOBI_TOLERANCE * lambda_max)
        .collect();
    if positive.len() < dims {
        return Err(Error::InsufficientPositiveEigenvalues {
            found: positive.len(),
            needed: dims,
        });
    }

    let mut coords = Array2::zeros((p, dims));
    let mut kept = Vec::with_capacity(dims);
    for (m, &idx) in positive.iter().take(dims).enumerate() {
        let lambda = eigenvalues[idx];
        kept.push(lambda);
        // sign convention: the entry of largest magnitude is positive
        let mut pivot = 0;
        for i in 1..p {
            if vectors[(i, idx)].abs() > vectors[(pivot, idx)].abs() {
                pivot = i;
            }
        }
        let sign = if vectors[(pivot, idx)] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * lambda.sqrt();
        for i in 0..p {
            coords[(i, m)] = vectors[(i, idx)] * scale;
        }
    }

    Ok(Embedding::new(coords, kept, layout))
}
