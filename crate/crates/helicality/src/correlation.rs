//! Squared Pearson correlations between subbands and their conversion to
//! pseudo-Euclidean distances, d = sqrt(-log(rho^2) / 2).

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Symmetric P x P matrix of squared Pearson correlations, entries in [0, 1].
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub rho2: Array2<f64>,
}

/// What a [`DistanceMatrix`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Pseudo-Euclidean distances derived from correlations.
    Pseudo,
    /// Shortest-path distances on the neighbor graph.
    Geodesic,
}

/// Symmetric P x P distance matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub d: Array2<f64>,
    pub kind: DistanceKind,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.d.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

/// Squared Pearson correlations between all row pairs of X, with population
/// (1/N) normalization. Entries are clamped into [0, 1] to absorb round-off.
pub fn pearson_squared(x: &FeatureMatrix) -> Result<CorrelationMatrix> {
    rho2_of_rows(&x.data)
}

/// Same as [`pearson_squared`] but on a bare matrix.
pub fn rho2_of_rows(data: &Array2<f64>) -> Result<CorrelationMatrix> {
    let p = data.nrows();
    let n = data.ncols() as f64;

    let means: Vec<f64> = data.axis_iter(Axis(0)).map(|r| r.sum() / n).collect();
    let mut centered = data.clone();
    for (mut row, &m) in centered.axis_iter_mut(Axis(0)).zip(&means) {
        row.mapv_inplace(|v| v - m);
    }
    let variances: Vec<f64> = centered
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|&v| v * v).sum::<f64>() / n)
        .collect();

    let zero_rows: Vec<usize> = variances
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= 0.0)
        .map(|(i, _)| i)
        .collect();
    if !zero_rows.is_empty() {
        return Err(Error::ZeroVarianceRow { bins: zero_rows });
    }

    let mut rho2 = Array2::zeros((p, p));
    for u in 0..p {
        rho2[(u, u)] = 1.0;
        for v in (u + 1)..p {
            let cov = centered
                .row(u)
                .iter()
                .zip(centered.row(v).iter())
                .map(|(&a, &b)| a * b)
                .sum::<f64>()
                / n;
            let r = cov / (variances[u] * variances[v]).sqrt();
            let r2 = (r * r).clamp(0.0, 1.0);
            rho2[(u, v)] = r2;
            rho2[(v, u)] = r2;
        }
    }
    Ok(CorrelationMatrix { rho2 })
}

/// Positions to keep after dropping the bad rows octave-consistently: a
/// dropped bin is removed at all octave positions of its chroma.
///
/// `bin_labels[i]` is the original bin index of row i; `bad_rows` are row
/// positions in the current matrix.
pub fn octave_consistent_keep(bin_labels: &[usize], q: usize, bad_rows: &[usize]) -> Vec<usize> {
    let mut bad_chromas: Vec<usize> = bad_rows.iter().map(|&r| bin_labels[r] % q).collect();
    bad_chromas.sort_unstable();
    bad_chromas.dedup();
    (0..bin_labels.len())
        .filter(|&r| !bad_chromas.contains(&(bin_labels[r] % q)))
        .collect()
}

/// Drop the listed rows from a feature matrix, keeping octave structure.
pub fn drop_zero_variance_rows(x: &FeatureMatrix, q: usize, bad_rows: &[usize]) -> FeatureMatrix {
    let labels: Vec<usize> = (0..x.n_bins()).collect();
    let keep = octave_consistent_keep(&labels, q, bad_rows);
    let data = x.data.select(Axis(0), &keep);
    FeatureMatrix {
        data,
        bin_offset: x.bin_offset,
        params: x.params.clone(),
        file_ids: x.file_ids.clone(),
    }
}

/// Apply d[p,q] = sqrt(-0.5 * ln(max(rho2, floor))); the diagonal is forced
/// to exactly zero.
pub fn rho_to_distance(corr: &CorrelationMatrix, floor: f64) -> DistanceMatrix {
    assert!(floor > 0.0 && floor < 1.0, "floor must lie in (0, 1)");
    let mut d = corr.rho2.mapv(|r2| (-0.5 * r2.max(floor).ln()).sqrt());
    for i in 0..d.nrows() {
        d[(i, i)] = 0.0;
    }
    DistanceMatrix {
        d,
        kind: DistanceKind::Pseudo,
    }
}
