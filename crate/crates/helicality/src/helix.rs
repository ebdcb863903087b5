//! Shepard-Risset helix fitting: chroma centroids, line fit for pitch
//! height, winding/phase selection, projection, and the helicality score.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circle::{frank_wolfe_circle, CircleFit};
use crate::error::{Error, Result};
use crate::hull::{convex_hull, ConvexHull2D, Point2};
use crate::mds::Embedding;

/// One centroid per chroma class present in the embedding, in the (e1, e2)
/// plane.
#[derive(Debug, Clone)]
pub struct ChromaCentroids {
    pub points: Vec<Point2>,
    /// 0-based chroma label of each centroid, ascending.
    pub chromas: Vec<usize>,
}

/// Mean over octaves of the planar coordinates sharing a chroma:
/// centroid(x) = (1/J) sum_j y[x + Q*j].
///
/// When bins were dropped upstream the mean runs over the octave-mates that
/// remain, and chromas with no remaining bins are absent from the output.
pub fn chroma_centroids(emb: &Embedding) -> Result<ChromaCentroids> {
    let q = emb.layout.bins_per_octave;
    let p = emb.n_points();
    if emb.has_contiguous_bins() && p % q != 0 {
        return Err(Error::ShapeMismatch { rows: p, q });
    }
    let mut sums = vec![([0.0f64, 0.0f64], 0usize); q];
    for (i, &bin) in emb.bin_indices.iter().enumerate() {
        let y = emb.planar(i);
        let slot = &mut sums[bin % q];
        slot.0[0] += y[0];
        slot.0[1] += y[1];
        slot.1 += 1;
    }
    let mut points = Vec::with_capacity(q);
    let mut chromas = Vec::with_capacity(q);
    for (chroma, (acc, count)) in sums.into_iter().enumerate() {
        if count > 0 {
            points.push([acc[0] / count as f64, acc[1] / count as f64]);
            chromas.push(chroma);
        }
    }
    Ok(ChromaCentroids { points, chromas })
}

/// Least-squares line z[p] ~ a*p + b over p = 1..P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    #[serde(rename = "a")]
    pub slope: f64,
    #[serde(rename = "b")]
    pub intercept: f64,
}

/// Ordinary least squares of the height coordinate on the 1-based bin
/// parameter p.
pub fn fit_line(emb: &Embedding) -> LineFit {
    let n_pts = emb.n_points();
    assert!(n_pts >= 2, "need at least 2 points for a line fit");
    let n = n_pts as f64;
    let xs: Vec<f64> = emb.bin_indices.iter().map(|&b| (b + 1) as f64).collect();
    let mean_p = xs.iter().sum::<f64>() / n;
    let mean_z = (0..n_pts).map(|i| emb.height(i)).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxz = 0.0;
    for i in 0..n_pts {
        let x = xs[i] - mean_p;
        sxx += x * x;
        sxz += x * (emb.height(i) - mean_z);
    }
    let slope = sxz / sxx;
    LineFit {
        slope,
        intercept: mean_z - slope * mean_p,
    }
}

/// Fitted helix: circle in the plane, line along the height axis, one full
/// turn per octave.
#[derive(Debug, Clone, Serialize)]
pub struct HelixModel {
    pub circle: CircleFit,
    pub line: LineFit,
    /// Phase theta_0 at bin p = 1, radians.
    pub phase: f64,
    /// Turning direction, +1 or -1.
    pub winding: i8,
    pub bins_per_octave: usize,
}

impl HelixModel {
    /// Ideal helix angle at bin parameter p (1-based).
    pub fn angle(&self, p: usize) -> f64 {
        self.phase
            + self.winding as f64 * 2.0 * PI * (p as f64 - 1.0) / self.bins_per_octave as f64
    }

    /// Ideal helix point at bin parameter p (1-based).
    pub fn point(&self, p: usize) -> [f64; 3] {
        let theta = self.angle(p);
        [
            self.circle.center[0] + self.circle.radius * theta.cos(),
            self.circle.center[1] + self.circle.radius * theta.sin(),
            self.line.slope * p as f64 + self.line.intercept,
        ]
    }
}

/// Choose winding and phase from the observed angles around the fitted
/// center, minimizing the final mean squared residual.
///
/// For each winding sign, the phase is the circular mean of the per-bin
/// angle offsets; of the two candidates, the one with lower residual wins.
pub fn build_helix(circle: &CircleFit, line: &LineFit, emb: &Embedding) -> HelixModel {
    let q = emb.layout.bins_per_octave;
    let p = emb.n_points();

    let mut best: Option<(f64, HelixModel)> = None;
    for winding in [1i8, -1] {
        let mut sin_sum = 0.0;
        let mut cos_sum = 0.0;
        for i in 0..p {
            let y = emb.planar(i);
            let phi = (y[1] - circle.center[1]).atan2(y[0] - circle.center[0]);
            let bin = emb.bin_indices[i] as f64;
            let offset = phi - winding as f64 * 2.0 * PI * bin / q as f64;
            sin_sum += offset.sin();
            cos_sum += offset.cos();
        }
        let phase = sin_sum.atan2(cos_sum);
        let model = HelixModel {
            circle: circle.clone(),
            line: *line,
            phase,
            winding,
            bins_per_octave: q,
        };
        let mse = mean_squared_residual(emb, &project_helix(emb, &model));
        if best.as_ref().map_or(true, |(m, _)| mse < *m) {
            best = Some((mse, model));
        }
    }
    best.unwrap().1
}

/// Ideal helix points at each embedding row's bin parameter.
pub fn project_helix(emb: &Embedding, model: &HelixModel) -> Vec<[f64; 3]> {
    emb.bin_indices.iter().map(|&b| model.point(b + 1)).collect()
}

/// Helicality: the inverse mean squared residual between the embedding and
/// its helix projection.
#[derive(Debug, Clone, Serialize)]
pub struct HelicalityScore {
    /// 1/mse; +inf when the fit is numerically exact.
    pub h: f64,
    pub mse: f64,
    /// Per-bin Euclidean residual norms.
    pub residuals: Vec<f64>,
}

// Below this mean squared residual the score saturates to +inf.
const MSE_FLOOR: f64 = 1e-15;

pub fn helicality(emb: &Embedding, projected: &[[f64; 3]]) -> HelicalityScore {
    let p = emb.n_points();
    assert_eq!(projected.len(), p, "projection length mismatch");
    let residuals: Vec<f64> = (0..p)
        .map(|i| {
            let y = emb.planar(i);
            let z = emb.height(i);
            let q = projected[i];
            ((y[0] - q[0]).powi(2) + (y[1] - q[1]).powi(2) + (z - q[2]).powi(2)).sqrt()
        })
        .collect();
    let mse = residuals.iter().map(|r| r * r).sum::<f64>() / p as f64;
    let h = if mse < MSE_FLOOR { f64::INFINITY } else { 1.0 / mse };
    HelicalityScore { h, mse, residuals }
}

fn mean_squared_residual(emb: &Embedding, projected: &[[f64; 3]]) -> f64 {
    helicality(emb, projected).mse
}

/// Everything produced by fitting one embedding.
#[derive(Debug, Clone)]
pub struct HelixFit {
    pub centroids: ChromaCentroids,
    pub hull: ConvexHull2D,
    pub model: HelixModel,
    pub projected: Vec<[f64; 3]>,
    pub score: HelicalityScore,
}

/// Full fitting chain: centroids, Quickhull, Frank-Wolfe circle, line fit,
/// winding/phase selection, projection, score.
pub fn fit_and_score(emb: &Embedding) -> Result<HelixFit> {
    let centroids = chroma_centroids(emb)?;
    let hull = convex_hull(&centroids.points)?;
    let circle = frank_wolfe_circle(&centroids.points, &hull)?;
    let line = fit_line(emb);
    let model = build_helix(&circle, &line, emb);
    let projected = project_helix(emb, &model);
    let score = helicality(emb, &projected);
    Ok(HelixFit {
        centroids,
        hull,
        model,
        projected,
        score,
    })
}
