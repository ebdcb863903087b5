//! Circle fitting by Frank-Wolfe conditional gradient over the convex hull
//! of the chroma centroids.
//!
//! The objective is Coope's least-squares form
//! V(c) = sum_x ||c - y[x]||^2 - (1/Q) (sum_x ||c - y[x]||)^2,
//! which equals Q times the variance of the center-to-point radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{ConvexHull2D, Point2};

/// Result of the constrained circle fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: Point2,
    /// Mean distance from the fitted center to the centroids.
    pub radius: f64,
    pub objective_value: f64,
    pub iterations: usize,
    pub duality_gap: f64,
}

// Distances below this contribute a zero unit vector to the gradient
// (subgradient choice at the non-differentiable point).
const RADIUS_EPSILON: f64 = 1e-12;

/// Objective value and gradient at center candidate `c`.
pub fn circle_objective(c: Point2, centroids: &[Point2]) -> (f64, Point2) {
    let q = centroids.len() as f64;
    let mut sum_r = 0.0;
    let mut sum_r2 = 0.0;
    let mut sum_diff = [0.0, 0.0];
    let mut sum_unit = [0.0, 0.0];
    for y in centroids {
        let dx = c[0] - y[0];
        let dy = c[1] - y[1];
        let r = dx.hypot(dy);
        sum_r += r;
        sum_r2 += r * r;
        sum_diff[0] += dx;
        sum_diff[1] += dy;
        if r >= RADIUS_EPSILON {
            sum_unit[0] += dx / r;
            sum_unit[1] += dy / r;
        }
    }
    let value = sum_r2 - sum_r * sum_r / q;

    // cross-check against the variance form: V = sum (r - mean_r)^2 >= 0
    let mean_r = sum_r / q;
    let variance_form: f64 = centroids
        .iter()
        .map(|y| {
            let r = (c[0] - y[0]).hypot(c[1] - y[1]);
            (r - mean_r) * (r - mean_r)
        })
        .sum();
    let scale = sum_r2.abs().max(1.0);
    assert!(
        (value - variance_form).abs() <= 1e-10 * scale,
        "objective forms disagree: {value} vs {variance_form}"
    );
    assert!(value >= -1e-10 * scale, "objective went negative: {value}");

    let grad = [
        2.0 * sum_diff[0] - (2.0 / q) * sum_r * sum_unit[0],
        2.0 * sum_diff[1] - (2.0 / q) * sum_r * sum_unit[1],
    ];
    (value.max(0.0), grad)
}

const FW_GAP_TOLERANCE: f64 = 1e-12;
const FW_MAX_ITERATIONS: usize = 10_000;

/// Minimize the circle objective over the hull with away-step Frank-Wolfe,
/// starting from the hull barycenter.
///
/// The linear minimization oracle scans hull vertices only. Away steps
/// (moving mass off the worst active vertex) avoid the zigzag stall of the
/// plain iteration when the optimum sits on a hull edge; the default
/// 2/(t+2) step falls back to golden-section line search whenever it would
/// increase the objective, so the iteration is monotone.
pub fn frank_wolfe_circle(centroids: &[Point2], hull: &ConvexHull2D) -> Result<CircleFit> {
    let n = hull.vertices.len();
    // barycenter = uniform convex combination of the vertices
    let mut weights = vec![1.0 / n as f64; n];
    let mut c = hull.barycenter;
    let mut iterations = 0;

    for t in 0..FW_MAX_ITERATIONS {
        let (value, grad) = circle_objective(c, centroids);
        if !value.is_finite() || !grad[0].is_finite() || !grad[1].is_finite() {
            return Err(Error::NonFiniteObjective { iteration: t });
        }

        // LMO: linear functions on a polytope attain their minimum at a vertex
        let dot = |v: Point2| grad[0] * v[0] + grad[1] * v[1];
        let mut s_idx = 0;
        for i in 1..n {
            if dot(hull.vertices[i]) < dot(hull.vertices[s_idx]) {
                s_idx = i;
            }
        }
        let s = hull.vertices[s_idx];

        let gap = grad[0] * (c[0] - s[0]) + grad[1] * (c[1] - s[1]);
        iterations = t;
        if gap <= FW_GAP_TOLERANCE {
            break;
        }

        // away vertex: the active vertex most aligned with the gradient
        let mut a_idx = s_idx;
        for i in 0..n {
            if weights[i] > 0.0 && (a_idx == s_idx || dot(hull.vertices[i]) > dot(hull.vertices[a_idx])) {
                a_idx = i;
            }
        }
        let a = hull.vertices[a_idx];
        let away_gap = grad[0] * (a[0] - c[0]) + grad[1] * (a[1] - c[1]);

        let (dir, gamma_max, away) = if gap >= away_gap || weights[a_idx] >= 1.0 {
            ([s[0] - c[0], s[1] - c[1]], 1.0, false)
        } else {
            (
                [c[0] - a[0], c[1] - a[1]],
                weights[a_idx] / (1.0 - weights[a_idx]),
                true,
            )
        };

        let mut gamma = (2.0 / (t as f64 + 2.0)).min(gamma_max);
        let step_value =
            circle_objective([c[0] + gamma * dir[0], c[1] + gamma * dir[1]], centroids).0;
        if step_value > value {
            gamma = golden_section(
                |g| circle_objective([c[0] + g * dir[0], c[1] + g * dir[1]], centroids).0,
                0.0,
                gamma_max,
            );
            if gamma == 0.0 {
                // line search found no representable improvement: stalled
                break;
            }
        }

        if away {
            for w in weights.iter_mut() {
                *w *= 1.0 + gamma;
            }
            weights[a_idx] = (weights[a_idx] - gamma).max(0.0);
        } else {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            weights[s_idx] += gamma;
        }
        c = [c[0] + gamma * dir[0], c[1] + gamma * dir[1]];
    }

    // interior polish: Newton steps sharpen the center to the stationary
    // point whenever the full step stays inside the hull, past the
    // resolution limit of the line search
    for _ in 0..50 {
        let (_, grad) = circle_objective(c, centroids);
        let grad_norm = grad[0].hypot(grad[1]);
        if grad_norm <= 1e-14 {
            break;
        }
        let h = 1e-6;
        let gx1 = circle_objective([c[0] + h, c[1]], centroids).1;
        let gx0 = circle_objective([c[0] - h, c[1]], centroids).1;
        let gy1 = circle_objective([c[0], c[1] + h], centroids).1;
        let gy0 = circle_objective([c[0], c[1] - h], centroids).1;
        let hxx = (gx1[0] - gx0[0]) / (2.0 * h);
        let hyy = (gy1[1] - gy0[1]) / (2.0 * h);
        let hxy = 0.25 * ((gx1[1] - gx0[1]) + (gy1[0] - gy0[0])) / h;
        let det = hxx * hyy - hxy * hxy;
        if !(det > 0.0 && hxx > 0.0) {
            break;
        }
        let step = [
            -(hyy * grad[0] - hxy * grad[1]) / det,
            -(hxx * grad[1] - hxy * grad[0]) / det,
        ];
        let cand = [c[0] + step[0], c[1] + step[1]];
        if !hull.contains(cand, 0.0) {
            break;
        }
        // near the optimum the objective is flat to round-off; judge the
        // step by the gradient norm instead
        let (_, g_cand) = circle_objective(cand, centroids);
        if g_cand[0].hypot(g_cand[1]) >= grad_norm {
            break;
        }
        c = cand;
        if step[0].hypot(step[1]) <= 1e-13 {
            break;
        }
    }
    // report the gap at the final center
    let gap = {
        let (_, grad) = circle_objective(c, centroids);
        let mut best = f64::INFINITY;
        let mut s = c;
        for &v in &hull.vertices {
            let dot = grad[0] * v[0] + grad[1] * v[1];
            if dot < best {
                best = dot;
                s = v;
            }
        }
        grad[0] * (c[0] - s[0]) + grad[1] * (c[1] - s[1])
    };

    let q = centroids.len() as f64;
    let radius = centroids
        .iter()
        .map(|y| (c[0] - y[0]).hypot(c[1] - y[1]))
        .sum::<f64>()
        / q;
    let (objective_value, _) = circle_objective(c, centroids);
    Ok(CircleFit {
        center: c,
        radius,
        objective_value,
        iterations,
        duality_gap: gap,
    })
}

/// Golden-section search for the minimum of a unimodal 1-D function.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    // never accept a step worse than staying put
    if f(mid) <= f(0.0) {
        mid
    } else {
        0.0
    }
}
