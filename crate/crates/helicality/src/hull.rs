//! 2-D convex hull by Quickhull.

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Convex polygon: vertices in counter-clockwise order, starting from the
/// lexicographically smallest vertex, with collinear boundary points removed.
#[derive(Debug, Clone)]
pub struct ConvexHull2D {
    pub vertices: Vec<Point2>,
    /// Arithmetic mean of the hull vertices; the circle fit starts here.
    pub barycenter: Point2,
}

const DEDUP_TOLERANCE: f64 = 1e-12;

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Quickhull over a point set.
///
/// Errors with [`Error::DegenerateHull`] when fewer than 3 distinct
/// non-collinear points remain after deduplication.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexHull2D> {
    // dedup coincident points, keeping first occurrences
    let mut distinct: Vec<Point2> = Vec::new();
    for &p in points {
        if !distinct
            .iter()
            .any(|&q| (p[0] - q[0]).hypot(p[1] - q[1]) <= DEDUP_TOLERANCE)
        {
            distinct.push(p);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::DegenerateHull);
    }

    let lex_cmp = |a: &Point2, b: &Point2| {
        a[0].partial_cmp(&b[0])
            .unwrap()
            .then(a[1].partial_cmp(&b[1]).unwrap())
    };
    let a = *distinct.iter().min_by(|x, y| lex_cmp(x, y)).unwrap();
    let b = *distinct.iter().max_by(|x, y| lex_cmp(x, y)).unwrap();

    let left_of = |u: Point2, v: Point2, pts: &[Point2]| -> Vec<Point2> {
        pts.iter().copied().filter(|&p| cross(u, v, p) > 0.0).collect()
    };

    let mut vertices = vec![a];
    hull_side(a, b, &left_of(a, b, &distinct), &mut vertices);
    vertices.push(b);
    hull_side(b, a, &left_of(b, a, &distinct), &mut vertices);
    // the chains above trace the hull clockwise; flip to CCW, keeping the
    // lexicographically smallest vertex first
    vertices[1..].reverse();

    if vertices.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let n = vertices.len() as f64;
    let barycenter = [
        vertices.iter().map(|v| v[0]).sum::<f64>() / n,
        vertices.iter().map(|v| v[1]).sum::<f64>() / n,
    ];
    Ok(ConvexHull2D {
        vertices,
        barycenter,
    })
}

/// Append, in CCW order, the hull vertices strictly left of segment a->b.
fn hull_side(a: Point2, b: Point2, pts: &[Point2], out: &mut Vec<Point2>) {
    if pts.is_empty() {
        return;
    }
    // farthest point from the line through a and b
    let mut far = pts[0];
    let mut far_d = cross(a, b, far);
    for &p in &pts[1..] {
        let d = cross(a, b, p);
        if d > far_d {
            far_d = d;
            far = p;
        }
    }
    let left_a: Vec<Point2> = pts
        .iter()
        .copied()
        .filter(|&p| cross(a, far, p) > 0.0)
        .collect();
    let left_b: Vec<Point2> = pts
        .iter()
        .copied()
        .filter(|&p| cross(far, b, p) > 0.0)
        .collect();
    hull_side(a, far, &left_a, out);
    out.push(far);
    hull_side(far, b, &left_b, out);
}

impl ConvexHull2D {
    /// True if `p` lies inside or on the boundary (tolerance scaled by the
    /// edge length).
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let u = self.vertices[i];
            let v = self.vertices[(i + 1) % n];
            let edge_len = (v[0] - u[0]).hypot(v[1] - u[1]);
            if cross(u, v, p) < -tol * edge_len.max(1.0) {
                return false;
            }
        }
        true
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY, f64::INFINITY];
        let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}
