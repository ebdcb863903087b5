//! Static SVG scatter plots of the embedding and fitted helix, following
//! the figure conventions: chroma-hue dots joined by a grey pitch-order
//! line, hull as black squares and polygon, initial center as a red
//! diamond, fitted center as a green square.

use std::path::Path;

use crate::error::Result;
use crate::pipeline::GroupArtifacts;
use crate::report::{atomic_write, group_file_stem};

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;

struct Frame {
    scale: [f64; 2],
    offset: [f64; 2],
}

impl Frame {
    /// Isotropic mapping from the data bounding box into the canvas.
    fn isotropic(points: &[[f64; 2]]) -> Frame {
        let (lo, hi) = bounds(points);
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let s = (SIZE - 2.0 * PAD) / span;
        let cx = (lo[0] + hi[0]) / 2.0;
        let cy = (lo[1] + hi[1]) / 2.0;
        Frame {
            scale: [s, -s],
            offset: [SIZE / 2.0 - s * cx, SIZE / 2.0 + s * cy],
        }
    }

    /// Independent per-axis mapping (for the side view).
    fn stretched(points: &[[f64; 2]]) -> Frame {
        let (lo, hi) = bounds(points);
        let sx = (SIZE - 2.0 * PAD) / (hi[0] - lo[0]).max(1e-12);
        let sy = (SIZE - 2.0 * PAD) / (hi[1] - lo[1]).max(1e-12);
        Frame {
            scale: [sx, -sy],
            offset: [PAD - sx * lo[0], SIZE - PAD + sy * lo[1]],
        }
    }

    fn map(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.scale[0] * p[0] + self.offset[0],
            self.scale[1] * p[1] + self.offset[1],
        ]
    }
}

fn bounds(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn chroma_hue(chroma: usize, q: usize) -> f64 {
    360.0 * chroma as f64 / q as f64
}

fn polyline(points: &[[f64; 2]], stroke: &str, width: f64) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", p[0], p[1]))
        .collect();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>\n",
        coords.join(" ")
    )
}

fn square(center: [f64; 2], half: f64, fill: &str) -> String {
    format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>\n",
        center[0] - half,
        center[1] - half,
        2.0 * half,
        2.0 * half
    )
}

fn diamond(center: [f64; 2], half: f64, fill: &str) -> String {
    format!(
        "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{fill}\"/>\n",
        center[0],
        center[1] - half,
        center[0] + half,
        center[1],
        center[0],
        center[1] + half,
        center[0] - half,
        center[1]
    )
}

fn document(body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Top view: the (e1, e2) plane with centroid hull and circle fit.
pub fn top_view_svg(art: &GroupArtifacts) -> String {
    let emb = &art.embedding;
    let q = emb.layout.bins_per_octave;
    let points: Vec<[f64; 2]> = (0..emb.n_points()).map(|i| emb.planar(i)).collect();

    let mut extent = points.clone();
    extent.extend(art.fit.hull.vertices.iter().copied());
    extent.push(art.fit.model.circle.center);
    let frame = Frame::isotropic(&extent);

    let mut body = String::new();
    // grey pitch-order line
    let mapped: Vec<[f64; 2]> = points.iter().map(|&p| frame.map(p)).collect();
    body.push_str(&polyline(&mapped, "#999999", 1.0));

    // hull polygon, closed
    let mut hull_pts: Vec<[f64; 2]> = art
        .fit
        .hull
        .vertices
        .iter()
        .map(|&v| frame.map(v))
        .collect();
    if let Some(&first) = hull_pts.first() {
        hull_pts.push(first);
    }
    body.push_str(&polyline(&hull_pts, "black", 1.5));
    for v in &art.fit.hull.vertices {
        body.push_str(&square(frame.map(*v), 4.0, "black"));
    }

    // fitted circle
    let c = frame.map(art.fit.model.circle.center);
    let r = art.fit.model.circle.radius * frame.scale[0];
    body.push_str(&format!(
        "<circle class=\"fit\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"none\" \
         stroke=\"#444444\" stroke-dasharray=\"4 3\"/>\n",
        c[0], c[1], r
    ));

    // embedding dots, hue by chroma
    for (i, &p) in mapped.iter().enumerate() {
        let hue = chroma_hue(emb.bin_indices[i] % q, q);
        body.push_str(&format!(
            "<circle class=\"dot\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" \
             fill=\"hsl({hue:.1},80%,50%)\"/>\n",
            p[0], p[1]
        ));
    }

    // initial (red diamond) and fitted (green square) center estimates
    body.push_str(&diamond(frame.map(art.fit.hull.barycenter), 6.0, "red"));
    body.push_str(&square(c, 5.0, "green"));

    document(&body)
}

/// Side view: (e1, e3) with the fitted helix's side profile overlaid.
pub fn side_view_svg(art: &GroupArtifacts) -> String {
    let emb = &art.embedding;
    let q = emb.layout.bins_per_octave;
    let points: Vec<[f64; 2]> = (0..emb.n_points())
        .map(|i| [emb.planar(i)[0], emb.height(i)])
        .collect();
    let fitted: Vec<[f64; 2]> = art.fit.projected.iter().map(|p| [p[0], p[2]]).collect();

    let mut extent = points.clone();
    extent.extend(fitted.iter().copied());
    let frame = Frame::stretched(&extent);

    let mut body = String::new();
    let mapped: Vec<[f64; 2]> = points.iter().map(|&p| frame.map(p)).collect();
    body.push_str(&polyline(&mapped, "#999999", 1.0));
    let fitted_mapped: Vec<[f64; 2]> = fitted.iter().map(|&p| frame.map(p)).collect();
    body.push_str(&polyline(&fitted_mapped, "black", 1.5));
    for (i, &p) in mapped.iter().enumerate() {
        let hue = chroma_hue(emb.bin_indices[i] % q, q);
        body.push_str(&format!(
            "<circle class=\"dot\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" \
             fill=\"hsl({hue:.1},80%,50%)\"/>\n",
            p[0], p[1]
        ));
    }
    document(&body)
}

/// Write `<group>_top.svg` and `<group>_side.svg` under `dir`.
pub fn export_svg(art: &GroupArtifacts, dir: &Path) -> Result<()> {
    let stem = group_file_stem(&art.group);
    atomic_write(
        &dir.join(format!("{stem}_top.svg")),
        top_view_svg(art).as_bytes(),
    )?;
    atomic_write(
        &dir.join(format!("{stem}_side.svg")),
        side_view_svg(art).as_bytes(),
    )?;
    Ok(())
}
