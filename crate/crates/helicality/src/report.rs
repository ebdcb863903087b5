//! Report serialization: JSON (stable ordering, 17 significant digits),
//! the scores CSV, and intermediate-matrix dumps.

use std::io::{self, Write};
use std::path::Path;

use crate::error::Result;
use crate::pipeline::{GroupArtifacts, HelicalityReport};

/// JSON formatter that prints every float with 17 significant digits, so
/// values survive a parse round-trip bit-exactly.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

pub fn report_to_json(report: &HelicalityReport) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    serde::Serialize::serialize(report, &mut ser).expect("report serializes");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn report_from_json(text: &str) -> Result<HelicalityReport> {
    serde_json::from_str(text)
        .map_err(|e| crate::error::Error::InvalidConfig(format!("bad report JSON: {e}")))
}

/// Write `content` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn export_json(report: &HelicalityReport, path: &Path) -> Result<()> {
    atomic_write(path, report_to_json(report).as_bytes())
}

fn fmt_score(h: f64) -> String {
    if h.is_finite() {
        format!("{h}")
    } else {
        "inf".to_string()
    }
}

/// One row per scored group, descending helicality, ties broken by group
/// name. Errored groups are omitted (they carry no score).
pub fn scores_csv(report: &HelicalityReport) -> String {
    let mut rows: Vec<_> = report
        .groups
        .iter()
        .filter_map(|g| g.result.as_ref().map(|r| (g, r)))
        .collect();
    rows.sort_by(|(ga, ra), (gb, rb)| {
        rb.helicality
            .0
            .partial_cmp(&ra.helicality.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ga.group.cmp(&gb.group))
    });
    let mut out = String::from("group,n_files,helicality,mse,radius,a,b\n");
    for (g, r) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g.group,
            g.n_files,
            fmt_score(r.helicality.0),
            r.mse,
            r.circle.radius,
            r.line.slope,
            r.line.intercept,
        ));
    }
    out
}

pub fn export_csv(report: &HelicalityReport, path: &Path) -> Result<()> {
    atomic_write(path, scores_csv(report).as_bytes())
}

/// Filesystem-safe group label; the unnamed whole-corpus group becomes
/// "all".
pub fn group_file_stem(group: &str) -> String {
    if group.is_empty() {
        return "all".to_string();
    }
    group
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn matrix_csv(m: &ndarray::Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// The features CSV understood by the `--features` entry point.
pub fn features_csv(art: &GroupArtifacts) -> String {
    let mut out = String::from("freq_hz");
    for id in &art.features.file_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (r, row) in art.features.data.rows().into_iter().enumerate() {
        out.push_str(&format!("{}", art.row_frequencies[r]));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn embedding_csv(art: &GroupArtifacts) -> String {
    let q = art.embedding.layout.bins_per_octave;
    let offset = art.features.bin_offset;
    let mut out = String::from("bin_index,freq_hz,chroma,e1,e2,e3\n");
    for (i, &bin) in art.embedding.bin_indices.iter().enumerate() {
        let freq = art
            .row_frequencies
            .get(bin)
            .copied()
            .unwrap_or_else(|| art.features.params.bin_frequency(offset + bin));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            offset + bin,
            freq,
            bin % q + 1,
            art.embedding.coords[(i, 0)],
            art.embedding.coords[(i, 1)],
            art.embedding.coords[(i, 2)],
        ));
    }
    out
}

/// Write `<group>_{features,rho2,dist,geodesic,embedding}.csv` under `dir`.
pub fn export_intermediates(art: &GroupArtifacts, dir: &Path) -> Result<()> {
    let stem = group_file_stem(&art.group);
    atomic_write(
        &dir.join(format!("{stem}_features.csv")),
        features_csv(art).as_bytes(),
    )?;
    atomic_write(
        &dir.join(format!("{stem}_rho2.csv")),
        matrix_csv(&art.rho2.rho2).as_bytes(),
    )?;
    atomic_write(
        &dir.join(format!("{stem}_dist.csv")),
        matrix_csv(&art.pseudo_distances.d).as_bytes(),
    )?;
    atomic_write(
        &dir.join(format!("{stem}_geodesic.csv")),
        matrix_csv(&art.geodesics.d).as_bytes(),
    )?;
    atomic_write(
        &dir.join(format!("{stem}_embedding.csv")),
        embedding_csv(art).as_bytes(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::CircleFit;
    use crate::helix::LineFit;
    use crate::pipeline::{
        ConfigEcho, DisconnectPolicy, GroupRecord, GroupResult, ScoreValue,
    };

    fn sample_report(scores: &[(&str, f64)]) -> HelicalityReport {
        HelicalityReport {
            schema_version: 1,
            tool_version: "0.1.0".into(),
            generated_at: None,
            input_hash: "deadbeef".into(),
            config: ConfigEcho {
                input: "m.csv".into(),
                features_input: false,
                q: 24,
                octaves: 3,
                knn: 3,
                f_min: 32.703,
                sample_rate: 22050,
                hop: 512,
                octaves_computed: 8,
                rho_floor: 1e-12,
                disconnect_policy: DisconnectPolicy::Fail,
                group_by: None,
                shared_window: false,
            },
            groups: scores
                .iter()
                .map(|(name, h)| GroupRecord {
                    group: name.to_string(),
                    n_files: 10,
                    error: None,
                    result: Some(GroupResult {
                        p: 72,
                        bin_offset: 48,
                        helicality: ScoreValue(*h),
                        mse: if h.is_finite() { 1.0 / h } else { 0.0 },
                        circle: CircleFit {
                            center: [0.1, -0.2],
                            radius: 1.5,
                            objective_value: 0.01,
                            iterations: 12,
                            duality_gap: 1e-10,
                        },
                        line: LineFit {
                            slope: 0.02,
                            intercept: -0.7,
                        },
                        phase: 0.5,
                        winding: 1,
                        eigenvalues: vec![3.0, 2.0, 1.0],
                        residuals: vec![0.1; 3],
                        warnings: vec![],
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_group_list_is_valid_json() {
        let mut report = sample_report(&[]);
        report.groups.clear();
        let json = report_to_json(&report);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["groups"], serde_json::json!([]));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let report = sample_report(&[("horn", 0.94), ("drums", 0.28)]);
        let json = report_to_json(&report);
        let back = report_from_json(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn infinity_serializes_as_string() {
        let report = sample_report(&[("exact", f64::INFINITY)]);
        let json = report_to_json(&report);
        assert!(json.contains("\"helicality\":\"inf\""));
        let back = report_from_json(&json).unwrap();
        assert!(back.groups[0].result.as_ref().unwrap().helicality.0.is_infinite());
    }

    #[test]
    fn csv_sorted_by_descending_score() {
        let report = sample_report(&[("drums", 0.28), ("horn", 0.94)]);
        let csv = scores_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "group,n_files,helicality,mse,radius,a,b");
        assert!(lines[1].starts_with("horn,"));
        assert!(lines[2].starts_with("drums,"));
    }

    #[test]
    fn csv_tie_breaks_by_name() {
        let report = sample_report(&[("b", 0.5), ("a", 0.5)]);
        let csv = scores_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[1].starts_with("a,"));
        assert!(lines[2].starts_with("b,"));
    }

    #[test]
    fn single_group_csv_is_two_lines() {
        let report = sample_report(&[("only", 0.4)]);
        assert_eq!(scores_csv(&report).lines().count(), 2);
    }

    #[test]
    fn group_stems() {
        assert_eq!(group_file_stem(""), "all");
        assert_eq!(group_file_stem("French Horn"), "French_Horn");
    }
}
