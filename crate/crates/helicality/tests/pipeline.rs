//! End-to-end pipeline and CLI tests on small synthetic corpora.

mod common;

use std::path::Path;
use std::process::Command;

use ndarray::Array2;

use helicality::correlation::{CorrelationMatrix, DistanceKind, DistanceMatrix};
use helicality::cqt::CqtParams;
use helicality::helix::fit_and_score;
use helicality::pipeline::{
    run_pipeline, DisconnectPolicy, GroupArtifacts, InputSource, PipelineConfig,
};
use helicality::report::{features_csv, report_from_json};
use helicality::svg::{side_view_svg, top_view_svg};

use common::{exact_helix, sawtooth, sine, write_wav};

/// Small CQT setup for fast end-to-end runs: 12 bins per octave from C3.
fn small_config(input: InputSource) -> PipelineConfig {
    let mut config = PipelineConfig::new(input);
    config.bins_per_octave = 12;
    config.n_octaves = 3;
    config.n_octaves_computed = 5;
    config.f_min = 130.81;
    config.drop_zero_variance = true;
    config.disconnect_policy = DisconnectPolicy::LargestComponent;
    config
}

/// Two groups of twelve tones each spanning three octaves; returns the
/// manifest path.
fn two_group_corpus(dir: &Path) -> std::path::PathBuf {
    let sr = 22050;
    let base = 130.81;
    let mut manifest = String::from("path,group\n");
    for k in 0..12 {
        let freq = base * 2f64.powf(3.0 * k as f64 / 12.0);
        let name = format!("saw_{k:02}.wav");
        write_wav(&dir.join(&name), &sawtooth(freq, sr, 0.35, 0.5), sr);
        manifest.push_str(&format!("{name},saw\n"));
    }
    for k in 0..12 {
        let freq = base * 2f64.powf(0.1 + 3.0 * k as f64 / 12.0);
        let name = format!("sine_{k:02}.wav");
        write_wav(&dir.join(&name), &sine(freq, sr, 0.35, 0.5), sr);
        manifest.push_str(&format!("{name},sine\n"));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn two_groups_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = two_group_corpus(dir.path());
    let mut config = small_config(InputSource::Manifest(manifest));
    config.group_by = Some("group".into());

    let output = run_pipeline(&config).unwrap();
    assert_eq!(output.report.groups.len(), 2);
    assert_eq!(output.report.groups[0].group, "saw");
    assert_eq!(output.report.groups[1].group, "sine");
    for record in &output.report.groups {
        let result = record.result.as_ref().expect("group scored");
        assert_eq!(record.n_files, 12);
        assert!(result.p >= 4 && result.p <= 36);
        assert!(result.mse > 0.0 || result.helicality.0.is_infinite());
        assert!(result.circle.radius > 0.0);
        assert_eq!(result.winding.abs(), 1);
        assert_eq!(result.eigenvalues.len(), 3);
        assert_eq!(result.residuals.len(), result.p);
    }
    assert_eq!(output.artifacts.len(), 2);
    assert_eq!(output.report.input_hash.len(), 64);
}

#[test]
fn features_csv_round_trips_scores() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = two_group_corpus(dir.path());
    let config = small_config(InputSource::Manifest(manifest));
    let from_audio = run_pipeline(&config).unwrap();
    let art = &from_audio.artifacts[0];

    let features_path = dir.path().join("features.csv");
    std::fs::write(&features_path, features_csv(art)).unwrap();

    let config2 = small_config(InputSource::Features(features_path));
    let from_features = run_pipeline(&config2).unwrap();

    let a = from_audio.report.groups[0].result.as_ref().unwrap();
    let b = from_features.report.groups[0].result.as_ref().unwrap();
    assert_eq!(a, b);
}

#[test]
fn file_order_does_not_change_scores() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = two_group_corpus(dir.path());
    let config = small_config(InputSource::Manifest(manifest.clone()));
    let forward = run_pipeline(&config).unwrap();

    // same files, reversed manifest order
    let text = std::fs::read_to_string(&manifest).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    let reversed = dir.path().join("reversed.csv");
    std::fs::write(&reversed, lines.join("\n") + "\n").unwrap();
    let backward = run_pipeline(&small_config(InputSource::Manifest(reversed))).unwrap();

    let a = forward.report.groups[0].result.as_ref().unwrap();
    let b = backward.report.groups[0].result.as_ref().unwrap();
    let rel = (a.helicality.0 - b.helicality.0).abs() / a.helicality.0.abs().max(1e-300);
    assert!(rel < 1e-6, "helicality moved by {rel} under file reordering");
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_helicality"))
}

#[test]
fn cli_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = two_group_corpus(dir.path());
    let out = dir.path().join("out");
    let status = cli()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .args([
            "--group-by",
            "group",
            "--q",
            "12",
            "--octaves",
            "3",
            "--octaves-computed",
            "5",
            "--fmin",
            "130.81",
            "--drop-zero-variance",
            "--disconnect-policy",
            "largest-component",
            "--dump-intermediates",
            "--svg",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let report = report_from_json(&std::fs::read_to_string(out.join("report.json")).unwrap())
        .unwrap();
    assert_eq!(report.groups.len(), 2);
    assert!(report.generated_at.is_some());

    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("group,n_files,helicality,mse,radius,a,b\n"));
    assert_eq!(scores.lines().count(), 3);

    for group in ["saw", "sine"] {
        for kind in ["features", "rho2", "dist", "geodesic", "embedding"] {
            let p = out.join("intermediates").join(format!("{group}_{kind}.csv"));
            assert!(p.exists(), "missing {}", p.display());
        }
        for view in ["top", "side"] {
            let p = out.join("svg").join(format!("{group}_{view}.svg"));
            let text = std::fs::read_to_string(&p).unwrap();
            assert!(text.starts_with("<?xml"));
            assert!(text.trim_end().ends_with("</svg>"));
        }
    }
}

#[test]
fn cli_requires_an_input() {
    let dir = tempfile::tempdir().unwrap();
    let status = cli()
        .args(["run", "--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_missing_audio_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "path,group\nmissing.wav,x\nalso.wav,x\n").unwrap();
    let status = cli()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

/// Pull a numeric attribute like cx="123.4" out of an SVG element string.
fn svg_attr(element: &str, name: &str) -> f64 {
    let key = format!("{name}=\"");
    let start = element.find(&key).unwrap() + key.len();
    let end = element[start..].find('"').unwrap();
    element[start..start + end].parse().unwrap()
}

fn helix_artifacts() -> GroupArtifacts {
    let emb = exact_helix(24, 3, 1.0, [0.3, -0.2], 0.8, 1.0, 0.05, 0.0);
    let fit = fit_and_score(&emb).unwrap();
    let params = CqtParams {
        bins_per_octave: 24,
        n_octaves_computed: 6,
        f_min: 65.406,
        hop_length: 512,
        target_sample_rate: 22050,
    };
    let p = emb.n_points();
    GroupArtifacts {
        group: "synthetic".into(),
        features: helicality::features::FeatureMatrix {
            data: Array2::zeros((p, 2)),
            bin_offset: 0,
            params: params.clone(),
            file_ids: vec!["a.wav".into(), "b.wav".into()],
        },
        row_frequencies: (0..p).map(|b| params.bin_frequency(b)).collect(),
        rho2: CorrelationMatrix {
            rho2: Array2::eye(p),
        },
        pseudo_distances: DistanceMatrix {
            d: Array2::zeros((p, p)),
            kind: DistanceKind::Pseudo,
        },
        geodesics: DistanceMatrix {
            d: Array2::zeros((p, p)),
            kind: DistanceKind::Geodesic,
        },
        embedding: emb,
        fit,
    }
}

#[test]
fn top_view_draws_dots_on_the_fitted_circle() {
    let art = helix_artifacts();
    let svg = top_view_svg(&art);

    let fit_line = svg
        .lines()
        .find(|l| l.contains("class=\"fit\""))
        .expect("fitted circle element");
    let cx = svg_attr(fit_line, "cx");
    let cy = svg_attr(fit_line, "cy");
    let r = svg_attr(fit_line, "r");
    assert!(r > 0.0);

    // an exact helix puts every embedding dot on the drawn circle
    let mut dots = 0;
    for line in svg.lines().filter(|l| l.contains("class=\"dot\"")) {
        let x = svg_attr(line, "cx");
        let y = svg_attr(line, "cy");
        let dist = (x - cx).hypot(y - cy);
        assert!((dist - r).abs() <= 1.0, "dot off circle by {}", (dist - r).abs());
        dots += 1;
    }
    assert_eq!(dots, 72);

    // hull of 24 circle-arranged centroids keeps all of them
    let squares = svg.lines().filter(|l| l.starts_with("<rect") && l.contains("black")).count();
    assert_eq!(squares, 24);
}

#[test]
fn side_view_is_well_formed() {
    let art = helix_artifacts();
    let svg = side_view_svg(&art);
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<polyline"));
    assert_eq!(svg.matches("class=\"dot\"").count(), 72);
}
