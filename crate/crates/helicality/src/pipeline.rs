//! End-to-end orchestration: manifest/features input, per-group scoring,
//! and the report model.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circle::CircleFit;
use crate::correlation::{
    octave_consistent_keep, rho2_of_rows, rho_to_distance, CorrelationMatrix, DistanceMatrix,
};
use crate::error::{Error, Result};
use crate::features::{
    extract_feature_vectors, select_octaves, FeatureMatrix, FilePolicy, Manifest, ManifestEntry,
};
use crate::graph::{geodesic_distances, knn_graph};
use crate::helix::{fit_and_score, HelixFit, LineFit};
use crate::mds::{classical_mds, Embedding, OctaveLayout};

/// What to do when the neighbor graph splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisconnectPolicy {
    #[default]
    Fail,
    LargestComponent,
}

impl FromStr for DisconnectPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fail" => Ok(DisconnectPolicy::Fail),
            "largest-component" => Ok(DisconnectPolicy::LargestComponent),
            other => Err(format!("unknown policy `{other}` (fail|largest-component)")),
        }
    }
}

impl fmt::Display for DisconnectPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisconnectPolicy::Fail => write!(f, "fail"),
            DisconnectPolicy::LargestComponent => write!(f, "largest-component"),
        }
    }
}

/// Where the pipeline reads its feature matrix from.
#[derive(Debug, Clone)]
pub enum InputSource {
    /// Audio manifest CSV (`path,group`).
    Manifest(PathBuf),
    /// Precomputed features CSV, bypassing the CQT front end.
    Features(PathBuf),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub bins_per_octave: usize,
    pub n_octaves: usize,
    pub knn: usize,
    pub f_min: f64,
    pub sample_rate: u32,
    pub hop_length: usize,
    pub n_octaves_computed: usize,
    pub rho_floor: f64,
    pub disconnect_policy: DisconnectPolicy,
    /// Manifest column to group by; `None` scores the whole corpus at once.
    pub group_by: Option<String>,
    /// Reuse one corpus-wide octave window for every group.
    pub shared_window: bool,
    /// Drop zero-variance bins (octave-consistently) instead of failing.
    pub drop_zero_variance: bool,
    pub file_policy: FilePolicy,
    /// Record group failures and continue instead of aborting.
    pub keep_going: bool,
}

impl PipelineConfig {
    pub fn new(input: InputSource) -> Self {
        PipelineConfig {
            input,
            bins_per_octave: 24,
            n_octaves: 3,
            knn: 3,
            f_min: 32.703,
            sample_rate: 22050,
            hop_length: 512,
            n_octaves_computed: 8,
            rho_floor: 1e-12,
            disconnect_policy: DisconnectPolicy::default(),
            group_by: None,
            shared_window: false,
            drop_zero_variance: false,
            file_policy: FilePolicy::default(),
            keep_going: false,
        }
    }

    pub fn cqt_params(&self) -> crate::cqt::CqtParams {
        crate::cqt::CqtParams {
            bins_per_octave: self.bins_per_octave,
            n_octaves_computed: self.n_octaves_computed,
            f_min: self.f_min,
            hop_length: self.hop_length,
            target_sample_rate: self.sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins_per_octave < 1 || self.n_octaves < 1 {
            return Err(Error::InvalidConfig("q and octaves must be >= 1".into()));
        }
        if self.knn < 1 {
            return Err(Error::InvalidConfig("knn must be >= 1".into()));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor < 1.0) {
            return Err(Error::InvalidConfig("rho-floor must lie in (0, 1)".into()));
        }
        if self.f_min <= 0.0 {
            return Err(Error::InvalidConfig("fmin must be positive".into()));
        }
        let path = match &self.input {
            InputSource::Manifest(p) | InputSource::Features(p) => p,
        };
        if !path.exists() {
            return Err(Error::InvalidConfig(format!(
                "input {} does not exist",
                path.display()
            )));
        }
        self.cqt_params()
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        let (input, features_input) = match &self.input {
            InputSource::Manifest(p) => (p.display().to_string(), false),
            InputSource::Features(p) => (p.display().to_string(), true),
        };
        ConfigEcho {
            input,
            features_input,
            q: self.bins_per_octave,
            octaves: self.n_octaves,
            knn: self.knn,
            f_min: self.f_min,
            sample_rate: self.sample_rate,
            hop: self.hop_length,
            octaves_computed: self.n_octaves_computed,
            rho_floor: self.rho_floor,
            disconnect_policy: self.disconnect_policy,
            group_by: self.group_by.clone(),
            shared_window: self.shared_window,
        }
    }
}

/// Helicality wrapped so the +inf sentinel survives JSON (as the string
/// "inf").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue(pub f64);

impl Serialize for ScoreValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for ScoreValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ScoreValue(v)),
            Raw::Str(s) if s == "inf" => Ok(ScoreValue(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad score `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub features_input: bool,
    pub q: usize,
    pub octaves: usize,
    pub knn: usize,
    pub f_min: f64,
    pub sample_rate: u32,
    pub hop: usize,
    pub octaves_computed: usize,
    pub rho_floor: f64,
    pub disconnect_policy: DisconnectPolicy,
    pub group_by: Option<String>,
    pub shared_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub p: usize,
    pub bin_offset: usize,
    pub helicality: ScoreValue,
    pub mse: f64,
    pub circle: CircleFit,
    pub line: LineFit,
    pub phase: f64,
    pub winding: i8,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group: String,
    pub n_files: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<GroupResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelicalityReport {
    pub schema_version: u32,
    pub tool_version: String,
    /// Wall-clock timestamp; excluded from the input hash and from
    /// determinism comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub input_hash: String,
    pub config: ConfigEcho,
    pub groups: Vec<GroupRecord>,
}

/// Intermediate artifacts of one successfully scored group, for plotting
/// and `--dump-intermediates`.
#[derive(Debug, Clone)]
pub struct GroupArtifacts {
    pub group: String,
    pub features: FeatureMatrix,
    pub row_frequencies: Vec<f64>,
    pub rho2: CorrelationMatrix,
    pub pseudo_distances: DistanceMatrix,
    pub geodesics: DistanceMatrix,
    pub embedding: Embedding,
    pub fit: HelixFit,
}

pub struct PipelineOutput {
    pub report: HelicalityReport,
    pub artifacts: Vec<GroupArtifacts>,
}

/// Run the full pipeline: features -> correlation -> distances -> k-NN
/// graph -> geodesics -> MDS -> helix fit -> score, per group.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let mut hasher = Sha256::new();
    hash_config(&mut hasher, config);

    let groups: Vec<PreparedGroup> = match &config.input {
        InputSource::Manifest(path) => prepare_from_manifest(config, path, &mut hasher)?,
        InputSource::Features(path) => vec![prepare_from_features(config, path, &mut hasher)?],
    };
    let input_hash = format!("{:x}", hasher.finalize());

    let mut records = Vec::new();
    let mut artifacts = Vec::new();
    for group in groups {
        let name = group.name.clone();
        let n_files = group.n_files;
        match score_group(config, group) {
            Ok((result, art)) => {
                records.push(GroupRecord {
                    group: name,
                    n_files,
                    error: None,
                    result: Some(result),
                });
                artifacts.push(art);
            }
            Err(e) => {
                let e = e.with_group(&name);
                if config.keep_going {
                    records.push(GroupRecord {
                        group: name,
                        n_files,
                        error: Some(e.to_string()),
                        result: None,
                    });
                } else {
                    return Err(e);
                }
            }
        }
    }

    Ok(PipelineOutput {
        report: HelicalityReport {
            schema_version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: None,
            input_hash,
            config: config.echo(),
            groups: records,
        },
        artifacts,
    })
}

struct PreparedGroup {
    name: String,
    n_files: usize,
    features: FeatureMatrix,
    row_frequencies: Vec<f64>,
    warnings: Vec<String>,
}

fn hash_config(hasher: &mut Sha256, config: &PipelineConfig) {
    let echo = serde_json::to_string(&config.echo()).expect("config echo serializes");
    hasher.update(echo.as_bytes());
}

fn hash_file(hasher: &mut Sha256, path: &Path) {
    if let Ok(bytes) = std::fs::read(path) {
        hasher.update(&bytes);
    }
}

fn prepare_from_manifest(
    config: &PipelineConfig,
    path: &Path,
    hasher: &mut Sha256,
) -> Result<Vec<PreparedGroup>> {
    hash_file(hasher, path);
    let manifest = Manifest::from_csv(path, config.group_by.as_deref())?;
    for entry in &manifest.entries {
        hash_file(hasher, &entry.path);
    }

    let params = config.cqt_params();
    let extracted = extract_feature_vectors(&manifest.entries, &params, config.file_policy)?;
    let kept_entries: Vec<&ManifestEntry> = extracted
        .entry_indices
        .iter()
        .map(|&i| &manifest.entries[i])
        .collect();

    let shared_offset = if config.shared_window {
        let (_, offset) = select_octaves(&extracted.stack, &params, config.n_octaves)?;
        Some(offset)
    } else {
        None
    };

    let group_names: Vec<String> = if config.group_by.is_some() {
        let mut names = Vec::new();
        for e in &kept_entries {
            if !names.iter().any(|n| n == &e.group) {
                names.push(e.group.clone());
            }
        }
        names
    } else {
        vec![String::new()]
    };

    let width = config.n_octaves * config.bins_per_octave;
    let mut groups = Vec::new();
    for name in group_names {
        let cols: Vec<usize> = kept_entries
            .iter()
            .enumerate()
            .filter(|(_, e)| config.group_by.is_none() || e.group == name)
            .map(|(i, _)| i)
            .collect();
        let build = || -> Result<PreparedGroup> {
            if cols.len() < 2 {
                return Err(Error::InvalidManifest(format!(
                    "group has {} files, need at least 2",
                    cols.len()
                )));
            }
            let stack = extracted.stack.select(Axis(1), &cols);
            let (data, bin_offset) = match shared_offset {
                Some(offset) => (
                    stack.slice(s![offset..offset + width, ..]).to_owned(),
                    offset,
                ),
                None => select_octaves(&stack, &params, config.n_octaves)?,
            };
            let file_ids = cols
                .iter()
                .map(|&i| extracted.file_ids[i].clone())
                .collect();
            let row_frequencies = (0..width)
                .map(|r| params.bin_frequency(bin_offset + r))
                .collect();
            Ok(PreparedGroup {
                name: name.clone(),
                n_files: cols.len(),
                features: FeatureMatrix {
                    data,
                    bin_offset,
                    params: params.clone(),
                    file_ids,
                },
                row_frequencies,
                warnings: extracted.warnings.clone(),
            })
        };
        match build() {
            Ok(g) => groups.push(g),
            Err(e) => {
                if config.keep_going {
                    groups.push(PreparedGroup {
                        name: name.clone(),
                        n_files: cols.len(),
                        features: FeatureMatrix {
                            data: Array2::zeros((0, 0)),
                            bin_offset: 0,
                            params: params.clone(),
                            file_ids: vec![],
                        },
                        row_frequencies: vec![],
                        warnings: vec![format!("group preparation failed: {e}")],
                    });
                } else {
                    return Err(e.with_group(&name));
                }
            }
        }
    }
    Ok(groups)
}

/// Features CSV: header row, first column bin center frequency in Hz,
/// remaining columns one per file.
pub fn read_features_csv(path: &Path) -> Result<(Array2<f64>, Vec<f64>, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidFeaturesCsv(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidFeaturesCsv(e.to_string()))?
        .clone();
    if headers.len() < 3 {
        return Err(Error::InvalidFeaturesCsv(
            "need a frequency column plus at least 2 file columns".into(),
        ));
    }
    let file_ids: Vec<String> = headers.iter().skip(1).map(String::from).collect();

    let mut freqs = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidFeaturesCsv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::InvalidFeaturesCsv("ragged row".into()));
        }
        let mut it = record.iter();
        let freq: f64 = it
            .next()
            .unwrap()
            .parse()
            .map_err(|e| Error::InvalidFeaturesCsv(format!("bad frequency: {e}")))?;
        freqs.push(freq);
        let row: Vec<f64> = it
            .map(|v| {
                v.parse()
                    .map_err(|e| Error::InvalidFeaturesCsv(format!("bad value: {e}")))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidFeaturesCsv("no data rows".into()));
    }
    let n = file_ids.len();
    let mut data = Array2::zeros((rows.len(), n));
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            data[(r, c)] = v;
        }
    }
    Ok((data, freqs, file_ids))
}

fn prepare_from_features(
    config: &PipelineConfig,
    path: &Path,
    hasher: &mut Sha256,
) -> Result<PreparedGroup> {
    hash_file(hasher, path);
    let (data, freqs, file_ids) = read_features_csv(path)?;
    let expected = config.n_octaves * config.bins_per_octave;
    if data.nrows() != expected {
        return Err(Error::InvalidFeaturesCsv(format!(
            "{} rows, expected Q*J = {expected}",
            data.nrows()
        )));
    }
    // recover the window position from the first bin's frequency
    let bin_offset = (config.bins_per_octave as f64 * (freqs[0] / config.f_min).log2())
        .round()
        .max(0.0) as usize;
    Ok(PreparedGroup {
        name: String::new(),
        n_files: file_ids.len(),
        features: FeatureMatrix {
            data,
            bin_offset,
            params: config.cqt_params(),
            file_ids,
        },
        row_frequencies: freqs,
        warnings: vec![],
    })
}

fn score_group(
    config: &PipelineConfig,
    group: PreparedGroup,
) -> Result<(GroupResult, GroupArtifacts)> {
    if group.features.n_bins() == 0 {
        return Err(Error::InvalidManifest(
            group
                .warnings
                .first()
                .cloned()
                .unwrap_or_else(|| "empty group".into()),
        ));
    }
    let q = config.bins_per_octave;
    let mut warnings = group.warnings.clone();
    let mut data = group.features.data.clone();
    let mut kept: Vec<usize> = (0..data.nrows()).collect();

    let rho2 = loop {
        match rho2_of_rows(&data) {
            Ok(c) => break c,
            Err(Error::ZeroVarianceRow { bins }) if config.drop_zero_variance => {
                let keep = octave_consistent_keep(&kept, q, &bins);
                if keep.len() < 4 {
                    return Err(Error::ZeroVarianceRow { bins });
                }
                warnings.push(format!(
                    "dropped {} zero-variance bins (octave-consistent)",
                    kept.len() - keep.len()
                ));
                data = data.select(Axis(0), &keep);
                kept = keep.iter().map(|&r| kept[r]).collect();
            }
            Err(e) => return Err(e),
        }
    };

    let pseudo = rho_to_distance(&rho2, config.rho_floor);
    if config.knn >= pseudo.len() {
        return Err(Error::InvalidConfig(format!(
            "knn = {} must be < P = {}",
            config.knn,
            pseudo.len()
        )));
    }
    let graph = knn_graph(&pseudo, config.knn);

    let geodesics = match geodesic_distances(&graph) {
        Ok(g) => g,
        Err(Error::DisconnectedGraph { component_sizes })
            if config.disconnect_policy == DisconnectPolicy::LargestComponent =>
        {
            let components = graph.connected_components();
            let largest = &components[0];
            warnings.push(format!(
                "graph disconnected (components {component_sizes:?}); restricted to largest with {} bins",
                largest.len()
            ));
            let sub = graph.induced_subgraph(largest);
            kept = largest.iter().map(|&v| kept[v]).collect();
            geodesic_distances(&sub)?
        }
        Err(e) => return Err(e),
    };

    let layout = OctaveLayout {
        bins_per_octave: q,
        n_octaves: config.n_octaves,
    };
    let mut embedding = classical_mds(&geodesics, 3, layout)?;
    embedding.bin_indices = kept;

    let fit = fit_and_score(&embedding)?;
    let result = GroupResult {
        p: embedding.n_points(),
        bin_offset: group.features.bin_offset,
        helicality: ScoreValue(fit.score.h),
        mse: fit.score.mse,
        circle: fit.model.circle.clone(),
        line: fit.model.line,
        phase: fit.model.phase,
        winding: fit.model.winding,
        eigenvalues: embedding.eigenvalues.clone(),
        residuals: fit.score.residuals.clone(),
        warnings,
    };
    let artifacts = GroupArtifacts {
        group: group.name,
        row_frequencies: group.row_frequencies,
        features: group.features,
        rho2,
        pseudo_distances: pseudo,
        geodesics,
        embedding,
        fit,
    };
    Ok((result, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_value_json_forms() {
        let finite = serde_json::to_string(&ScoreValue(0.4)).unwrap();
        assert_eq!(finite, "0.4");
        let inf = serde_json::to_string(&ScoreValue(f64::INFINITY)).unwrap();
        assert_eq!(inf, "\"inf\"");
        let back: ScoreValue = serde_json::from_str("\"inf\"").unwrap();
        assert!(back.0.is_infinite());
        let back: ScoreValue = serde_json::from_str("0.25").unwrap();
        assert_eq!(back, ScoreValue(0.25));
    }

    #[test]
    fn config_validation_catches_bad_knn() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("m.csv");
        std::fs::write(&manifest, "path,group\n").unwrap();
        let mut config = PipelineConfig::new(InputSource::Manifest(manifest));
        config.knn = 0;
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn missing_input_is_config_error() {
        let config =
            PipelineConfig::new(InputSource::Manifest(PathBuf::from("/nonexistent.csv")));
        let err = config.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn features_csv_round_trip_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        std::fs::write(
            &path,
            "freq_hz,a.wav,b.wav\n100.0,1.0,2.0\n200.0,3.0,4.0\n",
        )
        .unwrap();
        let (data, freqs, ids) = read_features_csv(&path).unwrap();
        assert_eq!(data.shape(), &[2, 2]);
        assert_eq!(freqs, vec![100.0, 200.0]);
        assert_eq!(ids, vec!["a.wav", "b.wav"]);
        assert_eq!(data[(1, 0)], 3.0);
    }
}
