//! Per-file feature extraction and octave-window selection.

use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;

use crate::audio::load_audio;
use crate::cqt::{CqtKernel, CqtParams};
use crate::error::{Error, Result};

/// One row of a dataset manifest.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub group: String,
}

/// Dataset manifest: an ordered list of audio files with group labels.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parse a manifest CSV with header `path,group`. Paths are resolved
    /// relative to the manifest's own directory. When `group_by` is set,
    /// group labels come from that column; otherwise every file lands in a
    /// single unnamed group.
    pub fn from_csv(path: &Path, group_by: Option<&str>) -> Result<Manifest> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::InvalidManifest(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::InvalidManifest(e.to_string()))?
            .clone();
        let path_col = headers
            .iter()
            .position(|h| h == "path")
            .ok_or_else(|| Error::InvalidManifest("missing `path` column".into()))?;
        let group_col = match group_by {
            Some(col) => Some(headers.iter().position(|h| h == col).ok_or_else(|| {
                Error::InvalidManifest(format!("missing group-by column `{col}`"))
            })?),
            None => None,
        };
        let base = path.parent().unwrap_or(Path::new(""));

        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::InvalidManifest(e.to_string()))?;
            let raw = record
                .get(path_col)
                .ok_or_else(|| Error::InvalidManifest("short record".into()))?;
            let file = PathBuf::from(raw);
            let file = if file.is_absolute() {
                file
            } else {
                base.join(file)
            };
            let group = group_col
                .and_then(|c| record.get(c))
                .unwrap_or("")
                .to_string();
            entries.push(ManifestEntry { path: file, group });
        }
        if entries.is_empty() {
            return Err(Error::InvalidManifest("manifest lists no files".into()));
        }
        Ok(Manifest { entries })
    }

    /// Group labels in first-appearance order.
    pub fn group_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for e in &self.entries {
            if !names.iter().any(|n| n == &e.group) {
                names.push(e.group.clone());
            }
        }
        names
    }
}

/// The matrix X: P rows of CQT subbands, one column per audio file.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    /// Index of the lowest retained CQT bin within the computed range.
    pub bin_offset: usize,
    pub params: CqtParams,
    pub file_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_files(&self) -> usize {
        self.data.ncols()
    }

    /// Center frequency of retained row `p` (0-based), Hz.
    pub fn row_frequency(&self, p: usize) -> f64 {
        self.params.bin_frequency(self.bin_offset + p)
    }
}

/// How to handle per-file failures during corpus extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilePolicy {
    #[default]
    FailFast,
    SkipAndWarn,
}

fn row_variances(stack: &Array2<f64>) -> Vec<f64> {
    let n = stack.ncols() as f64;
    stack
        .axis_iter(Axis(0))
        .map(|row| {
            let mean = row.sum() / n;
            row.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Pick the contiguous window of `j * bins_per_octave` rows maximizing total
/// per-row variance across files. The window slides with 1-bin stride; ties
/// go to the lowest offset.
pub fn select_octaves(
    stack: &Array2<f64>,
    params: &CqtParams,
    j: usize,
) -> Result<(Array2<f64>, usize)> {
    let width = j * params.bins_per_octave;
    let total = stack.nrows();
    assert!(total >= width, "stack has fewer than J*Q rows");
    assert!(stack.ncols() >= 2, "need at least 2 files");

    let variances = row_variances(stack);
    let mut best_offset = 0;
    let mut best_sum = f64::NEG_INFINITY;
    // sliding-window sum over per-row variances
    let mut window_sum: f64 = variances[..width].iter().sum();
    for offset in 0..=(total - width) {
        if offset > 0 {
            window_sum += variances[offset + width - 1] - variances[offset - 1];
        }
        if window_sum > best_sum {
            best_sum = window_sum;
            best_offset = offset;
        }
    }
    if best_sum <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let sub = stack
        .slice(s![best_offset..best_offset + width, ..])
        .to_owned();
    Ok((sub, best_offset))
}

/// Loudest-frame vectors for a file list, stacked column-wise before octave
/// selection.
#[derive(Debug, Clone)]
pub struct ExtractedVectors {
    /// total CQT bins x N readable files.
    pub stack: Array2<f64>,
    pub file_ids: Vec<String>,
    /// Index of each retained column back into the input entry list.
    pub entry_indices: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Decode, CQT, and loudest-frame every file. Per-file work runs in
/// parallel; columns keep manifest order.
pub fn extract_feature_vectors(
    entries: &[ManifestEntry],
    params: &CqtParams,
    policy: FilePolicy,
) -> Result<ExtractedVectors> {
    if entries.len() < 2 {
        return Err(Error::InvalidManifest(format!(
            "need at least 2 files, got {}",
            entries.len()
        )));
    }
    let kernel = CqtKernel::new(params)?;

    let results: Vec<(String, Result<Vec<f64>>)> = entries
        .par_iter()
        .map(|entry| {
            let vector = extract_file(&entry.path, &kernel, params);
            (entry.path.display().to_string(), vector)
        })
        .collect();

    let mut columns = Vec::new();
    let mut file_ids = Vec::new();
    let mut entry_indices = Vec::new();
    let mut warnings = Vec::new();
    for (i, (id, result)) in results.into_iter().enumerate() {
        match result {
            Ok(col) => {
                columns.push(col);
                file_ids.push(id);
                entry_indices.push(i);
            }
            Err(e) => match policy {
                FilePolicy::FailFast => return Err(e),
                FilePolicy::SkipAndWarn => warnings.push(format!("skipped {id}: {e}")),
            },
        }
    }
    if columns.len() < 2 {
        return Err(Error::InvalidManifest(format!(
            "only {} files readable, need at least 2",
            columns.len()
        )));
    }

    let total_bins = params.n_bins();
    let mut stack = Array2::zeros((total_bins, columns.len()));
    for (n, col) in columns.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            stack[(k, n)] = v;
        }
    }
    Ok(ExtractedVectors {
        stack,
        file_ids,
        entry_indices,
        warnings,
    })
}

/// Extraction and octave selection in one step: the matrix X.
pub fn build_feature_matrix(
    entries: &[ManifestEntry],
    params: &CqtParams,
    j: usize,
    policy: FilePolicy,
) -> Result<(FeatureMatrix, Vec<String>)> {
    let extracted = extract_feature_vectors(entries, params, policy)?;
    let (data, bin_offset) = select_octaves(&extracted.stack, params, j)?;
    Ok((
        FeatureMatrix {
            data,
            bin_offset,
            params: params.clone(),
            file_ids: extracted.file_ids,
        },
        extracted.warnings,
    ))
}

fn extract_file(path: &Path, kernel: &CqtKernel, params: &CqtParams) -> Result<Vec<f64>> {
    let audio = load_audio(path, params.target_sample_rate)
        .map_err(|e| e.with_file(path))?;
    let spectrum = kernel.compute(&audio).map_err(|e| e.with_file(path))?;
    Ok(spectrum.loudest_frame())
}
