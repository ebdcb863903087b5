use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the helicality pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },

    #[error("audio file {path} contains no samples")]
    EmptyAudio { path: PathBuf },

    #[error("audio too short: {n_samples} samples, need at least {min_samples} for the lowest analysis band")]
    AudioTooShort { n_samples: usize, min_samples: usize },

    #[error("Nyquist violation: top CQT bin at {f_max_hz:.2} Hz exceeds Nyquist {nyquist_hz:.2} Hz")]
    NyquistViolation { f_max_hz: f64, nyquist_hz: f64 },

    #[error("all candidate octave windows have zero total variance")]
    DegenerateVariance,

    #[error("feature rows with zero variance across files: bins {bins:?}")]
    ZeroVarianceRow { bins: Vec<usize> },

    #[error("neighbor graph is disconnected: component sizes {component_sizes:?}")]
    DisconnectedGraph { component_sizes: Vec<usize> },

    #[error("only {found} positive MDS eigenvalues, need {needed}")]
    InsufficientPositiveEigenvalues { found: usize, needed: usize },

    #[error("feature matrix has {rows} rows, not divisible into {q} bins per octave")]
    ShapeMismatch { rows: usize, q: usize },

    #[error("degenerate convex hull: centroids are collinear or coincident")]
    DegenerateHull,

    #[error("circle objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid features CSV: {0}")]
    InvalidFeaturesCsv(String),

    #[error("group {group}: {source}")]
    Group {
        group: String,
        #[source]
        source: Box<Error>,
    },

    #[error("file {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn with_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn with_group(self, group: impl Into<String>) -> Error {
        Error::Group {
            group: group.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code per error class: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::UnreadableFile { .. }
            | Error::UnsupportedEncoding { .. }
            | Error::EmptyAudio { .. }
            | Error::AudioTooShort { .. }
            | Error::InvalidManifest(_)
            | Error::InvalidFeaturesCsv(_)
            | Error::Io(_) => 3,
            Error::Group { source, .. } | Error::File { source, .. } => source.exit_code(),
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
