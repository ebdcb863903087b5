//! Helicality: quantify octave equivalence in an audio corpus.
//!
//! The pipeline embeds constant-Q frequency subbands in 3-D with Isomap
//! (squared Pearson correlations -> pseudo-Euclidean distances -> k-NN
//! graph -> geodesics -> classical MDS), fits a Shepard-Risset helix to
//! the embedding (Frank-Wolfe circle fit over the convex hull of chroma
//! centroids, least-squares line for pitch height), and scores the fit as
//! the inverse mean squared residual.

pub mod audio;
pub mod circle;
pub mod correlation;
pub mod cqt;
pub mod error;
pub mod features;
pub mod graph;
pub mod helix;
pub mod hull;
pub mod mds;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use error::{Error, Result};
