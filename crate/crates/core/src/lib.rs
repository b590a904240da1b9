//! Grading pipeline for green coffee bean snapshots.
//!
//! The pipeline runs: threshold segmentation of a snapshot into per-bean
//! regions, per-channel grayscale distribution features (raw histograms,
//! Gaussian mean/std fits, or the 768-dim concatenated histogram), a linear
//! soft-margin SVM for the qualified/defective decision and one-vs-one site
//! discrimination, and an evaluation harness (accuracy, train-ratio sweep,
//! confusion matrix). A seeded synthetic generator produces bean snapshots
//! with the site-specific color statistics the classifiers rely on, so the
//! whole pipeline is testable without a physical dataset.

pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod plot;
pub mod seeding;
pub mod store;
pub mod synth;

pub use error::{Error, Result};

/// Format a fraction as a percentage with two decimals, e.g. `0.8222 -> "82.22%"`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}
