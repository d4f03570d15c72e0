//! Dataset ingestion, cleaning, label-space preprocessing, splitting, and
//! synthetic corpora.

pub mod clean;
pub mod ingest;
pub mod preprocess;
pub mod synth;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use clean::{clean, clean_with_report, html_to_text, CleanReport, CleanSample};
pub use ingest::{ingest_path, ingest_reader, write_rejects_csv, write_tickets_csv, Ingested, InputFormat, RawTicket, Reject};
pub use preprocess::{
    balance_cap, merge_small_categories, stratified_split, MergeReport, Split, SplitSpec, DEFAULT_MAX_PER_CATEGORY,
    DEFAULT_MIN_SAMPLES,
};
pub use synth::{generate_synthetic, SynthManifest, SynthSpec, SyntheticCorpus};

use crate::error::Result;
use crate::model::TrainingSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub min_samples: usize,
    pub max_per_category: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_samples: DEFAULT_MIN_SAMPLES,
            max_per_category: DEFAULT_MAX_PER_CATEGORY,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub clean: CleanReport,
    pub merge: MergeReport,
    pub capped: usize,
    pub output: usize,
}

/// clean, merge small categories, then cap category sizes.
pub fn prepare(tickets: &[RawTicket], config: &PreprocessConfig, seed: u64) -> (Vec<CleanSample>, PrepareReport) {
    let (cleaned, clean) = clean_with_report(tickets);
    let (merged, merge) = merge_small_categories(cleaned, config.min_samples.max(1));
    let before = merged.len();
    let capped = balance_cap(merged, config.max_per_category.max(1), seed);
    let report = PrepareReport {
        clean,
        merge,
        capped: before - capped.len(),
        output: capped.len(),
    };
    (capped, report)
}

pub fn write_samples_csv<W: Write>(w: W, samples: &[CleanSample]) -> Result<()> {
    write_tickets_csv(w, &samples.iter().map(CleanSample::to_raw).collect::<Vec<_>>())
}

pub fn to_training(samples: &[CleanSample]) -> Vec<TrainingSample> {
    samples
        .iter()
        .map(|s| TrainingSample {
            id: Some(s.id.clone()),
            text: s.text.clone(),
            path: s.path.clone(),
        })
        .collect()
}
