//! Action proposals: vocabulary labelling, training bags, the MIL network,
//! per-event window fusion and proposal extraction.

pub mod bags;
pub mod extract;
pub mod mil;
pub mod scoring;
pub mod vocab;

pub use bags::{sample_training_bags, Bag};
pub use extract::{
    extract_proposals, proposal_counts, select_threshold, template_proposals, threshold_grid,
    ThresholdCase, OVERLAP_RATIO,
};
pub use mil::{train_mil, MilConfig, MilModel, MilNet, MilSettings, MilValidation, TrainLog};
pub use scoring::{fuse, fuse_windows, score_events_with, window_scores, windows, Fusion};
pub use vocab::ActionVocabulary;
