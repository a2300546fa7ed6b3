//! Metrics, cross-validation splits, reference baselines and result tables.

pub mod baselines;
pub mod kfold;
pub mod metrics;
pub mod table;

pub use baselines::{soccer_baseline, SoccerBaseline};
pub use kfold::{kfold_split, Fold};
pub use metrics::{fbeta, match_summary_actions, overlap_match, spans, Counts, MatchResult};
pub use table::ResultTable;
