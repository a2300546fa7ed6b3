use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Action, SummaryActionType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoccerBaseline {
    /// Each proposal kept when a uniform draw on `[0, 1)` is at least 0.5.
    Random,
    Goals,
    ShotsOnTarget,
}

impl SoccerBaseline {
    pub const ALL: [SoccerBaseline; 3] = [Self::Goals, Self::ShotsOnTarget, Self::Random];

    pub fn label(self) -> &'static str {
        match self {
            Self::Random => "Random",
            Self::Goals => "Only Goals",
            Self::ShotsOnTarget => "All Shots-on-Target",
        }
    }
}

/// Predicted summary for one match: the subset of proposals the baseline
/// keeps, in input order.
pub fn soccer_baseline<R: Rng>(mode: SoccerBaseline, proposals: &[Action], rng: &mut R) -> Vec<Action> {
    use SummaryActionType::*;
    proposals
        .iter()
        .filter(|a| match mode {
            SoccerBaseline::Random => rng.gen::<f64>() >= 0.5,
            SoccerBaseline::Goals => a.kind == Goal,
            SoccerBaseline::ShotsOnTarget => matches!(a.kind, Goal | Save | Shot),
        })
        .cloned()
        .collect()
}
