use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{EventType, Match, Summary};

/// Event-type sequences of ground-truth summary actions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionVocabulary {
    sequences: BTreeSet<Vec<EventType>>,
}

impl ActionVocabulary {
    /// Harvests every summary action of the given (training) matches.
    pub fn build<'a>(pairs: impl IntoIterator<Item = (&'a Match, &'a Summary)>) -> Self {
        let mut sequences = BTreeSet::new();
        for (m, s) in pairs {
            for a in &s.actions {
                sequences.insert(m.events[a.start..=a.end].iter().map(|e| e.kind).collect());
            }
        }
        Self { sequences }
    }

    pub fn from_sequences(seqs: impl IntoIterator<Item = Vec<EventType>>) -> Self {
        Self {
            sequences: seqs.into_iter().filter(|s| !s.is_empty()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn contains(&self, seq: &[EventType]) -> bool {
        self.sequences.contains(seq)
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Vec<EventType>> {
        self.sequences.iter()
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Every inclusive event range whose type sequence is in the vocabulary,
    /// ordered by start then end.
    pub fn find_spans(&self, m: &Match) -> Vec<(usize, usize)> {
        let lookup: HashSet<&[EventType]> = self.sequences.iter().map(Vec::as_slice).collect();
        let lens: BTreeSet<usize> = self.sequences.iter().map(Vec::len).collect();
        let types: Vec<EventType> = m.events.iter().map(|e| e.kind).collect();
        let mut out = Vec::new();
        for i in 0..types.len() {
            for &l in &lens {
                if i + l <= types.len() && lookup.contains(&types[i..i + l]) {
                    out.push((i, i + l - 1));
                }
            }
        }
        out
    }

    /// Per-event labels: positive when inside any vocabulary match.
    pub fn label_events(&self, m: &Match) -> Vec<bool> {
        let mut labels = vec![false; m.len()];
        for (s, e) in self.find_spans(m) {
            labels[s..=e].iter_mut().for_each(|l| *l = true);
        }
        labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::match_from;
    use crate::model::{Action, PaddingConfig, SummarySource, Vocabulary};

    fn summary(m: &Match, ranges: &[(usize, usize)], v: &Vocabulary) -> Summary {
        let acts = ranges
            .iter()
            .map(|&(s, e)| Action::derive(s, e, m, v).unwrap())
            .collect();
        Summary::new(acts, m, PaddingConfig::default(), SummarySource::GroundTruth).unwrap()
    }

    #[test]
    fn harvest_and_dedupe() {
        let v = Vocabulary::soccer_default();
        let types = ["pass", "pass", "shot", "out", "pass", "pass", "shot"];
        let times: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let m = match_from(&types, &times, &v);
        let s = summary(&m, &[(0, 2), (4, 6)], &v);
        let voc = ActionVocabulary::build([(&m, &s)]);
        assert_eq!(voc.len(), 1);
        let seq: Vec<EventType> = ["pass", "pass", "shot"].iter().map(|t| v.id(t).unwrap()).collect();
        assert!(voc.contains(&seq));
    }

    #[test]
    fn labelling_is_exact_and_unioned() {
        let v = Vocabulary::soccer_default();
        let id = |t: &str| v.id(t).unwrap();
        let voc = ActionVocabulary::from_sequences([
            vec![id("interception"), id("pass"), id("pass"), id("goal-shot")],
            vec![id("pass"), id("goal-shot")],
        ]);
        let types = ["pass", "interception", "pass", "goal-shot", "out"];
        let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let m = match_from(&types, &times, &v);
        // reordered variant of the 4-event entry is not matched; the
        // 2-event entry still is
        assert_eq!(voc.label_events(&m), vec![false, false, true, true, false]);
        let m2 = match_from(&["interception", "pass", "pass", "goal-shot"], &times[..4], &v);
        assert_eq!(voc.find_spans(&m2), vec![(0, 3), (2, 3)]);
        assert_eq!(voc.label_events(&m2), vec![true; 4]);
        assert!(ActionVocabulary::default().label_events(&m).iter().all(|l| !l));
    }
}
