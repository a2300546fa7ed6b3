//! Precision / recall bookkeeping and the two action-matching rules.

use serde::{Deserialize, Serialize};

use crate::model::{Action, Match};

/// Weighted harmonic mean of precision and recall; 0 when both are 0.
pub fn fbeta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

/// Hit counts, summed across matches before computing ratios.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Predictions matched to a ground-truth action.
    pub tp: usize,
    /// Predictions left unmatched.
    pub fp: usize,
    /// Ground-truth actions never matched.
    pub fn_: usize,
}

impl Counts {
    pub fn predicted(&self) -> usize {
        self.tp + self.fp
    }

    pub fn ground_truth(&self) -> usize {
        self.tp + self.fn_
    }

    /// 0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.predicted())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.ground_truth())
    }

    pub fn f_score(&self) -> f64 {
        fbeta(self.precision(), self.recall(), 1.0)
    }

    pub fn f2(&self) -> f64 {
        fbeta(self.precision(), self.recall(), 2.0)
    }

    /// False-negative rate over ground-truth actions, `1 − recall`.
    pub fn missing_rate(&self) -> f64 {
        ratio(self.fn_, self.ground_truth())
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    /// Per ground-truth action, the prediction index that hit it.
    pub gt_hit: Vec<Option<usize>>,
    /// Per prediction, whether it was consumed by a ground-truth action.
    pub pred_tp: Vec<bool>,
}

impl MatchResult {
    pub fn counts(&self) -> Counts {
        let tp = self.pred_tp.iter().filter(|x| **x).count();
        Counts {
            tp,
            fp: self.pred_tp.len() - tp,
            fn_: self.gt_hit.iter().filter(|h| h.is_none()).count(),
        }
    }
}

/// Type-and-interval rule: ground-truth action `j` is hit by an unconsumed
/// prediction of the same type whose start time lies in
/// `[end of gt[j-1], start of gt[j+1]]` (match start / end at the borders).
/// Ground-truth actions are visited chronologically and each takes the
/// earliest eligible prediction.
pub fn match_summary_actions(predicted: &[Action], gt: &[Action], m: &Match) -> MatchResult {
    let time = |i: usize| m.events[i].t;
    let mut gt_order: Vec<usize> = (0..gt.len()).collect();
    gt_order.sort_by_key(|&j| (gt[j].start, gt[j].end));
    let mut pred_order: Vec<usize> = (0..predicted.len()).collect();
    pred_order.sort_by(|&a, &b| {
        time(predicted[a].start)
            .total_cmp(&time(predicted[b].start))
            .then(a.cmp(&b))
    });

    let (first, last) = match (m.events.first(), m.events.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => (0.0, 0.0),
    };
    let mut gt_hit = vec![None; gt.len()];
    let mut pred_tp = vec![false; predicted.len()];
    for (pos, &j) in gt_order.iter().enumerate() {
        let lo = if pos == 0 {
            first
        } else {
            time(gt[gt_order[pos - 1]].end)
        };
        let hi = if pos + 1 == gt_order.len() {
            last
        } else {
            time(gt[gt_order[pos + 1]].start)
        };
        let pick = pred_order.iter().copied().find(|&p| {
            let t = time(predicted[p].start);
            !pred_tp[p] && predicted[p].kind == gt[j].kind && t >= lo && t <= hi
        });
        if let Some(p) = pick {
            pred_tp[p] = true;
            gt_hit[j] = Some(p);
        }
    }
    MatchResult { gt_hit, pred_tp }
}

/// Overlap rule on inclusive event ranges: a prediction is a true positive
/// when at least `ratio` of its events fall inside one unconsumed
/// ground-truth range. Predictions are visited in order; each picks the
/// eligible range with the largest overlap (lowest index on ties).
pub fn overlap_match(predicted: &[(usize, usize)], gt: &[(usize, usize)], ratio: f64) -> MatchResult {
    let mut gt_hit = vec![None; gt.len()];
    let mut pred_tp = vec![false; predicted.len()];
    for (p, &(ps, pe)) in predicted.iter().enumerate() {
        let len = (pe - ps + 1) as f64;
        let mut best: Option<(usize, usize)> = None;
        for (j, &(gs, ge)) in gt.iter().enumerate() {
            if gt_hit[j].is_some() {
                continue;
            }
            let lo = ps.max(gs);
            let hi = pe.min(ge);
            if lo > hi {
                continue;
            }
            let ov = hi - lo + 1;
            if ov as f64 >= ratio * len - 1e-9 && best.map_or(true, |(_, b)| ov > b) {
                best = Some((j, ov));
            }
        }
        if let Some((j, _)) = best {
            gt_hit[j] = Some(p);
            pred_tp[p] = true;
        }
    }
    MatchResult { gt_hit, pred_tp }
}

/// Convenience: event ranges of a list of actions.
pub fn spans(actions: &[Action]) -> Vec<(usize, usize)> {
    actions.iter().map(|a| (a.start, a.end)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::match_from;
    use crate::model::{SummaryActionType as T, Vocabulary};

    fn act(start: usize, end: usize, kind: T) -> Action {
        Action {
            start,
            end,
            kind,
            in_summary: None,
        }
    }

    #[test]
    fn fbeta_examples() {
        assert!((fbeta(0.3, 0.3, 2.0) - 0.3).abs() < 1e-15);
        assert!((fbeta(0.5, 1.0, 2.0) - 2.5 / 3.0).abs() < 1e-12);
        assert_eq!(fbeta(1.0, 0.0, 2.0), 0.0);
        assert_eq!(fbeta(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn overlap_examples() {
        let r = overlap_match(&[(3, 6)], &[(3, 6)], 0.5);
        assert_eq!(r.counts(), Counts { tp: 1, fp: 0, fn_: 0 });
        let r = overlap_match(&[(0, 3)], &[(3, 8)], 0.5);
        assert_eq!(r.counts(), Counts { tp: 0, fp: 1, fn_: 1 });
        let r = overlap_match(&[(0, 3)], &[(2, 8)], 0.5);
        assert_eq!(r.counts().tp, 1);
        // one ground-truth range cannot be hit twice
        let r = overlap_match(&[(0, 1), (2, 3)], &[(0, 3)], 0.5);
        assert_eq!(r.counts(), Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn type_and_interval_examples() {
        let v = Vocabulary::soccer_default();
        let m = match_from(
            &["pass", "pass", "goal-shot", "pass", "pass", "corner-shot", "pass"],
            &[0.0, 100.0, 120.0, 130.0, 140.0, 150.0, 200.0],
            &v,
        );
        let gt = vec![act(1, 2, T::Goal)];
        let r = match_summary_actions(&[act(2, 2, T::Goal)], &gt, &m);
        assert_eq!(r.counts(), Counts { tp: 1, fp: 0, fn_: 0 });
        let r = match_summary_actions(&[act(2, 2, T::Corner)], &gt, &m);
        assert_eq!(r.counts(), Counts { tp: 0, fp: 1, fn_: 1 });
    }

    #[test]
    fn neighbourhood_layout() {
        // shot at 23', save at 26' (GT); predicted shot at 22' and save at 26'
        let v = Vocabulary::soccer_default();
        let m = match_from(
            &["start-period", "shot", "shot", "save", "pass"],
            &[0.0, 22.0 * 60.0, 23.0 * 60.0, 26.0 * 60.0, 90.0 * 60.0],
            &v,
        );
        let gt = vec![act(0, 0, T::StartPeriod), act(2, 2, T::Shot), act(3, 3, T::Save)];
        let pred = vec![act(1, 1, T::Shot), act(3, 3, T::Save)];
        let r = match_summary_actions(&pred, &gt, &m);
        assert_eq!(r.gt_hit, vec![None, Some(0), Some(1)]);
    }

    #[test]
    fn missing_plus_recall_is_one() {
        let c = Counts { tp: 7, fp: 3, fn_: 4 };
        assert_eq!(c.recall() + c.missing_rate(), 1.0);
    }
}
