use crate::error::{Error, Result};
use crate::eval::{overlap_match, Counts};
use crate::model::{Action, Match, SummaryActionType, Vocabulary};

/// Maximal runs of events scoring at least `threshold`. A goal event closes
/// its proposal; the following event starts a new one.
pub fn extract_proposals(
    scores: &[f64],
    threshold: f64,
    m: &Match,
    vocab: &Vocabulary,
) -> Result<Vec<Action>> {
    if scores.len() != m.len() {
        return Err(Error::Shape {
            context: format!("event scores of match {}", m.id),
            expected: m.len(),
            got: scores.len(),
        });
    }
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s >= threshold {
            let start = *open.get_or_insert(i);
            if vocab.summary_type(m.events[i].kind) == Some(SummaryActionType::Goal) {
                out.push(Action::derive(start, i, m, vocab)?);
                open = None;
            }
        } else if let Some(start) = open.take() {
            out.push(Action::derive(start, i - 1, m, vocab)?);
        }
    }
    if let Some(start) = open {
        out.push(Action::derive(start, scores.len() - 1, m, vocab)?);
    }
    Ok(out)
}

/// Proposals of pure template matching: events labelled by the vocabulary
/// are scored 1, the rest 0.
pub fn template_proposals(labels: &[bool], m: &Match, vocab: &Vocabulary) -> Result<Vec<Action>> {
    let scores: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    extract_proposals(&scores, 0.5, m, vocab)
}

/// One validation match for threshold selection.
pub struct ThresholdCase<'a> {
    pub scores: &'a [f64],
    pub m: &'a Match,
    pub gt: &'a [(usize, usize)],
}

pub const OVERLAP_RATIO: f64 = 0.5;

/// Threshold grid `0.01, 0.02, ..., 0.99`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|i| i as f64 / 100.0)
}

pub fn proposal_counts(cases: &[ThresholdCase], threshold: f64, vocab: &Vocabulary) -> Result<Counts> {
    let mut total = Counts::default();
    for c in cases {
        let props = extract_proposals(c.scores, threshold, c.m, vocab)?;
        let spans: Vec<(usize, usize)> = props.iter().map(|a| (a.start, a.end)).collect();
        total += overlap_match(&spans, c.gt, OVERLAP_RATIO).counts();
    }
    Ok(total)
}

/// Grid threshold with the best proposal-level F2; the lowest wins ties.
pub fn select_threshold(cases: &[ThresholdCase], vocab: &Vocabulary) -> Result<(f64, Counts)> {
    if cases.iter().all(|c| c.gt.is_empty()) {
        return Err(Error::NoPositives(
            "threshold selection needs at least one ground-truth action".into(),
        ));
    }
    let mut best: Option<(f64, Counts)> = None;
    for t in threshold_grid() {
        let c = proposal_counts(cases, t, vocab)?;
        if best.map_or(true, |(_, b)| c.f2() > b.f2()) {
            best = Some((t, c));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::match_from;

    fn m12(v: &Vocabulary) -> Match {
        let mut types = vec!["pass"; 12];
        types[9] = "goal-shot";
        let times: Vec<f64> = (0..12).map(|i| i as f64).collect();
        match_from(&types, &times, v)
    }

    #[test]
    fn goal_splits_a_run() {
        let v = Vocabulary::soccer_default();
        let m = m12(&v);
        let mut s = vec![0.0; 12];
        s[7..=11].iter_mut().for_each(|x| *x = 0.9);
        let p = extract_proposals(&s, 0.5, &m, &v).unwrap();
        let r: Vec<(usize, usize)> = p.iter().map(|a| (a.start, a.end)).collect();
        assert_eq!(r, vec![(7, 9), (10, 11)]);
        assert_eq!(p[0].kind, SummaryActionType::Goal);
    }

    #[test]
    fn empty_and_gap_cases() {
        let v = Vocabulary::soccer_default();
        let m = m12(&v);
        assert!(extract_proposals(&[0.1; 12], 0.5, &m, &v).unwrap().is_empty());
        let mut s = vec![0.0; 12];
        s[1..=3].iter_mut().for_each(|x| *x = 0.8);
        s[5..=6].iter_mut().for_each(|x| *x = 0.8);
        assert_eq!(extract_proposals(&s, 0.5, &m, &v).unwrap().len(), 2);
    }

    #[test]
    fn threshold_ties_resolve_low() {
        let v = Vocabulary::soccer_default();
        let m = m12(&v);
        let mut s = vec![0.1; 12];
        s[2..=4].iter_mut().for_each(|x| *x = 0.7);
        let gt = [(2, 4)];
        let cases = [ThresholdCase { scores: &s, m: &m, gt: &gt }];
        let (t, c) = select_threshold(&cases, &v).unwrap();
        assert!((t - 0.11).abs() < 1e-12);
        assert_eq!(c.f2(), 1.0);

        let flat = vec![0.5; 12];
        let all = [(0, 11)];
        let cases = [ThresholdCase { scores: &flat, m: &m, gt: &all }];
        let (t, _) = select_threshold(&cases, &v).unwrap();
        assert!(t <= 0.5);
    }
}
