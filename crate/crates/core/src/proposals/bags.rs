use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous event range `[start, start + len)` of one match.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub match_idx: usize,
    pub start: usize,
    pub len: usize,
    pub label: f64,
}

impl Bag {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Shortest negative bag length.
pub const MIN_NEGATIVE_LEN: usize = 4;

/// Positive bags are the given vocabulary spans (one per span). Negative bags
/// are random contiguous stretches of unlabelled events, as many as there
/// are positives, with lengths drawn uniformly from `[4, longest positive]`.
pub fn sample_training_bags<R: Rng>(
    spans: &[Vec<(usize, usize)>],
    labels: &[Vec<bool>],
    rng: &mut R,
) -> Result<Vec<Bag>> {
    assert_eq!(spans.len(), labels.len());
    let mut bags: Vec<Bag> = Vec::new();
    for (mi, ss) in spans.iter().enumerate() {
        for &(s, e) in ss {
            bags.push(Bag {
                match_idx: mi,
                start: s,
                len: e - s + 1,
                label: 1.0,
            });
        }
    }
    if bags.is_empty() {
        return Err(Error::NoPositives(
            "no training event sequence matches the action vocabulary".into(),
        ));
    }
    let max_len = bags.iter().map(|b| b.len).max().unwrap_or(1);
    let lo = MIN_NEGATIVE_LEN.min(max_len);

    // maximal runs of unlabelled events: (match, start, len)
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for (mi, ls) in labels.iter().enumerate() {
        let mut i = 0;
        while i < ls.len() {
            if ls[i] {
                i += 1;
                continue;
            }
            let s = i;
            while i < ls.len() && !ls[i] {
                i += 1;
            }
            runs.push((mi, s, i - s));
        }
    }

    let needed = bags.len();
    let mut negatives = Vec::with_capacity(needed);
    for _ in 0..needed {
        let len = rng.gen_range(lo..=max_len);
        let total: usize = runs.iter().map(|r| (r.2 + 1).saturating_sub(len)).sum();
        if total == 0 {
            return Err(Error::InsufficientNegatives {
                needed: needed - negatives.len(),
                available: 0,
            });
        }
        let mut pick = rng.gen_range(0..total);
        for &(mi, s, rl) in &runs {
            let n = (rl + 1).saturating_sub(len);
            if pick < n {
                negatives.push(Bag {
                    match_idx: mi,
                    start: s + pick,
                    len,
                    label: 0.0,
                });
                break;
            }
            pick -= n;
        }
    }
    bags.extend(negatives);
    Ok(bags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn setup() -> (Vec<Vec<(usize, usize)>>, Vec<Vec<bool>>) {
        let mut spans = Vec::new();
        let mut labels = Vec::new();
        for m in 0..2 {
            let mut l = vec![false; 200];
            let mut s = Vec::new();
            for k in 0..5 {
                let st = 10 + k * 35 + m;
                let len = 3 + k;
                s.push((st, st + len - 1));
                l[st..st + len].iter_mut().for_each(|x| *x = true);
            }
            spans.push(s);
            labels.push(l);
        }
        (spans, labels)
    }

    #[test]
    fn balanced_and_outside_labels() {
        let (spans, labels) = setup();
        let bags = sample_training_bags(&spans, &labels, &mut rng::stream(1, &[])).unwrap();
        let pos = bags.iter().filter(|b| b.label == 1.0).count();
        let neg: Vec<&Bag> = bags.iter().filter(|b| b.label == 0.0).collect();
        assert_eq!(pos, 10);
        assert_eq!(neg.len(), 10);
        for b in neg {
            assert!((4..=7).contains(&b.len));
            assert!(labels[b.match_idx][b.start..b.end()].iter().all(|l| !l));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (spans, labels) = setup();
        let a = sample_training_bags(&spans, &labels, &mut rng::stream(5, &[])).unwrap();
        let b = sample_training_bags(&spans, &labels, &mut rng::stream(5, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shortfall_is_reported() {
        let spans = vec![vec![(0, 5)]];
        let mut l = vec![true; 8];
        l[6] = false;
        l[7] = false;
        let err = sample_training_bags(&spans, &[l], &mut rng::stream(0, &[])).unwrap_err();
        assert!(matches!(err, Error::InsufficientNegatives { needed: 1, .. }));
    }
}
