//! Sliding-window bag scoring and per-event fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    /// `r⁻¹ · log( (1/N) · Σ exp(r · O) )`.
    Lse,
    /// `r⁻¹ · log( (1/N) · Σ r · O )`, the same expression without the
    /// exponential. Diagnostic only; it is not bounded by the bag scores.
    Literal,
}

/// Window starts over `n` events. Windows advance by `stride`; a final
/// window flush with the end is added when needed. A match shorter than the
/// window is a single bag.
pub fn windows(n: usize, window: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if window == 0 || stride == 0 || stride >= window {
        return Err(Error::Config(format!(
            "need 0 < stride < window, got window {window}, stride {stride}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= window {
        return Ok(vec![(0, n)]);
    }
    let mut out = Vec::new();
    let mut s = 0;
    while s + window <= n {
        out.push((s, window));
        s += stride;
    }
    if out.last().map_or(true, |&(s, w)| s + w < n) {
        out.push((n - window, window));
    }
    Ok(out)
}

pub fn fuse(scores: &[f64], r: f64, mode: Fusion) -> f64 {
    assert!(!scores.is_empty(), "fusing an empty score set");
    assert!(r > 0.0, "smoothness must be positive");
    let n = scores.len() as f64;
    match mode {
        Fusion::Lse => {
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = scores.iter().map(|o| (r * (o - m)).exp()).sum();
            m + (s / n).ln() / r
        }
        Fusion::Literal => {
            let s: f64 = scores.iter().map(|o| r * o).sum();
            (s / n).ln() / r
        }
    }
}

/// Scores of every sliding window as `((start, len), score)`.
pub fn window_scores(
    n: usize,
    window: usize,
    stride: usize,
    mut bag_score: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<Vec<((usize, usize), f64)>> {
    windows(n, window, stride)?
        .into_iter()
        .map(|(s, len)| Ok(((s, len), bag_score(s, len)?)))
        .collect()
}

/// Per-event scores: each event fuses the scores of all windows covering it.
pub fn fuse_windows(n: usize, scored: &[((usize, usize), f64)], r: f64, mode: Fusion) -> Vec<f64> {
    let mut covering: Vec<Vec<f64>> = vec![Vec::new(); n];
    for &((s, len), o) in scored {
        for c in &mut covering[s..s + len] {
            c.push(o);
        }
    }
    covering.iter().map(|c| fuse(c, r, mode)).collect()
}

pub fn score_events_with(
    n: usize,
    window: usize,
    stride: usize,
    r: f64,
    mode: Fusion,
    bag_score: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<Vec<f64>> {
    let scored = window_scores(n, window, stride, bag_score)?;
    Ok(fuse_windows(n, &scored, r, mode))
}
