//! Per-event metadata vectors.
//!
//! Layout (width `10 + |vocab| + Q`):
//! `[sx, sy, ex, ey, time_elapsed, start_dist, end_dist, start_angle, end_angle,
//! outcome, type one-hot.., qualifier one-hot..]`. Coordinates are scaled to
//! `[0, 1]`, distances are in field units / 100 and angles in radians.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, Match, Point, Vocabulary, FIELD_MAX};

pub const CONTINUOUS_DIMS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub right_goal: Point,
    pub left_goal: Point,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            right_goal: Point::new(FIELD_MAX, 50.0),
            left_goal: Point::new(0.0, 50.0),
        }
    }
}

/// Distance (normalised by 100) and angle from `loc` to `goal_center`.
///
/// The angle is `atan2(lateral offset, longitudinal distance)`, so it is 0
/// straight in front of the goal and ±π/2 on the goal line.
pub fn geometry_to_goal(loc: Point, goal_center: Point) -> (f64, f64) {
    let longitudinal = (goal_center.x - loc.x).abs();
    let lateral = goal_center.y - loc.y;
    let dist = longitudinal.hypot(lateral);
    if dist == 0.0 {
        return (0.0, 0.0);
    }
    (dist / FIELD_MAX, lateral.atan2(longitudinal))
}

/// One-hot encoding of qualifier codes: the `width - 1` most frequent codes
/// seen in training data, plus a trailing "other" bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualifierCodebook {
    codes: Vec<u16>,
    width: usize,
}

impl QualifierCodebook {
    pub fn fit<'a>(events: impl IntoIterator<Item = &'a Event>, width: usize) -> Self {
        assert!(width >= 1, "qualifier block needs at least the `other` bucket");
        let mut counts: HashMap<u16, usize> = HashMap::new();
        for e in events {
            *counts.entry(e.qualifier).or_default() += 1;
        }
        let mut ranked: Vec<(u16, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let codes = ranked.into_iter().take(width - 1).map(|(c, _)| c).collect();
        Self { codes, width }
    }

    pub fn from_codes(codes: Vec<u16>, width: usize) -> Self {
        assert!(codes.len() < width);
        Self { codes, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn slot(&self, code: u16) -> usize {
        self.codes
            .iter()
            .position(|&c| c == code)
            .unwrap_or(self.width - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetadataEncoder {
    pub vocab_len: usize,
    pub field: FieldConfig,
    pub qualifiers: QualifierCodebook,
}

impl MetadataEncoder {
    pub fn new(vocab: &Vocabulary, field: FieldConfig, qualifiers: QualifierCodebook) -> Self {
        Self {
            vocab_len: vocab.len(),
            field,
            qualifiers,
        }
    }

    pub fn width(&self) -> usize {
        CONTINUOUS_DIMS + self.vocab_len + self.qualifiers.width()
    }

    pub fn column_names(&self, vocab: &Vocabulary) -> Vec<String> {
        let mut cols: Vec<String> = [
            "sx",
            "sy",
            "ex",
            "ey",
            "time_elapsed",
            "start_dist",
            "end_dist",
            "start_angle",
            "end_angle",
            "outcome",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend(vocab.names().iter().map(|n| format!("type={n}")));
        cols.extend(self.qualifiers.codes().iter().map(|c| format!("qualifier={c}")));
        cols.push("qualifier=other".into());
        cols
    }

    pub fn encode_event(&self, event: &Event, prev: Option<&Event>, m: &Match) -> Result<Vec<f64>> {
        if event.kind.index() >= self.vocab_len {
            return Err(Error::Vocabulary {
                token: format!("#{}", event.kind.0),
            });
        }
        let goal = if m.attack.attacks_right(event.team, event.t) {
            self.field.right_goal
        } else {
            self.field.left_goal
        };
        let (start_dist, start_angle) = geometry_to_goal(event.start, goal);
        let (end_dist, end_angle) = geometry_to_goal(event.end, goal);
        let elapsed = prev.map(|p| event.t - p.t).unwrap_or(0.0);

        let mut v = vec![0.0; self.width()];
        v[..CONTINUOUS_DIMS].copy_from_slice(&[
            event.start.x / FIELD_MAX,
            event.start.y / FIELD_MAX,
            event.end.x / FIELD_MAX,
            event.end.y / FIELD_MAX,
            elapsed,
            start_dist,
            end_dist,
            start_angle,
            end_angle,
            if event.outcome { 1.0 } else { 0.0 },
        ]);
        v[CONTINUOUS_DIMS + event.kind.index()] = 1.0;
        v[CONTINUOUS_DIMS + self.vocab_len + self.qualifiers.slot(event.qualifier)] = 1.0;
        Ok(v)
    }

    pub fn encode_match(&self, m: &Match) -> Result<Vec<Vec<f64>>> {
        m.events
            .iter()
            .enumerate()
            .map(|(i, e)| self.encode_event(e, i.checked_sub(1).map(|p| &m.events[p]), m))
            .collect()
    }
}
