//! Domain types: events, matches, actions and summaries.
//!
//! Event types are indices into a per-dataset [`Vocabulary`]. Actions are
//! inclusive, contiguous event-index ranges; each one maps to exactly one of
//! the ten [`SummaryActionType`]s used for evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch coordinates live in `[0, FIELD_MAX]²`.
pub const FIELD_MAX: f64 = 100.0;

pub const DEFAULT_EVENT_TYPES: [&str; 18] = [
    "pass",
    "tackle",
    "out",
    "interception",
    "shot",
    "goal-shot",
    "corner-shot",
    "save",
    "foul",
    "card",
    "free-kick",
    "kick-off",
    "substitution",
    "clearance",
    "start-period",
    "end-period",
    "var",
    "other",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventType(pub u16);

impl EventType {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered, deduplicated set of event-type names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    summary_types: Vec<Option<SummaryActionType>>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Data("event vocabulary is empty".into()));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::Data("event vocabulary too large".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Data(format!("duplicate event type `{n}` in vocabulary")));
            }
        }
        let summary_types = names.iter().map(|n| summary_type_for_name(n)).collect();
        Ok(Self {
            names,
            summary_types,
        })
    }

    pub fn soccer_default() -> Self {
        Self::new(DEFAULT_EVENT_TYPES).expect("default vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<EventType> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| EventType(i as u16))
    }

    /// Like [`Vocabulary::id`] but reports the offending token.
    pub fn parse(&self, name: &str) -> Result<EventType> {
        self.id(name).ok_or_else(|| Error::Vocabulary {
            token: name.to_string(),
        })
    }

    pub fn contains(&self, t: EventType) -> bool {
        t.index() < self.names.len()
    }

    pub fn name(&self, t: EventType) -> &str {
        self.names.get(t.index()).map(String::as_str).unwrap_or("<unknown>")
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Summary type an event of type `t` votes for, if any.
    pub fn summary_type(&self, t: EventType) -> Option<SummaryActionType> {
        self.summary_types.get(t.index()).copied().flatten()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Vocabulary::new(v)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

fn summary_type_for_name(name: &str) -> Option<SummaryActionType> {
    use SummaryActionType::*;
    Some(match name {
        "goal-shot" | "goal" => Goal,
        "var" => Var,
        "save" => Save,
        "shot" => Shot,
        "free-kick" => FreeKick,
        "corner-shot" | "corner" => Corner,
        // A card is always shown together with the foul that caused it.
        "foul" | "card" => Foul,
        "start-period" => StartPeriod,
        "end-period" => EndPeriod,
        _ => return None,
    })
}

/// The ten action categories used to compare summaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryActionType {
    FreeKick,
    Corner,
    Foul,
    Shot,
    Save,
    Var,
    Goal,
    EndPeriod,
    StartPeriod,
    Other,
}

impl SummaryActionType {
    pub const ALL: [SummaryActionType; 10] = [
        SummaryActionType::FreeKick,
        SummaryActionType::Corner,
        SummaryActionType::Foul,
        SummaryActionType::Shot,
        SummaryActionType::Save,
        SummaryActionType::Var,
        SummaryActionType::Goal,
        SummaryActionType::EndPeriod,
        SummaryActionType::StartPeriod,
        SummaryActionType::Other,
    ];

    /// Lower value wins when an action contains events of several types.
    pub fn priority(self) -> u8 {
        use SummaryActionType::*;
        match self {
            Goal => 0,
            Var => 1,
            Save => 2,
            Shot => 3,
            FreeKick => 4,
            Corner => 5,
            Foul => 6,
            StartPeriod => 7,
            EndPeriod => 8,
            Other => 9,
        }
    }

    pub fn as_str(self) -> &'static str {
        use SummaryActionType::*;
        match self {
            FreeKick => "free-kick",
            Corner => "corner",
            Foul => "foul",
            Shot => "shot",
            Save => "save",
            Var => "var",
            Goal => "goal",
            EndPeriod => "end-period",
            StartPeriod => "start-period",
            Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for SummaryActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn in_field(self) -> bool {
        (0.0..=FIELD_MAX).contains(&self.x) && (0.0..=FIELD_MAX).contains(&self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub index: usize,
    /// Seconds into the match video.
    pub t: f64,
    pub kind: EventType,
    pub team: u8,
    pub player: u32,
    pub start: Point,
    pub end: Point,
    pub outcome: bool,
    pub qualifier: u16,
}

/// Which goal each team attacks. Team 0 attacks towards x = 100 in the first
/// half iff `team0_attacks_right_first_half`; both teams switch at halftime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackDirections {
    pub team0_attacks_right_first_half: bool,
    /// Video timestamp at which the second half starts, if known.
    pub second_half_start: Option<f64>,
}

impl Default for AttackDirections {
    fn default() -> Self {
        Self {
            team0_attacks_right_first_half: true,
            second_half_start: None,
        }
    }
}

impl AttackDirections {
    pub fn half_at(&self, t: f64) -> usize {
        match self.second_half_start {
            Some(s) if t >= s => 1,
            _ => 0,
        }
    }

    pub fn attacks_right(&self, team: u8, t: f64) -> bool {
        let first = self.team0_attacks_right_first_half ^ (team != 0);
        if self.half_at(t) == 0 {
            first
        } else {
            !first
        }
    }
}

/// Parameters of a procedurally generated audio track; resolved by
/// [`crate::synth::SyntheticAudio`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAudioSpec {
    pub seed: u64,
    pub sample_rate: u32,
    pub baseline_amplitude: f64,
    pub gain: f64,
    pub false_burst_rate: f64,
    pub missed_burst_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AudioRef {
    /// Mono (or first channel of) PCM WAV, path relative to the dataset root.
    Wav { path: String },
    /// Raw little-endian f32 samples.
    RawF32 { path: String, sample_rate: u32 },
    Synthetic(SyntheticAudioSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub id: String,
    pub events: Vec<Event>,
    pub audio: Option<AudioRef>,
    pub attack: AttackDirections,
}

impl Match {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.events.last().map(|e| e.t).unwrap_or(0.0)
    }

    pub fn check_range(&self, start: usize, end: usize) -> Result<()> {
        if start > end || end >= self.events.len() {
            return Err(Error::Range {
                start,
                end,
                len: self.events.len(),
            });
        }
        Ok(())
    }
}

/// Inclusive contiguous event range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub start: usize,
    pub end: usize,
    pub kind: SummaryActionType,
    /// Ground-truth summary membership, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_summary: Option<bool>,
}

impl Action {
    /// Builds an action and derives its type from the match events.
    pub fn derive(start: usize, end: usize, m: &Match, vocab: &Vocabulary) -> Result<Self> {
        let kind = action_type(start, end, m, vocab)?;
        Ok(Self {
            start,
            end,
            kind,
            in_summary: None,
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, idx: usize) -> bool {
        (self.start..=self.end).contains(&idx)
    }

    pub fn overlaps(&self, other: &Action) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Clip padding applied around the event span of an action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaddingConfig {
    pub pre: f64,
    pub post: f64,
}

impl Default for PaddingConfig {
    fn default() -> Self {
        Self {
            pre: 5.0,
            post: 10.0,
        }
    }
}

/// Returns the highest-priority summary type voted by any event of the
/// range, or `Other` when no event maps to a named type.
pub fn action_type(
    start: usize,
    end: usize,
    m: &Match,
    vocab: &Vocabulary,
) -> Result<SummaryActionType> {
    m.check_range(start, end)?;
    Ok(m.events[start..=end]
        .iter()
        .filter_map(|e| vocab.summary_type(e.kind))
        .min_by_key(|t| t.priority())
        .unwrap_or(SummaryActionType::Other))
}

pub fn action_duration(action: &Action, m: &Match, pad: PaddingConfig) -> f64 {
    let first = m.events[action.start].t;
    let last = m.events[action.end].t;
    (last - first) + pad.pre + pad.post
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummarySource {
    GroundTruth,
    Candidate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub actions: Vec<Action>,
    pub total_duration: f64,
    pub source: SummarySource,
}

impl Summary {
    /// Sorts actions chronologically and rejects overlapping ranges.
    pub fn new(
        mut actions: Vec<Action>,
        m: &Match,
        pad: PaddingConfig,
        source: SummarySource,
    ) -> Result<Self> {
        for a in &actions {
            m.check_range(a.start, a.end)?;
        }
        actions.sort_by_key(|a| (a.start, a.end));
        for w in actions.windows(2) {
            if w[0].overlaps(&w[1]) {
                return Err(Error::InvalidMatch {
                    match_id: m.id.clone(),
                    reason: format!(
                        "summary actions [{}, {}] and [{}, {}] overlap",
                        w[0].start, w[0].end, w[1].start, w[1].end
                    ),
                });
            }
        }
        let total_duration = actions.iter().map(|a| action_duration(a, m, pad)).sum();
        Ok(Self {
            actions,
            total_duration,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyMatch,
    IndexGap { position: usize, index: usize },
    NegativeTimestamp { index: usize, t: f64 },
    NonMonotoneTimestamp { index: usize, prev: f64, t: f64 },
    OutOfBounds { index: usize, field: &'static str, value: f64 },
    UnknownType { index: usize, code: u16 },
    BadTeam { index: usize, team: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyMatch => write!(f, "match has no events (F >= 1 violated)"),
            Violation::IndexGap { position, index } => {
                write!(f, "event at position {position} has index {index}")
            }
            Violation::NegativeTimestamp { index, t } => {
                write!(f, "event {index}: negative timestamp {t}")
            }
            Violation::NonMonotoneTimestamp { index, prev, t } => {
                write!(f, "event {index}: timestamp {t} precedes previous {prev}")
            }
            Violation::OutOfBounds {
                index,
                field,
                value,
            } => write!(f, "event {index}: {field} = {value} outside [0, 100]"),
            Violation::UnknownType { index, code } => {
                write!(f, "event {index}: type code {code} not in vocabulary")
            }
            Violation::BadTeam { index, team } => write!(f, "event {index}: team {team} not 0/1"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_match(m: &Match, vocab: &Vocabulary) -> ValidationReport {
    let mut violations = Vec::new();
    if m.events.is_empty() {
        violations.push(Violation::EmptyMatch);
    }
    let mut prev_t: Option<f64> = None;
    for (pos, e) in m.events.iter().enumerate() {
        if e.index != pos {
            violations.push(Violation::IndexGap {
                position: pos,
                index: e.index,
            });
        }
        if e.t < 0.0 {
            violations.push(Violation::NegativeTimestamp { index: pos, t: e.t });
        }
        if let Some(p) = prev_t {
            if e.t < p {
                violations.push(Violation::NonMonotoneTimestamp {
                    index: pos,
                    prev: p,
                    t: e.t,
                });
            }
        }
        prev_t = Some(e.t);
        for (field, value) in [
            ("sx", e.start.x),
            ("sy", e.start.y),
            ("ex", e.end.x),
            ("ey", e.end.y),
        ] {
            if !(0.0..=FIELD_MAX).contains(&value) {
                violations.push(Violation::OutOfBounds {
                    index: pos,
                    field,
                    value,
                });
            }
        }
        if !vocab.contains(e.kind) {
            violations.push(Violation::UnknownType {
                index: pos,
                code: e.kind.0,
            });
        }
        if e.team > 1 {
            violations.push(Violation::BadTeam {
                index: pos,
                team: e.team,
            });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Events at the given timestamps with the given type names, mid-field.
    pub fn match_from(types: &[&str], times: &[f64], vocab: &Vocabulary) -> Match {
        let events = types
            .iter()
            .zip(times)
            .enumerate()
            .map(|(i, (ty, &t))| Event {
                index: i,
                t,
                kind: vocab.parse(ty).unwrap(),
                team: 0,
                player: 1,
                start: Point::new(50.0, 50.0),
                end: Point::new(55.0, 50.0),
                outcome: true,
                qualifier: 0,
            })
            .collect();
        Match {
            id: "m".into(),
            events,
            audio: None,
            attack: AttackDirections::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::match_from;
    use super::*;

    fn v() -> Vocabulary {
        Vocabulary::soccer_default()
    }

    #[test]
    fn valid_match_has_empty_report() {
        let m = match_from(&["pass", "shot"], &[1.0, 2.0], &v());
        assert!(validate_match(&m, &v()).is_ok());
    }

    #[test]
    fn out_of_bounds_coordinate_reported_once() {
        let mut m = match_from(&["pass"], &[1.0], &v());
        m.events[0].start.x = 120.0;
        let r = validate_match(&m, &v());
        assert_eq!(r.violations.len(), 1);
        assert!(matches!(
            r.violations[0],
            Violation::OutOfBounds { field: "sx", .. }
        ));
    }

    #[test]
    fn decreasing_timestamps_reported() {
        let m = match_from(&["pass", "pass"], &[10.0, 5.0], &v());
        let r = validate_match(&m, &v());
        assert_eq!(r.violations.len(), 1);
        assert!(matches!(
            r.violations[0],
            Violation::NonMonotoneTimestamp { index: 1, .. }
        ));
    }

    #[test]
    fn unknown_type_and_empty_match() {
        let mut m = match_from(&["pass"], &[1.0], &v());
        m.events[0].kind = EventType(500);
        assert!(matches!(
            validate_match(&m, &v()).violations[0],
            Violation::UnknownType { code: 500, .. }
        ));
        m.events.clear();
        assert_eq!(validate_match(&m, &v()).violations, vec![Violation::EmptyMatch]);
    }

    #[test]
    fn goal_shot_makes_goal_action() {
        let m = match_from(&["pass", "pass", "goal-shot"], &[0.0, 1.0, 2.0], &v());
        assert_eq!(action_type(0, 2, &m, &v()).unwrap(), SummaryActionType::Goal);
    }

    #[test]
    fn no_named_event_is_other() {
        let m = match_from(&["pass", "pass"], &[0.0, 1.0], &v());
        assert_eq!(action_type(0, 1, &m, &v()).unwrap(), SummaryActionType::Other);
    }

    #[test]
    fn save_beats_corner() {
        let m = match_from(&["corner-shot", "save"], &[0.0, 1.0], &v());
        assert_eq!(action_type(0, 1, &m, &v()).unwrap(), SummaryActionType::Save);
        // order inside the action is irrelevant
        let m = match_from(&["save", "corner-shot"], &[0.0, 1.0], &v());
        assert_eq!(action_type(0, 1, &m, &v()).unwrap(), SummaryActionType::Save);
    }

    #[test]
    fn full_priority_chain() {
        let vocab = v();
        let chain = [
            ("goal-shot", SummaryActionType::Goal),
            ("var", SummaryActionType::Var),
            ("save", SummaryActionType::Save),
            ("shot", SummaryActionType::Shot),
            ("free-kick", SummaryActionType::FreeKick),
            ("corner-shot", SummaryActionType::Corner),
            ("foul", SummaryActionType::Foul),
            ("start-period", SummaryActionType::StartPeriod),
            ("end-period", SummaryActionType::EndPeriod),
        ];
        // every suffix of the chain resolves to its own head
        for i in 0..chain.len() {
            let names: Vec<&str> = chain[i..].iter().rev().map(|c| c.0).collect();
            let times: Vec<f64> = (0..names.len()).map(|t| t as f64).collect();
            let m = match_from(&names, &times, &vocab);
            assert_eq!(action_type(0, names.len() - 1, &m, &vocab).unwrap(), chain[i].1);
        }
    }

    #[test]
    fn invalid_range_is_error() {
        let m = match_from(&["pass"], &[0.0], &v());
        assert!(matches!(action_type(0, 1, &m, &v()), Err(Error::Range { .. })));
        assert!(matches!(action_type(1, 0, &m, &v()), Err(Error::Range { .. })));
    }

    #[test]
    fn durations() {
        let m = match_from(&["pass", "shot"], &[100.0, 130.0], &v());
        let single = Action::derive(0, 0, &m, &v()).unwrap();
        assert_eq!(action_duration(&single, &m, PaddingConfig::default()), 15.0);
        let both = Action::derive(0, 1, &m, &v()).unwrap();
        let nopad = PaddingConfig { pre: 0.0, post: 0.0 };
        assert_eq!(action_duration(&both, &m, nopad), 30.0);
    }

    #[test]
    fn summary_rejects_overlap_and_sorts() {
        let vocab = v();
        let m = match_from(&["pass"; 6], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &vocab);
        let a = Action::derive(3, 4, &m, &vocab).unwrap();
        let b = Action::derive(0, 1, &m, &vocab).unwrap();
        let s = Summary::new(
            vec![a.clone(), b.clone()],
            &m,
            PaddingConfig::default(),
            SummarySource::GroundTruth,
        )
        .unwrap();
        assert_eq!(s.actions[0], b);
        assert_eq!(s.total_duration, 32.0);
        let c = Action::derive(1, 3, &m, &vocab).unwrap();
        assert!(Summary::new(vec![a, c], &m, PaddingConfig::default(), SummarySource::Candidate)
            .is_err());
    }

    #[test]
    fn attack_direction_switches_at_halftime() {
        let d = AttackDirections {
            team0_attacks_right_first_half: true,
            second_half_start: Some(2700.0),
        };
        assert!(d.attacks_right(0, 10.0));
        assert!(!d.attacks_right(1, 10.0));
        assert!(!d.attacks_right(0, 2800.0));
        assert!(d.attacks_right(1, 2800.0));
    }
}
