//! Seeded generator of matches, ground-truth summaries and procedural audio.
//!
//! A match is a background Markov walk of low-stakes events (passes, tackles,
//! interceptions, throw-ins, clearances) with action patterns planted between
//! background stretches. Pattern types that carry a summary category (shots,
//! saves, fouls, corners, ...) never occur in the background, so every
//! planted pattern is recognisable while the background carries no decoys.
//! Patterns are perturbed by random insertions and adjacent swaps. A budget
//! is sampled per match and filled with the most important planted actions;
//! those become the ground-truth summary.
//!
//! Audio is white noise whose amplitude rises by `1 + gain` in the two
//! seconds after each summary event. A fraction of those bursts is dropped
//! and spurious bursts follow some other events.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AudioTrack, SampleSource};
use crate::io::{ArtifactMeta, Dataset};
use crate::model::{
    action_duration, Action, AttackDirections, AudioRef, Event, EventType, Match, PaddingConfig,
    Point, Summary, SummaryActionType, SummarySource, SyntheticAudioSpec, Vocabulary,
};
use crate::rng::{self, derive_seed};

/// Action families, used for template choice and summary importance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Goal,
    Save,
    Shot,
    Corner,
    FreeKick,
    Foul,
    Var,
}

impl Family {
    /// Base importance when filling a summary budget. Goals are always
    /// considered first and do not use this value.
    pub fn importance(self) -> f64 {
        match self {
            Family::Goal => 1.0,
            Family::Save => 0.8,
            Family::Var => 0.75,
            Family::Shot => 0.6,
            Family::Foul => 0.45,
            Family::FreeKick => 0.4,
            Family::Corner => 0.35,
        }
    }
}

const PERIOD_IMPORTANCE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub family: Family,
    pub events: Vec<String>,
    /// Relative frequency among non-goal templates (goal templates are drawn
    /// uniformly).
    pub weight: f64,
}

fn t(family: Family, weight: f64, events: &[&str]) -> Template {
    Template {
        family,
        events: events.iter().map(|s| s.to_string()).collect(),
        weight,
    }
}

pub fn default_templates() -> Vec<Template> {
    use Family::*;
    vec![
        t(Goal, 1.0, &["pass", "pass", "pass", "pass", "pass", "goal-shot"]),
        t(Goal, 1.0, &["interception", "pass", "pass", "pass", "goal-shot"]),
        t(Goal, 1.0, &["pass", "pass", "tackle", "pass", "pass", "pass", "goal-shot"]),
        t(Goal, 1.0, &["out", "corner-shot", "pass", "pass", "goal-shot"]),
        t(Goal, 1.0, &["pass", "foul", "free-kick", "pass", "goal-shot"]),
        t(Goal, 1.0, &["pass", "pass", "pass", "pass", "pass", "pass", "pass", "goal-shot"]),
        t(Save, 1.0, &["pass", "pass", "pass", "shot", "save", "clearance"]),
        t(Save, 1.0, &["interception", "pass", "pass", "shot", "save", "corner-shot", "clearance"]),
        t(Save, 1.0, &["pass", "pass", "pass", "pass", "shot", "save", "corner-shot", "pass", "clearance"]),
        t(Save, 0.8, &["pass", "foul", "free-kick", "pass", "shot", "save"]),
        t(Shot, 1.2, &["pass", "pass", "pass", "pass", "shot", "out"]),
        t(Shot, 1.2, &["pass", "interception", "pass", "pass", "shot", "clearance"]),
        t(Shot, 1.0, &["tackle", "pass", "pass", "pass", "shot", "out"]),
        t(Corner, 1.0, &["pass", "pass", "out", "corner-shot", "pass", "clearance"]),
        t(Corner, 0.8, &["out", "corner-shot", "clearance", "pass", "pass"]),
        t(FreeKick, 1.0, &["pass", "foul", "free-kick", "pass", "pass", "clearance"]),
        t(FreeKick, 0.8, &["tackle", "foul", "card", "free-kick", "pass", "pass"]),
        t(Foul, 1.0, &["pass", "pass", "tackle", "foul", "card", "other"]),
        t(Foul, 0.8, &["pass", "tackle", "foul", "card", "substitution"]),
        t(Var, 0.5, &["pass", "pass", "shot", "foul", "var", "card"]),
    ]
}

/// Audio parameters of generated tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioGenConfig {
    pub sample_rate: u32,
    pub baseline_amplitude: f64,
    pub gain: f64,
    pub false_burst_rate: f64,
    pub missed_burst_rate: f64,
}

impl Default for AudioGenConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            baseline_amplitude: 0.05,
            gain: 3.0,
            false_burst_rate: 0.03,
            missed_burst_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub matches: usize,
    pub events_per_match: usize,
    /// Planted non-period actions per match.
    pub actions_per_match: usize,
    /// Goals per match are uniform on `0..=max_goals`.
    pub max_goals: usize,
    /// Per-position probability of inserting a background event.
    pub insert_rate: f64,
    /// Per-position probability of swapping with the next event.
    pub swap_rate: f64,
    pub budget_min: f64,
    pub budget_max: f64,
    /// Upper bound of the uniform jitter added to family importance.
    pub importance_jitter: f64,
    /// Minimum background events between planted actions.
    pub min_gap_events: usize,
    pub padding: PaddingConfig,
    pub audio: AudioGenConfig,
    pub templates: Vec<Template>,
    pub start_period: Vec<String>,
    pub end_period: Vec<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            matches: 60,
            events_per_match: 1500,
            actions_per_match: 8,
            max_goals: 3,
            insert_rate: 0.1,
            swap_rate: 0.1,
            budget_min: 110.0,
            budget_max: 270.0,
            importance_jitter: 0.5,
            min_gap_events: 15,
            padding: PaddingConfig::default(),
            audio: AudioGenConfig::default(),
            templates: default_templates(),
            start_period: s(&["start-period", "kick-off", "pass", "pass", "pass"]),
            end_period: s(&["pass", "pass", "pass", "end-period"]),
        }
    }
}

impl GenConfig {
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, r) in [
            ("insert_rate", self.insert_rate),
            ("swap_rate", self.swap_rate),
            ("audio.false_burst_rate", self.audio.false_burst_rate),
            ("audio.missed_burst_rate", self.audio.missed_burst_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        if self.matches == 0 || self.events_per_match == 0 || self.actions_per_match == 0 {
            return bad("matches, events_per_match and actions_per_match must be >= 1".into());
        }
        if !(self.budget_min > 0.0 && self.budget_min <= self.budget_max) {
            return bad(format!(
                "need 0 < budget_min <= budget_max, got {} and {}",
                self.budget_min, self.budget_max
            ));
        }
        if !(self.importance_jitter >= 0.0) {
            return bad("importance_jitter must be non-negative".into());
        }
        if self.audio.sample_rate == 0 || !(self.audio.gain >= 0.0) || !(self.audio.baseline_amplitude > 0.0) {
            return bad("audio needs a positive rate and amplitude and a non-negative gain".into());
        }
        if !self.templates.iter().any(|t| t.family != Family::Goal) {
            return bad("the template library needs at least one non-goal template".into());
        }
        if self.max_goals > 0 && !self.templates.iter().any(|t| t.family == Family::Goal) {
            return bad("max_goals > 0 but the library has no goal template".into());
        }
        let seqs = self
            .templates
            .iter()
            .map(|t| &t.events)
            .chain([&self.start_period, &self.end_period]);
        for s in seqs {
            if s.is_empty() {
                return bad("empty template".into());
            }
            for name in s {
                vocab.parse(name)?;
            }
        }
        for tpl in &self.templates {
            if !(tpl.weight >= 0.0) {
                return bad("template weights must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// One generated match with its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedMatch {
    pub m: Match,
    pub summary: Summary,
    /// Every planted action (periods included), flagged with summary membership.
    pub actions: Vec<Action>,
    pub budget: f64,
}

const BACKGROUND: [&str; 7] = [
    "pass",
    "tackle",
    "interception",
    "out",
    "clearance",
    "other",
    "substitution",
];
const BACKGROUND_WEIGHTS: [f64; 7] = [0.70, 0.07, 0.07, 0.05, 0.05, 0.04, 0.02];
const BUILD_UP: [&str; 4] = ["pass", "tackle", "interception", "other"];
const NOISE_TYPES: [&str; 3] = ["pass", "tackle", "other"];

struct Planted {
    events: Vec<EventType>,
    family: Option<Family>,
}

struct Emitter<'a> {
    vocab: &'a Vocabulary,
    attack: AttackDirections,
    events: Vec<Event>,
    t: f64,
    ball: Point,
    team: u8,
}

fn round_to(x: f64, scale: f64) -> f64 {
    (x * scale).round() / scale
}

fn clamp_field(x: f64) -> f64 {
    round_to(x.clamp(0.0, 100.0), 100.0)
}

/// Seconds between consecutive background events: 1 s plus an exponential
/// with mean 2.8 s.
fn background_gap(rng: &mut impl Rng) -> f64 {
    1.0 + -2.8 * (1.0 - rng.gen::<f64>()).ln()
}

fn qualifier(name: &str, rng: &mut impl Rng) -> u16 {
    match name {
        "pass" => rng.gen_range(0..3),
        "shot" | "goal-shot" => rng.gen_range(3..5),
        "foul" | "card" => rng.gen_range(5..7),
        _ => *[0u16, 7].choose(rng).unwrap(),
    }
}

impl<'a> Emitter<'a> {
    fn push(&mut self, kind: EventType, team: u8, start: Point, end: Point, outcome: bool, rng: &mut impl Rng) {
        let name = self.vocab.name(kind).to_string();
        self.events.push(Event {
            index: self.events.len(),
            t: round_to(self.t, 1000.0),
            kind,
            team,
            player: team as u32 * 100 + rng.gen_range(1..=11),
            start: Point::new(clamp_field(start.x), clamp_field(start.y)),
            end: Point::new(clamp_field(end.x), clamp_field(end.y)),
            outcome,
            qualifier: qualifier(&name, rng),
        });
        self.ball = Point::new(end.x.clamp(0.0, 100.0), end.y.clamp(0.0, 100.0));
    }

    fn background(&mut self, count: usize, after_goal: bool, rng: &mut impl Rng) {
        let dist = WeightedIndex::new(BACKGROUND_WEIGHTS).unwrap();
        let mut prev = "";
        for i in 0..count {
            self.t += if i == 0 && after_goal {
                rng.gen_range(30.0..60.0)
            } else {
                background_gap(rng)
            };
            let name = if i == 0 && after_goal {
                self.ball = Point::new(50.0, 50.0);
                "kick-off"
            } else if prev == "out" {
                "pass"
            } else {
                let mut n = BACKGROUND[dist.sample(rng)];
                while n == "substitution" && prev == "substitution" {
                    n = "pass";
                }
                n
            };
            self.walk(name, rng);
            prev = name;
        }
    }

    /// Emits one event of the background process: the ball drifts towards
    /// midfield and possession changes on lost duels and failed passes.
    fn walk(&mut self, name: &str, rng: &mut impl Rng) {
        let start = self.ball;
        let pull = (50.0 - start.x) * 0.15;
        let end = Point::new(
            start.x + pull + rng.gen_range(-18.0..18.0),
            start.y + (50.0 - start.y) * 0.1 + rng.gen_range(-18.0..18.0),
        );
        let kind = self.vocab.parse(name).unwrap();
        let outcome = match name {
            "pass" | "kick-off" => rng.gen_bool(0.85),
            _ => rng.gen_bool(0.5),
        };
        self.push(kind, self.team, start, end, outcome, rng);
        if matches!(name, "tackle" | "interception" | "clearance" | "out") && rng.gen_bool(0.6) {
            self.team ^= 1;
        }
        if name == "pass" && !outcome {
            self.team ^= 1;
        }
    }

    /// Emits a planted pattern; returns its inclusive event range.
    fn action(&mut self, kinds: &[EventType], rng: &mut impl Rng) -> (usize, usize) {
        let first = self.events.len();
        let att = self.team;
        let def = att ^ 1;
        let n = kinds.len();
        let mut corner_side = if rng.gen_bool(0.5) { 0.0 } else { 100.0 };
        // Build-up play looks like ordinary play; only the decisive part of
        // the pattern has its own tempo and geometry.
        let build_up = kinds
            .iter()
            .take_while(|&&k| BUILD_UP.contains(&self.vocab.name(k)))
            .count();
        for &k in &kinds[..build_up] {
            self.t += background_gap(rng);
            let name = self.vocab.name(k).to_string();
            self.walk(&name, rng);
            self.team = att;
        }
        for (j, &k) in kinds.iter().enumerate().skip(build_up) {
            self.t += rng.gen_range(1.5..3.5);
            let right = self.attack.attacks_right(att, self.t);
            // Coordinates in the attacking frame (goal at x = 100), mirrored below.
            let p = if n > 1 { j as f64 / (n - 1) as f64 } else { 1.0 };
            let name = self.vocab.name(k).to_string();
            let base_x = 45.0 + 42.0 * p + rng.gen_range(-4.0..4.0);
            let base_y = 50.0 + (1.0 - p) * rng.gen_range(-25.0..25.0);
            let (team, s, e, outcome) = match name.as_str() {
                "shot" | "goal-shot" => {
                    let s = Point::new(rng.gen_range(82.0..94.0), rng.gen_range(30.0..70.0));
                    let e = Point::new(100.0, rng.gen_range(45.0..55.0));
                    (att, s, e, name == "goal-shot")
                }
                "save" => {
                    let s = Point::new(98.0, rng.gen_range(45.0..55.0));
                    (def, s, s, true)
                }
                "corner-shot" => {
                    corner_side = if rng.gen_bool(0.5) { 0.0 } else { 100.0 };
                    let s = Point::new(100.0, corner_side);
                    (att, s, Point::new(rng.gen_range(88.0..95.0), rng.gen_range(40.0..60.0)), rng.gen_bool(0.5))
                }
                "out" => {
                    let s = Point::new(rng.gen_range(80.0..98.0), rng.gen_range(20.0..80.0));
                    (att, s, Point::new(100.0, corner_side), false)
                }
                "clearance" => {
                    let s = Point::new(rng.gen_range(85.0..96.0), rng.gen_range(30.0..70.0));
                    (def, s, Point::new(rng.gen_range(45.0..65.0), rng.gen_range(0.0..100.0)), true)
                }
                "interception" | "tackle" if j > 0 => {
                    let s = Point::new(base_x, base_y);
                    (def, s, s, rng.gen_bool(0.5))
                }
                "start-period" | "kick-off" => {
                    let c = Point::new(50.0, 50.0);
                    (att, c, c, true)
                }
                _ => {
                    let s = Point::new(base_x, base_y);
                    let e = Point::new(base_x + rng.gen_range(2.0..10.0), base_y + rng.gen_range(-8.0..8.0));
                    (att, s, e, rng.gen_bool(0.95))
                }
            };
            let mirror = |q: Point| if right { q } else { Point::new(100.0 - q.x, 100.0 - q.y) };
            self.push(k, team, mirror(s), mirror(e), outcome, rng);
        }
        (first, self.events.len() - 1)
    }
}

/// Applies per-position insertions and adjacent swaps. The last event keeps
/// its place so patterns ending in a shot or goal stay anchored.
pub fn perturb(kinds: &[EventType], insert_rate: f64, swap_rate: f64, noise: &[EventType], rng: &mut impl Rng) -> Vec<EventType> {
    let n = kinds.len();
    let mut body: Vec<EventType> = kinds[..n - 1].to_vec();
    let mut j = 0;
    while j + 1 < body.len() {
        if rng.gen::<f64>() < swap_rate {
            body.swap(j, j + 1);
            j += 2;
        } else {
            j += 1;
        }
    }
    let mut out = Vec::with_capacity(n + 2);
    for (j, &k) in body.iter().chain(std::iter::once(&kinds[n - 1])).enumerate() {
        if j > 0 && rng.gen::<f64>() < insert_rate {
            out.push(*noise.choose(rng).unwrap());
        }
        out.push(k);
    }
    out
}

/// Splits `total` extra items over `slots` buckets, uniformly at random.
fn spread(total: usize, slots: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = vec![0; slots];
    for _ in 0..total {
        out[rng.gen_range(0..slots)] += 1;
    }
    out
}

pub fn generate_match(cfg: &GenConfig, vocab: &Vocabulary, seed: u64, id: &str) -> Result<GeneratedMatch> {
    let mut rng = rng::stream(seed, &["match", id]);
    let parse = |v: &[String]| -> Result<Vec<EventType>> { v.iter().map(|s| vocab.parse(s)).collect() };
    let noise: Vec<EventType> = NOISE_TYPES.iter().map(|s| vocab.parse(s)).collect::<Result<_>>()?;

    let goals: Vec<&Template> = cfg.templates.iter().filter(|t| t.family == Family::Goal).collect();
    let others: Vec<&Template> = cfg.templates.iter().filter(|t| t.family != Family::Goal).collect();
    let weights = WeightedIndex::new(others.iter().map(|t| t.weight))
        .map_err(|e| Error::Config(format!("template weights: {e}")))?;
    let n_goals = if goals.is_empty() {
        0
    } else {
        rng.gen_range(0..=cfg.max_goals).min(cfg.actions_per_match)
    };
    let mut chosen: Vec<&Template> = (0..n_goals).map(|_| *goals.choose(&mut rng).unwrap()).collect();
    chosen.extend((n_goals..cfg.actions_per_match).map(|_| others[weights.sample(&mut rng)]));
    chosen.shuffle(&mut rng);

    let mut planted: Vec<Planted> = Vec::with_capacity(chosen.len());
    for tpl in &chosen {
        let kinds = parse(&tpl.events)?;
        planted.push(Planted {
            events: perturb(&kinds, cfg.insert_rate, cfg.swap_rate, &noise, &mut rng),
            family: Some(tpl.family),
        });
    }
    let start_p = parse(&cfg.start_period)?;
    let end_p = parse(&cfg.end_period)?;

    let target = (cfg.events_per_match as f64 * rng.gen_range(0.9..1.1)).round() as usize;
    let planted_events: usize =
        planted.iter().map(|p| p.events.len()).sum::<usize>() + 2 * (start_p.len() + end_p.len());
    let halves = [planted.len() / 2, planted.len() - planted.len() / 2];
    let gaps_total = halves.iter().map(|h| h + 1).sum::<usize>();
    let min_bg = gaps_total * cfg.min_gap_events;
    if target < planted_events + min_bg {
        return Err(Error::Generator(format!(
            "{target} events cannot hold {planted_events} planted events with {} background gaps of {}",
            gaps_total, cfg.min_gap_events
        )));
    }
    let extra = spread(target - planted_events - min_bg, gaps_total, &mut rng);

    let mut em = Emitter {
        vocab,
        attack: AttackDirections {
            team0_attacks_right_first_half: rng.gen_bool(0.5),
            second_half_start: None,
        },
        events: Vec::with_capacity(target),
        t: rng.gen_range(5.0..30.0),
        ball: Point::new(50.0, 50.0),
        team: rng.gen_range(0..2),
    };
    let mut spans: Vec<((usize, usize), Option<Family>)> = Vec::new();
    let mut queue = planted.into_iter();
    let mut gap = 0;
    for (half, &count) in halves.iter().enumerate() {
        if half == 1 {
            em.t += rng.gen_range(100.0..140.0);
            em.attack.second_half_start = Some(round_to(em.t + 1.5, 1000.0));
            em.team = rng.gen_range(0..2);
        }
        em.ball = Point::new(50.0, 50.0);
        // The first event of the half lands exactly on the recorded half start.
        let first = em.events.len();
        let span = em.action(&start_p, &mut rng);
        if half == 1 {
            let shift = em.attack.second_half_start.unwrap() - em.events[first].t;
            for e in &mut em.events[first..] {
                e.t = round_to(e.t + shift, 1000.0);
            }
            em.t = em.events.last().unwrap().t;
        }
        spans.push((span, None));
        let mut after_goal = false;
        for _ in 0..count {
            em.background(cfg.min_gap_events + extra[gap], after_goal, &mut rng);
            gap += 1;
            let p = queue.next().unwrap();
            let span = em.action(&p.events, &mut rng);
            after_goal = p.family == Some(Family::Goal);
            spans.push((span, p.family));
        }
        em.background(cfg.min_gap_events + extra[gap], after_goal, &mut rng);
        gap += 1;
        let span = em.action(&end_p, &mut rng);
        spans.push((span, None));
    }

    let m = Match {
        id: id.to_string(),
        events: em.events,
        audio: Some(AudioRef::Synthetic(SyntheticAudioSpec {
            seed: derive_seed(seed, &["audio", id]),
            sample_rate: cfg.audio.sample_rate,
            baseline_amplitude: cfg.audio.baseline_amplitude,
            gain: cfg.audio.gain,
            false_burst_rate: cfg.audio.false_burst_rate,
            missed_burst_rate: cfg.audio.missed_burst_rate,
        })),
        attack: em.attack,
    };

    let mut actions: Vec<Action> = spans
        .iter()
        .map(|&((s, e), _)| Action::derive(s, e, &m, vocab))
        .collect::<Result<_>>()?;
    let budget = round_to(rng.gen_range(cfg.budget_min..=cfg.budget_max), 1000.0);
    let durations: Vec<f64> = actions.iter().map(|a| action_duration(a, &m, cfg.padding)).collect();
    let available: f64 = durations.iter().sum();
    if available < budget {
        return Err(Error::Generator(format!(
            "match {id}: planted actions last {available:.1} s, below the {budget:.1} s budget"
        )));
    }
    let mut order: Vec<(usize, f64)> = spans
        .iter()
        .enumerate()
        .map(|(i, (_, fam))| {
            let jitter = rng.gen::<f64>() * cfg.importance_jitter;
            let key = match fam {
                Some(Family::Goal) => f64::INFINITY,
                Some(f) => f.importance() + jitter,
                None => PERIOD_IMPORTANCE + jitter,
            };
            (i, key)
        })
        .collect();
    // Stable sort keeps goals in chronological order.
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut keep = BTreeSet::new();
    let mut total = 0.0;
    for (i, _) in order {
        if total + durations[i] <= budget {
            total += durations[i];
            keep.insert(i);
        }
    }
    for (i, a) in actions.iter_mut().enumerate() {
        a.in_summary = Some(keep.contains(&i));
    }
    let gt: Vec<Action> = actions
        .iter()
        .filter(|a| a.in_summary == Some(true))
        .map(|a| Action { in_summary: None, ..a.clone() })
        .collect();
    let summary = Summary::new(gt, &m, cfg.padding, SummarySource::GroundTruth)?;
    Ok(GeneratedMatch {
        m,
        summary,
        actions,
        budget,
    })
}

pub fn match_id(i: usize) -> String {
    format!("m{i:03}")
}

/// Generates `cfg.matches` matches in parallel; the result does not depend on
/// the thread count.
pub fn generate_dataset(cfg: &GenConfig, seed: u64, meta: ArtifactMeta) -> Result<Dataset> {
    let vocab = Vocabulary::soccer_default();
    cfg.validate(&vocab)?;
    let gen: Vec<GeneratedMatch> = (0..cfg.matches)
        .into_par_iter()
        .map(|i| generate_match(cfg, &vocab, seed, &match_id(i)))
        .collect::<Result<_>>()?;
    let mut ds = Dataset {
        vocabulary: vocab,
        padding: cfg.padding,
        matches: Vec::with_capacity(gen.len()),
        summaries: Vec::with_capacity(gen.len()),
        match_actions: Vec::with_capacity(gen.len()),
        meta,
    };
    for g in gen {
        ds.matches.push(g.m);
        ds.summaries.push(g.summary);
        ds.match_actions.push(Some(g.actions));
    }
    Ok(ds)
}

const BLOCK: usize = 4096;

/// Lazily rendered audio of a generated match. Samples are produced per
/// fixed-size block from a stream keyed by the block index, so any range can
/// be read without rendering the whole track.
#[derive(Clone, Debug)]
pub struct SyntheticAudio {
    spec: SyntheticAudioSpec,
    len: usize,
    /// Sorted, disjoint half-open sample ranges with raised amplitude.
    bursts: Vec<(usize, usize)>,
}

impl SyntheticAudio {
    pub fn new(spec: &SyntheticAudioSpec, m: &Match, summary: &Summary) -> Result<Self> {
        if spec.sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        let rate = spec.sample_rate as f64;
        let mut in_summary = vec![false; m.len()];
        for a in &summary.actions {
            m.check_range(a.start, a.end)?;
            in_summary[a.start..=a.end].iter_mut().for_each(|f| *f = true);
        }
        let mut rng = rng::stream(spec.seed, &["bursts"]);
        let mut raw = Vec::new();
        for (e, &pos) in m.events.iter().zip(&in_summary) {
            let u: f64 = rng.gen();
            let burst = if pos {
                u >= spec.missed_burst_rate
            } else {
                u < spec.false_burst_rate
            };
            if burst {
                let s = (e.t * rate).round() as usize;
                raw.push((s, s + (2.0 * rate).round() as usize));
            }
        }
        raw.sort_unstable();
        let mut bursts: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
        for (s, e) in raw {
            match bursts.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => bursts.push((s, e)),
            }
        }
        let len = ((m.duration() + 3.0) * rate).ceil() as usize;
        Ok(Self {
            spec: spec.clone(),
            len,
            bursts,
        })
    }

    pub fn bursts(&self) -> &[(usize, usize)] {
        &self.bursts
    }

    fn in_burst(&self, j: usize) -> bool {
        let k = self.bursts.partition_point(|&(s, _)| s <= j);
        k > 0 && j < self.bursts[k - 1].1
    }

    fn block(&self, b: usize) -> Vec<f64> {
        let mut r = rng::stream(self.spec.seed, &["noise", &b.to_string()]);
        (0..BLOCK).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    pub fn render(&self) -> AudioTrack {
        let mut buf = vec![0.0; self.len];
        self.read_into(0, &mut buf);
        AudioTrack {
            samples: buf.into_iter().map(|x| x as f32).collect(),
            sample_rate: self.spec.sample_rate,
        }
    }
}

impl SampleSource for SyntheticAudio {
    fn sample_rate(&self) -> u32 {
        self.spec.sample_rate
    }

    fn len_samples(&self) -> usize {
        self.len
    }

    fn read_into(&self, start: usize, out: &mut [f64]) {
        let end = (start + out.len()).min(self.len);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut j = start;
        while j < end {
            let b = j / BLOCK;
            let noise = self.block(b);
            let stop = end.min((b + 1) * BLOCK);
            for k in j..stop {
                let amp = if self.in_burst(k) {
                    self.spec.baseline_amplitude * (1.0 + self.spec.gain)
                } else {
                    self.spec.baseline_amplitude
                };
                out[k - start] = amp * noise[k - b * BLOCK];
            }
            j = stop;
        }
    }
}

/// Fully rendered track for export.
pub fn generate_audio_track(m: &Match, summary: &Summary, spec: &SyntheticAudioSpec) -> Result<AudioTrack> {
    Ok(SyntheticAudio::new(spec, m, summary)?.render())
}

/// Summary types of the planted patterns, for reporting.
pub fn family_of(kind: SummaryActionType) -> Option<Family> {
    Some(match kind {
        SummaryActionType::Goal => Family::Goal,
        SummaryActionType::Save => Family::Save,
        SummaryActionType::Shot => Family::Shot,
        SummaryActionType::Corner => Family::Corner,
        SummaryActionType::FreeKick => Family::FreeKick,
        SummaryActionType::Foul => Family::Foul,
        SummaryActionType::Var => Family::Var,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_match;
    use crate::proposals::ActionVocabulary;

    fn small() -> GenConfig {
        GenConfig {
            matches: 4,
            events_per_match: 500,
            actions_per_match: 12,
            ..GenConfig::default()
        }
    }

    fn gen(cfg: &GenConfig, seed: u64, i: usize) -> GeneratedMatch {
        generate_match(cfg, &Vocabulary::soccer_default(), seed, &match_id(i)).unwrap()
    }

    #[test]
    fn generated_matches_validate() {
        let vocab = Vocabulary::soccer_default();
        for i in 0..5 {
            let g = gen(&GenConfig::default(), 3, i);
            assert!(validate_match(&g.m, &vocab).is_ok(), "{:?}", validate_match(&g.m, &vocab));
            assert!(g.summary.total_duration <= g.budget + 1e-9);
            assert!(g.summary.total_duration > 0.0);
            for a in &g.summary.actions {
                assert!(g.m.check_range(a.start, a.end).is_ok());
                assert!(g.actions.iter().any(|p| p.start == a.start && p.end == a.end));
            }
            let second = g.m.attack.second_half_start.unwrap();
            assert!(g.m.events.iter().any(|e| e.t == second && vocab.name(e.kind) == "start-period"));
        }
    }

    #[test]
    fn same_seed_same_match() {
        assert_eq!(gen(&small(), 9, 1), gen(&small(), 9, 1));
        assert_ne!(gen(&small(), 9, 1).m.events, gen(&small(), 10, 1).m.events);
    }

    #[test]
    fn mean_event_count_tracks_config() {
        let cfg = GenConfig::default();
        let mean = (0..50).map(|i| gen(&cfg, 5, i).m.len() as f64).sum::<f64>() / 50.0;
        let target = cfg.events_per_match as f64;
        assert!((mean - target).abs() <= 0.2 * target, "{mean}");
    }

    #[test]
    fn mean_padded_duration_near_thirty_seconds() {
        let cfg = GenConfig::default();
        let (mut sum, mut n) = (0.0, 0);
        for i in 0..10 {
            let g = gen(&cfg, 2, i);
            for a in &g.actions {
                sum += action_duration(a, &g.m, cfg.padding);
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((20.0..40.0).contains(&mean), "{mean}");
    }

    #[test]
    fn goals_are_always_in_the_summary() {
        for i in 0..20 {
            let g = gen(&GenConfig::default(), 11, i);
            for a in &g.actions {
                if a.kind == SummaryActionType::Goal {
                    assert_eq!(a.in_summary, Some(true));
                }
            }
        }
    }

    #[test]
    fn background_carries_no_summary_types() {
        let vocab = Vocabulary::soccer_default();
        let g = gen(&GenConfig::default(), 4, 0);
        let mut planted = vec![false; g.m.len()];
        for a in &g.actions {
            planted[a.start..=a.end].iter_mut().for_each(|p| *p = true);
        }
        for (e, p) in g.m.events.iter().zip(planted) {
            if !p {
                assert!(vocab.summary_type(e.kind).is_none(), "{}", vocab.name(e.kind));
            }
        }
    }

    #[test]
    fn unfillable_budget_is_an_error() {
        let cfg = GenConfig {
            actions_per_match: 1,
            max_goals: 0,
            budget_min: 5000.0,
            budget_max: 5000.0,
            ..GenConfig::default()
        };
        let err = generate_match(&cfg, &Vocabulary::soccer_default(), 1, "x").unwrap_err();
        assert!(matches!(err, Error::Generator(_)));
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let cfg = GenConfig {
            insert_rate: 1.5,
            ..GenConfig::default()
        };
        assert!(cfg.validate(&Vocabulary::soccer_default()).is_err());
    }

    #[test]
    fn perturb_keeps_last_event_and_rates_zero_is_identity() {
        let v: Vec<EventType> = (0..6).map(EventType).collect();
        let noise = [EventType(9)];
        let mut r = rng::stream(1, &["p"]);
        assert_eq!(perturb(&v, 0.0, 0.0, &noise, &mut r), v);
        for _ in 0..200 {
            let p = perturb(&v, 0.3, 0.3, &noise, &mut r);
            assert_eq!(p.last(), v.last());
            let mut core: Vec<EventType> = p.iter().copied().filter(|k| k.0 != 9).collect();
            core.sort();
            assert_eq!(core, v);
        }
    }

    #[test]
    fn vocabulary_recovers_noise_free_summary_events() {
        let cfg = GenConfig {
            insert_rate: 0.0,
            swap_rate: 0.0,
            ..GenConfig::default()
        };
        let train: Vec<GeneratedMatch> = (0..40).map(|i| gen(&cfg, 7, i)).collect();
        let vocab = ActionVocabulary::build(train.iter().map(|g| (&g.m, &g.summary)));
        let (mut hit, mut total) = (0, 0);
        for i in 40..50 {
            let g = gen(&cfg, 7, i);
            let labels = vocab.label_events(&g.m);
            for a in &g.summary.actions {
                for idx in a.start..=a.end {
                    total += 1;
                    hit += labels[idx] as usize;
                }
            }
        }
        let rate = hit as f64 / total as f64;
        assert!(rate >= 0.95, "{rate}");
    }

    fn window_energy(src: &dyn SampleSource, t: f64) -> f64 {
        let rate = src.sample_rate() as f64;
        let mut buf = vec![0.0; (2.0 * rate) as usize];
        src.read_into((t * rate).round() as usize, &mut buf);
        buf.iter().map(|x| x * x).sum::<f64>() / buf.len() as f64
    }

    fn energies(g: &GeneratedMatch, gain: f64) -> (f64, f64) {
        let spec = SyntheticAudioSpec {
            seed: 4,
            sample_rate: 8000,
            baseline_amplitude: 0.05,
            gain,
            false_burst_rate: 0.0,
            missed_burst_rate: 0.0,
        };
        let audio = SyntheticAudio::new(&spec, &g.m, &g.summary).unwrap();
        let mut inside = vec![false; g.m.len()];
        for a in &g.summary.actions {
            inside[a.start..=a.end].iter_mut().for_each(|f| *f = true);
        }
        let (mut pos, mut np, mut neg, mut nn) = (0.0, 0, 0.0, 0);
        for (e, &f) in g.m.events.iter().zip(&inside) {
            let en = window_energy(&audio, e.t);
            if f {
                pos += en;
                np += 1;
            } else if (e.index % 10) == 0 {
                neg += en;
                nn += 1;
            }
        }
        (pos / np as f64, neg / nn as f64)
    }

    #[test]
    fn audio_bursts_follow_summary_events() {
        let g = gen(&small(), 1, 0);
        let (pos, neg) = energies(&g, 10.0);
        assert!(pos > 5.0 * neg, "{pos} vs {neg}");
        let (pos, neg) = energies(&g, 0.0);
        assert!((pos / neg - 1.0).abs() < 0.1, "{pos} vs {neg}");
    }

    #[test]
    fn rendered_track_matches_lazy_reads_and_covers_events() {
        let g = gen(&small(), 2, 0);
        let Some(AudioRef::Synthetic(spec)) = &g.m.audio else { panic!() };
        let lazy = SyntheticAudio::new(spec, &g.m, &g.summary).unwrap();
        let track = lazy.render();
        assert!(track.duration() >= g.m.duration() + 2.0);
        let mut buf = vec![0.0; 10_000];
        lazy.read_into(12_345, &mut buf);
        for (k, v) in buf.iter().enumerate() {
            assert_eq!(*v as f32, track.samples[12_345 + k]);
        }
    }

    #[test]
    fn dataset_generation_is_thread_independent() {
        let cfg = small();
        let a = generate_dataset(&cfg, 3, ArtifactMeta::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| generate_dataset(&cfg, 3, ArtifactMeta::default()).unwrap());
        assert_eq!(a, b);
    }
}
