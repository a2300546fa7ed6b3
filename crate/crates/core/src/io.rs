//! Dataset persistence.
//!
//! A dataset directory holds:
//!
//! * `dataset.json`: manifest with the vocabulary, padding, per-match metadata and the
//!   config hash/seed of the run that produced it;
//! * `events.jsonl`: one event per line:
//!   `{match_id, index, t, type, team, player, sx, sy, ex, ey, outcome, qualifier}`;
//! * `summaries/<match_id>.json`: ground-truth summary, a JSON array of
//!   `{start_index, end_index, type}`;
//! * `actions/<match_id>.json`: optional whole-match action annotations, the
//!   same records plus `in_summary`.
//!
//! Floats are written with exactly six decimals.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Action, AttackDirections, AudioRef, Event, Match, PaddingConfig, Point, Summary,
    SummaryActionType, SummarySource, Vocabulary,
};

pub const DATASET_FORMAT: &str = "soccer-summary-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Provenance stamped on every artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    pub fn csv_comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    pub fn parse_csv_comment(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?;
        let mut hash = None;
        let mut seed = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("config_hash", v)) => hash = Some(v.to_string()),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
        Some(Self {
            config_hash: hash?,
            seed: seed?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub vocabulary: Vocabulary,
    pub padding: PaddingConfig,
    pub matches: Vec<Match>,
    /// Ground-truth summaries aligned with `matches`.
    pub summaries: Vec<Summary>,
    /// Whole-match action annotations aligned with `matches`, when known.
    pub match_actions: Vec<Option<Vec<Action>>>,
    pub meta: ArtifactMeta,
}

impl Dataset {
    pub fn match_index(&self, id: &str) -> Option<usize> {
        self.matches.iter().position(|m| m.id == id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    meta: ArtifactMeta,
    vocabulary: Vocabulary,
    padding: PaddingConfig,
    matches: Vec<ManifestMatch>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestMatch {
    id: String,
    #[serde(default)]
    audio: Option<AudioRef>,
    attack: AttackDirections,
    #[serde(default)]
    has_actions: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    match_id: String,
    index: usize,
    t: f64,
    #[serde(rename = "type")]
    kind: String,
    team: u8,
    player: u32,
    sx: f64,
    sy: f64,
    ex: f64,
    ey: f64,
    outcome: u8,
    qualifier: u16,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRecord {
    start_index: usize,
    end_index: usize,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_summary: Option<bool>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn json_err(path: &Path, line: usize, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line.max(e.line()),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Formats one event line of `events.jsonl`.
pub fn format_event_line(match_id: &str, e: &Event, vocab: &Vocabulary) -> String {
    let mut s = String::with_capacity(200);
    let _ = write!(
        s,
        "{{\"match_id\":{},\"index\":{},\"t\":{:.6},\"type\":{},\"team\":{},\"player\":{},\
         \"sx\":{:.6},\"sy\":{:.6},\"ex\":{:.6},\"ey\":{:.6},\"outcome\":{},\"qualifier\":{}}}",
        serde_json::to_string(match_id).expect("string serializes"),
        e.index,
        e.t,
        serde_json::to_string(vocab.name(e.kind)).expect("string serializes"),
        e.team,
        e.player,
        e.start.x,
        e.start.y,
        e.end.x,
        e.end.y,
        u8::from(e.outcome),
        e.qualifier
    );
    s
}

fn action_records(actions: &[Action], with_membership: bool) -> Vec<ActionRecord> {
    actions
        .iter()
        .map(|a| ActionRecord {
            start_index: a.start,
            end_index: a.end,
            kind: a.kind.as_str().to_string(),
            in_summary: if with_membership { a.in_summary } else { None },
        })
        .collect()
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    for m in &ds.matches {
        if !valid_id(&m.id) {
            return Err(Error::Data(format!(
                "match id `{}` must be non-empty ASCII alphanumerics, '-' or '_'",
                m.id
            )));
        }
    }
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        meta: ds.meta.clone(),
        vocabulary: ds.vocabulary.clone(),
        padding: ds.padding,
        matches: ds
            .matches
            .iter()
            .zip(&ds.match_actions)
            .map(|(m, a)| ManifestMatch {
                id: m.id.clone(),
                audio: m.audio.clone(),
                attack: m.attack,
                has_actions: a.is_some(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("dataset.json"), &(text + "\n"))?;

    let mut events = String::new();
    for m in &ds.matches {
        for e in &m.events {
            events.push_str(&format_event_line(&m.id, e, &ds.vocabulary));
            events.push('\n');
        }
    }
    write_file(&dir.join("events.jsonl"), &events)?;

    for (i, m) in ds.matches.iter().enumerate() {
        let recs = action_records(&ds.summaries[i].actions, false);
        let text = serde_json::to_string_pretty(&recs).expect("records serialize");
        write_file(&summary_path(dir, &m.id), &(text + "\n"))?;
        if let Some(actions) = &ds.match_actions[i] {
            let recs = action_records(actions, true);
            let text = serde_json::to_string_pretty(&recs).expect("records serialize");
            write_file(&actions_path(dir, &m.id), &(text + "\n"))?;
        }
    }
    Ok(())
}

pub fn summary_path(dir: &Path, match_id: &str) -> PathBuf {
    dir.join("summaries").join(format!("{match_id}.json"))
}

pub fn actions_path(dir: &Path, match_id: &str) -> PathBuf {
    dir.join("actions").join(format!("{match_id}.json"))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_actions(path: &Path, m: &Match) -> Result<Vec<Action>> {
    let text = read_to_string(path)?;
    let recs: Vec<ActionRecord> = serde_json::from_str(&text).map_err(|e| json_err(path, 0, e))?;
    recs.into_iter()
        .map(|r| {
            m.check_range(r.start_index, r.end_index)?;
            let kind = SummaryActionType::parse(&r.kind).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                column: 0,
                message: format!("unknown action type `{}`", r.kind),
            })?;
            Ok(Action {
                start: r.start_index,
                end: r.end_index,
                kind,
                in_summary: r.in_summary,
            })
        })
        .collect()
}

pub fn read_manifest_meta(dir: &Path) -> Result<ArtifactMeta> {
    let path = dir.join("dataset.json");
    let text = read_to_string(&path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| json_err(&path, 0, e))?;
    Ok(manifest.meta)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("dataset.json");
    let text = read_to_string(&manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| json_err(&manifest_path, 0, e))?;
    if manifest.format != DATASET_FORMAT || manifest.version != DATASET_VERSION {
        return Err(Error::Parse {
            path: manifest_path,
            line: 1,
            column: 1,
            message: format!(
                "unsupported dataset format {} v{}",
                manifest.format, manifest.version
            ),
        });
    }
    let vocab = manifest.vocabulary;
    let slot: HashMap<&str, usize> = manifest
        .matches
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); manifest.matches.len()];

    let events_path = dir.join("events.jsonl");
    let file = fs::File::open(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let mut line_no = 0;
    for line in BufReader::new(file).lines() {
        line_no += 1;
        let line = line.map_err(|e| Error::io(&events_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventLine =
            serde_json::from_str(&line).map_err(|e| json_err(&events_path, line_no, e))?;
        let at = |message: String| Error::Parse {
            path: events_path.clone(),
            line: line_no,
            column: 1,
            message,
        };
        let &i = slot
            .get(rec.match_id.as_str())
            .ok_or_else(|| at(format!("match `{}` not declared in manifest", rec.match_id)))?;
        let kind = vocab.parse(&rec.kind)?;
        if rec.index != events[i].len() {
            return Err(at(format!(
                "match `{}`: expected event index {}, found {}",
                rec.match_id,
                events[i].len(),
                rec.index
            )));
        }
        if rec.outcome > 1 {
            return Err(at(format!("outcome must be 0 or 1, found {}", rec.outcome)));
        }
        events[i].push(Event {
            index: rec.index,
            t: rec.t,
            kind,
            team: rec.team,
            player: rec.player,
            start: Point::new(rec.sx, rec.sy),
            end: Point::new(rec.ex, rec.ey),
            outcome: rec.outcome == 1,
            qualifier: rec.qualifier,
        });
    }

    let mut matches = Vec::with_capacity(manifest.matches.len());
    let mut summaries = Vec::with_capacity(manifest.matches.len());
    let mut match_actions = Vec::with_capacity(manifest.matches.len());
    for (mm, evs) in manifest.matches.into_iter().zip(events) {
        if evs.is_empty() {
            return Err(Error::Parse {
                path: events_path.clone(),
                line: line_no,
                column: 0,
                message: format!("match `{}`: F ≥ 1 violated (no events)", mm.id),
            });
        }
        let m = Match {
            id: mm.id,
            events: evs,
            audio: mm.audio,
            attack: mm.attack,
        };
        let gt = read_actions(&summary_path(dir, &m.id), &m)?;
        summaries.push(Summary::new(
            gt,
            &m,
            manifest.padding,
            SummarySource::GroundTruth,
        )?);
        match_actions.push(if mm.has_actions {
            Some(read_actions(&actions_path(dir, &m.id), &m)?)
        } else {
            None
        });
        matches.push(m);
    }
    Ok(Dataset {
        vocabulary: vocab,
        padding: manifest.padding,
        matches,
        summaries,
        match_actions,
        meta: manifest.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::match_from;

    fn small_dataset() -> Dataset {
        let vocab = Vocabulary::soccer_default();
        let mut matches = Vec::new();
        let mut summaries = Vec::new();
        let mut acts = Vec::new();
        for k in 0..3 {
            let mut m = match_from(
                &["start-period", "pass", "pass", "shot", "save", "out"],
                &[0.0, 1.25, 3.5, 4.123456, 6.0, 9.5],
                &vocab,
            );
            m.id = format!("m{k}");
            m.events[2].start = Point::new(12.345678, 99.999999);
            m.events[3].qualifier = 3 + k as u16;
            m.events[4].outcome = false;
            m.events[5].team = 1;
            let mut a = Action::derive(1, 4, &m, &vocab).unwrap();
            a.in_summary = Some(true);
            let mut b = Action::derive(0, 0, &m, &vocab).unwrap();
            b.in_summary = Some(false);
            let gt = Summary::new(
                vec![Action {
                    in_summary: None,
                    ..a.clone()
                }],
                &m,
                PaddingConfig::default(),
                SummarySource::GroundTruth,
            )
            .unwrap();
            summaries.push(gt);
            acts.push(if k == 1 { None } else { Some(vec![b, a]) });
            matches.push(m);
        }
        Dataset {
            vocabulary: vocab,
            padding: PaddingConfig::default(),
            matches,
            summaries,
            match_actions: acts,
            meta: ArtifactMeta {
                config_hash: "abc".into(),
                seed: 7,
            },
        }
    }

    #[test]
    fn round_trip_three_matches() {
        let ds = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn unknown_type_names_token() {
        let ds = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join("events.jsonl");
        let text = fs::read_to_string(&p).unwrap().replacen("\"shot\"", "\"bicycle-kick\"", 1);
        fs::write(&p, text).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Vocabulary { token }) => assert_eq!(token, "bicycle-kick"),
            other => panic!("expected vocabulary error, got {other:?}"),
        }
    }

    #[test]
    fn empty_match_is_parse_error() {
        let ds = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join("events.jsonl");
        let text: String = fs::read_to_string(&p)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("\"m2\""))
            .map(|l| format!("{l}\n"))
            .collect();
        fs::write(&p, text).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("F ≥ 1 violated")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let ds = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join("events.jsonl");
        let mut lines: Vec<String> = fs::read_to_string(&p).unwrap().lines().map(String::from).collect();
        lines[3] = "{\"match_id\": \"m0\", \"index\": 3, oops}".into();
        fs::write(&p, lines.join("\n")).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn six_decimal_floats() {
        let vocab = Vocabulary::soccer_default();
        let m = match_from(&["pass"], &[1.5], &vocab);
        let line = format_event_line("m", &m.events[0], &vocab);
        assert!(line.contains("\"t\":1.500000"), "{line}");
        assert!(line.contains("\"sx\":50.000000"), "{line}");
    }

    #[test]
    fn csv_comment_round_trip() {
        let meta = ArtifactMeta {
            config_hash: "deadbeef".into(),
            seed: 42,
        };
        assert_eq!(ArtifactMeta::parse_csv_comment(meta.csv_comment().trim()), Some(meta));
    }
}
