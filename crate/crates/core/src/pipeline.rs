//! Stage orchestration with on-disk artifacts.
//!
//! Layout under the output directory:
//!
//! * `data/`: dataset (see [`crate::io`]);
//! * `features/encoder.json`: fitted metadata encoder;
//! * `folds/fold-<i>/`: `mil.ckpt`, `vocab.json`, `mil_log.json`,
//!   `scores.json`, `proposals.json`, `hma.ckpt`, `hma_log.json`,
//!   `theta.json` and `candidates/<match>/sample-<k>.json`;
//! * `tables/`: result tables as CSV and aligned text.
//!
//! Every artifact carries the config hash and seed of the run that wrote it;
//! a stage refuses inputs stamped with a different hash.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{
    kfold_split, match_summary_actions, overlap_match, soccer_baseline, spans, Counts, Fold,
    ResultTable, SoccerBaseline,
};
use crate::features::{AudioExtractor, AudioTrack, MetadataEncoder, QualifierCodebook, SampleSource};
use crate::hma::{train_hma, HmaModel, ProposalInput};
use crate::io::{self, ArtifactMeta, Dataset};
use crate::model::{action_duration, Action, AudioRef, Match, SummaryActionType};
use crate::proposals::{
    extract_proposals, sample_training_bags, template_proposals, train_mil, ActionVocabulary,
    MilModel, MilValidation, OVERLAP_RATIO,
};
use crate::ranking::{
    assemble_summary, baseline_ranking, generate_candidates, select_best_candidate,
    BaselineRanking, CandidateSummary,
};
use crate::rng::{self, derive_seed};
use crate::synth::{self, SyntheticAudio};

pub const STAGE1_TABLE: &str = "stage1_proposals";
pub const SUMMARY_TABLE: &str = "summary_actions";
pub const MULTI_TABLE: &str = "multiple_summaries";

pub const MIL_METHOD: &str = "LSTM MIL Pooling";
pub const TEMPLATE_METHOD: &str = "Template Matching";
pub const HMA_METHOD: &str = "Hierarchical Multimodal Attention";
pub const BEST_OF_METHOD: &str = "Best Sampled Summary";
pub const DESCENDING_METHOD: &str = "Score-Descending";
pub const RANDOM_RANKING_METHOD: &str = "Random Ranking";

/// Output directory, resolved configuration and seed of one run.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub out: PathBuf,
    pub cfg: PipelineConfig,
    pub seed: u64,
    pub quiet: bool,
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    meta: ArtifactMeta,
    #[serde(flatten)]
    body: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderArtifact {
    pub codebook: QualifierCodebook,
    pub field: crate::features::FieldConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScoresArtifact {
    fold: usize,
    matches: BTreeMap<String, Vec<f64>>,
}

/// One stage-1 proposal with its stage-2 label and clip duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: SummaryActionType,
    pub label: f64,
    pub duration: f64,
}

impl ProposalRecord {
    pub fn action(&self) -> Action {
        Action {
            start: self.start,
            end: self.end,
            kind: self.kind,
            in_summary: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProposalsArtifact {
    pub fold: usize,
    pub threshold: f64,
    pub matches: BTreeMap<String, Vec<ProposalRecord>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ThetaArtifact {
    fold: usize,
    matches: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateArtifact {
    pub fold: usize,
    pub match_id: String,
    pub candidate: CandidateSummary,
}

/// Evaluation output.
#[derive(Clone, Debug)]
pub struct Report {
    pub stage1: ResultTable,
    pub summary: ResultTable,
    pub multi: ResultTable,
    pub best_sample: Vec<usize>,
}

impl Report {
    pub fn tables(&self) -> [(&'static str, &ResultTable); 3] {
        [
            (STAGE1_TABLE, &self.stage1),
            (SUMMARY_TABLE, &self.summary),
            (MULTI_TABLE, &self.multi),
        ]
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string(value).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            artifact: path.to_path_buf(),
            producer: producer.into(),
        })
    }
}

impl Workspace {
    pub fn new(out: impl Into<PathBuf>, cfg: PipelineConfig, seed: u64) -> Self {
        Self {
            out: out.into(),
            cfg,
            seed,
            quiet: false,
        }
    }

    pub fn meta(&self) -> ArtifactMeta {
        ArtifactMeta {
            config_hash: self.cfg.hash(),
            seed: self.seed,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn encoder_path(&self) -> PathBuf {
        self.out.join("features").join("encoder.json")
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.out.join("folds").join(format!("fold-{fold}"))
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.out.join("tables")
    }

    pub fn candidate_path(&self, fold: usize, match_id: &str, k: usize) -> PathBuf {
        self.fold_dir(fold)
            .join("candidates")
            .join(match_id)
            .join(format!("sample-{k}.json"))
    }

    fn log(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn check_meta(&self, path: &Path, found: &ArtifactMeta) -> Result<()> {
        let want = self.meta();
        if found.config_hash != want.config_hash {
            return Err(Error::MixedConfig {
                path: path.to_path_buf(),
                found: found.config_hash.clone(),
                expected: want.config_hash,
            });
        }
        if found.seed != want.seed {
            return Err(Error::Data(format!(
                "{} was produced with seed {}, this run uses seed {}",
                path.display(),
                found.seed,
                want.seed
            )));
        }
        Ok(())
    }

    fn write_stamped<T: Serialize>(&self, path: &Path, body: T) -> Result<()> {
        write_json(
            path,
            &Stamped {
                meta: self.meta(),
                body,
            },
        )
    }

    fn read_stamped<T: DeserializeOwned>(&self, path: &Path, producer: &str) -> Result<T> {
        require(path, producer)?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Stamped<T> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        self.check_meta(path, &s.meta)?;
        Ok(s.body)
    }

    fn checkpoint_meta(&self, path: &Path, artifact: &serde_json::Value) -> Result<()> {
        let found: ArtifactMeta = serde_json::from_value(artifact.clone())
            .map_err(|e| Error::Checkpoint(format!("{}: bad provenance: {e}", path.display())))?;
        self.check_meta(path, &found)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let dir = self.data_dir();
        require(&dir.join("dataset.json"), "gen-data")?;
        let ds = io::read_dataset(&dir)?;
        self.check_meta(&dir.join("dataset.json"), &ds.meta)?;
        Ok(ds)
    }

    pub fn folds(&self, n: usize) -> Result<Vec<Fold>> {
        let all = kfold_split(n, self.cfg.eval.folds, derive_seed(self.seed, &["folds"]))?;
        Ok(all.into_iter().take(self.cfg.eval.run_folds).collect())
    }

    // ---- stages -------------------------------------------------------

    pub fn gen_data(&self) -> Result<Dataset> {
        self.gen_data_with(false)
    }

    /// Generates the dataset; with `render_wav` every procedural track is
    /// rendered to `data/audio/<match>.wav` and referenced from there.
    pub fn gen_data_with(&self, render_wav: bool) -> Result<Dataset> {
        let mut ds = synth::generate_dataset(&self.cfg.synth, self.seed, self.meta())?;
        if render_wav {
            let dir = self.data_dir();
            let refs: Vec<AudioRef> = (0..ds.matches.len())
                .into_par_iter()
                .map(|i| {
                    let rel = format!("audio/{}.wav", ds.matches[i].id);
                    let path = dir.join(&rel);
                    if let Some(parent) = path.parent() {
                        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    let Some(AudioRef::Synthetic(spec)) = &ds.matches[i].audio else {
                        return Err(Error::Data("generated match without procedural audio".into()));
                    };
                    synth::generate_audio_track(&ds.matches[i], &ds.summaries[i], spec)?.write_wav(&path)?;
                    Ok(AudioRef::Wav { path: rel })
                })
                .collect::<Result<_>>()?;
            for (m, r) in ds.matches.iter_mut().zip(refs) {
                m.audio = Some(r);
            }
        }
        io::write_dataset(&ds, &self.data_dir())?;
        self.log(&format!(
            "gen-data: {} matches, {} events -> {}",
            ds.matches.len(),
            ds.matches.iter().map(Match::len).sum::<usize>(),
            self.data_dir().display()
        ));
        Ok(ds)
    }

    /// Fits the qualifier codebook on the event stream. The codebook only
    /// uses qualifier frequencies, no labels.
    pub fn extract_features(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        let codebook = QualifierCodebook::fit(
            ds.matches.iter().flat_map(|m| m.events.iter()),
            self.cfg.features.qualifiers,
        );
        let art = EncoderArtifact {
            codebook,
            field: self.cfg.features.field,
        };
        let enc = MetadataEncoder::new(&ds.vocabulary, art.field, art.codebook.clone());
        self.write_stamped(&self.encoder_path(), art)?;
        self.log(&format!(
            "extract-features: metadata width {}, audio width {}",
            enc.width(),
            crate::features::AUDIO_DIMS
        ));
        Ok(())
    }

    fn load_encoder(&self, ds: &Dataset) -> Result<MetadataEncoder> {
        let art: EncoderArtifact = self.read_stamped(&self.encoder_path(), "extract-features")?;
        Ok(MetadataEncoder::new(&ds.vocabulary, art.field, art.codebook))
    }

    fn metadata_rows(&self, ds: &Dataset, enc: &MetadataEncoder) -> Result<Vec<Vec<Vec<f64>>>> {
        ds.matches.par_iter().map(|m| enc.encode_match(m)).collect()
    }

    pub fn train_proposals(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        let enc = self.load_encoder(&ds)?;
        let rows = self.metadata_rows(&ds, &enc)?;
        for fold in self.folds(ds.matches.len())? {
            let f = fold.index;
            let vocab = ActionVocabulary::build(fold.train.iter().map(|&i| (&ds.matches[i], &ds.summaries[i])));
            let spans_: Vec<Vec<(usize, usize)>> =
                fold.train.iter().map(|&i| vocab.find_spans(&ds.matches[i])).collect();
            let labels: Vec<Vec<bool>> = fold.train.iter().map(|&i| vocab.label_events(&ds.matches[i])).collect();
            let bags = sample_training_bags(&spans_, &labels, &mut rng::stream(self.seed, &["bags", &f.to_string()]))?;
            let train_rows: Vec<&[Vec<f64>]> = fold.train.iter().map(|&i| rows[i].as_slice()).collect();
            let val = MilValidation {
                matches: fold.validation.iter().map(|&i| &ds.matches[i]).collect(),
                rows: fold.validation.iter().map(|&i| rows[i].as_slice()).collect(),
                gt: fold.validation.iter().map(|&i| spans(&ds.summaries[i].actions)).collect(),
            };
            let (model, log) = train_mil(
                &train_rows,
                &bags,
                &val,
                &ds.vocabulary,
                &self.cfg.mil,
                derive_seed(self.seed, &["mil", &f.to_string()]),
            )?;
            let dir = self.fold_dir(f);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            model.save(&dir.join("mil.ckpt"), &serde_json::to_value(self.meta()).unwrap())?;
            self.write_stamped(&dir.join("vocab.json"), &vocab)?;
            self.write_stamped(&dir.join("mil_log.json"), &log)?;
            self.log(&format!(
                "train-proposals: fold {f}, {} vocabulary sequences, {} bags, best epoch {} (threshold {:.2})",
                vocab.len(),
                bags.len(),
                log.best_epoch,
                model.settings.threshold
            ));
        }
        Ok(())
    }

    fn load_mil(&self, fold: usize) -> Result<MilModel> {
        let path = self.fold_dir(fold).join("mil.ckpt");
        require(&path, "train-proposals")?;
        let (model, art) = MilModel::load(&path)?;
        self.checkpoint_meta(&path, &art)?;
        Ok(model)
    }

    pub fn score_events(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        let enc = self.load_encoder(&ds)?;
        let rows = self.metadata_rows(&ds, &enc)?;
        for fold in self.folds(ds.matches.len())? {
            let model = self.load_mil(fold.index)?;
            let scores: Vec<Vec<f64>> = rows.par_iter().map(|r| model.score_events(r)).collect::<Result<_>>()?;
            let matches = ds.matches.iter().map(|m| m.id.clone()).zip(scores).collect();
            self.write_stamped(
                &self.fold_dir(fold.index).join("scores.json"),
                ScoresArtifact {
                    fold: fold.index,
                    matches,
                },
            )?;
            self.log(&format!("score-events: fold {}", fold.index));
        }
        Ok(())
    }

    pub fn extract_proposals(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        for fold in self.folds(ds.matches.len())? {
            let f = fold.index;
            let model = self.load_mil(f)?;
            let scores: ScoresArtifact = self.read_stamped(&self.fold_dir(f).join("scores.json"), "score-events")?;
            let threshold = model.settings.threshold;
            let mut matches = BTreeMap::new();
            for (i, m) in ds.matches.iter().enumerate() {
                let s = scores.matches.get(&m.id).ok_or_else(|| {
                    Error::Data(format!("scores.json of fold {f} lacks match {}", m.id))
                })?;
                let props = extract_proposals(s, threshold, m, &ds.vocabulary)?;
                let gt = spans(&ds.summaries[i].actions);
                let recs: Vec<ProposalRecord> = props
                    .iter()
                    .map(|a| ProposalRecord {
                        start: a.start,
                        end: a.end,
                        kind: a.kind,
                        label: overlap_label((a.start, a.end), &gt, self.cfg.eval.label_overlap),
                        duration: action_duration(a, m, ds.padding),
                    })
                    .collect();
                matches.insert(m.id.clone(), recs);
            }
            let total: usize = matches.values().map(Vec::len).sum();
            self.write_stamped(
                &self.fold_dir(f).join("proposals.json"),
                ProposalsArtifact {
                    fold: f,
                    threshold,
                    matches,
                },
            )?;
            self.log(&format!("extract-proposals: fold {f}, {total} proposals at threshold {threshold:.2}"));
        }
        Ok(())
    }

    pub fn load_proposals(&self, fold: usize) -> Result<ProposalsArtifact> {
        self.read_stamped(&self.fold_dir(fold).join("proposals.json"), "extract-proposals")
    }

    fn proposal_inputs(
        &self,
        ds: &Dataset,
        rows: &[Vec<Vec<f64>>],
        props: &ProposalsArtifact,
        matches: &[usize],
    ) -> Result<Vec<Vec<ProposalInput>>> {
        let extractor = AudioExtractor::new(self.cfg.features.audio.clone(), self.audio_rate(ds)?)?;
        matches
            .par_iter()
            .map(|&i| {
                let m = &ds.matches[i];
                let recs = &props.matches[&m.id];
                let needed: BTreeSet<usize> = recs.iter().flat_map(|r| r.start..=r.end).collect();
                let audio = if needed.is_empty() {
                    BTreeMap::new()
                } else {
                    let src = open_audio(ds, i, &self.data_dir())?;
                    needed
                        .into_iter()
                        .map(|e| Ok((e, extractor.event_features(src.as_ref(), m.events[e].t)?)))
                        .collect::<Result<BTreeMap<_, _>>>()?
                };
                Ok(recs
                    .iter()
                    .map(|r| ProposalInput {
                        meta: rows[i][r.start..=r.end].to_vec(),
                        audio: (r.start..=r.end).map(|e| audio[&e].clone()).collect(),
                        label: r.label,
                    })
                    .collect())
            })
            .collect()
    }

    fn audio_rate(&self, ds: &Dataset) -> Result<u32> {
        for (i, m) in ds.matches.iter().enumerate() {
            match &m.audio {
                Some(AudioRef::Synthetic(s)) => return Ok(s.sample_rate),
                Some(AudioRef::RawF32 { sample_rate, .. }) => return Ok(*sample_rate),
                Some(AudioRef::Wav { .. }) => return Ok(open_audio(ds, i, &self.data_dir())?.sample_rate()),
                None => {}
            }
        }
        Err(Error::Data("no match in the dataset has an audio track".into()))
    }

    pub fn train_hma(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        let enc = self.load_encoder(&ds)?;
        let rows = self.metadata_rows(&ds, &enc)?;
        for fold in self.folds(ds.matches.len())? {
            let f = fold.index;
            let props = self.load_proposals(f)?;
            let train: Vec<ProposalInput> = self.proposal_inputs(&ds, &rows, &props, &fold.train)?.concat();
            let val: Vec<ProposalInput> = self.proposal_inputs(&ds, &rows, &props, &fold.validation)?.concat();
            let (model, log) = train_hma(&train, &val, &self.cfg.hma, derive_seed(self.seed, &["hma", &f.to_string()]))?;
            let dir = self.fold_dir(f);
            model.save(&dir.join("hma.ckpt"), &serde_json::to_value(self.meta()).unwrap())?;
            self.write_stamped(&dir.join("hma_log.json"), &log)?;
            let pos = train.iter().filter(|p| p.label >= 0.5).count();
            self.log(&format!(
                "train-hma: fold {f}, {} training proposals ({pos} positive), best epoch {}",
                train.len(),
                log.best_epoch
            ));
        }
        Ok(())
    }

    fn load_hma(&self, fold: usize) -> Result<HmaModel> {
        let path = self.fold_dir(fold).join("hma.ckpt");
        require(&path, "train-hma")?;
        let (model, art) = HmaModel::load(&path)?;
        self.checkpoint_meta(&path, &art)?;
        Ok(model)
    }

    /// Scores validation and test proposals and writes `k` candidate
    /// summaries per match, with the ground-truth summary length as budget.
    pub fn summarize(&self) -> Result<()> {
        let ds = self.load_dataset()?;
        let enc = self.load_encoder(&ds)?;
        let rows = self.metadata_rows(&ds, &enc)?;
        for fold in self.folds(ds.matches.len())? {
            let f = fold.index;
            let props = self.load_proposals(f)?;
            let model = self.load_hma(f)?;
            let targets: Vec<usize> = fold.validation.iter().chain(&fold.test).copied().collect();
            let inputs = self.proposal_inputs(&ds, &rows, &props, &targets)?;
            let mut theta = BTreeMap::new();
            for (&i, inp) in targets.iter().zip(&inputs) {
                theta.insert(ds.matches[i].id.clone(), model.score_proposals(inp)?);
            }
            let cand_root = self.fold_dir(f).join("candidates");
            if cand_root.exists() {
                fs::remove_dir_all(&cand_root).map_err(|e| Error::io(&cand_root, e))?;
            }
            let mut written = 0;
            for &i in &targets {
                let m = &ds.matches[i];
                let recs = &props.matches[&m.id];
                if recs.is_empty() {
                    continue;
                }
                let (durations, starts) = durations_starts(recs);
                let cands = generate_candidates(
                    &theta[&m.id],
                    &durations,
                    &starts,
                    ds.summaries[i].total_duration,
                    self.cfg.sampling,
                    self.cfg.assembly,
                    derive_seed(self.seed, &["summarize", &f.to_string()]),
                    &m.id,
                )?;
                for c in cands {
                    let path = self.candidate_path(f, &m.id, c.sample_index);
                    self.write_stamped(
                        &path,
                        CandidateArtifact {
                            fold: f,
                            match_id: m.id.clone(),
                            candidate: c,
                        },
                    )?;
                    written += 1;
                }
            }
            self.write_stamped(&self.fold_dir(f).join("theta.json"), ThetaArtifact { fold: f, matches: theta })?;
            self.log(&format!("summarize: fold {f}, {written} candidate summaries"));
        }
        Ok(())
    }

    pub fn load_candidates(&self, fold: usize, match_id: &str) -> Result<Vec<CandidateSummary>> {
        (0..self.cfg.sampling.k)
            .map(|k| {
                let a: CandidateArtifact = self.read_stamped(&self.candidate_path(fold, match_id, k), "summarize")?;
                Ok(a.candidate)
            })
            .collect()
    }

    /// Aggregates every run fold on its test shard and writes the tables.
    pub fn evaluate(&self) -> Result<Report> {
        let ds = self.load_dataset()?;
        let mut mil = Counts::default();
        let mut template = Counts::default();
        let mut hma = Counts::default();
        let mut base = [Counts::default(); 3];
        let mut best = Counts::default();
        let mut desc = Counts::default();
        let mut random = Counts::default();
        let mut best_sample = Vec::new();
        let k = self.cfg.sampling.k;

        for fold in self.folds(ds.matches.len())? {
            let f = fold.index;
            let dir = self.fold_dir(f);
            let props = self.load_proposals(f)?;
            let vocab: ActionVocabulary = self.read_stamped(&dir.join("vocab.json"), "train-proposals")?;
            let theta: ThetaArtifact = self.read_stamped(&dir.join("theta.json"), "summarize")?;
            let hma_threshold = self.load_hma(f)?.settings.threshold;

            // sample index chosen on the validation shard
            let mut val_scores = Vec::new();
            for &i in &fold.validation {
                let m = &ds.matches[i];
                let recs = &props.matches[&m.id];
                if recs.is_empty() {
                    continue;
                }
                let cands = self.load_candidates(f, &m.id)?;
                val_scores.push(
                    cands
                        .iter()
                        .map(|c| chosen_counts(c, recs, &ds, i).f_score())
                        .collect::<Vec<f64>>(),
                );
            }
            let pick = select_best_candidate(&val_scores, k);
            best_sample.push(pick);

            for &i in &fold.test {
                let m = &ds.matches[i];
                let recs = &props.matches[&m.id];
                let gt_summary = &ds.summaries[i].actions;

                let gt_spans = spans(gt_summary);
                mil += overlap_match(&spans_of(recs), &gt_spans, OVERLAP_RATIO).counts();
                let tpl = template_proposals(&vocab.label_events(m), m, &ds.vocabulary)?;
                template += overlap_match(&spans(&tpl), &gt_spans, OVERLAP_RATIO).counts();

                let actions: Vec<Action> = recs.iter().map(ProposalRecord::action).collect();
                let th = theta.matches.get(&m.id).ok_or_else(|| {
                    Error::Data(format!("theta.json of fold {f} lacks match {}", m.id))
                })?;
                let kept: Vec<Action> = actions
                    .iter()
                    .zip(th)
                    .filter(|(_, &t)| t >= hma_threshold)
                    .map(|(a, _)| a.clone())
                    .collect();
                hma += match_summary_actions(&kept, gt_summary, m).counts();
                for (mode, acc) in SoccerBaseline::ALL.into_iter().zip(&mut base) {
                    let mut r = rng::stream(self.seed, &["soccer-baseline", mode.label(), &m.id]);
                    let pred = soccer_baseline(mode, &actions, &mut r);
                    *acc += match_summary_actions(&pred, gt_summary, m).counts();
                }

                if recs.is_empty() {
                    let miss = match_summary_actions(&[], gt_summary, m).counts();
                    best += miss;
                    desc += miss;
                    random += miss;
                    continue;
                }
                let cands = self.load_candidates(f, &m.id)?;
                best += chosen_counts(&cands[pick], recs, &ds, i);
                let (durations, starts) = durations_starts(recs);
                let budget = ds.summaries[i].total_duration;
                for (mode, acc) in [
                    (BaselineRanking::ScoreDescending, &mut desc),
                    (BaselineRanking::Random, &mut random),
                ] {
                    let mut r = rng::stream(self.seed, &["ranking-baseline", &format!("{mode:?}"), &m.id]);
                    let ranking = baseline_ranking(th, mode, &mut r);
                    let c = assemble_summary(&ranking, &durations, &starts, budget, self.cfg.assembly)?;
                    *acc += chosen_counts(&c, recs, &ds, i);
                }
            }
        }

        let mut stage1 = ResultTable::new("Action proposals", &["Missing Actions", "F2", "Precision", "Recall"]);
        for (name, c) in [(MIL_METHOD, mil), (TEMPLATE_METHOD, template)] {
            stage1.push(name, vec![c.missing_rate(), c.f2(), c.precision(), c.recall()]);
        }
        let prf = |c: Counts| vec![c.precision(), c.recall(), c.f_score()];
        let mut summary = ResultTable::new("Summary actions", &["Precision", "Recall", "F-score"]);
        summary.push(HMA_METHOD, prf(hma));
        for (mode, c) in SoccerBaseline::ALL.into_iter().zip(base) {
            summary.push(mode.label(), prf(c));
        }
        let mut multi = ResultTable::new("Multiple summaries", &["Precision", "Recall", "F-score"]);
        multi.push(BEST_OF_METHOD, prf(best));
        multi.push(DESCENDING_METHOD, prf(desc));
        multi.push(RANDOM_RANKING_METHOD, prf(random));

        let report = Report {
            stage1,
            summary,
            multi,
            best_sample,
        };
        let dir = self.tables_dir();
        for (name, t) in report.tables() {
            write_text(&dir.join(format!("{name}.csv")), &t.to_csv(&self.meta()))?;
            write_text(&dir.join(format!("{name}.txt")), &t.to_text())?;
            self.log(&t.to_text());
        }
        Ok(report)
    }

    /// Reads the result tables written by `evaluate`, checking provenance.
    pub fn read_tables(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for name in [STAGE1_TABLE, SUMMARY_TABLE, MULTI_TABLE] {
            let path = self.tables_dir().join(format!("{name}.csv"));
            require(&path, "evaluate")?;
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let meta = text
                .lines()
                .next()
                .and_then(ArtifactMeta::parse_csv_comment)
                .ok_or_else(|| Error::Data(format!("{} lacks a provenance line", path.display())))?;
            self.check_meta(&path, &meta)?;
            out.insert(name.to_string(), text);
        }
        Ok(out)
    }

    pub fn e2e(&self) -> Result<Report> {
        self.gen_data()?;
        self.extract_features()?;
        self.train_proposals()?;
        self.score_events()?;
        self.extract_proposals()?;
        self.train_hma()?;
        self.summarize()?;
        self.evaluate()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn spans_of(recs: &[ProposalRecord]) -> Vec<(usize, usize)> {
    recs.iter().map(|r| (r.start, r.end)).collect()
}

/// 1 when at least `ratio` of the proposal's events fall inside a single
/// ground-truth range, else 0.
pub fn overlap_label(p: (usize, usize), gt: &[(usize, usize)], ratio: f64) -> f64 {
    let len = (p.1 - p.0 + 1) as f64;
    let best = gt
        .iter()
        .map(|&(s, e)| {
            let lo = p.0.max(s);
            let hi = p.1.min(e);
            if lo > hi {
                0
            } else {
                hi - lo + 1
            }
        })
        .max()
        .unwrap_or(0);
    if best > 0 && best as f64 >= ratio * len - 1e-9 {
        1.0
    } else {
        0.0
    }
}

pub fn durations_starts(recs: &[ProposalRecord]) -> (Vec<f64>, Vec<usize>) {
    (recs.iter().map(|r| r.duration).collect(), recs.iter().map(|r| r.start).collect())
}

fn chosen_counts(c: &CandidateSummary, recs: &[ProposalRecord], ds: &Dataset, i: usize) -> Counts {
    let pred: Vec<Action> = c.chosen.iter().map(|&p| recs[p].action()).collect();
    match_summary_actions(&pred, &ds.summaries[i].actions, &ds.matches[i]).counts()
}

/// Opens the audio of match `i`.
pub fn open_audio(ds: &Dataset, i: usize, root: &Path) -> Result<Box<dyn SampleSource + Send + Sync>> {
    let m = &ds.matches[i];
    match &m.audio {
        Some(AudioRef::Synthetic(spec)) => Ok(Box::new(SyntheticAudio::new(spec, m, &ds.summaries[i])?)),
        Some(AudioRef::Wav { path }) => Ok(Box::new(AudioTrack::read_wav(&root.join(path))?)),
        Some(AudioRef::RawF32 { path, sample_rate }) => {
            Ok(Box::new(AudioTrack::read_raw_f32(&root.join(path), *sample_rate)?))
        }
        None => Err(Error::Data(format!("match {} has no audio track", m.id))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_label_needs_half_inside_one_range() {
        let gt = [(10, 19), (30, 33)];
        assert_eq!(overlap_label((8, 13), &gt, 0.5), 1.0);
        assert_eq!(overlap_label((5, 13), &gt, 0.5), 0.0);
        assert_eq!(overlap_label((18, 31), &gt, 0.5), 0.0);
        assert_eq!(overlap_label((31, 31), &gt, 0.5), 1.0);
        assert_eq!(overlap_label((0, 3), &[], 0.5), 0.0);
    }

    #[test]
    fn missing_inputs_name_the_producer() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path(), PipelineConfig::default(), 1);
        let err = ws.extract_features().unwrap_err();
        assert!(err.to_string().contains("gen-data"), "{err}");
    }
}
