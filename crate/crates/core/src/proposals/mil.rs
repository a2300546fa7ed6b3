//! LSTM with max pooling over time, trained on bags of consecutive events.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bags::Bag;
use super::extract::{select_threshold, ThresholdCase};
use super::scoring::{fuse_windows, window_scores, Fusion};
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::model::{Match, Vocabulary};
use crate::neural::{checkpoint, AdamConfig, AdamState, Dense, Gradients, Lstm, ParamSet, Tape, Var};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilConfig {
    pub hidden: usize,
    pub window: usize,
    pub stride: usize,
    /// Fusion smoothness candidates; each epoch keeps the one with the best
    /// validation F2, the earliest listed on ties.
    pub r_grid: Vec<f64>,
    pub fusion: Fusion,
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for MilConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            window: 10,
            stride: 5,
            r_grid: vec![8.0, 1.0, 100.0],
            fusion: Fusion::Lse,
            epochs: 100,
            patience: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilNet {
    pub params: ParamSet,
    pub lstm: Lstm,
    pub out: Dense,
}

impl MilNet {
    pub fn new(input: usize, hidden: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, &["mil-init"]);
        let mut params = ParamSet::new();
        let lstm = Lstm::new(&mut params, "lstm", input, hidden, &mut r);
        let out = Dense::new(&mut params, "out", hidden, 1, true, &mut r);
        Self { params, lstm, out }
    }

    pub fn from_params(params: ParamSet) -> Result<Self> {
        let lstm = Lstm::bind(&params, "lstm")?;
        let out = Dense::bind(&params, "out")?;
        Ok(Self { params, lstm, out })
    }

    pub fn input_width(&self) -> usize {
        self.lstm.input
    }

    /// Records the bag graph; returns (score, pooled representation).
    pub fn forward(&self, tape: &mut Tape, rows: &[Vec<f64>]) -> Result<(Var, Var)> {
        if rows.is_empty() {
            return Err(Error::Shape {
                context: "MIL bag size".into(),
                expected: 1,
                got: 0,
            });
        }
        let xs: Vec<Var> = rows.iter().map(|r| tape.input(r.clone())).collect();
        let hs = self.lstm.forward(tape, &xs)?;
        let z = tape.max_pool(&hs);
        let logit = self.out.forward(tape, z);
        let o = tape.sigmoid(logit);
        Ok((o, z))
    }

    pub fn bag_score(&self, rows: &[Vec<f64>]) -> Result<f64> {
        self.bag_score_with(&self.params, rows)
    }

    pub fn bag_score_with(&self, params: &ParamSet, rows: &[Vec<f64>]) -> Result<f64> {
        let mut tape = Tape::new(params);
        let (o, _) = self.forward(&mut tape, rows)?;
        Ok(tape.scalar(o))
    }

    /// Pooled representation `z` of a bag.
    pub fn pooled(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let (_, z) = self.forward(&mut tape, rows)?;
        Ok(tape.value(z).to_vec())
    }

    pub fn loss_with(&self, params: &ParamSet, rows: &[Vec<f64>], label: f64) -> Result<f64> {
        let mut tape = Tape::new(params);
        let (o, _) = self.forward(&mut tape, rows)?;
        let l = tape.bce(o, label);
        Ok(tape.scalar(l))
    }

    /// BCE loss of one bag, accumulating its gradient into `grads`.
    pub fn accumulate(&self, rows: &[Vec<f64>], label: f64, grads: &mut Gradients) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let (o, _) = self.forward(&mut tape, rows)?;
        let l = tape.bce(o, label);
        tape.backward_into(l, grads);
        Ok(tape.scalar(l))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilSettings {
    pub window: usize,
    pub stride: usize,
    pub r: f64,
    pub fusion: Fusion,
    pub threshold: f64,
    pub scaler: Standardizer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilModel {
    pub net: MilNet,
    pub settings: MilSettings,
}

impl MilModel {
    /// Per-event fused window scores for one match given its raw metadata rows.
    pub fn score_events(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let scored = self.window_scores(rows)?;
        Ok(fuse_windows(rows.len(), &scored, self.settings.r, self.settings.fusion))
    }

    pub fn window_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<((usize, usize), f64)>> {
        let s = &self.settings;
        let x = s.scaler.apply_all(rows);
        window_scores(x.len(), s.window, s.stride, |st, len| self.net.bag_score(&x[st..st + len]))
    }

    pub fn save(&self, path: &Path, meta: &serde_json::Value) -> Result<()> {
        let doc = serde_json::json!({ "artifact": meta, "settings": self.settings });
        checkpoint::save(path, &self.net.params, &doc.to_string())
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let (params, meta) = checkpoint::load(path)?;
        let doc: serde_json::Value = serde_json::from_str(&meta)
            .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", path.display())))?;
        let settings: MilSettings = serde_json::from_value(doc["settings"].clone())
            .map_err(|e| Error::Checkpoint(format!("{}: bad settings: {e}", path.display())))?;
        let net = MilNet::from_params(params)?;
        Ok((Self { net, settings }, doc["artifact"].clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub validation: f64,
    pub threshold: f64,
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStat>,
    pub best_epoch: usize,
}

/// Validation matches with their raw rows and ground-truth action ranges.
pub struct MilValidation<'a> {
    pub matches: Vec<&'a Match>,
    pub rows: Vec<&'a [Vec<f64>]>,
    pub gt: Vec<Vec<(usize, usize)>>,
}

/// Best validation F2 over the smoothness grid as `(r, threshold, f2)`.
pub fn validation_f2(
    model: &MilModel,
    val: &MilValidation,
    vocab: &Vocabulary,
    r_grid: &[f64],
) -> Result<(f64, f64, f64)> {
    let scored: Vec<Vec<((usize, usize), f64)>> = val
        .rows
        .par_iter()
        .map(|r| model.window_scores(r))
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64, f64)> = None;
    for &r in r_grid {
        let scores: Vec<Vec<f64>> = scored
            .iter()
            .zip(&val.rows)
            .map(|(w, rows)| fuse_windows(rows.len(), w, r, model.settings.fusion))
            .collect();
        let cases: Vec<ThresholdCase> = scores
            .iter()
            .zip(&val.matches)
            .zip(&val.gt)
            .map(|((s, m), gt)| ThresholdCase { scores: s, m, gt })
            .collect();
        let (t, c) = select_threshold(&cases, vocab)?;
        if best.map_or(true, |(_, _, f)| c.f2() > f) {
            best = Some((r, t, c.f2()));
        }
    }
    best.ok_or_else(|| Error::Config("mil.r_grid is empty".into()))
}

/// Adam + BCE over shuffled mini-batches; keeps the epoch with the best
/// validation F2 (earliest on ties) together with its threshold.
pub fn train_mil(
    train_rows: &[&[Vec<f64>]],
    bags: &[Bag],
    val: &MilValidation,
    vocab: &Vocabulary,
    cfg: &MilConfig,
    seed: u64,
) -> Result<(MilModel, TrainLog)> {
    let scaler = Standardizer::fit(train_rows.iter().flat_map(|m| m.iter().map(|r| r.as_slice())));
    let x: Vec<Vec<Vec<f64>>> = train_rows.iter().map(|m| scaler.apply_all(m)).collect();
    let width = scaler.width();
    if bags.iter().all(|b| b.label == 0.0) || bags.iter().all(|b| b.label == 1.0) {
        return Err(Error::SingleClass("MIL training bags".into()));
    }

    let mut model = MilModel {
        net: MilNet::new(width, cfg.hidden, seed),
        settings: MilSettings {
            window: cfg.window,
            stride: cfg.stride,
            r: cfg.r_grid.first().copied().unwrap_or(8.0),
            fusion: cfg.fusion,
            threshold: 0.5,
            scaler,
        },
    };
    let mut adam = AdamState::new(&model.net.params, cfg.adam);
    let mut order: Vec<usize> = (0..bags.len()).collect();
    let mut shuffle_rng = rng::stream(seed, &["mil-shuffle"]);
    let mut grads = model.net.params.zeros_like();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ParamSet, f64, f64)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            grads.zero();
            for &b in batch {
                let bag = &bags[b];
                let rows = &x[bag.match_idx][bag.start..bag.end()];
                total += model.net.accumulate(rows, bag.label, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.net.params, &grads)?;
        }
        let loss = total / bags.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("MIL loss is {loss} at epoch {epoch}")));
        }
        let (r, threshold, f2) = validation_f2(&model, val, vocab, &cfg.r_grid)?;
        log.epochs.push(EpochStat {
            epoch,
            loss,
            validation: f2,
            threshold,
            r,
        });
        if best.as_ref().map_or(true, |(b, _, _, _)| f2 > *b) {
            best = Some((f2, model.net.params.clone(), threshold, r));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params, threshold, r)) = best {
        model.net.params = params;
        model.settings.threshold = threshold;
        model.settings.r = r;
    }
    Ok((model, log))
}
