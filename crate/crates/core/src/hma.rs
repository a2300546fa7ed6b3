//! Hierarchical multimodal attention over the events of a proposal.
//!
//! Per event, a shared map `W` scores the metadata and audio hidden states;
//! a softmax over the two gives modality weights `λ` used to mix them. A
//! fusion LSTM runs over the mixed states, a projection `u` scores each fused
//! state and a softmax over events gives weights `β`. The weighted sum of
//! fused states feeds a sigmoid output.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Counts;
use crate::features::Standardizer;
use crate::neural::{checkpoint, AdamConfig, AdamState, Dense, Gradients, Lstm, ParamSet, Tape, Var};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmaConfig {
    pub modality_hidden: usize,
    pub fusion_hidden: usize,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Decision threshold on `θ` when proposals are classified.
    pub threshold: f64,
}

impl Default for HmaConfig {
    fn default() -> Self {
        Self {
            modality_hidden: 32,
            fusion_hidden: 16,
            epochs: 100,
            patience: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            threshold: 0.5,
        }
    }
}

/// Per-event inputs of one proposal and, for training, its label.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalInput {
    pub meta: Vec<Vec<f64>>,
    pub audio: Vec<Vec<f64>>,
    pub label: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmaNet {
    pub params: ParamSet,
    pub lstm_meta: Lstm,
    pub lstm_audio: Lstm,
    pub modality_attn: Dense,
    pub lstm_fusion: Lstm,
    pub event_attn: Dense,
    pub out: Dense,
}

/// Values of one forward pass, for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct HmaTrace {
    pub score: f64,
    /// `(λ^M, λ^A)` per event.
    pub lambdas: Vec<(f64, f64)>,
    pub betas: Vec<f64>,
}

struct Graph {
    score: Var,
    lambdas: Vec<Var>,
    betas: Var,
}

impl HmaNet {
    pub fn new(meta_width: usize, audio_width: usize, cfg: &HmaConfig, seed: u64) -> Self {
        let mut r = rng::stream(seed, &["hma-init"]);
        let mut params = ParamSet::new();
        let (h, hc) = (cfg.modality_hidden, cfg.fusion_hidden);
        let lstm_meta = Lstm::new(&mut params, "meta", meta_width, h, &mut r);
        let lstm_audio = Lstm::new(&mut params, "audio", audio_width, h, &mut r);
        let modality_attn = Dense::new(&mut params, "modality_attn", h, 1, false, &mut r);
        let lstm_fusion = Lstm::new(&mut params, "fusion", h, hc, &mut r);
        let event_attn = Dense::new(&mut params, "event_attn", hc, 1, false, &mut r);
        let out = Dense::new(&mut params, "out", hc, 1, true, &mut r);
        Self {
            params,
            lstm_meta,
            lstm_audio,
            modality_attn,
            lstm_fusion,
            event_attn,
            out,
        }
    }

    pub fn from_params(params: ParamSet) -> Result<Self> {
        Ok(Self {
            lstm_meta: Lstm::bind(&params, "meta")?,
            lstm_audio: Lstm::bind(&params, "audio")?,
            modality_attn: Dense::bind(&params, "modality_attn")?,
            lstm_fusion: Lstm::bind(&params, "fusion")?,
            event_attn: Dense::bind(&params, "event_attn")?,
            out: Dense::bind(&params, "out")?,
            params,
        })
    }

    fn graph(&self, tape: &mut Tape, meta: &[Vec<f64>], audio: &[Vec<f64>]) -> Result<Graph> {
        if meta.len() != audio.len() {
            return Err(Error::Shape {
                context: "audio sequence length".into(),
                expected: meta.len(),
                got: audio.len(),
            });
        }
        let xm: Vec<Var> = meta.iter().map(|r| tape.input(r.clone())).collect();
        let xa: Vec<Var> = audio.iter().map(|r| tape.input(r.clone())).collect();
        let hm = self.lstm_meta.forward(tape, &xm)?;
        let ha = self.lstm_audio.forward(tape, &xa)?;

        let mut lambdas = Vec::with_capacity(hm.len());
        let mut mixed = Vec::with_capacity(hm.len());
        for (&m, &a) in hm.iter().zip(&ha) {
            let sm = self.modality_attn.forward(tape, m);
            let sm = tape.tanh(sm);
            let sa = self.modality_attn.forward(tape, a);
            let sa = tape.tanh(sa);
            let logits = tape.concat(&[sm, sa]);
            let lam = tape.softmax(logits);
            let lm = tape.index(lam, 0);
            let la = tape.index(lam, 1);
            let wm = tape.scale(m, lm);
            let wa = tape.scale(a, la);
            mixed.push(tape.add(wm, wa));
            lambdas.push(lam);
        }
        let hc = self.lstm_fusion.forward(tape, &mixed)?;
        let scores: Vec<Var> = hc
            .iter()
            .map(|&h| {
                let t = tape.tanh(h);
                self.event_attn.forward(tape, t)
            })
            .collect();
        let logits = tape.concat(&scores);
        let betas = tape.softmax(logits);
        let weighted: Vec<Var> = hc
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let b = tape.index(betas, i);
                tape.scale(h, b)
            })
            .collect();
        let d = tape.sum(&weighted);
        let logit = self.out.forward(tape, d);
        let score = tape.sigmoid(logit);
        Ok(Graph {
            score,
            lambdas,
            betas,
        })
    }

    pub fn trace(&self, meta: &[Vec<f64>], audio: &[Vec<f64>]) -> Result<HmaTrace> {
        let mut tape = Tape::new(&self.params);
        let g = self.graph(&mut tape, meta, audio)?;
        Ok(HmaTrace {
            score: tape.scalar(g.score),
            lambdas: g
                .lambdas
                .iter()
                .map(|l| (tape.value(*l)[0], tape.value(*l)[1]))
                .collect(),
            betas: tape.value(g.betas).to_vec(),
        })
    }

    pub fn score(&self, meta: &[Vec<f64>], audio: &[Vec<f64>]) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let g = self.graph(&mut tape, meta, audio)?;
        Ok(tape.scalar(g.score))
    }

    pub fn loss_with(&self, params: &ParamSet, meta: &[Vec<f64>], audio: &[Vec<f64>], label: f64) -> Result<f64> {
        let mut tape = Tape::new(params);
        let g = self.graph(&mut tape, meta, audio)?;
        let l = tape.bce(g.score, label);
        Ok(tape.scalar(l))
    }

    pub fn accumulate(
        &self,
        meta: &[Vec<f64>],
        audio: &[Vec<f64>],
        label: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let g = self.graph(&mut tape, meta, audio)?;
        let l = tape.bce(g.score, label);
        tape.backward_into(l, grads);
        Ok(tape.scalar(l))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmaSettings {
    pub meta_scaler: Standardizer,
    pub audio_scaler: Standardizer,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmaModel {
    pub net: HmaNet,
    pub settings: HmaSettings,
}

impl HmaModel {
    fn prepare(&self, p: &ProposalInput) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.settings.meta_scaler.apply_all(&p.meta),
            self.settings.audio_scaler.apply_all(&p.audio),
        )
    }

    pub fn score(&self, p: &ProposalInput) -> Result<f64> {
        let (m, a) = self.prepare(p);
        self.net.score(&m, &a)
    }

    pub fn trace(&self, p: &ProposalInput) -> Result<HmaTrace> {
        let (m, a) = self.prepare(p);
        self.net.trace(&m, &a)
    }

    /// `θ` per proposal, in input order.
    pub fn score_proposals(&self, proposals: &[ProposalInput]) -> Result<Vec<f64>> {
        proposals.par_iter().map(|p| self.score(p)).collect()
    }

    pub fn save(&self, path: &Path, meta: &serde_json::Value) -> Result<()> {
        let doc = serde_json::json!({ "artifact": meta, "settings": self.settings });
        checkpoint::save(path, &self.net.params, &doc.to_string())
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let (params, meta) = checkpoint::load(path)?;
        let doc: serde_json::Value = serde_json::from_str(&meta)
            .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", path.display())))?;
        let settings: HmaSettings = serde_json::from_value(doc["settings"].clone())
            .map_err(|e| Error::Checkpoint(format!("{}: bad settings: {e}", path.display())))?;
        Ok((
            Self {
                net: HmaNet::from_params(params)?,
                settings,
            },
            doc["artifact"].clone(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmaEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub validation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HmaLog {
    pub epochs: Vec<HmaEpoch>,
    pub best_epoch: usize,
}

/// Proposal-level classification counts at `threshold`.
pub fn classification_counts(theta: &[f64], labels: &[f64], threshold: f64) -> Counts {
    let mut c = Counts::default();
    for (t, l) in theta.iter().zip(labels) {
        match (*t >= threshold, *l >= 0.5) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Adam + BCE over shuffled mini-batches; keeps the epoch with the best
/// validation F-score of proposal classification (earliest on ties).
pub fn train_hma(
    train: &[ProposalInput],
    validation: &[ProposalInput],
    cfg: &HmaConfig,
    seed: u64,
) -> Result<(HmaModel, HmaLog)> {
    let pos = train.iter().filter(|p| p.label >= 0.5).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::SingleClass(format!(
            "HMA training set has {pos} positive of {} proposals",
            train.len()
        )));
    }
    let meta_scaler = Standardizer::fit(train.iter().flat_map(|p| p.meta.iter().map(|r| r.as_slice())));
    let audio_scaler = Standardizer::fit(train.iter().flat_map(|p| p.audio.iter().map(|r| r.as_slice())));
    let mut model = HmaModel {
        net: HmaNet::new(meta_scaler.width(), audio_scaler.width(), cfg, seed),
        settings: HmaSettings {
            meta_scaler,
            audio_scaler,
            threshold: cfg.threshold,
        },
    };
    let prepared: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = train.iter().map(|p| model.prepare(p)).collect();
    let val_labels: Vec<f64> = validation.iter().map(|p| p.label).collect();

    let mut adam = AdamState::new(&model.net.params, cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng::stream(seed, &["hma-shuffle"]);
    let mut grads = model.net.params.zeros_like();
    let mut log = HmaLog::default();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            grads.zero();
            for &i in batch {
                let (m, a) = &prepared[i];
                total += model.net.accumulate(m, a, train[i].label, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.net.params, &grads)?;
        }
        let loss = total / train.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("HMA loss is {loss} at epoch {epoch}")));
        }
        let theta = model.score_proposals(validation)?;
        let f = classification_counts(&theta, &val_labels, cfg.threshold).f_score();
        log.epochs.push(HmaEpoch {
            epoch,
            loss,
            validation: f,
        });
        if best.as_ref().map_or(true, |(b, _)| f > *b) {
            best = Some((f, model.net.params.clone()));
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.net.params = params;
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_cfg() -> HmaConfig {
        HmaConfig {
            modality_hidden: 5,
            fusion_hidden: 4,
            ..HmaConfig::default()
        }
    }

    fn rows(n: usize, w: usize, r: &mut rng::Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..w).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn lstm_oracle(ps: &ParamSet, l: &Lstm, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (wi, wh, b) = (&ps.get(l.w_ih).data, &ps.get(l.w_hh).data, &ps.get(l.b).data);
        let (n, h) = (l.input, l.hidden);
        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        let mut out = Vec::new();
        for x in xs {
            let z: Vec<f64> = (0..4 * h)
                .map(|r| {
                    b[r] + (0..n).map(|k| wi[r * n + k] * x[k]).sum::<f64>()
                        + (0..h).map(|k| wh[r * h + k] * hs[k]).sum::<f64>()
                })
                .collect();
            for j in 0..h {
                cs[j] = sig(z[h + j]) * cs[j] + sig(z[j]) * z[2 * h + j].tanh();
                hs[j] = sig(z[3 * h + j]) * cs[j].tanh();
            }
            out.push(hs.clone());
        }
        out
    }

    /// Step-by-step scalar re-implementation of the forward pass.
    fn oracle(net: &HmaNet, meta: &[Vec<f64>], audio: &[Vec<f64>]) -> f64 {
        let ps = &net.params;
        let hm = lstm_oracle(ps, &net.lstm_meta, meta);
        let ha = lstm_oracle(ps, &net.lstm_audio, audio);
        let w = &ps.get(net.modality_attn.w).data;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let c: Vec<Vec<f64>> = hm
            .iter()
            .zip(&ha)
            .map(|(m, a)| {
                let (em, ea) = (dot(w, m).tanh().exp(), dot(w, a).tanh().exp());
                let (lm, la) = (em / (em + ea), ea / (em + ea));
                m.iter().zip(a).map(|(x, y)| lm * x + la * y).collect()
            })
            .collect();
        let hc = lstm_oracle(ps, &net.lstm_fusion, &c);
        let u = &ps.get(net.event_attn.w).data;
        let e: Vec<f64> = hc
            .iter()
            .map(|h| {
                let t: Vec<f64> = h.iter().map(|v| v.tanh()).collect();
                dot(u, &t).exp()
            })
            .collect();
        let z: f64 = e.iter().sum();
        let mut d = vec![0.0; hc[0].len()];
        for (h, ei) in hc.iter().zip(&e) {
            for j in 0..d.len() {
                d[j] += ei / z * h[j];
            }
        }
        let ow = &ps.get(net.out.w).data;
        let ob = ps.get(net.out.b.unwrap()).data[0];
        sig(dot(ow, &d) + ob)
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut r = rng::stream(1, &["hma-oracle"]);
        let net = HmaNet::new(6, 3, &small_cfg(), 2);
        let (m, a) = (rows(4, 6, &mut r), rows(4, 3, &mut r));
        let got = net.score(&m, &a).unwrap();
        assert!((got - oracle(&net, &m, &a)).abs() < 1e-10);
    }

    #[test]
    fn singleton_and_symmetry() {
        let mut r = rng::stream(3, &[]);
        let net = HmaNet::new(4, 4, &small_cfg(), 4);
        let m = rows(1, 4, &mut r);
        let a = rows(1, 4, &mut r);
        assert_eq!(net.trace(&m, &a).unwrap().betas, vec![1.0]);

        // identical inputs through identical LSTM weights give identical
        // hidden states, hence equal modality weights
        let mut same = net.clone();
        let src = same.params.get(same.lstm_meta.w_ih).data.clone();
        same.params.get_mut(same.lstm_audio.w_ih).data = src;
        let src = same.params.get(same.lstm_meta.w_hh).data.clone();
        same.params.get_mut(same.lstm_audio.w_hh).data = src;
        let src = same.params.get(same.lstm_meta.b).data.clone();
        same.params.get_mut(same.lstm_audio.b).data = src;
        let x = rows(3, 4, &mut r);
        for (lm, la) in same.trace(&x, &x).unwrap().lambdas {
            assert!((lm - 0.5).abs() < 1e-15 && (la - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_are_normalized() {
        let mut r = rng::stream(5, &[]);
        let net = HmaNet::new(5, 3, &small_cfg(), 6);
        for len in 1..8 {
            let t = net.trace(&rows(len, 5, &mut r), &rows(len, 3, &mut r)).unwrap();
            for (lm, la) in &t.lambdas {
                assert!((lm + la - 1.0).abs() < 1e-9);
            }
            assert!((t.betas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(t.score > 0.0 && t.score < 1.0);
        }
    }

    #[test]
    fn order_matters_somewhere() {
        let mut r = rng::stream(7, &[]);
        let net = HmaNet::new(3, 2, &small_cfg(), 8);
        let (m, a) = (rows(5, 3, &mut r), rows(5, 2, &mut r));
        let (mut mr, mut ar) = (m.clone(), a.clone());
        mr.reverse();
        ar.reverse();
        assert_ne!(net.score(&m, &a).unwrap(), net.score(&mr, &ar).unwrap());
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let net = HmaNet::new(3, 2, &small_cfg(), 9);
        let err = net.score(&vec![vec![0.0; 3]; 2], &vec![vec![0.0; 2]; 3]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn single_class_rejected() {
        let p = ProposalInput {
            meta: vec![vec![0.0; 3]],
            audio: vec![vec![0.0; 2]],
            label: 1.0,
        };
        let err = train_hma(&[p.clone(), p], &[], &small_cfg(), 0).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }
}
