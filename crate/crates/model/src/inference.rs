//! Candidate generation: temperature sampling and length-normalized beam
//! search, exposed through the core `Predictor` trait.

use candle_core::{Tensor, D};
use candle_nn::ops::log_softmax;
use rand::Rng;
use serde::{Deserialize, Serialize};

use logicsr_core::encoding::{BOS, EOS};
use logicsr_core::predictor::{Predictor, Proposals};
use logicsr_core::rng::{seeded, SampleRng};
use logicsr_core::ObservationSet;

use crate::model::{EncoderBatch, Model};
use crate::Result;

pub const DEFAULT_CANDIDATES: usize = 10;
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    /// `k` independent samples; temperature 0 means argmax decoding.
    Sample { k: usize, temperature: f64 },
    Beam { size: usize },
}

impl Default for DecodeMode {
    fn default() -> Self {
        DecodeMode::Sample {
            k: DEFAULT_CANDIDATES,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub mode: DecodeMode,
    pub seed: u64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            mode: DecodeMode::default(),
            seed: 0,
        }
    }
}

/// One decoded sequence, with its log-probability under the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub ids: Vec<u32>,
    pub log_prob: f64,
    pub finished: bool,
}

impl Decoded {
    /// Log-probability per generated token, EOS included.
    pub fn normalized(&self) -> f64 {
        self.log_prob / (self.ids.len().saturating_sub(1)).max(1) as f64
    }
}

fn encode_one(model: &Model, obs: &ObservationSet) -> Result<crate::model::Memory> {
    let input = model.encoder_input(obs)?;
    let batch = EncoderBatch::new(&[input], model.vocab(), model.dtype(), model.device())?;
    model.encode(&batch)
}

fn prefix_tensor(model: &Model, seqs: &[&[u32]]) -> Result<Tensor> {
    let t = seqs[0].len();
    let flat: Vec<u32> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
    Ok(Tensor::from_vec(flat, (seqs.len(), t), model.device())?)
}

fn log_probs(model: &Model, memory: &crate::model::Memory, seqs: &[&[u32]]) -> Result<Vec<Vec<f32>>> {
    let logits = model.decode_step(memory, &prefix_tensor(model, seqs)?)?;
    Ok(log_softmax(&logits, D::Minus1)?
        .to_dtype(candle_core::DType::F32)?
        .to_vec2::<f32>()?)
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn sample_index<R: Rng + ?Sized>(logp: &[f32], temperature: f64, rng: &mut R) -> usize {
    let scaled: Vec<f64> = logp.iter().map(|&x| x as f64 / temperature).collect();
    let top = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    argmax(logp)
}

/// `k` autoregressive samples decoded in one batch, each capped at the
/// model's target length.
pub fn sample_sequences<R: Rng + ?Sized>(
    model: &Model,
    obs: &ObservationSet,
    k: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Vec<Decoded>> {
    if k == 0 {
        return Err(crate::ModelError::Config("at least one candidate is required".into()));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(crate::ModelError::Config(format!("bad temperature {temperature}")));
    }
    let memory = encode_one(model, obs)?;
    let mut seqs: Vec<Decoded> = (0..k)
        .map(|_| Decoded {
            ids: vec![BOS],
            log_prob: 0.0,
            finished: false,
        })
        .collect();
    for _ in 0..model.config().max_target_len + 1 {
        let live: Vec<usize> = (0..k).filter(|&i| !seqs[i].finished).collect();
        if live.is_empty() {
            break;
        }
        let mem = memory.repeat(live.len())?;
        let prefixes: Vec<&[u32]> = live.iter().map(|&i| seqs[i].ids.as_slice()).collect();
        let rows = log_probs(model, &mem, &prefixes)?;
        for (&i, row) in live.iter().zip(&rows) {
            let tok = if temperature == 0.0 {
                argmax(row)
            } else {
                sample_index(row, temperature, rng)
            };
            let s = &mut seqs[i];
            s.ids.push(tok as u32);
            s.log_prob += row[tok] as f64;
            s.finished = tok as u32 == EOS;
        }
    }
    Ok(seqs)
}

/// Length-normalized beam search. Hypotheses are extended by their raw
/// log-probability; finished ones are returned best-first by log-probability
/// per token.
pub fn beam_sequences(model: &Model, obs: &ObservationSet, beam: usize) -> Result<Vec<Decoded>> {
    if beam == 0 {
        return Err(crate::ModelError::Config("beam size must be at least 1".into()));
    }
    let memory = encode_one(model, obs)?;
    let mut live = vec![Decoded {
        ids: vec![BOS],
        log_prob: 0.0,
        finished: false,
    }];
    let mut done: Vec<Decoded> = Vec::new();
    for _ in 0..model.config().max_target_len + 1 {
        if live.is_empty() {
            break;
        }
        let mem = memory.repeat(live.len())?;
        let prefixes: Vec<&[u32]> = live.iter().map(|s| s.ids.as_slice()).collect();
        let rows = log_probs(model, &mem, &prefixes)?;
        let mut expansions: Vec<(f64, usize, usize)> = Vec::new();
        for (h, row) in rows.iter().enumerate() {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            for &tok in order.iter().take(beam) {
                expansions.push((live[h].log_prob + row[tok] as f64, h, tok));
            }
        }
        expansions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = Vec::new();
        for (lp, h, tok) in expansions.into_iter().take(beam) {
            let mut ids = live[h].ids.clone();
            ids.push(tok as u32);
            let finished = tok as u32 == EOS;
            let d = Decoded {
                ids,
                log_prob: lp,
                finished,
            };
            if finished {
                done.push(d);
            } else {
                next.push(d);
            }
        }
        live = next;
    }
    done.extend(live);
    done.sort_by(|a, b| b.normalized().total_cmp(&a.normalized()).then(a.ids.cmp(&b.ids)));
    done.truncate(beam);
    Ok(done)
}

/// Parses decoded sequences, dropping the invalid ones and counting them.
pub fn to_proposals(model: &Model, decoded: &[Decoded]) -> Proposals {
    let mut formulas = Vec::new();
    let mut invalid = 0;
    for d in decoded {
        match model.vocab().decode_target(&d.ids) {
            Ok(f) => formulas.push(f),
            Err(_) => invalid += 1,
        }
    }
    Proposals { formulas, invalid }
}

/// A trained model used as a predictor.
pub struct ModelPredictor {
    model: Model,
    options: InferenceOptions,
    rng: SampleRng,
}

impl ModelPredictor {
    pub fn new(model: Model, options: InferenceOptions) -> Self {
        ModelPredictor {
            model,
            rng: seeded(options.seed),
            options,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn options(&self) -> &InferenceOptions {
        &self.options
    }

    pub fn decode(&mut self, obs: &ObservationSet) -> Result<Vec<Decoded>> {
        match self.options.mode {
            DecodeMode::Sample { k, temperature } => sample_sequences(&self.model, obs, k, temperature, &mut self.rng),
            DecodeMode::Beam { size } => beam_sequences(&self.model, obs, size),
        }
    }
}

impl Predictor for ModelPredictor {
    fn propose(&mut self, obs: &ObservationSet) -> logicsr_core::Result<Proposals> {
        let decoded = self.decode(obs)?;
        Ok(to_proposals(&self.model, &decoded))
    }
}
