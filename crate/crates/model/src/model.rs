//! Encoder-decoder transformer over observation rows.
//!
//! The encoder sees one vector per observation and has no positional
//! information, so it is equivariant to row permutations. The decoder is a
//! standard causal transformer with learned absolute positions.

use candle_core::{DType, Device, IndexOp, Tensor, D};
use candle_nn::ops::{layer_norm_slow, log_softmax, softmax};
use candle_nn::{Linear, Module};

use logicsr_core::encoding::{EncoderInput, Vocabulary, SLOT_VOCAB};
use logicsr_core::{ObservationSet, Regime};

use crate::config::ModelConfig;
use crate::params::{Init, Params};
use crate::{ModelError, Result};

const NEG_INF: f64 = -1e9;
const LN_EPS: f32 = 1e-5;

struct LayerNorm {
    gain: Tensor,
    bias: Tensor,
}

impl LayerNorm {
    fn new(p: &mut Params, name: &str, d: usize) -> Result<Self> {
        Ok(LayerNorm {
            gain: p.get(&format!("{name}.gain"), &[d], Init::Const(1.0))?,
            bias: p.get(&format!("{name}.bias"), &[d], Init::Const(0.0))?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(layer_norm_slow(x, &self.gain, &self.bias, LN_EPS)?)
    }
}

fn linear(p: &mut Params, name: &str, d_in: usize, d_out: usize) -> Result<Linear> {
    let w = p.get(&format!("{name}.weight"), &[d_out, d_in], Init::FanIn(d_in))?;
    let b = p.get(&format!("{name}.bias"), &[d_out], Init::FanIn(d_in))?;
    Ok(Linear::new(w, Some(b)))
}

struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
    head_dim: usize,
}

impl Attention {
    fn new(p: &mut Params, name: &str, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.d_emb;
        Ok(Attention {
            q: linear(p, &format!("{name}.q"), d, d)?,
            k: linear(p, &format!("{name}.k"), d, d)?,
            v: linear(p, &format!("{name}.v"), d, d)?,
            o: linear(p, &format!("{name}.o"), d, d)?,
            heads: cfg.heads,
            head_dim: cfg.head_dim(),
        })
    }

    fn split(&self, x: &Tensor) -> Result<Tensor> {
        let (b, l, _) = x.dims3()?;
        Ok(x.reshape((b, l, self.heads, self.head_dim))?.transpose(1, 2)?.contiguous()?)
    }

    /// `bias` broadcasts to `[B, H, Lq, Lk]`. Returns the output and the
    /// attention probabilities.
    fn forward(&self, xq: &Tensor, xkv: &Tensor, bias: Option<&Tensor>) -> Result<(Tensor, Tensor)> {
        let (b, lq, d) = xq.dims3()?;
        let q = self.split(&self.q.forward(xq)?)?;
        let k = self.split(&self.k.forward(xkv)?)?;
        let v = self.split(&self.v.forward(xkv)?)?;
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let mut scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?;
        if let Some(bias) = bias {
            scores = scores.broadcast_add(bias)?;
        }
        let probs = softmax(&scores, D::Minus1)?;
        let out = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, lq, d))?;
        Ok((self.o.forward(&out)?, probs))
    }
}

struct FeedForward {
    up: Linear,
    down: Linear,
}

impl FeedForward {
    fn new(p: &mut Params, name: &str, cfg: &ModelConfig) -> Result<Self> {
        let hidden = cfg.ff_mult * cfg.d_emb;
        Ok(FeedForward {
            up: linear(p, &format!("{name}.up"), cfg.d_emb, hidden)?,
            down: linear(p, &format!("{name}.down"), hidden, cfg.d_emb)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.down.forward(&self.up.forward(x)?.gelu()?)?)
    }
}

struct EncoderBlock {
    norm1: LayerNorm,
    attn: Attention,
    norm2: LayerNorm,
    ff: FeedForward,
}

impl EncoderBlock {
    fn new(p: &mut Params, name: &str, cfg: &ModelConfig) -> Result<Self> {
        Ok(EncoderBlock {
            norm1: LayerNorm::new(p, &format!("{name}.norm1"), cfg.d_emb)?,
            attn: Attention::new(p, &format!("{name}.attn"), cfg)?,
            norm2: LayerNorm::new(p, &format!("{name}.norm2"), cfg.d_emb)?,
            ff: FeedForward::new(p, &format!("{name}.ff"), cfg)?,
        })
    }

    fn forward(&self, x: &Tensor, key_bias: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.norm1.forward(x)?;
        let (a, probs) = self.attn.forward(&h, &h, Some(key_bias))?;
        let x = (x + a)?;
        let x = (&x + self.ff.forward(&self.norm2.forward(&x)?)?)?;
        Ok((x, probs))
    }
}

struct DecoderBlock {
    norm1: LayerNorm,
    self_attn: Attention,
    norm2: LayerNorm,
    cross_attn: Attention,
    norm3: LayerNorm,
    ff: FeedForward,
}

impl DecoderBlock {
    fn new(p: &mut Params, name: &str, cfg: &ModelConfig) -> Result<Self> {
        Ok(DecoderBlock {
            norm1: LayerNorm::new(p, &format!("{name}.norm1"), cfg.d_emb)?,
            self_attn: Attention::new(p, &format!("{name}.self_attn"), cfg)?,
            norm2: LayerNorm::new(p, &format!("{name}.norm2"), cfg.d_emb)?,
            cross_attn: Attention::new(p, &format!("{name}.cross_attn"), cfg)?,
            norm3: LayerNorm::new(p, &format!("{name}.norm3"), cfg.d_emb)?,
            ff: FeedForward::new(p, &format!("{name}.ff"), cfg)?,
        })
    }

    fn forward(&self, x: &Tensor, memory: &Tensor, causal: &Tensor, memory_bias: &Tensor) -> Result<Tensor> {
        let h = self.norm1.forward(x)?;
        let x = (x + self.self_attn.forward(&h, &h, Some(causal))?.0)?;
        let h = self.norm2.forward(&x)?;
        let x = (&x + self.cross_attn.forward(&h, memory, Some(memory_bias))?.0)?;
        let x = (&x + self.ff.forward(&self.norm3.forward(&x)?)?)?;
        Ok(x)
    }
}

/// Encoder input for a batch. Position 0 of every sequence is the
/// truth-table indicator, masked out for plain observation rows.
#[derive(Debug, Clone)]
pub struct EncoderBatch {
    /// `[B, R, D_max + 1]` slot tokens, zero-padded rows beyond each length.
    pub rows: Tensor,
    /// `[B]` indicator ids (minority output value).
    pub indicator: Tensor,
    /// `[B, R + 1]`, 1 for attended positions.
    pub mask: Tensor,
}

impl EncoderBatch {
    pub fn new(inputs: &[EncoderInput], vocab: &Vocabulary, dtype: DType, device: &Device) -> Result<Self> {
        if inputs.is_empty() {
            return Err(ModelError::Config("empty batch".into()));
        }
        let width = vocab.row_width();
        let r = inputs.iter().map(|i| i.rows.len()).max().unwrap_or(0).max(1);
        let b = inputs.len();
        let mut rows = vec![0u32; b * r * width];
        let mut mask = vec![0f32; b * (r + 1)];
        let mut indicator = vec![0u32; b];
        for (e, input) in inputs.iter().enumerate() {
            if let Some(m) = input.minority {
                indicator[e] = m as u32;
                mask[e * (r + 1)] = 1.0;
            }
            for (j, row) in input.rows.iter().enumerate() {
                if row.len() != width {
                    return Err(ModelError::Config(format!(
                        "row of width {} for a model with rows of {width}",
                        row.len()
                    )));
                }
                let base = (e * r + j) * width;
                for (s, &t) in row.iter().enumerate() {
                    rows[base + s] = t as u32;
                }
                mask[e * (r + 1) + 1 + j] = 1.0;
            }
            if input.is_empty() {
                return Err(ModelError::Config("example without encoder positions".into()));
            }
        }
        Ok(EncoderBatch {
            rows: Tensor::from_vec(rows, (b, r, width), device)?,
            indicator: Tensor::from_vec(indicator, b, device)?,
            mask: Tensor::from_vec(mask, (b, r + 1), device)?.to_dtype(dtype)?,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.rows.dims()[0]
    }

    /// Additive attention bias `[B, 1, 1, R + 1]`.
    fn key_bias(&self) -> Result<Tensor> {
        let (b, l) = self.mask.dims2()?;
        Ok(((&self.mask - 1.0)? * -NEG_INF)?.reshape((b, 1, 1, l))?)
    }
}

/// Teacher-forcing targets `[B, T]`: inputs start at BOS, labels are
/// shifted by one, PAD labels are excluded from the loss.
#[derive(Debug, Clone)]
pub struct TargetBatch {
    pub inputs: Tensor,
    pub labels: Tensor,
    pub label_mask: Tensor,
}

impl TargetBatch {
    pub fn new(targets: &[Vec<u32>], dtype: DType, device: &Device) -> Result<Self> {
        let t = targets.iter().map(|s| s.len()).max().unwrap_or(0);
        if t < 2 {
            return Err(ModelError::Config("targets need BOS and EOS".into()));
        }
        let b = targets.len();
        let mut inputs = vec![0u32; b * (t - 1)];
        let mut labels = vec![0u32; b * (t - 1)];
        let mut mask = vec![0f32; b * (t - 1)];
        for (e, s) in targets.iter().enumerate() {
            for k in 0..s.len().saturating_sub(1) {
                inputs[e * (t - 1) + k] = s[k];
                labels[e * (t - 1) + k] = s[k + 1];
                mask[e * (t - 1) + k] = 1.0;
            }
        }
        Ok(TargetBatch {
            inputs: Tensor::from_vec(inputs, (b, t - 1), device)?,
            labels: Tensor::from_vec(labels, (b, t - 1), device)?,
            label_mask: Tensor::from_vec(mask, (b, t - 1), device)?.to_dtype(dtype)?,
        })
    }
}

/// Encoder output together with its attention bias.
#[derive(Debug, Clone)]
pub struct Memory {
    pub states: Tensor,
    bias: Tensor,
}

impl Memory {
    /// Repeats every sequence `k` times along the batch axis.
    pub fn repeat(&self, k: usize) -> Result<Memory> {
        let (b, l, d) = self.states.dims3()?;
        let idx: Vec<u32> = (0..b as u32).flat_map(|i| std::iter::repeat_n(i, k)).collect();
        let idx = Tensor::from_vec(idx, b * k, self.states.device())?;
        Ok(Memory {
            states: self.states.index_select(&idx, 0)?.reshape((b * k, l, d))?,
            bias: self.bias.index_select(&idx, 0)?,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.states.dims()[0]
    }
}

pub struct Model {
    cfg: ModelConfig,
    vocab: Vocabulary,
    slot_embed: Tensor,
    row_proj: Linear,
    indicator: Tensor,
    encoder: Vec<EncoderBlock>,
    enc_norm: LayerNorm,
    tok_embed: Tensor,
    pos_embed: Tensor,
    decoder: Vec<DecoderBlock>,
    dec_norm: LayerNorm,
    out: Linear,
}

impl Model {
    /// Builds the model, taking parameters from `params` when present and
    /// initializing the rest.
    pub fn new(cfg: ModelConfig, params: &mut Params) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_emb;
        let vocab = Vocabulary::new(cfg.d_max);
        let slots = vocab.row_width();
        let slot_embed = params.get("embed.slot", &[SLOT_VOCAB, d], Init::Normal(1.0))?;
        let row_proj = linear(params, "embed.row_proj", slots * d, d)?;
        let indicator = params.get("embed.indicator", &[2, d], Init::Normal(1.0))?;
        let encoder = (0..cfg.enc_layers)
            .map(|i| EncoderBlock::new(params, &format!("encoder.{i}"), &cfg))
            .collect::<Result<Vec<_>>>()?;
        let enc_norm = LayerNorm::new(params, "encoder.norm", d)?;
        let tok_embed = params.get("decoder.tok_embed", &[vocab.decoder_size(), d], Init::Normal(1.0))?;
        let pos_embed = params.get("decoder.pos_embed", &[cfg.positions(), d], Init::Normal(1.0))?;
        let decoder = (0..cfg.dec_layers)
            .map(|i| DecoderBlock::new(params, &format!("decoder.{i}"), &cfg))
            .collect::<Result<Vec<_>>>()?;
        let dec_norm = LayerNorm::new(params, "decoder.norm", d)?;
        let out = linear(params, "decoder.out", d, vocab.decoder_size())?;
        Ok(Model {
            cfg,
            vocab,
            slot_embed,
            row_proj,
            indicator,
            encoder,
            enc_norm,
            tok_embed,
            pos_embed,
            decoder,
            dec_norm,
            out,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn device(&self) -> &Device {
        self.tok_embed.device()
    }

    pub fn dtype(&self) -> DType {
        self.tok_embed.dtype()
    }

    /// Encoder tokens for `obs` in this model's input regime.
    pub fn encoder_input(&self, obs: &ObservationSet) -> Result<EncoderInput> {
        Ok(match self.cfg.regime {
            Regime::Noiseless => self.vocab.encode_noiseless(obs)?,
            Regime::Noisy => self.vocab.encode_noisy(obs)?,
        })
    }

    /// One vector per row: the slot embeddings concatenated and projected.
    /// Computed as a sum of per-slot projected embedding tables, which is the
    /// same affine map without materializing the concatenation.
    pub fn compressed_embed(&self, rows: &Tensor) -> Result<Tensor> {
        let (b, r, s) = rows.dims3()?;
        let d = self.cfg.d_emb;
        // weight [d, s·d] -> per-slot [s, d_in, d_out]
        let w = self.row_proj.weight().reshape((d, s, d))?.permute((1, 2, 0))?.contiguous()?;
        let table = self.slot_embed.unsqueeze(0)?.broadcast_matmul(&w)?; // [s, 3, d]
        let table = table.reshape((s * SLOT_VOCAB, d))?;
        let offsets: Vec<u32> = (0..s as u32).map(|k| k * SLOT_VOCAB as u32).collect();
        let offsets = Tensor::from_vec(offsets, (1, 1, s), rows.device())?;
        let idx = rows.broadcast_add(&offsets)?.flatten_all()?;
        let picked = table.index_select(&idx, 0)?.reshape((b, r, s, d))?.sum(2)?;
        Ok(picked.broadcast_add(self.row_proj.bias().expect("row projection has a bias"))?)
    }

    /// Reference route: concatenate the slot embeddings, then apply the
    /// projection.
    pub fn compressed_embed_naive(&self, rows: &Tensor) -> Result<Tensor> {
        let (b, r, s) = rows.dims3()?;
        let d = self.cfg.d_emb;
        let e = self.slot_embed.index_select(&rows.flatten_all()?, 0)?.reshape((b, r, s * d))?;
        Ok(self.row_proj.forward(&e)?)
    }

    fn encoder_inputs(&self, batch: &EncoderBatch) -> Result<Tensor> {
        let rows = self.compressed_embed(&batch.rows)?;
        let ind = self.indicator.index_select(&batch.indicator, 0)?.unsqueeze(1)?;
        Ok(Tensor::cat(&[&ind, &rows], 1)?)
    }

    pub fn encode(&self, batch: &EncoderBatch) -> Result<Memory> {
        Ok(self.encode_with_attention(batch)?.0)
    }

    fn encode_with_attention(&self, batch: &EncoderBatch) -> Result<(Memory, Vec<Tensor>)> {
        let bias = batch.key_bias()?.to_dtype(self.dtype())?;
        let mut x = self.encoder_inputs(batch)?;
        let mut maps = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            let (y, probs) = block.forward(&x, &bias)?;
            x = y;
            maps.push(probs);
        }
        let states = self.enc_norm.forward(&x)?;
        Ok((Memory { states, bias }, maps))
    }

    fn causal_bias(&self, t: usize) -> Result<Tensor> {
        let v: Vec<f32> = (0..t)
            .flat_map(|i| (0..t).map(move |j| if j > i { NEG_INF as f32 } else { 0.0 }))
            .collect();
        Ok(Tensor::from_vec(v, (1, 1, t, t), self.device())?.to_dtype(self.dtype())?)
    }

    /// Logits `[B, T, V]` for every prefix position of `tokens` `[B, T]`.
    pub fn decode(&self, memory: &Memory, tokens: &Tensor) -> Result<Tensor> {
        let (b, t) = tokens.dims2()?;
        if t > self.cfg.positions() {
            return Err(ModelError::Length {
                len: t,
                limit: self.cfg.positions(),
            });
        }
        if memory.batch_size() != b {
            return Err(ModelError::Config("memory and prefix batch sizes differ".into()));
        }
        let tok = self.tok_embed.index_select(&tokens.flatten_all()?, 0)?.reshape((b, t, self.cfg.d_emb))?;
        let pos = self.pos_embed.i(0..t)?.unsqueeze(0)?;
        let mut x = tok.broadcast_add(&pos)?;
        let causal = self.causal_bias(t)?;
        for block in &self.decoder {
            x = block.forward(&x, &memory.states, &causal, &memory.bias)?;
        }
        Ok(self.out.forward(&self.dec_norm.forward(&x)?)?)
    }

    /// Next-token logits `[B, V]` after `prefix` `[B, T]`.
    pub fn decode_step(&self, memory: &Memory, prefix: &Tensor) -> Result<Tensor> {
        let (_, t) = prefix.dims2()?;
        if t == 0 || t >= self.cfg.positions() {
            return Err(ModelError::Length {
                len: t,
                limit: self.cfg.positions() - 1,
            });
        }
        let logits = self.decode(memory, prefix)?;
        Ok(logits.i((.., t - 1, ..))?.contiguous()?)
    }

    /// Mean token cross-entropy under teacher forcing, PAD labels excluded.
    pub fn loss(&self, enc: &EncoderBatch, targets: &TargetBatch) -> Result<Tensor> {
        let memory = self.encode(enc)?;
        let logits = self.decode(&memory, &targets.inputs)?;
        let (b, t, v) = logits.dims3()?;
        let logp = log_softmax(&logits.reshape((b * t, v))?, D::Minus1)?;
        let picked = logp.gather(&targets.labels.flatten_all()?.unsqueeze(1)?, 1)?.squeeze(1)?;
        let mask = targets.label_mask.flatten_all()?;
        let count = mask.sum_all()?;
        Ok((picked * &mask)?.sum_all()?.neg()?.div(&count)?)
    }

    /// Encoder self-attention maps of a single example, one `N × N` matrix
    /// per layer and head over the positions actually present.
    pub fn dump_attention(&self, input: &EncoderInput) -> Result<Vec<Vec<Vec<Vec<f32>>>>> {
        let batch = EncoderBatch::new(std::slice::from_ref(input), &self.vocab, self.dtype(), self.device())?;
        let (_, maps) = self.encode_with_attention(&batch)?;
        let start = if input.minority.is_some() { 0 } else { 1 };
        let end = 1 + input.rows.len();
        let mut layers = Vec::with_capacity(maps.len());
        for m in maps {
            let m = m.i((0, .., start..end, start..end))?.to_dtype(DType::F32)?;
            layers.push(m.to_vec3::<f32>()?);
        }
        Ok(layers)
    }
}
