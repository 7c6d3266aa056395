//! Training loop: fresh generated batches or a replayed JSONL file, AdamW
//! under the warmup/plateau/cooldown schedule, periodic checkpoints and a
//! loss curve.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use logicsr_core::data::{make_example, Example, NoiseConfig};
use logicsr_core::encoding::EncoderInput;
use logicsr_core::rng::sample_rng;
use logicsr_core::{Generator, GeneratorConfig, Regime};

use crate::checkpoint::{Checkpoint, TrainingState};
use crate::config::ModelConfig;
use crate::model::{EncoderBatch, Model, TargetBatch};
use crate::optim::{AdamW, AdamWConfig};
use crate::params::Params;
use crate::schedule::LrSchedule;
use crate::{ModelError, Result};

/// Stream index reserved for the fixed validation examples.
const VALIDATION_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// 5,000 warmup steps and a plateau to step 65,000.
    Full,
    /// Segments proportional to the run length.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    pub schedule: ScheduleKind,
    /// Explicit `(warmup, plateau_end)`, overriding `schedule`.
    #[serde(default)]
    pub schedule_override: Option<(u64, u64)>,
    pub checkpoint_every: u64,
    #[serde(default)]
    pub validation_examples: usize,
    #[serde(default)]
    pub validate_every: u64,
}

impl TrainConfig {
    /// Desk-size noiseless run over small tables.
    pub fn desk_noiseless(d_max: usize, b_max: usize, steps: u64) -> Self {
        TrainConfig {
            model: ModelConfig::desk(d_max, Regime::Noiseless),
            generator: GeneratorConfig {
                d_max,
                s_max: d_max,
                b_max,
                p_not: 0.5,
                regime: Regime::Noiseless,
            },
            noise: NoiseConfig::noiseless(),
            batch_size: 128,
            steps,
            seed: 0,
            optimizer: AdamWConfig::default(),
            schedule: ScheduleKind::Scaled,
            schedule_override: None,
            checkpoint_every: 500,
            validation_examples: 512,
            validate_every: 250,
        }
    }

    pub fn lr_schedule(&self) -> Result<LrSchedule> {
        match (self.schedule_override, self.schedule) {
            (Some((w, p)), _) => LrSchedule::custom(w, p, self.steps),
            (None, ScheduleKind::Full) => LrSchedule::full(self.steps),
            (None, ScheduleKind::Scaled) => LrSchedule::scaled(self.steps),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.generator.validate()?;
        self.noise.validate()?;
        self.lr_schedule()?;
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be positive".into()));
        }
        if self.generator.regime != self.model.regime {
            return Err(ModelError::Config("generator and model regimes differ".into()));
        }
        if self.generator.d_max > self.model.d_max {
            return Err(ModelError::Config(format!(
                "generator produces up to {} inputs, the model reads {}",
                self.generator.d_max, self.model.d_max
            )));
        }
        Ok(())
    }
}

/// Where training examples come from. Example `i` of a run is always the
/// same: a fresh sample seeded by `(seed, i)`, or line `i mod n` of a file.
pub enum DataSource {
    Generated(Generator),
    Replay(Vec<Example>),
}

impl DataSource {
    pub fn generated(cfg: &TrainConfig) -> Result<Self> {
        Ok(DataSource::Generated(Generator::new(cfg.generator.clone())?))
    }

    fn example(&self, cfg: &TrainConfig, index: u64) -> Example {
        match self {
            DataSource::Generated(g) => make_example(g, &cfg.noise, &mut sample_rng(cfg.seed, 0, index)),
            DataSource::Replay(v) => v[(index % v.len() as u64) as usize].clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

pub struct Trainer {
    cfg: TrainConfig,
    schedule: LrSchedule,
    model: Model,
    params: Params,
    opt: AdamW,
    source: DataSource,
    validation: Vec<(EncoderInput, Vec<u32>)>,
    state: TrainingState,
}

fn encode(model: &Model, ex: &Example) -> Result<(EncoderInput, Vec<u32>)> {
    Ok((model.encoder_input(&ex.observations)?, model.vocab().encode_target(&ex.target)?))
}

impl Trainer {
    pub fn new(cfg: TrainConfig, source: DataSource) -> Result<Self> {
        cfg.validate()?;
        if let DataSource::Replay(v) = &source {
            if v.is_empty() {
                return Err(ModelError::Config("replay file has no examples".into()));
            }
        }
        let mut params = Params::new(cfg.seed, DType::F32, Device::Cpu);
        let model = Model::new(cfg.model.clone(), &mut params)?;
        let opt = AdamW::new(cfg.optimizer);
        Self::assemble(cfg, model, params, opt, source, TrainingState::default())
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(ckpt: &Checkpoint, source: DataSource) -> Result<Self> {
        let json = ckpt
            .state
            .train_config
            .as_ref()
            .ok_or_else(|| ModelError::Checkpoint("checkpoint has no training configuration".into()))?;
        let cfg: TrainConfig = serde_json::from_str(json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        cfg.validate()?;
        let (model, params) = ckpt.model(DType::F32, &Device::Cpu)?;
        let opt = AdamW::from_state(cfg.optimizer, ckpt.state.optimizer_steps, ckpt.optimizer.clone());
        Self::assemble(cfg, model, params, opt, source, ckpt.state.clone())
    }

    fn assemble(
        cfg: TrainConfig,
        model: Model,
        params: Params,
        opt: AdamW,
        source: DataSource,
        state: TrainingState,
    ) -> Result<Self> {
        let schedule = cfg.lr_schedule()?;
        let validation = match &source {
            DataSource::Generated(g) => (0..cfg.validation_examples as u64)
                .map(|i| {
                    let ex = make_example(g, &cfg.noise, &mut sample_rng(cfg.seed, VALIDATION_STREAM, i));
                    encode(&model, &ex)
                })
                .collect::<Result<Vec<_>>>()?,
            DataSource::Replay(_) => Vec::new(),
        };
        Ok(Trainer {
            cfg,
            schedule,
            model,
            params,
            opt,
            source,
            validation,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn schedule(&self) -> &LrSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &TrainingState {
        &self.state
    }

    pub fn finished(&self) -> bool {
        self.state.step >= self.cfg.steps
    }

    fn batch(&self, step: u64) -> Result<(EncoderBatch, TargetBatch)> {
        let b = self.cfg.batch_size as u64;
        let mut inputs = Vec::with_capacity(b as usize);
        let mut targets = Vec::with_capacity(b as usize);
        for i in step * b..(step + 1) * b {
            let (x, y) = encode(&self.model, &self.source.example(&self.cfg, i))?;
            inputs.push(x);
            targets.push(y);
        }
        self.tensors(&inputs, &targets)
    }

    fn tensors(&self, inputs: &[EncoderInput], targets: &[Vec<u32>]) -> Result<(EncoderBatch, TargetBatch)> {
        let dev = self.model.device();
        Ok((
            EncoderBatch::new(inputs, self.model.vocab(), DType::F32, dev)?,
            TargetBatch::new(targets, DType::F32, dev)?,
        ))
    }

    /// Loss of the next batch without updating anything.
    pub fn peek_loss(&self) -> Result<f64> {
        let (enc, tgt) = self.batch(self.state.step)?;
        Ok(self.model.loss(&enc, &tgt)?.to_scalar::<f32>()? as f64)
    }

    /// Mean loss over the fixed validation examples.
    pub fn validation_loss(&self) -> Result<Option<f64>> {
        if self.validation.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        let mut tokens = 0.0;
        for chunk in self.validation.chunks(self.cfg.batch_size) {
            let (x, y): (Vec<_>, Vec<_>) = chunk.iter().cloned().unzip();
            let (enc, tgt) = self.tensors(&x, &y)?;
            let n = tgt.label_mask.sum_all()?.to_scalar::<f32>()? as f64;
            total += self.model.loss(&enc, &tgt)?.to_scalar::<f32>()? as f64 * n;
            tokens += n;
        }
        Ok(Some(total / tokens))
    }

    pub fn step(&mut self, snapshot_dir: Option<&Path>) -> Result<StepReport> {
        let step = self.state.step;
        let lr = self.schedule.at(step);
        let (enc, tgt) = self.batch(step)?;
        let loss = self.model.loss(&enc, &tgt)?;
        let value = loss.to_scalar::<f32>()? as f64;
        if !value.is_finite() {
            let dir = snapshot_dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
            let path = dir.join(format!("nonfinite-step{step}.safetensors"));
            self.checkpoint().save(&path)?;
            return Err(ModelError::NonFinite {
                step,
                snapshot: path.display().to_string(),
            });
        }
        let grads = loss.backward()?;
        let stats = self.opt.step(&self.params, &grads, lr)?;
        self.state.step += 1;
        self.state.examples_seen += self.cfg.batch_size as u64;
        self.state.optimizer_steps = self.opt.steps_taken();
        Ok(StepReport {
            step,
            lr,
            loss: value,
            grad_norm: stats.grad_norm,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut state = self.state.clone();
        state.train_config = serde_json::to_string(&self.cfg).ok();
        Checkpoint {
            config: self.cfg.model.clone(),
            vocab: *self.model.vocab(),
            params: self.params.tensors(),
            optimizer: self.opt.state(),
            state,
        }
    }

    /// Trains to the configured step count, writing `loss.csv`,
    /// `validation.csv`, periodic `checkpoint-<step>.safetensors` and a
    /// rolling `latest.safetensors` into `out`.
    pub fn run(&mut self, out: &Path, mut progress: impl FnMut(&StepReport)) -> Result<PathBuf> {
        std::fs::create_dir_all(out)?;
        let mut loss_csv = append_csv(&out.join("loss.csv"), "step,lr,loss")?;
        let mut valid_csv = append_csv(&out.join("validation.csv"), "step,loss")?;
        let latest = out.join("latest.safetensors");
        while !self.finished() {
            if self.cfg.validate_every > 0 && self.state.step % self.cfg.validate_every == 0 {
                if let Some(v) = self.validation_loss()? {
                    writeln!(valid_csv, "{},{v}", self.state.step)?;
                    valid_csv.flush()?;
                }
            }
            let r = self.step(Some(out))?;
            writeln!(loss_csv, "{},{},{}", r.step, r.lr, r.loss)?;
            progress(&r);
            if self.cfg.checkpoint_every > 0 && self.state.step % self.cfg.checkpoint_every == 0 {
                loss_csv.flush()?;
                let ckpt = self.checkpoint();
                ckpt.save(&out.join(format!("checkpoint-{}.safetensors", self.state.step)))?;
                ckpt.save(&latest)?;
            }
        }
        loss_csv.flush()?;
        if let Some(v) = self.validation_loss()? {
            writeln!(valid_csv, "{},{v}", self.state.step)?;
        }
        self.checkpoint().save(&latest)?;
        Ok(latest)
    }
}

fn append_csv(path: &Path, header: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    let fresh = !path.exists();
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = std::io::BufWriter::new(f);
    if fresh {
        writeln!(w, "{header}")?;
    }
    Ok(w)
}
