//! Self-describing checkpoint files: a safetensors archive whose header
//! carries the format version, model configuration, vocabulary and training
//! progress.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use logicsr_core::encoding::Vocabulary;

use crate::config::ModelConfig;
use crate::model::Model;
use crate::params::Params;
use crate::{ModelError, Result};

pub const FORMAT: &str = "logicsr-checkpoint";
pub const VERSION: u32 = 1;

const PARAM_PREFIX: &str = "param.";
const OPTIM_PREFIX: &str = "optim.";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub step: u64,
    pub examples_seen: u64,
    /// Optimizer steps taken, for bias correction on resume.
    pub optimizer_steps: u64,
    /// Training configuration as JSON, if the checkpoint came from a run.
    pub train_config: Option<String>,
}

pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: BTreeMap<String, Tensor>,
    pub optimizer: BTreeMap<String, Tensor>,
    pub state: TrainingState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = HashMap::new();
        meta.insert("format".to_string(), FORMAT.to_string());
        meta.insert("version".to_string(), VERSION.to_string());
        meta.insert("model_config".to_string(), to_json(&self.config)?);
        meta.insert("vocabulary".to_string(), self.vocab.to_text());
        meta.insert("training".to_string(), to_json(&self.state)?);
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        for (k, t) in &self.params {
            tensors.push((format!("{PARAM_PREFIX}{k}"), t.to_dtype(DType::F32)?.contiguous()?));
        }
        for (k, t) in &self.optimizer {
            tensors.push((format!("{OPTIM_PREFIX}{k}"), t.to_dtype(DType::F32)?.contiguous()?));
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let tmp = path.with_extension("tmp");
        safetensors::serialize_to_file(tensors, Some(meta), &tmp)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        let meta = header
            .metadata()
            .clone()
            .ok_or_else(|| ModelError::Checkpoint("missing header metadata".into()))?;
        let field = |k: &str| {
            meta.get(k)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing header field `{k}`")))
        };
        if field("format")? != FORMAT {
            return Err(ModelError::Checkpoint("not a model checkpoint".into()));
        }
        let version: u32 = field("version")?
            .parse()
            .map_err(|_| ModelError::Checkpoint("unreadable version".into()))?;
        if version != VERSION {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint version {version}, this build reads version {VERSION}"
            )));
        }
        let config: ModelConfig = from_json(field("model_config")?)?;
        let vocab = Vocabulary::from_text(field("vocabulary")?)?;
        let state: TrainingState = from_json(field("training")?)?;
        if vocab != Vocabulary::new(config.d_max) {
            return Err(ModelError::Checkpoint("vocabulary does not match the model configuration".into()));
        }
        let mut params = BTreeMap::new();
        let mut optimizer = BTreeMap::new();
        for (k, t) in candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)? {
            if let Some(name) = k.strip_prefix(PARAM_PREFIX) {
                params.insert(name.to_string(), t);
            } else if let Some(name) = k.strip_prefix(OPTIM_PREFIX) {
                optimizer.insert(name.to_string(), t);
            }
        }
        Ok(Checkpoint {
            config,
            vocab,
            params,
            optimizer,
            state,
        })
    }

    /// Rebuilds the model; every parameter must come from the file.
    pub fn model(&self, dtype: DType, device: &Device) -> Result<(Model, Params)> {
        let mut params = Params::from_tensors(self.params.clone(), dtype, device.clone())?;
        let before = params.parameter_count();
        let model = Model::new(self.config.clone(), &mut params)?;
        if params.parameter_count() != before || params.vars().len() != self.params.len() {
            return Err(ModelError::Checkpoint(
                "checkpoint parameters do not match the model layout".into(),
            ));
        }
        Ok((model, params))
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

fn from_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| ModelError::Checkpoint(e.to_string()))
}
