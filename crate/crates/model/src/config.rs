use serde::{Deserialize, Serialize};

use logicsr_core::generator::MAX_TARGET_TOKENS;
use logicsr_core::Regime;

use crate::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Largest input dimension; fixes the row width and the variable tokens.
    pub d_max: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub d_emb: usize,
    /// Feed-forward width as a multiple of `d_emb`.
    pub ff_mult: usize,
    /// Longest target in tokens, excluding BOS and EOS.
    pub max_target_len: usize,
    /// Input encoding: compressed full tables or plain observation rows.
    pub regime: Regime,
}

impl ModelConfig {
    /// 8 + 8 layers, 16 heads, width 512.
    pub fn paper(d_max: usize, regime: Regime) -> Self {
        ModelConfig {
            d_max,
            enc_layers: 8,
            dec_layers: 8,
            heads: 16,
            d_emb: 512,
            ff_mult: 4,
            max_target_len: MAX_TARGET_TOKENS,
            regime,
        }
    }

    /// 2 + 2 layers, 4 heads, width 128.
    pub fn desk(d_max: usize, regime: Regime) -> Self {
        ModelConfig {
            d_max,
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            d_emb: 128,
            ff_mult: 4,
            max_target_len: MAX_TARGET_TOKENS,
            regime,
        }
    }

    pub fn preset(name: &str, d_max: usize, regime: Regime) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper(d_max, regime)),
            "desk" => Ok(Self::desk(d_max, regime)),
            other => Err(ModelError::Config(format!("unknown model preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 || self.d_emb == 0 || self.heads == 0 || self.ff_mult == 0 {
            return Err(ModelError::Config("model sizes must be positive".into()));
        }
        if self.d_emb % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "embedding width {} is not divisible by {} heads",
                self.d_emb, self.heads
            )));
        }
        if self.max_target_len == 0 || self.max_target_len > MAX_TARGET_TOKENS {
            return Err(ModelError::Config(format!(
                "target length must lie in [1, {MAX_TARGET_TOKENS}]"
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_emb / self.heads
    }

    /// Decoder positions: BOS, the target, EOS.
    pub fn positions(&self) -> usize {
        self.max_target_len + 2
    }
}
