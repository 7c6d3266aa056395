//! AdamW with decoupled weight decay and global-norm gradient clipping.
//! Moment estimates are kept by parameter name so they can be checkpointed.

use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::params::Params;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
        }
    }
}

pub struct AdamW {
    cfg: AdamWConfig,
    step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub grad_norm: f64,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Self {
        AdamW {
            cfg,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &Params, grads: &GradStore, lr: f64) -> Result<StepStats> {
        let mut sq = 0.0;
        let mut present = Vec::new();
        for (name, var) in params.vars() {
            if let Some(g) = grads.get(var.as_tensor()) {
                sq += g.to_dtype(DType::F64)?.sqr()?.sum_all()?.to_scalar::<f64>()?;
                present.push((name, var, g));
            }
        }
        let grad_norm = sq.sqrt();
        let scale = match self.cfg.clip_norm {
            Some(c) if grad_norm > c => c / (grad_norm + 1e-6),
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (name, var, g) in present {
            let g = (g * scale)?;
            let m = match self.m.get(name) {
                Some(m) => ((m * b1)? + (&g * (1.0 - b1))?)?,
                None => (&g * (1.0 - b1))?,
            };
            let v = match self.v.get(name) {
                Some(v) => ((v * b2)? + (g.sqr()? * (1.0 - b2))?)?,
                None => (g.sqr()? * (1.0 - b2))?,
            };
            let update = ((&m / c1)? / ((&v / c2)?.sqrt()? + self.cfg.eps)?)?;
            let theta = var.as_tensor();
            // Decay only matrices, not biases, gains and embeddings of rank 1.
            let decayed = if theta.rank() >= 2 {
                (theta * (1.0 - lr * self.cfg.weight_decay))?
            } else {
                theta.clone()
            };
            var.set(&(decayed - (update * lr)?)?)?;
            self.m.insert(name.clone(), m);
            self.v.insert(name.clone(), v);
        }
        Ok(StepStats { grad_norm })
    }

    /// Moments as named tensors, for checkpoints.
    pub fn state(&self) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for (k, t) in &self.m {
            out.insert(format!("m.{k}"), t.clone());
        }
        for (k, t) in &self.v {
            out.insert(format!("v.{k}"), t.clone());
        }
        out
    }

    pub fn from_state(cfg: AdamWConfig, step: u64, state: BTreeMap<String, Tensor>) -> Self {
        let mut opt = AdamW::new(cfg);
        opt.step = step;
        for (k, t) in state {
            if let Some(name) = k.strip_prefix("m.") {
                opt.m.insert(name.to_string(), t);
            } else if let Some(name) = k.strip_prefix("v.") {
                opt.v.insert(name.to_string(), t);
            }
        }
        opt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;
    use candle_core::Device;

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Params::new(0, DType::F32, Device::Cpu);
        let x = p.get("x", &[3], Init::Const(2.0)).unwrap();
        let mut opt = AdamW::new(AdamWConfig {
            clip_norm: None,
            ..Default::default()
        });
        for _ in 0..500 {
            let loss = x.sqr().unwrap().sum_all().unwrap();
            let g = loss.backward().unwrap();
            opt.step(&p, &g, 0.05).unwrap();
        }
        let v: Vec<f32> = p.var("x").unwrap().as_tensor().to_vec1().unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-2), "{v:?}");
    }

    #[test]
    fn clipping_reports_the_raw_norm() {
        let mut p = Params::new(0, DType::F32, Device::Cpu);
        let x = p.get("x", &[4], Init::Const(1.0)).unwrap();
        let mut opt = AdamW::new(AdamWConfig::default());
        let loss = (x.sum_all().unwrap() * 10.0).unwrap();
        let g = loss.backward().unwrap();
        let s = opt.step(&p, &g, 1e-3).unwrap();
        assert!((s.grad_norm - 20.0).abs() < 1e-4);
    }
}
