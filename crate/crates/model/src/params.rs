//! Named parameter store with seeded initialization.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use logicsr_core::rng::{seeded, SampleRng};

use crate::Result;

#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform on `±1/sqrt(fan_in)`.
    FanIn(usize),
    Normal(f64),
    Const(f64),
}

/// Parameters keyed by dotted path. Requests for names already present
/// return the stored tensor, so a store filled from a checkpoint rebuilds the
/// same model.
pub struct Params {
    vars: BTreeMap<String, Var>,
    rng: SampleRng,
    dtype: DType,
    device: Device,
}

impl Params {
    pub fn new(seed: u64, dtype: DType, device: Device) -> Self {
        Params {
            vars: BTreeMap::new(),
            rng: seeded(seed),
            dtype,
            device,
        }
    }

    pub fn from_tensors(tensors: BTreeMap<String, Tensor>, dtype: DType, device: Device) -> Result<Self> {
        let vars = tensors
            .into_iter()
            .map(|(k, t)| Ok((k, Var::from_tensor(&t.to_dtype(dtype)?.to_device(&device)?)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Params {
            vars,
            rng: seeded(0),
            dtype,
            device,
        })
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn get(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        if let Some(v) = self.vars.get(name) {
            if v.dims() != shape {
                return Err(crate::ModelError::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    v.dims()
                )));
            }
            return Ok(v.as_tensor().clone());
        }
        let n: usize = shape.iter().product();
        let values: Vec<f64> = match init {
            Init::FanIn(fan_in) => {
                let a = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| self.rng.random_range(-a..a)).collect()
            }
            Init::Normal(std) => {
                let d = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| d.sample(&mut self.rng)).collect()
            }
            Init::Const(c) => vec![c; n],
        };
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.vars.insert(name.to_string(), var);
        Ok(out)
    }

    pub fn vars(&self) -> &BTreeMap<String, Var> {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn tensors(&self) -> BTreeMap<String, Tensor> {
        self.vars.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Deep copy converted to `dtype`.
    pub fn converted(&self, dtype: DType) -> Result<Params> {
        let tensors = self
            .vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().to_dtype(dtype)?.copy()?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Params::from_tensors(tensors, dtype, self.device.clone())
    }
}
