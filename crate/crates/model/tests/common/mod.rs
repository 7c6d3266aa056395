#![allow(dead_code)]

use candle_core::{DType, Device};
use rand::Rng;

use logicsr_core::data::{make_example, Example, NoiseConfig};
use logicsr_core::rng::sample_rng;
use logicsr_core::{Generator, GeneratorConfig, Regime};
use logicsr_model::{ModelConfig, Model, Params};

pub fn tiny_config(d_max: usize, regime: Regime) -> ModelConfig {
    ModelConfig {
        d_max,
        enc_layers: 2,
        dec_layers: 2,
        heads: 2,
        d_emb: 16,
        ff_mult: 4,
        max_target_len: 200,
        regime,
    }
}

pub fn build(cfg: ModelConfig, seed: u64, dtype: DType) -> (Model, Params) {
    let mut p = Params::new(seed, dtype, Device::Cpu);
    let m = Model::new(cfg, &mut p).unwrap();
    (m, p)
}

pub fn generator(d_max: usize, regime: Regime) -> Generator {
    let cfg = match regime {
        Regime::Noiseless => GeneratorConfig {
            d_max,
            s_max: d_max,
            b_max: 15,
            ..GeneratorConfig::noiseless()
        },
        Regime::Noisy => GeneratorConfig {
            d_max,
            s_max: 3.min(d_max),
            b_max: 10,
            ..GeneratorConfig::noisy()
        },
    };
    Generator::new(cfg).unwrap()
}

pub fn examples(d_max: usize, regime: Regime, count: usize, seed: u64) -> Vec<Example> {
    let g = generator(d_max, regime);
    let noise = match regime {
        Regime::Noiseless => NoiseConfig::noiseless(),
        Regime::Noisy => NoiseConfig {
            n_range: (5, 40),
            ..NoiseConfig::default()
        },
    };
    (0..count as u64)
        .map(|i| make_example(&g, &noise, &mut sample_rng(seed, 0, i)))
        .collect()
}

pub fn shuffled<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    order
}

pub fn max_abs(v: &[f32]) -> f32 {
    v.iter().fold(0.0f32, |m, x| m.max(x.abs()))
}
