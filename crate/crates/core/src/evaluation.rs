//! Accuracy metrics, sweeps over difficulty factors, the memorization probe
//! and length generalization.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{make_example_with, random_walk_sample, GeneratedExample, NoiseConfig, ObservationSet};
use crate::error::{Error, Result};
use crate::formula::{Formula, TruthTable};
use crate::generator::{Generator, GeneratorConfig, Regime, SampleSpec};
use crate::predictor::{predict, Candidate, Predictor};
use crate::rng::sample_rng;

/// Fraction of observations on which `f` agrees with the recorded output.
pub fn accuracy(f: &Formula, obs: &ObservationSet) -> Result<f64> {
    if let Some(v) = f.max_var() {
        if v >= obs.dim() {
            return Err(Error::DimensionMismatch { index: v, dim: obs.dim() });
        }
    }
    let hits = obs.iter().filter(|(p, y)| f.eval(p.bits()) == *y).count();
    Ok(hits as f64 / obs.len() as f64)
}

pub fn perfect_recovery(acc: f64) -> bool {
    acc == 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTest {
    pub candidate: Candidate,
    pub fitting: f64,
    /// `None` in the noiseless regime, where the full table is the input.
    pub test: Option<f64>,
}

/// Predicts on the example's observations and, in the noisy regime, scores
/// the prediction on a fresh walk of the same length and flip rate labelled
/// by the clean target.
pub fn fitting_vs_test<P, R>(example: &GeneratedExample, predictor: &mut P, rng: &mut R) -> Result<FitTest>
where
    P: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    let obs = &example.example.observations;
    let candidate = predict(predictor, obs)?;
    let fitting = candidate.fitting_accuracy;
    let test = match example.example.regime {
        Regime::Noiseless => None,
        Regime::Noisy => {
            let points = random_walk_sample(obs.dim(), obs.len(), example.gamma, rng);
            let fresh = ObservationSet::from_formula(&example.example.target, obs.dim(), points)?;
            Some(accuracy(&candidate.formula, &fresh)?)
        }
    };
    Ok(FitTest {
        candidate,
        fitting,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "gates")]
    Gates,
    #[serde(rename = "active_vars")]
    ActiveVars,
    #[serde(rename = "N")]
    Points,
    #[serde(rename = "flip_rate")]
    FlipRate,
    #[serde(rename = "inactive_vars")]
    InactiveVars,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::Gates,
        SweepAxis::ActiveVars,
        SweepAxis::Points,
        SweepAxis::FlipRate,
        SweepAxis::InactiveVars,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gates => "gates",
            SweepAxis::ActiveVars => "active_vars",
            SweepAxis::Points => "N",
            SweepAxis::FlipRate => "flip_rate",
            SweepAxis::InactiveVars => "inactive_vars",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub noise: NoiseConfig,
}

impl SweepConfig {
    pub fn new(axis: SweepAxis, grid: Vec<f64>, generator: GeneratorConfig) -> Self {
        let noise = match generator.regime {
            Regime::Noiseless => NoiseConfig::noiseless(),
            Regime::Noisy => NoiseConfig::default(),
        };
        SweepConfig {
            axis,
            grid,
            samples: 10_000,
            seed: 0,
            generator,
            noise,
        }
    }
}

/// One grid point of a sweep. Failed predictions count as zero accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub samples: usize,
    pub failed: usize,
    pub fitting_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub fitting_recovery: f64,
    pub test_recovery: Option<f64>,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Config(format!("{axis} grid values must be non-negative integers, got {v}")));
    }
    Ok(v as usize)
}

/// Sample overrides and noise settings for one grid point and sample.
fn grid_point<R: Rng + ?Sized>(
    cfg: &SweepConfig,
    value: f64,
    rng: &mut R,
) -> Result<(SampleSpec, NoiseConfig)> {
    let g = &cfg.generator;
    let noiseless = g.regime == Regime::Noiseless;
    let mut noise = cfg.noise.clone();
    let mut spec = SampleSpec::default();
    let draw_active = |dim: usize, rng: &mut R| {
        if noiseless {
            dim
        } else {
            rng.random_range(1..=dim.min(g.s_max))
        }
    };
    match cfg.axis {
        SweepAxis::Gates => {
            let ops = as_count(cfg.axis, value)?;
            let dim = rng.random_range(1..=g.d_max.min(ops + 1));
            let active = draw_active(dim, rng).min(ops + 1);
            spec = SampleSpec {
                dim: Some(dim),
                active_count: Some(active),
                active_set: None,
                ops: Some(ops),
            };
        }
        SweepAxis::ActiveVars => {
            let s = as_count(cfg.axis, value)?;
            if s == 0 || s > g.max_active() {
                return Err(Error::Config(format!("active_vars {s} outside [1, {}]", g.max_active())));
            }
            let dim = if noiseless { s } else { rng.random_range(s..=g.d_max) };
            spec.dim = Some(dim);
            spec.active_count = Some(s);
        }
        SweepAxis::Points => {
            if noiseless {
                return Err(Error::Config("the N axis needs the noisy regime".into()));
            }
            let n = as_count(cfg.axis, value)?;
            if n == 0 {
                return Err(Error::Config("N must be positive".into()));
            }
            noise.n_range = (n, n);
        }
        SweepAxis::FlipRate => {
            if noiseless && value != 0.0 {
                return Err(Error::Config("flip noise needs the noisy regime".into()));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("flip rate {value} outside [0, 1]")));
            }
            noise.sigma_range = (value, value);
        }
        SweepAxis::InactiveVars => {
            if noiseless {
                return Err(Error::Config("inactive variables need the noisy regime".into()));
            }
            let extra = as_count(cfg.axis, value)?;
            if extra + 1 > g.d_max {
                return Err(Error::Config(format!("{extra} inactive variables exceed D_max = {}", g.d_max)));
            }
            let active = rng.random_range(1..=g.s_max.min(g.d_max - extra));
            spec.dim = Some(active + extra);
            spec.active_count = Some(active);
        }
    }
    Ok((spec, noise))
}

/// Evaluates `predictor` on `cfg.samples` generated examples per grid value.
/// Sample `i` uses the same random stream at every grid value, so factors
/// that do not influence the target (N, flip rate) are compared on paired
/// targets.
pub fn sweep<P: Predictor + ?Sized>(predictor: &mut P, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.noise.validate()?;
    let generator = Generator::new(cfg.generator.clone())?;
    let noisy = cfg.generator.regime == Regime::Noisy;
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for &value in &cfg.grid {
        let mut fit_sum = 0.0;
        let mut test_sum = 0.0;
        let mut fit_perfect = 0usize;
        let mut test_perfect = 0usize;
        let mut failed = 0usize;
        for i in 0..cfg.samples {
            let mut rng = sample_rng(cfg.seed, 0, i as u64);
            let (spec, noise) = grid_point(cfg, value, &mut rng)?;
            let example = make_example_with(&generator, &noise, &spec, &mut rng);
            match fitting_vs_test(&example, predictor, &mut rng) {
                Ok(r) => {
                    fit_sum += r.fitting;
                    fit_perfect += perfect_recovery(r.fitting) as usize;
                    if let Some(t) = r.test {
                        test_sum += t;
                        test_perfect += perfect_recovery(t) as usize;
                    }
                }
                Err(Error::NoCandidate { .. }) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        let n = cfg.samples.max(1) as f64;
        rows.push(SweepRow {
            axis: cfg.axis,
            value,
            samples: cfg.samples,
            failed,
            fitting_accuracy: fit_sum / n,
            test_accuracy: noisy.then_some(test_sum / n),
            fitting_recovery: fit_perfect as f64 / n,
            test_recovery: noisy.then_some(test_perfect as f64 / n),
        });
    }
    Ok(rows)
}

/// Evaluation at point counts beyond the training range: a sweep over N on
/// paired targets.
pub fn length_generalization<P: Predictor + ?Sized>(
    predictor: &mut P,
    generator: GeneratorConfig,
    noise: NoiseConfig,
    n_values: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let cfg = SweepConfig {
        axis: SweepAxis::Points,
        grid: n_values.iter().map(|&n| n as f64).collect(),
        samples,
        seed,
        generator,
        noise,
    };
    sweep(predictor, &cfg)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub dim: usize,
    /// Distinct functions drawn for this dimension (the target is
    /// `min(2^(2^D), 100)`; fewer when the generator cannot produce that many).
    pub probe_functions: usize,
    /// Epoch examples with this dimension.
    pub epoch_examples: usize,
    pub mean_count: f64,
}

pub const PROBE_FUNCTIONS: usize = 100;

/// For each dimension `D`, draws up to `min(2^(2^D), 100)` distinct
/// functions from the generator and reports how often, on average, their
/// truth tables occur in one epoch of `epoch_size` generator samples.
pub fn memorization_probe(cfg: &GeneratorConfig, epoch_size: usize, seed: u64) -> Result<Vec<ProbeRow>> {
    let generator = Generator::new(cfg.clone())?;
    let mut epoch: HashMap<TruthTable, usize> = HashMap::new();
    let mut per_dim = vec![0usize; cfg.d_max + 1];
    for i in 0..epoch_size {
        let mut rng = sample_rng(seed, 0, i as u64);
        let (f, meta) = generator.sample_formula(&mut rng);
        *epoch.entry(f.truth_table(meta.dim)?).or_default() += 1;
        per_dim[meta.dim] += 1;
    }

    let mut rows = Vec::new();
    for dim in 1..=cfg.d_max {
        let wanted = if dim < 3 { (1usize << (1 << dim)).min(PROBE_FUNCTIONS) } else { PROBE_FUNCTIONS };
        let spec = SampleSpec {
            dim: Some(dim),
            ..Default::default()
        };
        let mut rng = sample_rng(seed, 1 + dim as u64, 0);
        let mut probe: HashSet<TruthTable> = HashSet::new();
        // stop once new functions stop turning up
        let mut misses = 0;
        while probe.len() < wanted && misses < 50 * wanted {
            let (f, _) = generator.sample_with(&spec, &mut rng);
            if probe.insert(f.truth_table(dim)?) {
                misses = 0;
            } else {
                misses += 1;
            }
        }
        let total: usize = probe.iter().map(|t| epoch.get(t).copied().unwrap_or(0)).sum();
        rows.push(ProbeRow {
            dim,
            probe_functions: probe.len(),
            epoch_examples: per_dim[dim],
            mean_count: total as f64 / probe.len().max(1) as f64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::FixedPredictor;
    use crate::rng::seeded;

    fn v(i: usize) -> Formula {
        Formula::var(i)
    }

    #[test]
    fn accuracy_examples() {
        let target = Formula::or(vec![v(0), v(1)]);
        let obs = ObservationSet::full_table(&target, 2).unwrap();
        assert_eq!(accuracy(&target, &obs).unwrap(), 1.0);
        assert_eq!(accuracy(&Formula::not(target.clone()), &obs).unwrap(), 0.0);
        let balanced = ObservationSet::full_table(&v(0), 2).unwrap();
        assert_eq!(accuracy(&Formula::constant(false), &balanced).unwrap(), 0.5);
        assert!(accuracy(&v(2), &obs).is_err());
    }

    #[test]
    fn recovery_is_exact() {
        assert!(perfect_recovery(1.0));
        assert!(!perfect_recovery(0.999));
        assert!(!perfect_recovery(0.0));
    }

    fn noisy_example(sigma: f64, seed: u64) -> GeneratedExample {
        let g = Generator::new(GeneratorConfig {
            d_max: 6,
            ..GeneratorConfig::noisy()
        })
        .unwrap();
        let noise = NoiseConfig {
            sigma_range: (sigma, sigma),
            ..Default::default()
        };
        make_example_with(&g, &noise, &SampleSpec::default(), &mut seeded(seed))
    }

    #[test]
    fn exact_target_noiseless_and_clean() {
        let ex = noisy_example(0.0, 3);
        let mut p = FixedPredictor(vec![ex.example.target.clone()]);
        let r = fitting_vs_test(&ex, &mut p, &mut seeded(4)).unwrap();
        assert_eq!((r.fitting, r.test), (1.0, Some(1.0)));

        let g = Generator::new(GeneratorConfig {
            d_max: 4,
            s_max: 4,
            ..GeneratorConfig::noiseless()
        })
        .unwrap();
        let ex = make_example_with(&g, &NoiseConfig::noiseless(), &SampleSpec::default(), &mut seeded(5));
        let mut p = FixedPredictor(vec![ex.example.target.clone()]);
        let r = fitting_vs_test(&ex, &mut p, &mut seeded(6)).unwrap();
        assert_eq!((r.fitting, r.test), (1.0, None));
    }

    #[test]
    fn noise_only_hurts_fitting() {
        let mut below = 0;
        for seed in 0..20 {
            let ex = noisy_example(0.1, seed);
            let mut p = FixedPredictor(vec![ex.example.target.clone()]);
            let r = fitting_vs_test(&ex, &mut p, &mut seeded(100 + seed)).unwrap();
            assert_eq!(r.test, Some(1.0));
            below += (r.fitting < 1.0) as usize;
        }
        assert!(below >= 15, "{below}");
    }

    #[test]
    fn single_point_sweep() {
        let mut cfg = SweepConfig::new(
            SweepAxis::FlipRate,
            vec![0.0],
            GeneratorConfig {
                d_max: 6,
                ..GeneratorConfig::noisy()
            },
        );
        cfg.samples = 5;
        let mut p = FixedPredictor(vec![Formula::constant(true)]);
        let rows = sweep(&mut p, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].samples, 5);
        assert!(rows[0].test_accuracy.is_some());
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
    }
}
