//! Observation sets and training examples: hypercube sampling, bit-flip
//! noise and the JSONL example format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{parse_bits, Assignment, Formula};
use crate::generator::{Generator, Regime, SampleMetadata, SampleSpec, NOISELESS_MAX_DIM};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSet {
    dim: usize,
    points: Vec<Assignment>,
    outputs: Vec<bool>,
}

impl ObservationSet {
    pub fn new(dim: usize, points: Vec<Assignment>, outputs: Vec<bool>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("an observation set needs at least one point".into()));
        }
        if points.len() != outputs.len() {
            return Err(Error::Invalid(format!(
                "{} points but {} outputs",
                points.len(),
                outputs.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::Invalid(format!(
                "point of length {} in a {dim}-dimensional observation set",
                p.len()
            )));
        }
        Ok(ObservationSet {
            dim,
            points,
            outputs,
        })
    }

    /// Observations of `f` at `points`.
    pub fn from_formula(f: &Formula, dim: usize, points: Vec<Assignment>) -> Result<Self> {
        let outputs = points
            .iter()
            .map(|p| f.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        ObservationSet::new(dim, points, outputs)
    }

    /// The complete truth table of `f` over `dim` variables.
    pub fn full_table(f: &Formula, dim: usize) -> Result<Self> {
        let table = f.truth_table(dim)?;
        let points = full_hypercube(dim)?;
        ObservationSet::new(dim, points, table.to_bits())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Assignment] {
        &self.points
    }

    pub fn outputs(&self) -> &[bool] {
        &self.outputs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Assignment, bool)> {
        self.points.iter().zip(self.outputs.iter().copied())
    }

    /// True when the points are exactly the `2^D` hypercube points in
    /// lexicographic order.
    pub fn is_full_table(&self) -> bool {
        self.dim <= NOISELESS_MAX_DIM
            && self.points.len() == 1 << self.dim
            && self.points.iter().enumerate().all(|(i, p)| p.to_index() == i)
    }

    /// Reorders observations: entry `k` of the result is entry `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> ObservationSet {
        ObservationSet {
            dim: self.dim,
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
            outputs: order.iter().map(|&i| self.outputs[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_range: (f64, f64),
    pub n_range: (usize, usize),
    pub walk_flip_range: (f64, f64),
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_range: (0.0, 0.1),
            n_range: (30, 300),
            walk_flip_range: (0.05, 0.25),
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            sigma_range: (0.0, 0.0),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.sigma_range;
        if !(0.0 <= s0 && s0 <= s1 && s1 <= 1.0) {
            return Err(Error::Config(format!("bad flip-probability range {:?}", self.sigma_range)));
        }
        let (n0, n1) = self.n_range;
        if n0 == 0 || n0 > n1 {
            return Err(Error::Config(format!("bad point-count range {:?}", self.n_range)));
        }
        let (g0, g1) = self.walk_flip_range;
        if !(0.0 < g0 && g0 <= g1 && g1 < 1.0) {
            return Err(Error::Config(format!("bad walk flip range {:?}", self.walk_flip_range)));
        }
        Ok(())
    }

    fn sample_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        uniform_f64(self.sigma_range, rng)
    }

    fn sample_gamma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        uniform_f64(self.walk_flip_range, rng)
    }

    fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.n_range.0..=self.n_range.1)
    }
}

fn uniform_f64<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// All `2^D` points in lexicographic order.
pub fn full_hypercube(dim: usize) -> Result<Vec<Assignment>> {
    if dim > NOISELESS_MAX_DIM {
        return Err(Error::Capacity {
            dim,
            limit: NOISELESS_MAX_DIM,
        });
    }
    Ok((0..1usize << dim).map(|i| Assignment::from_index(i, dim)).collect())
}

/// Random walk on the hypercube: a uniform start, then each coordinate of
/// the previous point flipped independently with probability `gamma`.
pub fn random_walk_sample<R: Rng + ?Sized>(dim: usize, n: usize, gamma: f64, rng: &mut R) -> Vec<Assignment> {
    let mut current: Vec<bool> = (0..dim).map(|_| rng.random_bool(0.5)).collect();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 {
            for b in current.iter_mut() {
                if rng.random_bool(gamma) {
                    *b = !*b;
                }
            }
        }
        out.push(Assignment::new(current.clone()));
    }
    out
}

/// Flips every input and output bit independently with probability `sigma`.
pub fn apply_flip_noise<R: Rng + ?Sized>(obs: &ObservationSet, sigma: f64, rng: &mut R) -> ObservationSet {
    if sigma == 0.0 {
        return obs.clone();
    }
    let mut out = obs.clone();
    for (p, y) in out.points.iter_mut().zip(out.outputs.iter_mut()) {
        for b in p.bits_mut() {
            if rng.random_bool(sigma) {
                *b = !*b;
            }
        }
        if rng.random_bool(sigma) {
            *y = !*y;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub regime: Regime,
    pub observations: ObservationSet,
    pub target: Formula,
}

/// Example together with the quantities drawn while building it.
#[derive(Debug, Clone)]
pub struct GeneratedExample {
    pub example: Example,
    pub meta: SampleMetadata,
    pub sigma: f64,
    pub gamma: f64,
    /// Observations before bit-flip noise.
    pub clean: ObservationSet,
}

pub fn make_example<R: Rng + ?Sized>(generator: &Generator, noise: &NoiseConfig, rng: &mut R) -> Example {
    make_example_with(generator, noise, &SampleSpec::default(), rng).example
}

pub fn make_example_with<R: Rng + ?Sized>(
    generator: &Generator,
    noise: &NoiseConfig,
    spec: &SampleSpec,
    rng: &mut R,
) -> GeneratedExample {
    let regime = generator.config().regime;
    let (target, meta) = generator.sample_with(spec, rng);
    match regime {
        Regime::Noiseless => {
            let observations = ObservationSet::full_table(&target, meta.dim)
                .expect("noiseless dimension is capped by the generator config");
            GeneratedExample {
                example: Example {
                    regime,
                    observations: observations.clone(),
                    target,
                },
                meta,
                sigma: 0.0,
                gamma: 0.0,
                clean: observations,
            }
        }
        Regime::Noisy => {
            let n = noise.sample_n(rng);
            let gamma = noise.sample_gamma(rng);
            let points = random_walk_sample(meta.dim, n, gamma, rng);
            let clean = ObservationSet::from_formula(&target, meta.dim, points)
                .expect("target variables lie inside the sampled dimension");
            let sigma = noise.sample_sigma(rng);
            let observations = apply_flip_noise(&clean, sigma, rng);
            GeneratedExample {
                example: Example {
                    regime,
                    observations,
                    target,
                },
                meta,
                sigma,
                gamma,
                clean,
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    regime: Regime,
    #[serde(rename = "D")]
    dim: usize,
    points: Vec<String>,
    outputs: String,
    target: String,
}

impl Example {
    pub fn to_json_line(&self) -> String {
        let obs = &self.observations;
        let line = ExampleLine {
            regime: self.regime,
            dim: obs.dim,
            points: obs.points.iter().map(|p| p.to_string()).collect(),
            outputs: obs.outputs.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            target: self.target.to_string(),
        };
        serde_json::to_string(&line).expect("example serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Example> {
        let raw: ExampleLine =
            serde_json::from_str(line).map_err(|e| Error::Invalid(format!("malformed example: {e}")))?;
        let points = raw
            .points
            .iter()
            .map(|p| p.parse::<Assignment>())
            .collect::<Result<Vec<_>>>()?;
        let outputs = parse_bits(&raw.outputs)?;
        let observations = ObservationSet::new(raw.dim, points, outputs)?;
        let target: Formula = raw.target.parse()?;
        Ok(Example {
            regime: raw.regime,
            observations,
            target,
        })
    }
}

pub fn write_jsonl<'a>(path: &Path, examples: impl IntoIterator<Item = &'a Example>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in examples {
        writeln!(w, "{}", ex.to_json_line())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads examples; blank lines are skipped and errors carry the 1-based
/// line number.
pub fn read_jsonl(path: &Path) -> Result<Vec<Example>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = Example::from_json_line(&line).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorConfig;
    use crate::rng::seeded;

    #[test]
    fn hypercube_examples() {
        let one = full_hypercube(1).unwrap();
        assert_eq!(one, vec![Assignment::new(vec![false]), Assignment::new(vec![true])]);
        let two: Vec<String> = full_hypercube(2).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(two, ["00", "01", "10", "11"]);
        let ten = full_hypercube(10).unwrap();
        assert_eq!(ten.len(), 1024);
        let distinct: std::collections::HashSet<_> = ten.iter().collect();
        assert_eq!(distinct.len(), 1024);
        assert!(matches!(full_hypercube(11), Err(Error::Capacity { .. })));
    }

    #[test]
    fn degenerate_walks() {
        let mut rng = seeded(2);
        let walk = random_walk_sample(12, 100, 1e-9, &mut rng);
        assert!(walk.iter().all(|p| p == &walk[0]));
        let single = random_walk_sample(5, 1, 0.2, &mut rng);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn walk_flip_rate() {
        let mut rng = seeded(3);
        let (dim, n, gamma) = (20, 10_000, 0.15);
        let walk = random_walk_sample(dim, n, gamma, &mut rng);
        let flips: usize = walk
            .windows(2)
            .map(|w| w[0].bits().iter().zip(w[1].bits()).filter(|(a, b)| a != b).count())
            .sum();
        let trials = (dim * (n - 1)) as f64;
        let rate = flips as f64 / trials;
        let sd = (gamma * (1.0 - gamma) / trials).sqrt();
        assert!((rate - gamma).abs() < 3.0 * sd, "rate {rate}");
    }

    fn sample_obs(rng: &mut crate::rng::SampleRng) -> ObservationSet {
        let points = random_walk_sample(8, 50, 0.2, rng);
        let outputs = (0..50).map(|i| i % 3 == 0).collect();
        ObservationSet::new(8, points, outputs).unwrap()
    }

    #[test]
    fn flip_noise_extremes() {
        let mut rng = seeded(4);
        let obs = sample_obs(&mut rng);
        assert_eq!(apply_flip_noise(&obs, 0.0, &mut rng), obs);
        let inv = apply_flip_noise(&obs, 1.0, &mut rng);
        for ((p, y), (q, z)) in obs.iter().zip(inv.iter()) {
            assert_eq!(y, !z);
            assert!(p.bits().iter().zip(q.bits()).all(|(a, b)| a != b));
        }
    }

    #[test]
    fn flip_noise_rate() {
        let mut rng = seeded(5);
        let dim = 99;
        let points = vec![Assignment::new(vec![false; dim]); 10_000];
        let obs = ObservationSet::new(dim, points, vec![false; 10_000]).unwrap();
        let noisy = apply_flip_noise(&obs, 0.1, &mut rng);
        let flipped: usize = noisy
            .iter()
            .map(|(p, y)| p.bits().iter().filter(|&&b| b).count() + y as usize)
            .sum();
        let trials = 1e6;
        let rate = flipped as f64 / trials;
        let sd = (0.1 * 0.9 / trials).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sd, "rate {rate}");
    }

    #[test]
    fn noiseless_example_is_full_table() {
        let cfg = GeneratorConfig {
            d_max: 3,
            s_max: 3,
            ..GeneratorConfig::noiseless()
        };
        let g = Generator::new(cfg).unwrap();
        let mut rng = seeded(6);
        let spec = SampleSpec {
            dim: Some(3),
            ..Default::default()
        };
        let ex = make_example_with(&g, &NoiseConfig::default(), &spec, &mut rng).example;
        assert_eq!(ex.observations.len(), 8);
        assert!(ex.observations.is_full_table());
        assert_eq!(ex.observations.outputs(), ex.target.truth_table(3).unwrap().to_bits().as_slice());
    }

    #[test]
    fn noisy_example_without_flips_is_consistent() {
        let g = Generator::new(GeneratorConfig::noisy()).unwrap();
        let noise = NoiseConfig {
            sigma_range: (0.0, 0.0),
            n_range: (30, 30),
            walk_flip_range: (0.25, 0.25),
        };
        let mut rng = seeded(7);
        let ex = make_example(&g, &noise, &mut rng);
        assert_eq!(ex.observations.len(), 30);
        for (p, y) in ex.observations.iter() {
            assert_eq!(ex.target.evaluate(p).unwrap(), y);
        }
    }

    #[test]
    fn json_line_round_trip_and_errors() {
        let f: Formula = "or and x_0 x_1 not x_2".parse().unwrap();
        let ex = Example {
            regime: Regime::Noisy,
            observations: ObservationSet::from_formula(&f, 3, full_hypercube(3).unwrap()).unwrap(),
            target: f,
        };
        let line = ex.to_json_line();
        assert!(line.contains(r#""D":3"#));
        assert!(line.contains(r#""target":"or and x_0 x_1 not x_2""#));
        assert_eq!(Example::from_json_line(&line).unwrap(), ex);
        let bad = r#"{"regime":"noisy","D":3,"points":["01"],"outputs":"1","target":"x_0"}"#;
        assert!(Example::from_json_line(bad).is_err());
    }

    #[test]
    fn read_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = r#"{"regime":"noisy","D":2,"points":["01"],"outputs":"1","target":"x_1"}"#;
        let bad = r#"{"regime":"noisy","D":3,"points":["01"],"outputs":"1","target":"x_1"}"#;
        std::fs::write(&path, format!("{good}\n{bad}\n")).unwrap();
        match read_jsonl(&path) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected data error, got {other:?}"),
        }
        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert!(read_jsonl(&empty).unwrap().is_empty());
    }
}
