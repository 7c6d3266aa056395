//! Goodness-of-fit checks on generator draws. Each test uses a fixed seed, so
//! a threshold of p > 0.001 is a stable regression check, not a flaky one.

use std::collections::{BTreeSet, HashMap};

use logicsr_core::data::{make_example_with, random_walk_sample};
use logicsr_core::generator::TreeShapeSampler;
use logicsr_core::rng::{sample_rng, seeded};
use logicsr_core::{Formula, Generator, GeneratorConfig, NoiseConfig, Regime, SampleSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

fn uniform_p(observed: &[u64]) -> f64 {
    let k = observed.len();
    chi_square_p(observed, &vec![1.0 / k as f64; k])
}

fn noisy(b_max: usize) -> Generator {
    Generator::new(GeneratorConfig {
        b_max,
        ..GeneratorConfig::noisy()
    })
    .unwrap()
}

fn count_labels(f: &Formula, and: &mut u64, or: &mut u64, not: &mut u64, nodes: &mut u64) {
    match f {
        Formula::Not(c) => {
            *not += 1;
            count_labels(c, and, or, not, nodes);
        }
        Formula::And(cs) | Formula::Or(cs) => {
            *nodes += 1;
            if matches!(f, Formula::And(_)) {
                *and += 1;
            } else {
                *or += 1;
            }
            for c in cs {
                count_labels(c, and, or, not, nodes);
            }
        }
        _ => *nodes += 1,
    }
}

#[test]
fn dimension_is_uniform() {
    let g = noisy(8);
    let mut rng = seeded(1);
    let mut counts = vec![0u64; 120];
    for _ in 0..100_000 {
        let (_, meta) = g.sample_raw(&SampleSpec::default(), &mut rng);
        counts[meta.dim - 1] += 1;
    }
    let p = uniform_p(&counts);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn active_count_is_uniform_given_dimension() {
    let g = noisy(8);
    let mut rng = seeded(2);
    let mut counts = vec![0u64; 6];
    for _ in 0..100_000 {
        let (f, meta) = g.sample_raw(&SampleSpec::default(), &mut rng);
        let set: BTreeSet<usize> = meta.active_set.iter().copied().collect();
        assert_eq!(f.active_variables(), set);
        assert!(set.iter().all(|&v| v < meta.dim));
        if meta.dim >= 6 {
            counts[meta.active_count - 1] += 1;
        }
    }
    let p = uniform_p(&counts);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn operator_count_is_uniform_given_active_count() {
    let g = noisy(50);
    let mut rng = seeded(3);
    let spec = SampleSpec {
        dim: Some(10),
        active_count: Some(4),
        ..Default::default()
    };
    let mut counts = vec![0u64; 48];
    for _ in 0..100_000 {
        let (f, meta) = g.sample_raw(&spec, &mut rng);
        assert_eq!(f.binary_gate_count(), meta.ops_initial);
        counts[meta.ops_initial - 3] += 1;
    }
    let p = uniform_p(&counts);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn operator_labels_and_negations_have_configured_rates() {
    for p_not in [0.5, 0.2] {
        let g = Generator::new(GeneratorConfig {
            b_max: 60,
            p_not,
            ..GeneratorConfig::noisy()
        })
        .unwrap();
        let mut rng = seeded(4);
        let (mut and, mut or, mut not, mut nodes) = (0, 0, 0, 0);
        for _ in 0..20_000 {
            let (f, meta) = g.sample_raw(&SampleSpec::default(), &mut rng);
            let before = nodes;
            count_labels(&f, &mut and, &mut or, &mut not, &mut nodes);
            assert_eq!(nodes - before, 2 * meta.ops_initial as u64 + 1);
        }
        let and_rate = and as f64 / (and + or) as f64;
        let not_rate = not as f64 / nodes as f64;
        assert!((and_rate - 0.5).abs() < 0.01, "and rate {and_rate}");
        assert!((not_rate - p_not).abs() < 0.01, "not rate {not_rate} for {p_not}");
    }
}

#[test]
fn tree_shapes_are_uniform() {
    let sampler = TreeShapeSampler::new(4);
    let mut rng = seeded(5);
    for (ops, catalan) in [(2usize, 2usize), (3, 5), (4, 14)] {
        let mut counts: HashMap<Vec<bool>, u64> = HashMap::new();
        for _ in 0..50_000 {
            let shape = sampler.sample(ops, &mut rng);
            assert_eq!(shape.internal_count(), ops);
            assert_eq!(shape.leaf_count(), ops + 1);
            *counts.entry(shape.prefix().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), catalan);
        let observed: Vec<u64> = counts.into_values().collect();
        let p = uniform_p(&observed);
        assert!(p > 0.001, "ops {ops}: p = {p}");
    }
}

#[test]
fn point_count_is_uniform() {
    let g = Generator::new(GeneratorConfig {
        d_max: 6,
        s_max: 3,
        b_max: 6,
        p_not: 0.5,
        regime: Regime::Noisy,
    })
    .unwrap();
    let noise = NoiseConfig::default();
    let mut counts = vec![0u64; 271];
    for i in 0..40_000 {
        let ex = make_example_with(&g, &noise, &SampleSpec::default(), &mut sample_rng(6, 0, i));
        let n = ex.example.observations.len();
        counts[n - 30] += 1;
        assert!((0.0..0.1).contains(&ex.sigma));
        assert!((0.05..0.25).contains(&ex.gamma));
    }
    let p = uniform_p(&counts);
    assert!(p > 0.001, "p = {p}");
}

#[test]
fn walk_steps_flip_coordinates_at_rate_gamma() {
    let mut rng = seeded(7);
    for gamma in [0.05, 0.25] {
        let points = random_walk_sample(50, 4_000, gamma, &mut rng);
        let flips: usize = points
            .windows(2)
            .map(|w| w[0].bits().iter().zip(w[1].bits()).filter(|(a, b)| a != b).count())
            .sum();
        let rate = flips as f64 / (50.0 * 3_999.0);
        assert!((rate - gamma).abs() < 0.005, "rate {rate} for gamma {gamma}");
    }
}
