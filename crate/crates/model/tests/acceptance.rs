//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails. The two trained checkpoints are
//! read from `artifacts/` at the workspace root.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::{DType, Device, IndexOp, Tensor};
use rand::Rng;

use logicsr_core::data::{make_example, read_jsonl, write_jsonl};
use logicsr_core::encoding::EncoderInput;
use logicsr_core::evaluation::{
    accuracy, length_generalization, memorization_probe, perfect_recovery, sweep, write_csv, SweepAxis, SweepConfig,
};
use logicsr_core::grn::{
    degree_matched_random, influence_graph, infer_network, random_network, structural_metrics, State,
};
use logicsr_core::metrics::ConfusionCounts;
use logicsr_core::predictor::predict;
use logicsr_core::rng::{sample_rng, seeded};
use logicsr_core::synthesis::{compare_synthesis, prime_implicants, quine_mccluskey, Implicant};
use logicsr_core::{
    parse_prefix, simplify, Example, Generator, GeneratorConfig, NoiseConfig, ObservationSet, Predictor,
    Proposals, Regime, SampleSpec, TruthTable,
};
use logicsr_model::schedule::{LR_PEAK, LR_START};
use logicsr_model::{Checkpoint, EncoderBatch, InferenceOptions, LrSchedule, Model, ModelPredictor, TargetBatch, TrainConfig};

use common::*;

const NOISELESS_CKPT: &str = "noiseless-d4/latest.safetensors";
const GRN_CKPT: &str = "grn-d15/latest.safetensors";

fn artifact(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../artifacts").join(rel)
}

struct Report {
    results: Vec<(usize, bool)>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        println!("{} {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.results.push((id, ok));
    }
}

fn load(rel: &str) -> Result<(Checkpoint, Model), String> {
    let path = artifact(rel);
    let ckpt = Checkpoint::load(&path).map_err(|e| format!("cannot load {}: {e}", path.display()))?;
    let (model, _) = ckpt.model(DType::F32, &Device::Cpu).map_err(|e| e.to_string())?;
    Ok((ckpt, model))
}

// 1, 2

fn simplifier(report: &mut Report) {
    let g = Generator::new(GeneratorConfig::noiseless()).unwrap();
    let started = Instant::now();
    let mut sound = 0;
    let mut post_le_pre = 0;
    let mut post_counts = Vec::new();
    let total = 10_000;
    for i in 0..total {
        let mut rng = sample_rng(101, 0, i);
        let spec = SampleSpec {
            ops: Some(rng.random_range(1..=500)),
            ..Default::default()
        };
        let (raw, meta) = g.sample_raw(&spec, &mut rng);
        let s = simplify(&raw).unwrap();
        if s.truth_table(meta.dim).unwrap() == raw.truth_table(meta.dim).unwrap() {
            sound += 1;
        }
        let post = s.binary_gate_count();
        if post <= meta.ops_initial {
            post_le_pre += 1;
        }
        post_counts.push(post);
    }
    let elapsed = started.elapsed();
    report.record(
        1,
        "simplifier soundness",
        sound == total && elapsed.as_secs() < 600,
        format!("{sound}/{total} truth tables preserved in {:.1}s", elapsed.as_secs_f64()),
    );

    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &post_counts {
        *hist.entry(c).or_default() += 1;
    }
    let mode = *hist.iter().max_by_key(|(v, n)| (**n, std::cmp::Reverse(**v))).unwrap().0 as f64;
    post_counts.sort_unstable();
    let median = post_counts[post_counts.len() / 2] as f64;
    let mean = post_counts.iter().sum::<usize>() as f64 / post_counts.len() as f64;
    report.record(
        2,
        "simplifier shrinkage",
        mode < median && median < mean && post_le_pre == total,
        format!("mode {mode}, median {median}, mean {mean:.2}; post <= pre in {post_le_pre}/{total}"),
    );
}

// 3

fn round_trips(report: &mut Report) {
    let g = Generator::new(GeneratorConfig::noiseless()).unwrap();
    let mut prefix_ok = 0;
    for i in 0..10_000 {
        let (f, _) = g.sample_formula(&mut sample_rng(103, 0, i));
        if parse_prefix(&f.to_prefix()).map(|b| b == f).unwrap_or(false) {
            prefix_ok += 1;
        }
    }
    let small = |mut c: GeneratorConfig| {
        c.b_max = 60;
        Generator::new(c).unwrap()
    };
    let (noiseless, noisy) = (small(GeneratorConfig::noiseless()), small(GeneratorConfig::noisy()));
    let examples: Vec<Example> = (0..1_000u64)
        .map(|i| {
            if i % 2 == 0 {
                make_example(&noiseless, &NoiseConfig::noiseless(), &mut sample_rng(103, 1, i))
            } else {
                make_example(&noisy, &NoiseConfig::default(), &mut sample_rng(103, 2, i))
            }
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("examples.jsonl");
    write_jsonl(&path, &examples).unwrap();
    let back = read_jsonl(&path).unwrap();
    let jsonl_ok = back.iter().zip(&examples).filter(|(a, b)| a == b).count();
    report.record(
        3,
        "round trips",
        prefix_ok == 10_000 && jsonl_ok == 1_000 && back.len() == 1_000,
        format!("prefix {prefix_ok}/10000, JSONL {jsonl_ok}/1000"),
    );
}

// 4

fn invariances(report: &mut Report) {
    let mut rng = seeded(104);
    let mut equivariance = 0.0f32;
    let mut loss_gap = 0.0f32;
    let mut count = 0;
    for regime in [Regime::Noiseless, Regime::Noisy] {
        let (model, _) = build(tiny_config(6, regime), 41, DType::F32);
        for ex in examples(6, regime, 50, 104) {
            let input = model.encoder_input(&ex.observations).unwrap();
            let order = shuffled(input.rows.len(), &mut rng);
            let permuted = EncoderInput {
                minority: input.minority,
                rows: order.iter().map(|&i| input.rows[i].clone()).collect(),
            };
            let target = vec![model.vocab().encode_target(&ex.target).unwrap()];
            let t = TargetBatch::new(&target, DType::F32, model.device()).unwrap();
            let e1 = EncoderBatch::new(&[input], model.vocab(), DType::F32, model.device()).unwrap();
            let e2 = EncoderBatch::new(&[permuted], model.vocab(), DType::F32, model.device()).unwrap();
            let m1: Vec<Vec<f32>> = model.encode(&e1).unwrap().states.i(0).unwrap().to_vec2().unwrap();
            let m2: Vec<Vec<f32>> = model.encode(&e2).unwrap().states.i(0).unwrap().to_vec2().unwrap();
            let scale = m1.iter().flatten().fold(0.0f32, |m, x| m.max(x.abs()));
            for (j, &i) in order.iter().enumerate() {
                for (a, b) in m2[1 + j].iter().zip(&m1[1 + i]) {
                    equivariance = equivariance.max((a - b).abs() / scale);
                }
            }
            let l1: f32 = model.loss(&e1, &t).unwrap().to_scalar().unwrap();
            let l2: f32 = model.loss(&e2, &t).unwrap().to_scalar().unwrap();
            loss_gap = loss_gap.max((l1 - l2).abs() / l1.abs());
            count += 1;
        }
    }

    // changing tokens from position p on must leave logits before p untouched
    let (model, _) = build(tiny_config(4, Regime::Noiseless), 42, DType::F32);
    let ex = &examples(4, Regime::Noiseless, 1, 105)[0];
    let input = model.encoder_input(&ex.observations).unwrap();
    let e = EncoderBatch::new(&[input], model.vocab(), DType::F32, model.device()).unwrap();
    let memory = model.encode(&e).unwrap();
    let v = model.vocab().decoder_size() as u32;
    let logits = |ids: &[u32]| -> Vec<Vec<f32>> {
        let t = Tensor::new(ids, model.device()).unwrap().unsqueeze(0).unwrap();
        model.decode(&memory, &t).unwrap().i(0).unwrap().to_vec2().unwrap()
    };
    let mut causal = true;
    for _ in 0..20 {
        let len = rng.random_range(2..30);
        let a: Vec<u32> = (0..len).map(|_| rng.random_range(0..v)).collect();
        let p = rng.random_range(1..len);
        let mut b = a.clone();
        for x in &mut b[p..] {
            *x = rng.random_range(0..v);
        }
        let (la, lb) = (logits(&a), logits(&b));
        causal &= (0..p).all(|t| la[t] == lb[t]);
    }

    let grad_error = gradient_check();
    report.record(
        4,
        "model invariances",
        count == 100 && equivariance <= 1e-5 && loss_gap <= 1e-5 && causal && grad_error < 1e-3,
        format!(
            "{count} examples: equivariance {equivariance:.2e}, loss {loss_gap:.2e}; causality {}; gradient relative error {grad_error:.2e}",
            if causal { "exact" } else { "violated" }
        ),
    );
}

/// Largest relative error between single-precision autograd and
/// double-precision central differences on ten random parameter entries.
fn gradient_check() -> f64 {
    let cfg = tiny_config(4, Regime::Noiseless);
    let (model, params) = build(cfg.clone(), 43, DType::F32);
    let exs = examples(4, Regime::Noiseless, 4, 106);
    let inputs: Vec<_> = exs.iter().map(|e| model.encoder_input(&e.observations).unwrap()).collect();
    let targets: Vec<_> = exs.iter().map(|e| model.vocab().encode_target(&e.target).unwrap()).collect();
    let e32 = EncoderBatch::new(&inputs, model.vocab(), DType::F32, model.device()).unwrap();
    let t32 = TargetBatch::new(&targets, DType::F32, model.device()).unwrap();
    let grads = model.loss(&e32, &t32).unwrap().backward().unwrap();

    let mut p64 = params.converted(DType::F64).unwrap();
    let m64 = Model::new(cfg, &mut p64).unwrap();
    let e64 = EncoderBatch::new(&inputs, m64.vocab(), DType::F64, m64.device()).unwrap();
    let t64 = TargetBatch::new(&targets, DType::F64, m64.device()).unwrap();

    let names: Vec<String> = params.vars().keys().cloned().collect();
    let mut rng = seeded(107);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 10 {
        let name = &names[rng.random_range(0..names.len())];
        let Some(g) = grads.get(params.var(name).unwrap().as_tensor()) else { continue };
        let g: Vec<f32> = g.flatten_all().unwrap().to_vec1().unwrap();
        let k = rng.random_range(0..g.len());
        let var = p64.var(name).unwrap();
        let original = var.as_tensor().copy().unwrap();
        let shape = original.dims().to_vec();
        let base: Vec<f64> = original.flatten_all().unwrap().to_vec1().unwrap();
        let loss_at = |delta: f64| -> f64 {
            let mut v = base.clone();
            v[k] += delta;
            var.set(&Tensor::from_vec(v, shape.as_slice(), &Device::Cpu).unwrap()).unwrap();
            m64.loss(&e64, &t64).unwrap().to_scalar().unwrap()
        };
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        var.set(&original).unwrap();
        let a = g[k] as f64;
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3));
        checked += 1;
    }
    worst
}

// 5

fn schedule(report: &mut Report) {
    let s = LrSchedule::full(80_000).unwrap();
    let got = [s.at(0), s.at(5_000), s.at(65_000), s.at(80_000)];
    let ok = got == [LR_START, LR_PEAK, LR_PEAK, 0.0] && LR_START == 1e-7 && LR_PEAK == 2e-4;
    report.record(5, "learning-rate schedule", ok, format!("steps 0/5000/65000/80000 -> {got:?}"));
}

// 6, 11

/// Keeps the last proposals so the ranking can be checked from outside.
struct Recording<P> {
    inner: P,
    last: Proposals,
}

impl<P: Predictor> Predictor for Recording<P> {
    fn propose(&mut self, obs: &ObservationSet) -> logicsr_core::Result<Proposals> {
        self.last = self.inner.propose(obs)?;
        Ok(self.last.clone())
    }
}

/// Records criterion 6 and returns the outcome of criterion 11, which
/// reuses the same predictions.
fn desk_training(report: &mut Report) -> (bool, String) {
    let (ckpt, model) = match load(NOISELESS_CKPT) {
        Ok(x) => x,
        Err(e) => {
            report.record(6, "desk-scale training", false, e.clone());
            return (false, e);
        }
    };
    let cfg = ckpt.config.clone();
    let train: Option<TrainConfig> = ckpt.state.train_config.as_deref().and_then(|s| serde_json::from_str(s).ok());
    let setup_ok = cfg.enc_layers == 2
        && cfg.dec_layers == 2
        && cfg.d_emb == 128
        && cfg.regime == Regime::Noiseless
        && train
            .as_ref()
            .is_some_and(|t| t.generator.d_max <= 4 && t.generator.b_max <= 15 && t.generator.regime == Regime::Noiseless)
        && ckpt.state.examples_seen >= 500_000;

    let generator = Generator::new(GeneratorConfig {
        d_max: 4,
        s_max: 4,
        b_max: 15,
        p_not: 0.5,
        regime: Regime::Noiseless,
    })
    .unwrap();
    let mut predictor = Recording {
        inner: ModelPredictor::new(model, InferenceOptions::default()),
        last: Proposals::default(),
    };
    let total = 1_000;
    let (mut acc_sum, mut recovered, mut failed, mut ranked_ok) = (0.0, 0, 0, 0);
    for i in 0..total {
        // a stream the training run never reads
        let ex = make_example(&generator, &NoiseConfig::noiseless(), &mut sample_rng(0xACCE, 6, i));
        match predict(&mut predictor, &ex.observations) {
            Ok(best) => {
                acc_sum += best.fitting_accuracy;
                recovered += perfect_recovery(best.fitting_accuracy) as usize;
                let best_sampled = predictor
                    .last
                    .formulas
                    .iter()
                    .filter_map(|f| accuracy(f, &ex.observations).ok())
                    .fold(f64::NEG_INFINITY, f64::max);
                let independent = accuracy(&best.formula, &ex.observations).unwrap();
                if independent == best.fitting_accuracy && best.fitting_accuracy == best_sampled {
                    ranked_ok += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    let mean_acc = acc_sum / total as f64;
    let recovery = recovered as f64 / total as f64;
    report.record(
        6,
        "desk-scale training",
        setup_ok && recovery >= 0.70 && mean_acc >= 0.95,
        format!(
            "{} examples seen, {}+{} layers, d_emb {}; held-out perfect recovery {recovery:.3}, fitting accuracy {mean_acc:.4} ({failed} failed)",
            ckpt.state.examples_seen, cfg.enc_layers, cfg.dec_layers, cfg.d_emb
        ),
    );
    let answered = total as usize - failed;
    (
        answered == total as usize && ranked_ok == answered,
        format!("{ranked_ok}/{answered} returned candidates maximal among sampled ({failed} without a candidate)"),
    )
}

// 7

fn oracle_primes(dim: usize, on: &[bool]) -> Vec<Implicant> {
    let full = (1u32 << dim) - 1;
    let is_implicant = |c: &Implicant| (0..on.len()).all(|m| !c.covers(m) || on[m]);
    let mut primes = Vec::new();
    for care in 0..=full {
        for value in 0..=full {
            let c = Implicant { value, care };
            if value & !care != 0 || !is_implicant(&c) {
                continue;
            }
            let prime = (0..dim).all(|b| {
                let bit = 1u32 << b;
                care & bit == 0
                    || !is_implicant(&Implicant {
                        value: value & !bit,
                        care: care & !bit,
                    })
            });
            if prime {
                primes.push(c);
            }
        }
    }
    primes.sort();
    primes
}

fn covers_with(primes: &[Implicant], k: usize, start: usize, chosen: &mut Vec<Implicant>, on: &[bool]) -> bool {
    if chosen.len() == k {
        return (0..on.len()).all(|m| !on[m] || chosen.iter().any(|c| c.covers(m)));
    }
    (start..primes.len()).any(|i| {
        chosen.push(primes[i]);
        let hit = covers_with(primes, k, i + 1, chosen, on);
        chosen.pop();
        hit
    })
}

fn quine_mccluskey_oracle(report: &mut Report) {
    let mut semantic = 0;
    for code in 0u32..256 {
        let bits: Vec<bool> = (0..8).map(|m| code >> (7 - m) & 1 == 1).collect();
        let t = TruthTable::from_bits(3, &bits).unwrap();
        let sop = quine_mccluskey(&t).unwrap();
        if sop.formula.truth_table(3).unwrap() == t {
            semantic += 1;
        }
    }
    let (mut matched, mut total) = (0, 0);
    for dim in 1..=4usize {
        let rows = 1usize << dim;
        for code in 0u64..1 << rows {
            let on: Vec<bool> = (0..rows).map(|m| code >> (rows - 1 - m) & 1 == 1).collect();
            let t = TruthTable::from_bits(dim, &on).unwrap();
            let sop = quine_mccluskey(&t).unwrap();
            let primes = oracle_primes(dim, &on);
            let minimum = (0..=primes.len())
                .find(|&k| covers_with(&primes, k, 0, &mut Vec::new(), &on))
                .unwrap();
            let mut ours = prime_implicants(dim, &t.minterms(), &[]).unwrap();
            ours.sort();
            total += 1;
            if sop.terms.len() == minimum && ours == primes && sop.formula.truth_table(dim).unwrap() == t {
                matched += 1;
            }
        }
    }
    report.record(
        7,
        "Quine-McCluskey oracle",
        semantic == 256 && matched == total,
        format!("D=3 semantic equality {semantic}/256; term counts match brute force {matched}/{total} (D <= 4)"),
    );
}

// 8

fn metrics(report: &mut Report) {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut ok = true;
    let c = ConfusionCounts::new(5, 3, 2, 1);
    let s = c.summary();
    ok &= close(s.accuracy, 8.0 / 11.0);
    ok &= close(s.precision, 5.0 / 7.0);
    ok &= close(s.recall, 5.0 / 6.0);
    ok &= close(s.f1, 10.0 / 13.0);
    ok &= close(s.mcc, 13.0 / 840f64.sqrt());
    ok &= close(s.bm, 5.0 / 6.0 + 3.0 / 5.0 - 1.0);

    let s = ConfusionCounts::new(7, 7, 7, 7).summary();
    ok &= close(s.mcc, 0.0) && close(s.bm, 0.0) && close(s.accuracy, 0.5) && close(s.f1, 0.5);

    // nothing predicted positive, no positives: every undefined ratio is 0
    let s = ConfusionCounts::new(0, 9, 0, 0).summary();
    ok &= close(s.precision, 0.0) && close(s.recall, 0.0) && close(s.f1, 0.0) && close(s.mcc, 0.0);
    ok &= close(s.accuracy, 1.0) && close(s.bm, 0.0);
    let s = ConfusionCounts::new(0, 0, 0, 0).summary();
    ok &= [s.accuracy, s.precision, s.recall, s.f1, s.mcc].iter().all(|&v| v == 0.0);
    let s = ConfusionCounts::new(4, 0, 3, 0).summary();
    ok &= close(s.recall, 1.0) && close(s.mcc, 0.0) && close(s.bm, 0.0);
    report.record(8, "classification metrics", ok, "hand-computed confusion tables to 1e-12".into());
}

// 9

fn random_trajectories<R: Rng>(net: &logicsr_core::grn::BooleanNetwork, rng: &mut R) -> Vec<Vec<State>> {
    (0..25)
        .map(|_| {
            let init: State = (0..net.dim()).map(|_| rng.random_bool(0.5)).collect();
            net.trajectory(&init, 4).unwrap()
        })
        .collect()
}

fn grn(report: &mut Report) {
    let model = match load(GRN_CKPT) {
        Ok((_, m)) => m,
        Err(e) => {
            report.record(9, "network inference", false, e);
            return;
        }
    };
    let mut predictor = ModelPredictor::new(model, InferenceOptions::default());
    let generator = Generator::new(GeneratorConfig {
        d_max: 16,
        s_max: 3,
        b_max: 6,
        p_not: 0.5,
        regime: Regime::Noisy,
    })
    .unwrap();
    let (mut genes, mut recovered, mut self_edges) = (0, 0, 0);
    let (mut f1, mut baseline) = (0.0, 0.0);
    let networks = 20;
    for n in 0..networks {
        let mut rng = sample_rng(0x6E7, 9, n as u64);
        let dim = 8 + n % 9;
        let truth = random_network(&generator, dim, 3, &mut rng).unwrap();
        let trajectories = random_trajectories(&truth, &mut rng);
        let inferred = infer_network(&trajectories, &mut predictor).unwrap();
        for (g, (a, b)) in inferred.network.updates().iter().zip(truth.updates()).enumerate() {
            genes += 1;
            if a.truth_table(dim).unwrap() == b.truth_table(dim).unwrap() {
                recovered += 1;
            }
            self_edges += a.active_variables().contains(&g) as usize;
        }
        let true_graph = influence_graph(&truth);
        f1 += structural_metrics(&influence_graph(&inferred.network), &true_graph).unwrap().f1;
        let draws = 50;
        for _ in 0..draws {
            let random = degree_matched_random(&true_graph, &mut rng);
            baseline += structural_metrics(&random, &true_graph).unwrap().f1 / draws as f64;
        }
    }
    let (f1, baseline) = (f1 / networks as f64, baseline / networks as f64);
    let recovery = recovered as f64 / genes as f64;
    report.record(
        9,
        "network inference",
        recovery >= 0.5 && f1 > baseline && self_edges == 0,
        format!(
            "{networks} networks, {genes} genes: per-gene recovery {recovery:.3}, F1 {f1:.3} vs random {baseline:.3}, {self_edges} self-edges"
        ),
    );
}

// 10, 12

fn memorization(report: &mut Report, dir: &Path) {
    let rows = memorization_probe(&GeneratorConfig::noiseless(), 300_000, 0).unwrap();
    write_csv(&dir.join("memorization.csv"), &rows).unwrap();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_count).collect();
    let non_increasing = means.windows(2).all(|w| w[1] <= w[0]);
    let at7 = rows.iter().find(|r| r.dim == 7).map(|r| r.mean_count);
    let listing: Vec<String> = rows.iter().map(|r| format!("D{}={:.2}", r.dim, r.mean_count)).collect();
    report.record(
        10,
        "memorization probe",
        non_increasing && at7 == Some(0.0),
        format!("mean occurrences {}", listing.join(" ")),
    );
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|s| s.lines().next().map(str::to_string))
        .unwrap_or_default()
}

fn harness_schemas(report: &mut Report, dir: &Path) {
    let mut problems = Vec::new();
    let expected_sweep = "axis,value,samples,failed,fitting_accuracy,test_accuracy,fitting_recovery,test_recovery";
    match load(NOISELESS_CKPT) {
        Ok((_, model)) => {
            let mut p = ModelPredictor::new(model, InferenceOptions::default());
            let generator = GeneratorConfig {
                d_max: 4,
                s_max: 4,
                b_max: 15,
                p_not: 0.5,
                regime: Regime::Noiseless,
            };
            let mut cfg = SweepConfig::new(SweepAxis::Gates, vec![2.0, 6.0], generator.clone());
            cfg.samples = 4;
            let rows = sweep(&mut p, &cfg).unwrap();
            write_csv(&dir.join("sweep.csv"), &rows).unwrap();
            if header(&dir.join("sweep.csv")) != expected_sweep {
                problems.push("sweep header");
            }
            let synth = compare_synthesis(&mut p, &generator, 4, 0).unwrap();
            synth.write(&dir.join("synthesis.csv"), &dir.join("synthesis.json")).unwrap();
            if !header(&dir.join("synthesis.csv")).starts_with("index,dim,active_vars,recovered") {
                problems.push("synthesis header");
            }
            let summary: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join("synthesis.json")).unwrap()).unwrap();
            if summary.get("totals").is_none() || summary.get("valid_rate").is_none() {
                problems.push("synthesis summary");
            }
        }
        Err(_) => problems.push("noiseless checkpoint missing"),
    }
    match load(GRN_CKPT) {
        Ok((_, model)) => {
            let mut p = ModelPredictor::new(model, InferenceOptions::default());
            let generator = GeneratorConfig {
                d_max: 15,
                s_max: 3,
                b_max: 6,
                p_not: 0.5,
                regime: Regime::Noisy,
            };
            let rows = length_generalization(&mut p, generator, NoiseConfig::default(), &[30, 300], 4, 0).unwrap();
            write_csv(&dir.join("length.csv"), &rows).unwrap();
            if header(&dir.join("length.csv")) != expected_sweep {
                problems.push("length-generalization header");
            }
        }
        Err(_) => problems.push("network checkpoint missing"),
    }
    if header(&dir.join("memorization.csv")) != "dim,probe_functions,epoch_examples,mean_count" {
        problems.push("memorization header");
    }
    report.record(
        12,
        "harness table schemas",
        problems.is_empty(),
        if problems.is_empty() {
            "sweep, length-generalization, synthesis and memorization tables written".into()
        } else {
            problems.join(", ")
        },
    );
}

#[test]
fn acceptance() {
    let mut report = Report { results: Vec::new() };
    let dir = tempfile::tempdir().unwrap();
    simplifier(&mut report);
    round_trips(&mut report);
    invariances(&mut report);
    schedule(&mut report);
    let (ranking_ok, ranking) = desk_training(&mut report);
    quine_mccluskey_oracle(&mut report);
    metrics(&mut report);
    grn(&mut report);
    memorization(&mut report, dir.path());
    report.record(11, "inference ranking", ranking_ok, ranking);
    harness_schemas(&mut report, dir.path());

    report.results.sort();
    let failed: Vec<usize> = report.results.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
