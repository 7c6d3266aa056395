use std::path::Path;
use std::time::Instant;

use candle_core::{DType, Device};
use rand::Rng;
use serde::Serialize;

use logicsr_core::data::{full_hypercube, make_example, read_jsonl, write_jsonl, Example, NoiseConfig};
use logicsr_core::evaluation::{self, SweepConfig};
use logicsr_core::grn::{self, BooleanNetwork};
use logicsr_core::predictor::predict_ranked;
use logicsr_core::rng::{sample_rng, seeded};
use logicsr_core::synthesis::compare_synthesis;
use logicsr_core::tabular::{self, Schema, Table};
use logicsr_core::formula::parse_bits;
use logicsr_core::{simplify, Formula, GeneratorConfig, ObservationSet, Regime};
use logicsr_model::checkpoint::Checkpoint;
use logicsr_model::trainer::{DataSource, TrainConfig, Trainer};
use logicsr_model::{DecodeMode, InferenceOptions, ModelPredictor};

use crate::*;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(EvalCommand::Sweep(a)) => sweep(a),
        Command::Eval(EvalCommand::Memorization(a)) => memorization(a),
        Command::Eval(EvalCommand::LengthGen(a)) => length_gen(a),
        Command::SynthCompare(a) => synth_compare(a),
        Command::Grn(GrnCommand::Random(a)) => grn_random(a),
        Command::Grn(GrnCommand::Simulate(a)) => grn_simulate(a),
        Command::Grn(GrnCommand::Infer(a)) => grn_infer(a),
        Command::Grn(GrnCommand::Score(a)) => grn_score(a),
        Command::Classify(a) => classify(a),
        Command::Simplify(a) => simplify_cmd(a),
    }
}

/// Effective configuration, printed to stderr so stdout stays parseable.
fn header<T: Serialize>(command: &str, cfg: &T) {
    let json = serde_json::to_string(cfg).expect("configuration serializes");
    eprintln!("# logicsr {command} {json}");
}

fn preset(regime: Regime) -> GeneratorConfig {
    match regime {
        Regime::Noiseless => GeneratorConfig::noiseless(),
        Regime::Noisy => GeneratorConfig::noisy(),
    }
}

fn noise_for(regime: Regime) -> NoiseConfig {
    match regime {
        Regime::Noiseless => NoiseConfig::noiseless(),
        Regime::Noisy => NoiseConfig::default(),
    }
}

impl GeneratorArgs {
    /// Overrides applied to `base`, or to the preset of an explicitly
    /// different regime.
    fn resolve(&self, base: GeneratorConfig) -> Result<GeneratorConfig> {
        let mut cfg = match self.regime {
            Some(r) if r != base.regime => preset(r),
            _ => base,
        };
        if let Some(d) = self.d_max {
            cfg.d_max = d;
            cfg.s_max = match cfg.regime {
                Regime::Noiseless => d,
                Regime::Noisy => cfg.s_max.min(d),
            };
        }
        if let Some(s) = self.s_max {
            cfg.s_max = s;
        }
        if let Some(b) = self.b_max {
            cfg.b_max = b;
        }
        if let Some(p) = self.p_not {
            cfg.p_not = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let cfg = a.generator.resolve(preset(a.generator.regime.unwrap_or(Regime::Noiseless)))?;
    let noise = noise_for(cfg.regime);
    header("gen-data", &serde_json::json!({"generator": cfg, "noise": noise, "count": a.count, "seed": a.seed}));
    let generator = logicsr_core::Generator::new(cfg)?;
    let examples: Vec<Example> = (0..a.count as u64)
        .map(|i| make_example(&generator, &noise, &mut sample_rng(a.seed, 0, i)))
        .collect();
    write_jsonl(&a.out, &examples)?;
    Ok(())
}

fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

fn template(regime: Regime) -> TrainConfig {
    match regime {
        Regime::Noiseless => TrainConfig::desk_noiseless(4, 15, 4_000),
        Regime::Noisy => {
            let mut cfg = TrainConfig::desk_noiseless(16, 8, 4_000);
            cfg.model.regime = Regime::Noisy;
            cfg.generator = GeneratorConfig {
                d_max: 16,
                s_max: 3,
                b_max: 8,
                ..GeneratorConfig::noisy()
            };
            cfg.noise = NoiseConfig::default();
            cfg
        }
    }
}

fn data_source(spec: &str, cfg: &TrainConfig) -> Result<DataSource> {
    if spec == "on-the-fly" {
        Ok(DataSource::generated(cfg)?)
    } else {
        Ok(DataSource::Replay(read_jsonl(Path::new(spec))?))
    }
}

fn train(a: TrainArgs) -> Result<()> {
    if let Some(regime) = a.template {
        let text = toml::to_string(&template(regime)).map_err(|e| CliError::Usage(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let out = a.out.expect("required by the argument parser");
    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let json = ckpt.state.train_config.clone().unwrap_or_default();
            let cfg: TrainConfig =
                serde_json::from_str(&json).map_err(|e| CliError::Model(format!("stored configuration: {e}")))?;
            Trainer::resume(&ckpt, data_source(&a.data, &cfg)?)?
        }
        None => {
            let cfg = read_config(a.config.as_ref().expect("required by the argument parser"))?;
            let source = data_source(&a.data, &cfg)?;
            Trainer::new(cfg, source)?
        }
    };
    header(
        "train",
        &serde_json::json!({"config": trainer.config(), "data": a.data, "schedule": trainer.schedule(),
            "start_step": trainer.state().step, "parameters": trainer.params().parameter_count()}),
    );
    let start = Instant::now();
    let every = a.log_every.max(1);
    let latest = trainer.run(&out, |r| {
        if r.step % every == 0 {
            eprintln!(
                "step {} lr {:.3e} loss {:.5} grad-norm {:.3} elapsed {:.0}s",
                r.step,
                r.lr,
                r.loss,
                r.grad_norm,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    eprintln!("wrote {}", latest.display());
    Ok(())
}

fn load_predictor(path: &Path, d: &DecodeArgs) -> Result<(ModelPredictor, Checkpoint)> {
    let ckpt = Checkpoint::load(path)?;
    let (model, _) = ckpt.model(DType::F32, &Device::Cpu)?;
    let mode = match d.mode {
        Mode::Sample => DecodeMode::Sample {
            k: d.candidates,
            temperature: d.temperature,
        },
        Mode::Beam => DecodeMode::Beam { size: d.candidates },
    };
    let options = InferenceOptions { mode, seed: d.seed };
    Ok((ModelPredictor::new(model, options), ckpt))
}

/// Generator and noise the checkpoint was trained with, if it says.
fn trained_on(ckpt: &Checkpoint) -> (GeneratorConfig, NoiseConfig) {
    match ckpt
        .state
        .train_config
        .as_deref()
        .and_then(|j| serde_json::from_str::<TrainConfig>(j).ok())
    {
        Some(t) => (t.generator, t.noise),
        None => {
            let regime = ckpt.config.regime;
            let mut g = preset(regime);
            g.d_max = ckpt.config.d_max.min(g.d_max);
            g.s_max = g.s_max.min(g.d_max);
            (g, noise_for(regime))
        }
    }
}

fn table_from_bits(s: &str) -> Result<ObservationSet> {
    let bits = parse_bits(s.trim())?;
    let n = bits.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(CliError::Data(format!("a truth table needs 2^D bits, got {n}")));
    }
    let dim = n.trailing_zeros() as usize;
    Ok(ObservationSet::new(dim, full_hypercube(dim)?, bits)?)
}

fn predict(a: PredictArgs) -> Result<()> {
    let (mut predictor, _) = load_predictor(&a.ckpt, &a.decode)?;
    header("predict", &serde_json::json!({"ckpt": a.ckpt, "in": a.input, "options": predictor.options()}));
    let path = Path::new(&a.input);
    let inputs: Vec<ObservationSet> = if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(path)?.into_iter().map(|e| e.observations).collect()
    } else if path.is_file() {
        std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(table_from_bits)
            .collect::<Result<_>>()?
    } else {
        vec![table_from_bits(&a.input)?]
    };
    println!("input\trank\tfitting_accuracy\tgates\ttokens\tformula");
    for (i, obs) in inputs.iter().enumerate() {
        let ranked = predict_ranked(&mut predictor, obs)?;
        for (r, c) in ranked.iter().enumerate() {
            println!("{i}\t{}\t{}\t{}\t{}\t{}", r + 1, c.fitting_accuracy, c.gate_count, c.token_length, c.formula);
        }
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let (mut predictor, ckpt) = load_predictor(&a.ckpt, &a.decode)?;
    let (g, noise) = trained_on(&ckpt);
    let generator = a.generator.resolve(g)?;
    let mut cfg = SweepConfig::new(a.axis, a.grid.clone(), generator);
    cfg.samples = a.samples;
    cfg.seed = a.decode.seed;
    if cfg.generator.regime == ckpt.config.regime {
        cfg.noise = noise;
    }
    header("eval sweep", &serde_json::json!({"sweep": cfg, "options": predictor.options()}));
    let rows = evaluation::sweep(&mut predictor, &cfg)?;
    evaluation::write_csv(&a.out, &rows)?;
    Ok(())
}

fn memorization(a: MemorizationArgs) -> Result<()> {
    let cfg = a.generator.resolve(GeneratorConfig::noiseless())?;
    header("eval memorization", &serde_json::json!({"generator": cfg, "epoch": a.epoch, "seed": a.seed}));
    let rows = evaluation::memorization_probe(&cfg, a.epoch, a.seed)?;
    evaluation::write_csv(&a.out, &rows)?;
    Ok(())
}

fn length_gen(a: LengthGenArgs) -> Result<()> {
    let (mut predictor, ckpt) = load_predictor(&a.ckpt, &a.decode)?;
    let (g, noise) = trained_on(&ckpt);
    let generator = a.generator.resolve(g)?;
    if generator.regime != Regime::Noisy {
        return Err(CliError::Usage("length generalization needs a noisy-regime model".into()));
    }
    header(
        "eval length-gen",
        &serde_json::json!({"generator": generator, "noise": noise, "n_values": a.n_values,
            "samples": a.samples, "options": predictor.options()}),
    );
    let rows = evaluation::length_generalization(
        &mut predictor,
        generator,
        noise,
        &a.n_values,
        a.samples,
        a.decode.seed,
    )?;
    evaluation::write_csv(&a.out, &rows)?;
    Ok(())
}

fn synth_compare(a: SynthArgs) -> Result<()> {
    let (mut predictor, ckpt) = load_predictor(&a.ckpt, &a.decode)?;
    let generator = a.generator.resolve(trained_on(&ckpt).0)?;
    header(
        "synth-compare",
        &serde_json::json!({"generator": generator, "count": a.count, "options": predictor.options()}),
    );
    let report = compare_synthesis(&mut predictor, &generator, a.count, a.decode.seed)?;
    report.write(&a.out, &a.out.with_extension("json"))?;
    println!("{}", serde_json::to_string_pretty(&report.summary).expect("summary serializes"));
    Ok(())
}

fn read_network(path: &Path) -> Result<BooleanNetwork> {
    Ok(std::fs::read_to_string(path)?.parse()?)
}

fn grn_random(a: GrnRandomArgs) -> Result<()> {
    let cfg = GeneratorConfig {
        d_max: a.genes,
        s_max: a.max_regulators.min(a.genes),
        b_max: a.b_max,
        ..GeneratorConfig::noisy()
    };
    header("grn random", &serde_json::json!({"generator": cfg, "max_regulators": a.max_regulators, "seed": a.seed}));
    let generator = logicsr_core::Generator::new(cfg)?;
    let net = grn::random_network(&generator, a.genes, a.max_regulators, &mut seeded(a.seed))?;
    std::fs::write(&a.out, net.to_string())?;
    Ok(())
}

fn grn_simulate(a: GrnSimulateArgs) -> Result<()> {
    let net = read_network(&a.network)?;
    header("grn simulate", &serde_json::json!({"network": a.network, "count": a.count, "steps": a.steps, "seed": a.seed}));
    let mut rng = seeded(a.seed);
    let trajectories = (0..a.count)
        .map(|_| {
            let init: Vec<bool> = (0..net.dim()).map(|_| rng.random()).collect();
            net.trajectory(&init, a.steps)
        })
        .collect::<logicsr_core::Result<Vec<_>>>()?;
    grn::write_trajectories(&a.out, &trajectories)?;
    Ok(())
}

#[derive(Serialize)]
struct GeneRow {
    gene: usize,
    update: String,
    fitting_accuracy: f64,
    fallback: bool,
}

fn grn_infer(a: GrnInferArgs) -> Result<()> {
    let (mut predictor, _) = load_predictor(&a.ckpt, &a.decode)?;
    let trajectories = grn::read_trajectories(&a.trajectories)?;
    header(
        "grn infer",
        &serde_json::json!({"ckpt": a.ckpt, "trajectories": a.trajectories, "options": predictor.options()}),
    );
    let start = Instant::now();
    let inferred = grn::infer_network(&trajectories, &mut predictor)?;
    let seconds = start.elapsed().as_secs_f64();
    std::fs::write(&a.out, inferred.network.to_string())?;
    let rows: Vec<GeneRow> = inferred
        .genes
        .iter()
        .enumerate()
        .map(|(gene, g)| GeneRow {
            gene,
            update: g.update.to_string(),
            fitting_accuracy: g.fitting_accuracy,
            fallback: g.fallback,
        })
        .collect();
    evaluation::write_csv(&a.out.with_extension("genes.csv"), &rows)?;
    eprintln!("inferred {} genes in {seconds:.2}s", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct ScoreRow {
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    mcc: f64,
    informedness: f64,
    dynamic_accuracy: Option<f64>,
}

fn grn_score(a: GrnScoreArgs) -> Result<()> {
    let predicted = read_network(&a.network)?;
    let truth = read_network(&a.truth)?;
    header("grn score", &serde_json::json!({"network": a.network, "truth": a.truth, "trajectories": a.trajectories}));
    let m = grn::structural_metrics(&grn::influence_graph(&predicted), &grn::influence_graph(&truth))?;
    let dynamic_accuracy = match &a.trajectories {
        Some(p) => Some(grn::dynamic_accuracy(&predicted, &grn::transitions(&grn::read_trajectories(p)?))?),
        None => None,
    };
    let row = ScoreRow {
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        mcc: m.mcc,
        informedness: m.bm,
        dynamic_accuracy,
    };
    evaluation::write_csv(&a.out, std::slice::from_ref(&row))?;
    Ok(())
}

#[derive(Serialize)]
struct ClassifyReport {
    formula: String,
    features: Vec<String>,
    train_rows: usize,
    test_rows: usize,
    dropped_rows: usize,
    train_accuracy: f64,
    f1: f64,
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let (mut predictor, _) = load_predictor(&a.ckpt, &a.decode)?;
    let schema = Schema::from_json(&std::fs::read_to_string(&a.schema)?)?;
    let table = Table::read_csv(&a.data)?;
    header(
        "classify",
        &serde_json::json!({"data": a.data, "schema": schema, "test_fraction": a.test_fraction, "options": predictor.options()}),
    );
    let data = tabular::binarize(&table, &schema)?;
    let (train, test) = tabular::split(&data, a.test_fraction, a.decode.seed)?;
    let c = tabular::classify_and_score(&mut predictor, &train, &test)?;
    let report = ClassifyReport {
        formula: c.formula.to_string(),
        features: data.features.iter().map(|f| f.to_string()).collect(),
        train_rows: train.len(),
        test_rows: test.len(),
        dropped_rows: data.dropped,
        train_accuracy: c.train_accuracy,
        f1: c.f1,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&a.out, json + "\n")?;
    println!("f1 {}", c.f1);
    Ok(())
}

fn simplify_cmd(a: SimplifyArgs) -> Result<()> {
    let text = a.formula.or(a.input).expect("required by the argument parser");
    let f: Formula = text.parse()?;
    println!("{}", simplify(&f)?);
    Ok(())
}
