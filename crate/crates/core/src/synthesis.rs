//! Two-level minimization (Quine–McCluskey prime implicants with an exact or
//! greedy cover) and the head-to-head comparison against a predictor.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::evaluation::{perfect_recovery, write_csv};
use crate::formula::{Formula, TruthTable};
use crate::generator::{Generator, GeneratorConfig, Regime};
use crate::predictor::{predict, Predictor, Proposals};
use crate::rng::sample_rng;

pub const MAX_DIM: usize = 10;
/// Largest dimension for which the cover is provably minimum.
pub const EXACT_MAX_DIM: usize = 6;

/// A product term. Bit `dim - 1 - i` of `care` says whether variable `i`
/// appears, and the same bit of `value` gives its polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Implicant {
    pub value: u32,
    pub care: u32,
}

impl Implicant {
    pub fn literal_count(&self) -> u32 {
        self.care.count_ones()
    }

    pub fn covers(&self, minterm: usize) -> bool {
        (minterm as u32 & self.care) == self.value
    }

    pub fn to_formula(&self, dim: usize) -> Formula {
        let mut lits: Vec<Formula> = (0..dim)
            .filter_map(|i| {
                let bit = 1u32 << (dim - 1 - i);
                (self.care & bit != 0).then(|| {
                    if self.value & bit != 0 {
                        Formula::var(i)
                    } else {
                        Formula::not(Formula::var(i))
                    }
                })
            })
            .collect();
        match lits.len() {
            0 => Formula::constant(true),
            1 => lits.pop().unwrap(),
            _ => Formula::and(lits),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sop {
    pub formula: Formula,
    pub terms: Vec<Implicant>,
    /// False when the greedy cover was used and minimality is not guaranteed.
    pub exact: bool,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        return Err(Error::Capacity { dim, limit: MAX_DIM });
    }
    Ok(())
}

/// All prime implicants of the function that is 1 on `on`, unconstrained on
/// `dont_care` and 0 elsewhere.
pub fn prime_implicants(dim: usize, on: &[usize], dont_care: &[usize]) -> Result<Vec<Implicant>> {
    check_dim(dim)?;
    let full = if dim == 0 { 0 } else { (1u32 << dim) - 1 };
    let mut current: HashSet<Implicant> = on
        .iter()
        .chain(dont_care)
        .map(|&m| Implicant {
            value: m as u32,
            care: full,
        })
        .collect();
    let mut primes = Vec::new();
    while !current.is_empty() {
        let mut merged_away: HashSet<Implicant> = HashSet::new();
        let mut next: HashSet<Implicant> = HashSet::new();
        for imp in &current {
            let mut care = imp.care;
            while care != 0 {
                let bit = care & care.wrapping_neg();
                care &= care - 1;
                if imp.value & bit != 0 {
                    continue;
                }
                let partner = Implicant {
                    value: imp.value | bit,
                    care: imp.care,
                };
                if current.contains(&partner) {
                    merged_away.insert(*imp);
                    merged_away.insert(partner);
                    next.insert(Implicant {
                        value: imp.value,
                        care: imp.care & !bit,
                    });
                }
            }
        }
        primes.extend(current.iter().filter(|i| !merged_away.contains(i)).copied());
        current = next;
    }
    primes.sort();
    Ok(primes)
}

/// Minimum SOP of a complete truth table: exact for `D ≤ 6`, greedy up to
/// `D = 10`.
pub fn quine_mccluskey(table: &TruthTable) -> Result<Sop> {
    minimize(table.dim(), &table.minterms(), &[])
}

pub fn minimize(dim: usize, on: &[usize], dont_care: &[usize]) -> Result<Sop> {
    check_dim(dim)?;
    let primes = prime_implicants(dim, on, dont_care)?;
    let (chosen, exact) = if dim <= EXACT_MAX_DIM {
        (exact_cover(&primes, on), true)
    } else {
        (greedy_cover(&primes, on), false)
    };
    let mut terms: Vec<Implicant> = chosen.into_iter().map(|i| primes[i]).collect();
    // more specific terms last, then by the literal pattern
    terms.sort_by_key(|t| (t.literal_count(), std::cmp::Reverse(t.care), t.value));
    let mut products: Vec<Formula> = terms.iter().map(|t| t.to_formula(dim)).collect();
    let formula = match products.len() {
        0 => Formula::constant(false),
        1 => products.pop().unwrap(),
        _ => Formula::or(products),
    };
    Ok(Sop { formula, terms, exact })
}

struct CoverProblem {
    /// For each minterm, the primes covering it.
    covering: Vec<Vec<usize>>,
    /// For each prime, the minterm slots it covers.
    covers: Vec<Vec<usize>>,
    literals: Vec<u32>,
}

impl CoverProblem {
    fn new(primes: &[Implicant], on: &[usize]) -> Self {
        let covers: Vec<Vec<usize>> = primes
            .iter()
            .map(|p| (0..on.len()).filter(|&k| p.covers(on[k])).collect())
            .collect();
        let mut covering = vec![Vec::new(); on.len()];
        for (i, ks) in covers.iter().enumerate() {
            for &k in ks {
                covering[k].push(i);
            }
        }
        CoverProblem {
            covering,
            covers,
            literals: primes.iter().map(|p| p.literal_count()).collect(),
        }
    }
}

/// Minimum number of products, then minimum literal count. Branches on the
/// uncovered minterm with the fewest candidate primes.
fn exact_cover(primes: &[Implicant], on: &[usize]) -> Vec<usize> {
    let problem = CoverProblem::new(primes, on);
    let mut best: Option<(usize, u32, Vec<usize>)> = None;
    let mut chosen = Vec::new();
    let mut covered = vec![0u32; on.len()];
    search(&problem, &mut chosen, 0, &mut covered, &mut best);
    best.map(|b| b.2).unwrap_or_default()
}

fn search(
    p: &CoverProblem,
    chosen: &mut Vec<usize>,
    literals: u32,
    covered: &mut [u32],
    best: &mut Option<(usize, u32, Vec<usize>)>,
) {
    let Some(k) = (0..covered.len())
        .filter(|&k| covered[k] == 0)
        .min_by_key(|&k| p.covering[k].len())
    else {
        let better = match best {
            None => true,
            Some((n, l, _)) => (chosen.len(), literals) < (*n, *l),
        };
        if better {
            *best = Some((chosen.len(), literals, chosen.clone()));
        }
        return;
    };
    if let Some((n, l, _)) = best {
        // at least one more product is needed
        if (chosen.len() + 1, literals) >= (*n, *l) {
            return;
        }
    }
    let mut options = p.covering[k].clone();
    options.sort_by_key(|&i| (std::cmp::Reverse(p.covers[i].len()), p.literals[i]));
    for i in options {
        for &m in &p.covers[i] {
            covered[m] += 1;
        }
        chosen.push(i);
        search(p, chosen, literals + p.literals[i], covered, best);
        chosen.pop();
        for &m in &p.covers[i] {
            covered[m] -= 1;
        }
    }
}

/// Essential primes first, then repeatedly the prime covering the most
/// uncovered minterms (fewer literals on ties).
fn greedy_cover(primes: &[Implicant], on: &[usize]) -> Vec<usize> {
    let problem = CoverProblem::new(primes, on);
    let mut uncovered = vec![true; on.len()];
    let mut chosen: Vec<usize> = Vec::new();
    let take = |i: usize, uncovered: &mut Vec<bool>, chosen: &mut Vec<usize>| {
        if !chosen.contains(&i) {
            chosen.push(i);
        }
        for &m in &problem.covers[i] {
            uncovered[m] = false;
        }
    };
    for k in 0..on.len() {
        if let [only] = problem.covering[k][..] {
            take(only, &mut uncovered, &mut chosen);
        }
    }
    while uncovered.iter().any(|&u| u) {
        let gain = |i: usize| problem.covers[i].iter().filter(|&&m| uncovered[m]).count();
        let best = (0..primes.len())
            .filter(|&i| gain(i) > 0)
            .min_by_key(|&i| (std::cmp::Reverse(gain(i)), problem.literals[i], i))
            .expect("every minterm is covered by some prime");
        take(best, &mut uncovered, &mut chosen);
    }
    chosen
}

/// Predictor that returns the minimum SOP consistent with the observations:
/// repeated points vote on their output and unobserved points are free.
#[derive(Debug, Clone, Copy, Default)]
pub struct SopPredictor;

impl Predictor for SopPredictor {
    fn propose(&mut self, obs: &ObservationSet) -> Result<Proposals> {
        let dim = obs.dim();
        check_dim(dim)?;
        let mut votes: HashMap<usize, i64> = HashMap::new();
        for (p, y) in obs.iter() {
            *votes.entry(p.to_index()).or_default() += if y { 1 } else { -1 };
        }
        let mut on: Vec<usize> = votes.iter().filter(|(_, &v)| v > 0).map(|(&m, _)| m).collect();
        on.sort_unstable();
        let dont_care: Vec<usize> = (0..1usize << dim).filter(|m| !votes.contains_key(m)).collect();
        let sop = minimize(dim, &on, &dont_care)?;
        Ok(Proposals {
            formulas: vec![sop.formula],
            invalid: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Shorter,
    Equal,
    Longer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRow {
    pub index: usize,
    pub dim: usize,
    pub active_vars: usize,
    pub recovered: bool,
    pub model_gates: Option<usize>,
    pub model_tokens: Option<usize>,
    pub sop_gates: usize,
    pub sop_tokens: usize,
    pub sop_terms: usize,
    pub sop_exact: bool,
    /// Model length relative to the SOP, on recovered samples only.
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub samples: usize,
    pub recovered: usize,
    pub shorter: usize,
    pub equal: usize,
    pub longer: usize,
}

impl OutcomeCounts {
    fn record(&mut self, row: &SynthesisRow) {
        self.samples += 1;
        self.recovered += row.recovered as usize;
        match row.outcome {
            Some(Outcome::Shorter) => self.shorter += 1,
            Some(Outcome::Equal) => self.equal += 1,
            Some(Outcome::Longer) => self.longer += 1,
            None => {}
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub totals: OutcomeCounts,
    /// Share of samples the model recovered exactly.
    pub valid_rate: f64,
    /// Mean lengths over the recovered samples.
    pub mean_model_gates: f64,
    pub mean_sop_gates: f64,
    pub mean_model_tokens: f64,
    pub mean_sop_tokens: f64,
    pub by_active_vars: BTreeMap<usize, OutcomeCounts>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthesisReport {
    pub rows: Vec<SynthesisRow>,
    pub summary: SynthesisSummary,
}

impl SynthesisReport {
    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        write_csv(csv_path, &self.rows)?;
        let json = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        std::fs::write(json_path, json + "\n")?;
        Ok(())
    }
}

/// Samples noiseless targets, predicts each from its full table and
/// minimizes the same table. Length comparisons use binary gate counts.
pub fn compare_synthesis<P: Predictor + ?Sized>(
    predictor: &mut P,
    cfg: &GeneratorConfig,
    count: usize,
    seed: u64,
) -> Result<SynthesisReport> {
    if cfg.regime != Regime::Noiseless {
        return Err(Error::Config("synthesis comparison uses the noiseless regime".into()));
    }
    let generator = Generator::new(cfg.clone())?;
    let mut rows = Vec::with_capacity(count);
    for index in 0..count {
        let mut rng = sample_rng(seed, 0, index as u64);
        let (target, meta) = generator.sample_formula(&mut rng);
        let obs = ObservationSet::full_table(&target, meta.dim)?;
        let table = target.truth_table(meta.dim)?;
        let sop = quine_mccluskey(&table)?;
        let model = match predict(predictor, &obs) {
            Ok(c) => Some(c),
            Err(Error::NoCandidate { .. }) => None,
            Err(e) => return Err(e),
        };
        let recovered = model.as_ref().is_some_and(|c| perfect_recovery(c.fitting_accuracy));
        let sop_gates = sop.formula.binary_gate_count();
        let outcome = model.as_ref().filter(|_| recovered).map(|c| match c.gate_count.cmp(&sop_gates) {
            std::cmp::Ordering::Less => Outcome::Shorter,
            std::cmp::Ordering::Equal => Outcome::Equal,
            std::cmp::Ordering::Greater => Outcome::Longer,
        });
        rows.push(SynthesisRow {
            index,
            dim: meta.dim,
            active_vars: target.active_variables().len(),
            recovered,
            model_gates: model.as_ref().map(|c| c.gate_count),
            model_tokens: model.as_ref().map(|c| c.token_length),
            sop_gates,
            sop_tokens: sop.formula.prefix_len(),
            sop_terms: sop.terms.len(),
            sop_exact: sop.exact,
            outcome,
        });
    }
    let summary = summarize(&rows);
    Ok(SynthesisReport { rows, summary })
}

fn summarize(rows: &[SynthesisRow]) -> SynthesisSummary {
    let mut s = SynthesisSummary::default();
    let mut sums = [0usize; 4];
    for r in rows {
        s.totals.record(r);
        s.by_active_vars.entry(r.active_vars).or_default().record(r);
        if r.recovered {
            sums[0] += r.model_gates.unwrap_or(0);
            sums[1] += r.sop_gates;
            sums[2] += r.model_tokens.unwrap_or(0);
            sums[3] += r.sop_tokens;
        }
    }
    let rec = s.totals.recovered.max(1) as f64;
    s.valid_rate = if rows.is_empty() {
        0.0
    } else {
        s.totals.recovered as f64 / rows.len() as f64
    };
    s.mean_model_gates = sums[0] as f64 / rec;
    s.mean_sop_gates = sums[1] as f64 / rec;
    s.mean_model_tokens = sums[2] as f64 / rec;
    s.mean_sop_tokens = sums[3] as f64 / rec;
    s
}
