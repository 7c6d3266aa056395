//! Synchronous Boolean networks: dynamics, per-gene inference from
//! trajectories, influence graphs and structural scores.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::formula::{Assignment, Formula};
use crate::generator::{Generator, SampleSpec};
use crate::metrics::{ConfusionCounts, MetricSummary};
use crate::predictor::{predict, Predictor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanNetwork {
    updates: Vec<Formula>,
}

pub type State = Vec<bool>;

impl BooleanNetwork {
    /// Update `i` gives the next value of gene `i` from the full current state.
    pub fn new(updates: Vec<Formula>) -> Result<Self> {
        let dim = updates.len();
        for f in &updates {
            if let Some(v) = f.max_var() {
                if v >= dim {
                    return Err(Error::DimensionMismatch { index: v, dim });
                }
            }
        }
        Ok(BooleanNetwork { updates })
    }

    pub fn dim(&self) -> usize {
        self.updates.len()
    }

    pub fn updates(&self) -> &[Formula] {
        &self.updates
    }

    pub fn step(&self, state: &[bool]) -> Result<State> {
        if state.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "state of length {} for a network of {} genes",
                state.len(),
                self.dim()
            )));
        }
        Ok(self.updates.iter().map(|f| f.eval(state)).collect())
    }

    /// `steps + 1` states starting at `init`.
    pub fn trajectory(&self, init: &[bool], steps: usize) -> Result<Vec<State>> {
        if init.len() != self.dim() {
            self.step(init)?;
        }
        let mut out = vec![init.to_vec()];
        for _ in 0..steps {
            let next = self.step(out.last().unwrap())?;
            out.push(next);
        }
        Ok(out)
    }
}

impl fmt::Display for BooleanNetwork {
    /// One line per gene: `gene_i = <prefix formula>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.updates.iter().enumerate() {
            writeln!(f, "gene_{i} = {u}")?;
        }
        Ok(())
    }
}

impl FromStr for BooleanNetwork {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut updates: Vec<Option<Formula>> = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::Invalid(format!("network line {}: {m}", lineno + 1));
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| bad("expected `gene_i = formula`".into()))?;
            let gene: usize = lhs
                .trim()
                .strip_prefix("gene_")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| bad(format!("bad gene name `{}`", lhs.trim())))?;
            let f: Formula = rhs.trim().parse()?;
            if updates.len() <= gene {
                updates.resize(gene + 1, None);
            }
            if updates[gene].replace(f).is_some() {
                return Err(bad(format!("gene_{gene} defined twice")));
            }
        }
        let updates = updates
            .into_iter()
            .enumerate()
            .map(|(i, u)| u.ok_or_else(|| Error::Invalid(format!("gene_{i} has no update"))))
            .collect::<Result<Vec<_>>>()?;
        BooleanNetwork::new(updates)
    }
}

/// Edge `(i, j)` means gene `j` appears in the update of gene `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceGraph {
    pub dim: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl InfluenceGraph {
    pub fn in_degree(&self, gene: usize) -> usize {
        self.edges.iter().filter(|(i, _)| *i == gene).count()
    }
}

pub fn influence_graph(net: &BooleanNetwork) -> InfluenceGraph {
    let edges = net
        .updates
        .iter()
        .enumerate()
        .flat_map(|(i, f)| f.active_variables().into_iter().map(move |j| (i, j)))
        .collect();
    InfluenceGraph { dim: net.dim(), edges }
}

/// Confusion counts over all `D²` ordered gene pairs.
pub fn structural_confusion(predicted: &InfluenceGraph, truth: &InfluenceGraph) -> Result<ConfusionCounts> {
    if predicted.dim != truth.dim {
        return Err(Error::Invalid(format!(
            "graphs over {} and {} genes",
            predicted.dim, truth.dim
        )));
    }
    let d = truth.dim;
    Ok(ConfusionCounts::from_pairs((0..d).flat_map(|i| {
        (0..d).map(move |j| (predicted.edges.contains(&(i, j)), truth.edges.contains(&(i, j))))
    })))
}

pub fn structural_metrics(predicted: &InfluenceGraph, truth: &InfluenceGraph) -> Result<MetricSummary> {
    Ok(structural_confusion(predicted, truth)?.summary())
}

/// Random graph with the same in-degree per gene as `like`, regulators drawn
/// uniformly among the other genes.
pub fn degree_matched_random<R: Rng + ?Sized>(like: &InfluenceGraph, rng: &mut R) -> InfluenceGraph {
    let d = like.dim;
    let mut edges = BTreeSet::new();
    for i in 0..d {
        let k = like.in_degree(i).min(d.saturating_sub(1));
        for j in index::sample(rng, d - 1, k) {
            edges.insert((i, if j >= i { j + 1 } else { j }));
        }
    }
    InfluenceGraph { dim: d, edges }
}

/// Consecutive state pairs of every trajectory.
pub fn transitions(trajectories: &[Vec<State>]) -> Vec<(State, State)> {
    trajectories
        .iter()
        .flat_map(|t| t.windows(2).map(|w| (w[0].clone(), w[1].clone())))
        .collect()
}

/// Share of correctly predicted next-state bits over all transitions and genes.
pub fn dynamic_accuracy(net: &BooleanNetwork, transitions: &[(State, State)]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (now, next) in transitions {
        let predicted = net.step(now)?;
        if next.len() != predicted.len() {
            return Err(Error::Invalid("next state has the wrong length".into()));
        }
        hits += predicted.iter().zip(next).filter(|(a, b)| a == b).count();
        total += next.len();
    }
    if total == 0 {
        return Err(Error::Invalid("no transitions to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneInference {
    pub update: Formula,
    /// Accuracy of the update on the pooled transitions it was fitted to.
    pub fitting_accuracy: f64,
    /// The predictor produced nothing usable and the majority constant was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferredNetwork {
    pub network: BooleanNetwork,
    pub genes: Vec<GeneInference>,
}

/// Observations for gene `gene`: the state at `t` with column `gene` removed,
/// against the gene's value at `t + 1`.
pub fn gene_observations(trajectories: &[Vec<State>], gene: usize) -> Result<(ObservationSet, Vec<bool>)> {
    let pairs = transitions(trajectories);
    if pairs.is_empty() {
        return Err(Error::Invalid("trajectories need at least two states".into()));
    }
    let dim = pairs[0].0.len();
    if gene >= dim {
        return Err(Error::DimensionMismatch { index: gene, dim });
    }
    let mut points = Vec::with_capacity(pairs.len());
    let mut outputs = Vec::with_capacity(pairs.len());
    for (now, next) in &pairs {
        if now.len() != dim || next.len() != dim {
            return Err(Error::Invalid("states of differing length".into()));
        }
        let masked: Vec<bool> = now.iter().enumerate().filter(|(j, _)| *j != gene).map(|(_, &b)| b).collect();
        points.push(Assignment::new(masked));
        outputs.push(next[gene]);
    }
    let ys = outputs.clone();
    Ok((ObservationSet::new(dim - 1, points, outputs)?, ys))
}

/// Infers every update independently. The gene's own column never reaches
/// the predictor, so self-regulation cannot be inferred.
pub fn infer_network<P: Predictor + ?Sized>(trajectories: &[Vec<State>], predictor: &mut P) -> Result<InferredNetwork> {
    let dim = trajectories
        .first()
        .and_then(|t| t.first())
        .map(|s| s.len())
        .ok_or_else(|| Error::Invalid("no trajectories".into()))?;
    let mut genes = Vec::with_capacity(dim);
    for gene in 0..dim {
        let (obs, ys) = gene_observations(trajectories, gene)?;
        let ones = ys.iter().filter(|&&y| y).count();
        let majority = Formula::constant(2 * ones >= ys.len());
        let constant_column = ones == 0 || ones == ys.len();
        let inferred = if constant_column || dim == 1 {
            GeneInference {
                fitting_accuracy: ones.max(ys.len() - ones) as f64 / ys.len() as f64,
                update: majority,
                fallback: false,
            }
        } else {
            match predict(predictor, &obs) {
                Ok(c) => {
                    let map: Vec<usize> = (0..dim - 1).map(|j| if j >= gene { j + 1 } else { j }).collect();
                    GeneInference {
                        update: c.formula.remap_vars(&map),
                        fitting_accuracy: c.fitting_accuracy,
                        fallback: false,
                    }
                }
                Err(Error::NoCandidate { .. }) => GeneInference {
                    fitting_accuracy: ones.max(ys.len() - ones) as f64 / ys.len() as f64,
                    update: majority,
                    fallback: true,
                },
                Err(e) => return Err(e),
            }
        };
        genes.push(inferred);
    }
    let network = BooleanNetwork::new(genes.iter().map(|g| g.update.clone()).collect())?;
    Ok(InferredNetwork { network, genes })
}

/// Random network whose genes each read `1..=max_regulators` other genes
/// through a formula drawn from `generator` over exactly those regulators.
pub fn random_network<R: Rng + ?Sized>(
    generator: &Generator,
    dim: usize,
    max_regulators: usize,
    rng: &mut R,
) -> Result<BooleanNetwork> {
    if dim < 2 || max_regulators == 0 {
        return Err(Error::Config("a random network needs at least 2 genes and 1 regulator".into()));
    }
    let mut updates = Vec::with_capacity(dim);
    for gene in 0..dim {
        let k = rng.random_range(1..=max_regulators.min(dim - 1));
        let regulators: Vec<usize> = index::sample(rng, dim - 1, k)
            .into_iter()
            .map(|j| if j >= gene { j + 1 } else { j })
            .collect();
        let spec = SampleSpec {
            dim: Some(dim),
            active_set: Some(regulators),
            ..Default::default()
        };
        let (f, _) = generator.sample_with(&spec, rng);
        updates.push(f);
    }
    BooleanNetwork::new(updates)
}

/// Trajectories as CSV: a `trajectory` id column, then one column per gene,
/// one row per time step.
pub fn write_trajectories(path: &Path, trajectories: &[Vec<State>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = trajectories.first().and_then(|t| t.first()).map_or(0, |s| s.len());
    let mut header = vec!["trajectory".to_string()];
    header.extend((0..dim).map(|i| format!("gene_{i}")));
    w.write_record(&header)?;
    for (k, t) in trajectories.iter().enumerate() {
        for s in t {
            let mut rec = vec![k.to_string()];
            rec.extend(s.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Vec<State>>> {
    let mut r = csv::Reader::from_path(path)?;
    let err = |line: usize, message: String| Error::Data {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("trajectory") {
        return Err(err(1, "first column must be `trajectory`".into()));
    }
    let dim = headers.len() - 1;
    let mut out: Vec<Vec<State>> = Vec::new();
    let mut last_id: Option<String> = None;
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(err(line, format!("expected {} fields, found {}", dim + 1, rec.len())));
        }
        let state = rec
            .iter()
            .skip(1)
            .map(|v| match v.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(err(line, format!("non-binary value `{other}`"))),
            })
            .collect::<Result<State>>()?;
        let id = rec[0].to_string();
        if last_id.as_deref() != Some(id.as_str()) {
            out.push(Vec::new());
            last_id = Some(id);
        }
        out.last_mut().unwrap().push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::FixedPredictor;
    use crate::synthesis::SopPredictor;

    fn v(i: usize) -> Formula {
        Formula::var(i)
    }

    #[test]
    fn step_examples() {
        let net = BooleanNetwork::new(vec![v(1), Formula::not(v(0))]).unwrap();
        assert_eq!(net.step(&[true, false]).unwrap(), vec![false, false]);
        let id = BooleanNetwork::new(vec![v(0), v(1), v(2)]).unwrap();
        assert_eq!(id.step(&[true, false, true]).unwrap(), vec![true, false, true]);
        let c = BooleanNetwork::new(vec![Formula::constant(true), Formula::constant(false)]).unwrap();
        for s in [[false, false], [true, true], [true, false]] {
            assert_eq!(c.step(&s).unwrap(), vec![true, false]);
        }
        assert!(net.step(&[true]).is_err());
    }

    #[test]
    fn trajectories() {
        let flip = BooleanNetwork::new(vec![Formula::not(v(0))]).unwrap();
        let t = flip.trajectory(&[false], 4).unwrap();
        assert_eq!(t, vec![vec![false], vec![true], vec![false], vec![true], vec![false]]);
        assert_eq!(flip.trajectory(&[true], 0).unwrap(), vec![vec![true]]);
    }

    #[test]
    fn swap_network_recovered() {
        let truth = BooleanNetwork::new(vec![v(1), v(0)]).unwrap();
        let trajs: Vec<Vec<State>> = [[false, true], [true, true], [false, false]]
            .iter()
            .map(|s| truth.trajectory(s, 19).unwrap())
            .collect();
        let inferred = infer_network(&trajs, &mut SopPredictor).unwrap();
        assert_eq!(inferred.network, truth);
        assert!(inferred.genes.iter().all(|g| g.fitting_accuracy == 1.0 && !g.fallback));
    }

    #[test]
    fn constant_column_and_fallback() {
        let net = BooleanNetwork::new(vec![Formula::constant(true), v(0)]).unwrap();
        let trajs = vec![net.trajectory(&[false, false], 5).unwrap()];
        // the predictor offers nothing usable for gene 1
        let inferred = infer_network(&trajs, &mut FixedPredictor(vec![v(5)])).unwrap();
        assert_eq!(inferred.network.updates()[0], Formula::constant(true));
        assert!(!inferred.genes[0].fallback);
        assert!(inferred.genes[1].fallback);
        assert!(inferred.network.updates()[1].is_const());
    }

    #[test]
    fn graph_edges() {
        let net = BooleanNetwork::new(vec![v(1), v(0)]).unwrap();
        let g = influence_graph(&net);
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        let c = BooleanNetwork::new(vec![Formula::constant(false); 3]).unwrap();
        assert!(influence_graph(&c).edges.is_empty());
        let m = structural_metrics(&g, &g).unwrap();
        assert_eq!((m.accuracy, m.f1, m.mcc, m.bm), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn dynamic_accuracy_extremes() {
        let net = BooleanNetwork::new(vec![v(1), Formula::not(v(0))]).unwrap();
        let trajs = vec![net.trajectory(&[true, true], 10).unwrap()];
        let tr = transitions(&trajs);
        assert_eq!(dynamic_accuracy(&net, &tr).unwrap(), 1.0);
        let complement = BooleanNetwork::new(vec![Formula::not(v(1)), v(0)]).unwrap();
        assert_eq!(dynamic_accuracy(&complement, &tr).unwrap(), 0.0);
    }

    #[test]
    fn network_text_round_trip() {
        let net = BooleanNetwork::new(vec![Formula::and(vec![v(1), Formula::not(v(2))]), v(0), Formula::constant(true)]).unwrap();
        let text = net.to_string();
        assert_eq!(text.lines().next().unwrap(), "gene_0 = and x_1 not x_2");
        assert_eq!(text.parse::<BooleanNetwork>().unwrap(), net);
        assert!("gene_0 = x_3".parse::<BooleanNetwork>().is_err());
        assert!("gene_1 = x_0".parse::<BooleanNetwork>().is_err());
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let net = BooleanNetwork::new(vec![v(1), Formula::not(v(0)), v(2)]).unwrap();
        let trajs = vec![net.trajectory(&[true, false, true], 3).unwrap(), net.trajectory(&[false, false, false], 2).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trajectories(&p, &trajs).unwrap();
        assert_eq!(read_trajectories(&p).unwrap(), trajs);
    }

    #[test]
    fn random_networks_respect_limits() {
        let g = Generator::new(crate::generator::GeneratorConfig {
            d_max: 12,
            s_max: 3,
            b_max: 6,
            ..crate::generator::GeneratorConfig::noisy()
        })
        .unwrap();
        let mut rng = crate::rng::seeded(2);
        let net = random_network(&g, 12, 3, &mut rng).unwrap();
        let graph = influence_graph(&net);
        for i in 0..12 {
            assert!(graph.in_degree(i) <= 3);
            assert!(!graph.edges.contains(&(i, i)));
        }
        let rnd = degree_matched_random(&graph, &mut rng);
        for i in 0..12 {
            assert_eq!(rnd.in_degree(i), graph.in_degree(i));
            assert!(!rnd.edges.contains(&(i, i)));
        }
    }
}
