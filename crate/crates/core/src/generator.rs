//! Random formula generation.
//!
//! A sample is drawn in the following order: input dimension, number and
//! identity of active variables, number of binary operators, tree shape,
//! operator labels, negations, leaf variables. The raw tree is then
//! simplified, and regenerated if its prefix form exceeds the token budget.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::simplify::simplify;

/// Decoder budget: formulas whose prefix form is longer are discarded.
pub const MAX_TARGET_TOKENS: usize = 200;

/// Largest dimension usable in the noiseless regime (full truth tables).
pub const NOISELESS_MAX_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Noiseless,
    Noisy,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Noiseless => "noiseless",
            Regime::Noisy => "noisy",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(Regime::Noiseless),
            "noisy" => Ok(Regime::Noisy),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub d_max: usize,
    pub s_max: usize,
    pub b_max: usize,
    pub p_not: f64,
    pub regime: Regime,
}

impl GeneratorConfig {
    /// Full truth tables over up to 10 variables, all of them active.
    pub fn noiseless() -> Self {
        GeneratorConfig {
            d_max: NOISELESS_MAX_DIM,
            s_max: NOISELESS_MAX_DIM,
            b_max: 500,
            p_not: 0.5,
            regime: Regime::Noiseless,
        }
    }

    /// Up to 120 inputs of which at most 6 are active.
    pub fn noisy() -> Self {
        GeneratorConfig {
            d_max: 120,
            s_max: 6,
            b_max: 500,
            p_not: 0.5,
            regime: Regime::Noisy,
        }
    }

    /// Largest number of active variables a sample can have.
    pub fn max_active(&self) -> usize {
        match self.regime {
            Regime::Noiseless => self.d_max,
            Regime::Noisy => self.s_max.min(self.d_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::Config("d_max must be at least 1".into()));
        }
        if self.s_max == 0 || self.s_max > self.d_max {
            return Err(Error::Config(format!(
                "s_max must lie in [1, d_max = {}], got {}",
                self.d_max, self.s_max
            )));
        }
        if self.b_max == 0 {
            return Err(Error::Config("b_max must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_not) {
            return Err(Error::Config(format!("p_not must lie in [0, 1], got {}", self.p_not)));
        }
        if self.regime == Regime::Noiseless && self.d_max > NOISELESS_MAX_DIM {
            return Err(Error::Config(format!(
                "the noiseless regime supports at most {NOISELESS_MAX_DIM} variables, got d_max = {}",
                self.d_max
            )));
        }
        if self.b_max + 1 < self.max_active() {
            return Err(Error::Config(format!(
                "b_max = {} cannot hold {} active variables",
                self.b_max,
                self.max_active()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub dim: usize,
    pub active_count: usize,
    pub active_set: Vec<usize>,
    pub ops_initial: usize,
    pub gates_final: usize,
}

/// Optional overrides of the sampled quantities, used by sweeps and
/// benchmark constructions that hold one difficulty factor fixed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSpec {
    pub dim: Option<usize>,
    pub active_count: Option<usize>,
    pub active_set: Option<Vec<usize>>,
    pub ops: Option<usize>,
}

/// Unlabeled binary tree in prefix order: `true` is an internal node,
/// `false` a leaf.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeShape(Vec<bool>);

impl TreeShape {
    pub fn prefix(&self) -> &[bool] {
        &self.0
    }

    pub fn internal_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn leaf_count(&self) -> usize {
        self.0.len() - self.internal_count()
    }

    pub fn depth(&self) -> usize {
        // remaining children to fill per open node
        let mut stack: Vec<u8> = Vec::new();
        let mut depth = 0;
        for &internal in &self.0 {
            depth = depth.max(stack.len());
            if let Some(top) = stack.last_mut() {
                *top -= 1;
            }
            if internal {
                stack.push(2);
            }
            while stack.last() == Some(&0) {
                stack.pop();
            }
        }
        depth
    }
}

/// Counts of binary trees completing `e` empty slots with `n` operators,
/// kept in log space, and the slot-position sampler built on them.
#[derive(Debug, Clone)]
pub struct TreeShapeSampler {
    max_ops: usize,
    // log_counts[n][e]
    log_counts: Vec<Vec<f64>>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl TreeShapeSampler {
    pub fn new(max_ops: usize) -> Self {
        let width = 2 * max_ops + 3;
        let mut log_counts = vec![vec![0.0; width]];
        for n in 1..=max_ops {
            let prev = &log_counts[n - 1];
            let mut row = vec![f64::NEG_INFINITY; width];
            // D(e, n) = D(e - 1, n) + D(e + 1, n - 1), D(0, n) = 0
            for e in 1..width - n {
                row[e] = log_add(row[e - 1], prev[e + 1]);
            }
            log_counts.push(row);
        }
        TreeShapeSampler {
            max_ops,
            log_counts,
        }
    }

    pub fn max_ops(&self) -> usize {
        self.max_ops
    }

    /// Number of trees with `empty` open slots and `ops` operators left.
    pub fn count(&self, empty: usize, ops: usize) -> f64 {
        self.log_counts[ops][empty].exp()
    }

    /// Probability that, with `empty` open slots and `ops` operators left,
    /// the next operator lands in slot `skip` (the first `skip` slots become
    /// leaves).
    pub fn position_probability(&self, empty: usize, ops: usize, skip: usize) -> f64 {
        (self.log_counts[ops - 1][empty - skip + 1] - self.log_counts[ops][empty]).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, ops: usize, rng: &mut R) -> TreeShape {
        assert!(ops <= self.max_ops, "tree sampler built for at most {} ops", self.max_ops);
        let mut prefix = Vec::with_capacity(2 * ops + 1);
        let mut empty = 1usize;
        let mut left = ops;
        while left > 0 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut skip = empty - 1;
            for k in 0..empty {
                acc += self.position_probability(empty, left, k);
                if u < acc {
                    skip = k;
                    break;
                }
            }
            prefix.extend(std::iter::repeat_n(false, skip));
            prefix.push(true);
            empty = empty - skip + 1;
            left -= 1;
        }
        prefix.extend(std::iter::repeat_n(false, empty));
        TreeShape(prefix)
    }
}

pub fn sample_tree_shape<R: Rng + ?Sized>(ops: usize, rng: &mut R) -> TreeShape {
    TreeShapeSampler::new(ops).sample(ops, rng)
}

/// True iff the prefix form of `f` is longer than the decoder budget.
pub fn reject_oversized(f: &Formula) -> bool {
    f.prefix_len() > MAX_TARGET_TOKENS
}

#[derive(Debug, Clone)]
pub struct Generator {
    cfg: GeneratorConfig,
    shapes: TreeShapeSampler,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let shapes = TreeShapeSampler::new(cfg.b_max);
        Ok(Generator { cfg, shapes })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// Draws an unsimplified binary tree (NOTs wrap sampled nodes; both
    /// internal nodes and leaves can be negated).
    pub fn sample_raw<R: Rng + ?Sized>(&self, spec: &SampleSpec, rng: &mut R) -> (Formula, SampleMetadata) {
        let cfg = &self.cfg;
        let dim = spec.dim.unwrap_or_else(|| rng.random_range(1..=cfg.d_max));
        let active_set: Vec<usize> = match &spec.active_set {
            Some(set) => set.clone(),
            None => {
                let count = spec.active_count.unwrap_or_else(|| match cfg.regime {
                    Regime::Noiseless => dim,
                    Regime::Noisy => rng.random_range(1..=dim.min(cfg.s_max)),
                });
                index::sample(rng, dim, count.min(dim)).into_vec()
            }
        };
        let active_count = active_set.len();
        let ops = spec
            .ops
            .unwrap_or_else(|| rng.random_range(active_count.saturating_sub(1)..=cfg.b_max.max(active_count - 1)));
        let shape = if ops <= self.shapes.max_ops {
            self.shapes.sample(ops, rng)
        } else {
            TreeShapeSampler::new(ops).sample(ops, rng)
        };

        // leaves: a random subset of S leaf slots receives the S distinct
        // active variables, the rest are uniform over the active set
        let n_leaves = ops + 1;
        let mut order: Vec<usize> = (0..n_leaves).collect();
        order.shuffle(rng);
        let mut leaf_vars = vec![usize::MAX; n_leaves];
        let mut shuffled_active = active_set.clone();
        shuffled_active.shuffle(rng);
        for (slot, &var) in order.iter().zip(&shuffled_active) {
            leaf_vars[*slot] = var;
        }
        for slot in order.iter().skip(active_count) {
            leaf_vars[*slot] = active_set[rng.random_range(0..active_count)];
        }

        let mut pos = 0;
        let mut leaf = 0;
        let tree = build_tree(shape.prefix(), &mut pos, &mut leaf, &leaf_vars, cfg.p_not, rng);
        let meta = SampleMetadata {
            dim,
            active_count,
            active_set,
            ops_initial: ops,
            gates_final: tree.binary_gate_count(),
        };
        (tree, meta)
    }

    /// Samples until the simplified formula fits the token budget. Formulas
    /// that compute a constant become that constant. In the noiseless regime
    /// the formula must also keep all of its variables.
    pub fn sample_with<R: Rng + ?Sized>(&self, spec: &SampleSpec, rng: &mut R) -> (Formula, SampleMetadata) {
        loop {
            let (raw, mut meta) = self.sample_raw(spec, rng);
            // full support: the function must depend on every sampled
            // variable, not merely mention it. Simplification preserves the
            // function, so the raw tree is checked before paying for it.
            if self.cfg.regime == Regime::Noiseless && !depends_on_all(&raw, meta.dim, meta.active_count) {
                continue;
            }
            let Ok(f) = simplify(&raw) else {
                continue;
            };
            let f = collapse_constant(f);
            if reject_oversized(&f) {
                continue;
            }
            meta.gates_final = f.binary_gate_count();
            return (f, meta);
        }
    }

    pub fn sample_formula<R: Rng + ?Sized>(&self, rng: &mut R) -> (Formula, SampleMetadata) {
        self.sample_with(&SampleSpec::default(), rng)
    }
}

fn depends_on_all(f: &Formula, dim: usize, active: usize) -> bool {
    f.truth_table(dim).is_ok_and(|t| t.support().len() == active)
}

/// Rewriting can leave a tautology or contradiction that mentions
/// variables; those are replaced by the constant they compute.
fn collapse_constant(f: Formula) -> Formula {
    if f.is_const() {
        return f;
    }
    let active: Vec<usize> = f.active_variables().into_iter().collect();
    let mut map = vec![0; active.last().map_or(0, |v| v + 1)];
    for (k, &v) in active.iter().enumerate() {
        map[v] = k;
    }
    let Ok(table) = f.remap_vars(&map).truth_table(active.len()) else {
        return f;
    };
    match table.count_ones() {
        0 => Formula::constant(false),
        n if n == table.len() => Formula::constant(true),
        _ => f,
    }
}

fn build_tree<R: Rng + ?Sized>(
    shape: &[bool],
    pos: &mut usize,
    leaf: &mut usize,
    leaf_vars: &[usize],
    p_not: f64,
    rng: &mut R,
) -> Formula {
    let internal = shape[*pos];
    *pos += 1;
    let node = if internal {
        let is_and = rng.random_bool(0.5);
        let l = build_tree(shape, pos, leaf, leaf_vars, p_not, rng);
        let r = build_tree(shape, pos, leaf, leaf_vars, p_not, rng);
        if is_and {
            Formula::And(vec![l, r])
        } else {
            Formula::Or(vec![l, r])
        }
    } else {
        let v = leaf_vars[*leaf];
        *leaf += 1;
        Formula::Var(v)
    };
    if rng.random_bool(p_not) {
        Formula::not(node)
    } else {
        node
    }
}

pub fn sample_formula<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<(Formula, SampleMetadata)> {
    Ok(Generator::new(cfg.clone())?.sample_formula(rng))
}
