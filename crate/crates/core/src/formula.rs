//! Boolean formula trees over AND / OR / NOT, their evaluation, size metrics
//! and the prefix (Polish notation) token format.
//!
//! AND and OR are n-ary internally. When serialized they are emitted as
//! right-nested binary applications, so `AND(a, b, c)` prints as
//! `and a and b c`. Parsing flattens nested same-operator nodes back, which
//! makes printing and parsing exact inverses on flat formulas.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`Formula::truth_table`].
pub const MAX_TABLE_DIM: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Var(usize),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Const(bool),
}

impl Formula {
    pub fn var(index: usize) -> Self {
        Formula::Var(index)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: Formula) -> Self {
        Formula::Not(Box::new(child))
    }

    /// Panics when given fewer than two children.
    pub fn and(children: Vec<Formula>) -> Self {
        assert!(children.len() >= 2, "AND needs at least two children");
        Formula::And(children)
    }

    /// Panics when given fewer than two children.
    pub fn or(children: Vec<Formula>) -> Self {
        assert!(children.len() >= 2, "OR needs at least two children");
        Formula::Or(children)
    }

    pub fn constant(value: bool) -> Self {
        Formula::Const(value)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Formula::Const(_))
    }

    /// Evaluates the formula on a bit slice. Panics if a variable index is
    /// out of range; use [`Formula::evaluate`] for the checked version.
    pub fn eval(&self, bits: &[bool]) -> bool {
        match self {
            Formula::Var(i) => bits[*i],
            Formula::Not(c) => !c.eval(bits),
            Formula::And(cs) => cs.iter().all(|c| c.eval(bits)),
            Formula::Or(cs) => cs.iter().any(|c| c.eval(bits)),
            Formula::Const(b) => *b,
        }
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool> {
        self.check_dim(assignment.len())?;
        Ok(self.eval(assignment.bits()))
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.max_var() {
            Some(index) if index >= dim => Err(Error::DimensionMismatch { index, dim }),
            _ => Ok(()),
        }
    }

    /// Full truth table over `dim` variables, variable 0 being the most
    /// significant bit of the entry index.
    pub fn truth_table(&self, dim: usize) -> Result<TruthTable> {
        if dim > MAX_TABLE_DIM {
            return Err(Error::Capacity {
                dim,
                limit: MAX_TABLE_DIM,
            });
        }
        self.check_dim(dim)?;
        let len = 1usize << dim;
        let n_words = len.div_ceil(64);
        let mut words = Vec::with_capacity(n_words);
        for w in 0..n_words {
            words.push(self.eval_word(dim, w));
        }
        if len < 64 {
            words[0] &= (1u64 << len) - 1;
        }
        Ok(TruthTable { dim, words })
    }

    // Evaluates 64 consecutive truth-table entries at once.
    fn eval_word(&self, dim: usize, word: usize) -> u64 {
        match self {
            Formula::Var(v) => column_word(dim, *v, word),
            Formula::Not(c) => !c.eval_word(dim, word),
            Formula::And(cs) => cs.iter().fold(!0, |acc, c| acc & c.eval_word(dim, word)),
            Formula::Or(cs) => cs.iter().fold(0, |acc, c| acc | c.eval_word(dim, word)),
            Formula::Const(true) => !0,
            Formula::Const(false) => 0,
        }
    }

    pub fn active_variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Formula::Var(i) => {
                out.insert(*i);
            }
            Formula::Not(c) => c.collect_vars(out),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
            Formula::Const(_) => {}
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Formula::Var(i) => Some(*i),
            Formula::Not(c) => c.max_var(),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().filter_map(|c| c.max_var()).max(),
            Formula::Const(_) => None,
        }
    }

    /// Number of two-input AND/OR gates: each n-ary node counts `n - 1`.
    /// NOT gates are free.
    pub fn binary_gate_count(&self) -> usize {
        match self {
            Formula::Var(_) | Formula::Const(_) => 0,
            Formula::Not(c) => c.binary_gate_count(),
            Formula::And(cs) | Formula::Or(cs) => {
                cs.len() - 1 + cs.iter().map(|c| c.binary_gate_count()).sum::<usize>()
            }
        }
    }

    pub fn not_count(&self) -> usize {
        match self {
            Formula::Var(_) | Formula::Const(_) => 0,
            Formula::Not(c) => 1 + c.not_count(),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().map(|c| c.not_count()).sum(),
        }
    }

    /// Length of [`Formula::to_prefix`] without building it.
    pub fn prefix_len(&self) -> usize {
        match self {
            Formula::Var(_) | Formula::Const(_) => 1,
            Formula::Not(c) => 1 + c.prefix_len(),
            Formula::And(cs) | Formula::Or(cs) => {
                cs.len() - 1 + cs.iter().map(|c| c.prefix_len()).sum::<usize>()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Var(_) | Formula::Const(_) => 0,
            Formula::Not(c) => 1 + c.depth(),
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(|c| c.depth()).max().unwrap_or(0),
        }
    }

    pub fn to_prefix(&self) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.prefix_len());
        self.emit(&mut out);
        out
    }

    fn emit(&self, out: &mut Vec<Token>) {
        match self {
            Formula::Var(i) => out.push(Token::Var(*i)),
            Formula::Const(true) => out.push(Token::True),
            Formula::Const(false) => out.push(Token::False),
            Formula::Not(c) => {
                out.push(Token::Not);
                c.emit(out);
            }
            Formula::And(cs) | Formula::Or(cs) => {
                let op = if matches!(self, Formula::And(_)) {
                    Token::And
                } else {
                    Token::Or
                };
                let (last, init) = cs.split_last().expect("n-ary node with children");
                for c in init {
                    out.push(op);
                    c.emit(out);
                }
                last.emit(out);
            }
        }
    }

    /// Merges nested same-operator nodes: `AND(a, AND(b, c))` becomes
    /// `AND(a, b, c)`. Child order is preserved.
    pub fn flatten(&self) -> Formula {
        match self {
            Formula::Var(_) | Formula::Const(_) => self.clone(),
            Formula::Not(c) => Formula::not(c.flatten()),
            Formula::And(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.flatten() {
                        Formula::And(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                Formula::And(out)
            }
            Formula::Or(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.flatten() {
                        Formula::Or(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                Formula::Or(out)
            }
        }
    }

    /// Renames variables through `map`; `map[i]` is the new index of `x_i`.
    pub fn remap_vars(&self, map: &[usize]) -> Formula {
        match self {
            Formula::Var(i) => Formula::Var(map[*i]),
            Formula::Const(b) => Formula::Const(*b),
            Formula::Not(c) => Formula::not(c.remap_vars(map)),
            Formula::And(cs) => Formula::And(cs.iter().map(|c| c.remap_vars(map)).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(|c| c.remap_vars(map)).collect()),
        }
    }
}

fn column_word(dim: usize, var: usize, word: usize) -> u64 {
    const PATTERNS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    let shift = dim - 1 - var;
    if shift < 6 {
        PATTERNS[shift]
    } else if ((word * 64) >> shift) & 1 == 1 {
        !0
    } else {
        0
    }
}

/// Parses prefix tokens. Nested same-operator applications are flattened.
pub fn parse_prefix(tokens: &[Token]) -> Result<Formula> {
    enum Frame {
        Not,
        Binary(Token, Option<Formula>),
    }

    if tokens.is_empty() {
        return Err(Error::Parse {
            position: 0,
            message: "empty token sequence".into(),
        });
    }
    let mut stack: Vec<Frame> = Vec::new();
    for (position, token) in tokens.iter().enumerate() {
        let mut value = match *token {
            Token::And | Token::Or => {
                stack.push(Frame::Binary(*token, None));
                continue;
            }
            Token::Not => {
                stack.push(Frame::Not);
                continue;
            }
            Token::True => Formula::Const(true),
            Token::False => Formula::Const(false),
            Token::Var(i) => Formula::Var(i),
        };
        loop {
            match stack.pop() {
                None => {
                    if position + 1 < tokens.len() {
                        return Err(Error::Parse {
                            position: position + 1,
                            message: format!("trailing token `{}`", tokens[position + 1]),
                        });
                    }
                    return Ok(value);
                }
                Some(Frame::Not) => value = Formula::not(value),
                Some(Frame::Binary(op, None)) => {
                    stack.push(Frame::Binary(op, Some(value)));
                    break;
                }
                Some(Frame::Binary(op, Some(left))) => value = join(op, left, value),
            }
        }
    }
    Err(Error::Parse {
        position: tokens.len(),
        message: "unexpected end of sequence (missing operand)".into(),
    })
}

fn join(op: Token, left: Formula, right: Formula) -> Formula {
    let mut children = Vec::new();
    for side in [left, right] {
        match (op, side) {
            (Token::And, Formula::And(inner)) | (Token::Or, Formula::Or(inner)) => {
                children.extend(inner)
            }
            (_, other) => children.push(other),
        }
    }
    if op == Token::And {
        Formula::And(children)
    } else {
        Formula::Or(children)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens = self.to_prefix();
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = s
            .split_whitespace()
            .enumerate()
            .map(|(position, word)| {
                word.parse::<Token>().map_err(|_| Error::Parse {
                    position,
                    message: format!("unknown token `{word}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        parse_prefix(&tokens)
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One symbol of the prefix formula alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    And,
    Or,
    Not,
    True,
    False,
    Var(usize),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::And => f.write_str("and"),
            Token::Or => f.write_str("or"),
            Token::Not => f.write_str("not"),
            Token::True => f.write_str("true"),
            Token::False => f.write_str("false"),
            Token::Var(i) => write!(f, "x_{i}"),
        }
    }
}

impl FromStr for Token {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "and" => Token::And,
            "or" => Token::Or,
            "not" => Token::Not,
            "true" => Token::True,
            "false" => Token::False,
            _ => {
                let index = s
                    .strip_prefix("x_")
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        position: 0,
                        message: format!("unknown token `{s}`"),
                    })?;
                Token::Var(index)
            }
        })
    }
}

/// A point of the Boolean hypercube.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }

    /// The `index`-th point in lexicographic order; variable 0 is the most
    /// significant bit.
    pub fn from_index(index: usize, dim: usize) -> Self {
        Assignment((0..dim).map(|v| (index >> (dim - 1 - v)) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_bits(s).map(Assignment)
    }
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Invalid(format!("expected 0/1, found `{other}`"))),
        })
        .collect()
}

/// Packed truth table; entry `i` is the output at `Assignment::from_index(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    dim: usize,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn from_bits(dim: usize, bits: &[bool]) -> Result<Self> {
        if dim > MAX_TABLE_DIM {
            return Err(Error::Capacity {
                dim,
                limit: MAX_TABLE_DIM,
            });
        }
        let len = 1usize << dim;
        if bits.len() != len {
            return Err(Error::Invalid(format!(
                "truth table over {dim} variables needs {len} entries, got {}",
                bits.len()
            )));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(TruthTable { dim, words })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        1 << self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len());
        (self.words[index / 64] >> (index % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// True when flipping `var` changes the output for some assignment.
    pub fn depends_on(&self, var: usize) -> bool {
        if var >= self.dim {
            return false;
        }
        let stride = 1usize << (self.dim - 1 - var);
        (0..self.len()).any(|i| i & stride == 0 && self.get(i) != self.get(i | stride))
    }

    /// Variables the function actually depends on.
    pub fn support(&self) -> BTreeSet<usize> {
        (0..self.dim).filter(|&v| self.depends_on(v)).collect()
    }

    /// Indices of entries equal to 1.
    pub fn minterms(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.get(i)).collect()
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a `0/1` string whose length is a power of two.
impl FromStr for TruthTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = parse_bits(s.trim())?;
        if !bits.len().is_power_of_two() {
            return Err(Error::Invalid(format!(
                "truth table length {} is not a power of two",
                bits.len()
            )));
        }
        TruthTable::from_bits(bits.len().trailing_zeros() as usize, &bits)
    }
}
