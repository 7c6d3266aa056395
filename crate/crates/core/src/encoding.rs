//! Token streams for the sequence model.
//!
//! Encoder side: every observation becomes one row of `D_max + 1` slot
//! tokens (`0`, `1` or padding for unused input dimensions, then the output
//! bit). Full truth tables are compressed to the rows carrying the minority
//! output, preceded by an indicator of which value that is.
//!
//! Decoder side: `BOS`, the prefix tokens of the formula, `EOS`.

use std::fmt::Write as _;

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::formula::{parse_prefix, Formula, Token};
use crate::generator::MAX_TARGET_TOKENS;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
const AND: u32 = 3;
const OR: u32 = 4;
const NOT: u32 = 5;
const TRUE: u32 = 6;
const FALSE: u32 = 7;
const FIRST_VAR: u32 = 8;

/// Row slot tokens.
pub const SLOT_ZERO: u8 = 0;
pub const SLOT_ONE: u8 = 1;
pub const SLOT_PAD: u8 = 2;
pub const SLOT_VOCAB: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vocabulary {
    d_max: usize,
}

impl Vocabulary {
    pub fn new(d_max: usize) -> Self {
        Vocabulary { d_max }
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn decoder_size(&self) -> usize {
        FIRST_VAR as usize + self.d_max
    }

    pub fn row_width(&self) -> usize {
        self.d_max + 1
    }

    pub fn token_id(&self, token: Token) -> Result<u32> {
        Ok(match token {
            Token::And => AND,
            Token::Or => OR,
            Token::Not => NOT,
            Token::True => TRUE,
            Token::False => FALSE,
            Token::Var(i) if i < self.d_max => FIRST_VAR + i as u32,
            Token::Var(i) => {
                return Err(Error::DimensionMismatch {
                    index: i,
                    dim: self.d_max,
                })
            }
        })
    }

    /// `None` for the special tokens and ids outside the vocabulary.
    pub fn token(&self, id: u32) -> Option<Token> {
        match id {
            AND => Some(Token::And),
            OR => Some(Token::Or),
            NOT => Some(Token::Not),
            TRUE => Some(Token::True),
            FALSE => Some(Token::False),
            id if id >= FIRST_VAR && ((id - FIRST_VAR) as usize) < self.d_max => {
                Some(Token::Var((id - FIRST_VAR) as usize))
            }
            _ => None,
        }
    }

    pub fn decoder_tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = ["<pad>", "<bos>", "<eos>", "and", "or", "not", "true", "false"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        out.extend((0..self.d_max).map(|i| format!("x_{i}")));
        out
    }

    /// Ordered token lists, one token per line, grouped by stream.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# decoder\n");
        for t in self.decoder_tokens() {
            writeln!(s, "{t}").unwrap();
        }
        s.push_str("# slots\n0\n1\n<pad>\n# indicator\n<minority=0>\n<minority=1>\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let decoder: Vec<&str> = text
            .lines()
            .skip_while(|l| l.trim() != "# decoder")
            .skip(1)
            .take_while(|l| !l.starts_with('#'))
            .map(str::trim)
            .collect();
        let d_max = decoder.len().checked_sub(FIRST_VAR as usize).ok_or_else(|| {
            Error::Invalid("vocabulary lists fewer tokens than the fixed alphabet".into())
        })?;
        let vocab = Vocabulary::new(d_max);
        if vocab.to_text() != text {
            return Err(Error::Invalid("vocabulary does not match the standard layout".into()));
        }
        Ok(vocab)
    }

    pub fn encode_target(&self, f: &Formula) -> Result<Vec<u32>> {
        let tokens = f.to_prefix();
        if tokens.len() > MAX_TARGET_TOKENS {
            return Err(Error::Invalid(format!(
                "target has {} tokens, budget is {MAX_TARGET_TOKENS}",
                tokens.len()
            )));
        }
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        for t in tokens {
            ids.push(self.token_id(t)?);
        }
        ids.push(EOS);
        Ok(ids)
    }

    /// Inverse of [`Vocabulary::encode_target`]. A leading `BOS` is optional;
    /// the sequence must end at an `EOS`. Anything unparseable is an invalid
    /// candidate and reported as a parse error.
    pub fn decode_target(&self, ids: &[u32]) -> Result<Formula> {
        let body = ids.strip_prefix(&[BOS]).unwrap_or(ids);
        let end = body.iter().position(|&t| t == EOS).ok_or_else(|| Error::Parse {
            position: body.len(),
            message: "missing end-of-sequence token".into(),
        })?;
        let tokens = body[..end]
            .iter()
            .enumerate()
            .map(|(position, &id)| {
                self.token(id).ok_or_else(|| Error::Parse {
                    position,
                    message: format!("token id {id} is not a formula symbol"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        parse_prefix(&tokens)
    }

    fn row(&self, point: &[bool], output: bool) -> Vec<u8> {
        let mut row = Vec::with_capacity(self.row_width());
        row.extend(point.iter().map(|&b| if b { SLOT_ONE } else { SLOT_ZERO }));
        row.resize(self.d_max, SLOT_PAD);
        row.push(if output { SLOT_ONE } else { SLOT_ZERO });
        row
    }

    /// Minority-output compression of a full truth table. Ties pick 1.
    pub fn encode_noiseless(&self, obs: &ObservationSet) -> Result<EncoderInput> {
        if !obs.is_full_table() {
            return Err(Error::Invalid(
                "noiseless encoding needs the full truth table in lexicographic order".into(),
            ));
        }
        self.check_dim(obs.dim())?;
        let ones = obs.outputs().iter().filter(|&&y| y).count();
        let minority = ones <= obs.len() - ones;
        let rows = obs
            .iter()
            .filter(|(_, y)| *y == minority)
            .map(|(p, y)| self.row(p.bits(), y))
            .collect();
        Ok(EncoderInput {
            minority: Some(minority),
            rows,
        })
    }

    pub fn encode_noisy(&self, obs: &ObservationSet) -> Result<EncoderInput> {
        self.check_dim(obs.dim())?;
        Ok(EncoderInput {
            minority: None,
            rows: obs.iter().map(|(p, y)| self.row(p.bits(), y)).collect(),
        })
    }

    /// Compressed encoding for full tables, plain rows otherwise.
    pub fn encode_observations(&self, obs: &ObservationSet) -> Result<EncoderInput> {
        if obs.is_full_table() {
            self.encode_noiseless(obs)
        } else {
            self.encode_noisy(obs)
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim > self.d_max {
            return Err(Error::Invalid(format!(
                "observations have {dim} inputs, the vocabulary supports {}",
                self.d_max
            )));
        }
        Ok(())
    }
}

/// Encoder-side input for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    /// For compressed truth tables: the minority output value.
    pub minority: Option<bool>,
    /// Each row: `D_max` input slots then the output slot.
    pub rows: Vec<Vec<u8>>,
}

impl EncoderInput {
    /// Number of encoder positions (rows plus the indicator, if any).
    pub fn len(&self) -> usize {
        self.rows.len() + self.minority.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
