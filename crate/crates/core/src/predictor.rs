//! Candidate scoring and ranking, and the predictor interface the
//! evaluation harnesses are written against.

use std::cmp::Ordering;

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::evaluation::accuracy;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub formula: Formula,
    /// Agreement with the observations the candidate was proposed for.
    pub fitting_accuracy: f64,
    pub gate_count: usize,
    pub token_length: usize,
}

impl Candidate {
    /// Scores `formula` on `obs`. Formulas that reference variables outside
    /// the observed dimension are rejected.
    pub fn score(formula: Formula, obs: &ObservationSet) -> Result<Candidate> {
        let fitting_accuracy = accuracy(&formula, obs)?;
        Ok(Candidate {
            gate_count: formula.binary_gate_count(),
            token_length: formula.prefix_len(),
            formula,
            fitting_accuracy,
        })
    }

    fn order(&self, other: &Candidate) -> Ordering {
        other
            .fitting_accuracy
            .total_cmp(&self.fitting_accuracy)
            .then(self.gate_count.cmp(&other.gate_count))
            .then(self.token_length.cmp(&other.token_length))
            .then_with(|| self.formula.cmp(&other.formula))
    }
}

/// Best first: accuracy descending, then fewer gates, fewer tokens, and the
/// structural order of the formula.
pub fn rank(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.sort_by(Candidate::order);
    candidates
}

/// Raw output of a predictor before scoring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Proposals {
    pub formulas: Vec<Formula>,
    /// Decoded sequences that did not parse into a formula.
    pub invalid: usize,
}

pub trait Predictor {
    fn propose(&mut self, obs: &ObservationSet) -> Result<Proposals>;
}

impl<P: Predictor + ?Sized> Predictor for &mut P {
    fn propose(&mut self, obs: &ObservationSet) -> Result<Proposals> {
        (**self).propose(obs)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn propose(&mut self, obs: &ObservationSet) -> Result<Proposals> {
        (**self).propose(obs)
    }
}

/// Scores and ranks every usable proposal. Duplicates are kept once.
pub fn predict_ranked<P: Predictor + ?Sized>(predictor: &mut P, obs: &ObservationSet) -> Result<Vec<Candidate>> {
    let proposals = predictor.propose(obs)?;
    let sampled = proposals.formulas.len() + proposals.invalid;
    let mut seen = std::collections::BTreeSet::new();
    let mut scored = Vec::new();
    for f in proposals.formulas {
        if !seen.insert(f.clone()) {
            continue;
        }
        match Candidate::score(f, obs) {
            Ok(c) => scored.push(c),
            Err(Error::DimensionMismatch { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if scored.is_empty() {
        return Err(Error::NoCandidate { sampled });
    }
    Ok(rank(scored))
}

pub fn predict<P: Predictor + ?Sized>(predictor: &mut P, obs: &ObservationSet) -> Result<Candidate> {
    Ok(predict_ranked(predictor, obs)?.swap_remove(0))
}

/// Always proposes the same formulas; handy as a reference predictor.
#[derive(Debug, Clone)]
pub struct FixedPredictor(pub Vec<Formula>);

impl Predictor for FixedPredictor {
    fn propose(&mut self, _obs: &ObservationSet) -> Result<Proposals> {
        Ok(Proposals {
            formulas: self.0.clone(),
            invalid: 0,
        })
    }
}
