//! Algebraic simplification of formulas.
//!
//! The procedure is: push negations to the leaves (negation normal form),
//! apply a bottom-up rewriting pass until it stops changing the formula,
//! then normalize once more. The pass applies constant folding,
//! idempotence, complementation, absorption (plain and negative),
//! elimination, flattening and duplicate removal, and sorts children so that
//! structural equality is canonical.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::formula::Formula;

pub const MAX_PASSES: usize = 64;

/// Double-negation elimination and De Morgan: the result has NOT only
/// directly above variables.
pub fn normalize(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::Var(_) if negate => Formula::not(f.clone()),
        Formula::Var(_) => f.clone(),
        Formula::Const(b) => Formula::Const(*b ^ negate),
        Formula::Not(c) => nnf(c, !negate),
        Formula::And(cs) => {
            let cs = cs.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                Formula::Or(cs)
            } else {
                Formula::And(cs)
            }
        }
        Formula::Or(cs) => {
            let cs = cs.iter().map(|c| nnf(c, negate)).collect();
            if negate {
                Formula::And(cs)
            } else {
                Formula::Or(cs)
            }
        }
    }
}

// Negation of a canonical NNF formula, re-canonicalized.
fn negate_canonical(f: &Formula) -> Formula {
    match f {
        Formula::Var(_) => Formula::not(f.clone()),
        Formula::Not(c) => (**c).clone(),
        Formula::Const(b) => Formula::Const(!b),
        Formula::And(cs) => {
            let mut cs: Vec<_> = cs.iter().map(negate_canonical).collect();
            cs.sort();
            Formula::Or(cs)
        }
        Formula::Or(cs) => {
            let mut cs: Vec<_> = cs.iter().map(negate_canonical).collect();
            cs.sort();
            Formula::And(cs)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    And,
    Or,
}

impl Op {
    fn identity(self) -> bool {
        self == Op::And
    }

    fn annihilator(self) -> bool {
        self == Op::Or
    }

    fn dual(self) -> Op {
        match self {
            Op::And => Op::Or,
            Op::Or => Op::And,
        }
    }

    fn children(self, f: &Formula) -> Option<&[Formula]> {
        match (self, f) {
            (Op::And, Formula::And(cs)) | (Op::Or, Formula::Or(cs)) => Some(cs),
            _ => None,
        }
    }

    fn build(self, cs: Vec<Formula>) -> Formula {
        match self {
            Op::And => Formula::And(cs),
            Op::Or => Formula::Or(cs),
        }
    }
}

/// One bottom-up rewriting pass. Expects negation normal form.
pub fn simplify_pass(f: &Formula) -> Formula {
    match f {
        Formula::Var(_) | Formula::Const(_) => f.clone(),
        Formula::Not(c) => match simplify_pass(c) {
            Formula::Const(b) => Formula::Const(!b),
            Formula::Not(inner) => *inner,
            other => Formula::not(other),
        },
        Formula::And(cs) => reduce(Op::And, cs.iter().map(simplify_pass).collect()),
        Formula::Or(cs) => reduce(Op::Or, cs.iter().map(simplify_pass).collect()),
    }
}

fn reduce(op: Op, children: Vec<Formula>) -> Formula {
    let mut kept = Vec::with_capacity(children.len());
    let push = |c: Formula, kept: &mut Vec<Formula>| -> bool {
        match c {
            Formula::Const(b) if b == op.annihilator() => false,
            Formula::Const(_) => true,
            other => {
                kept.push(other);
                true
            }
        }
    };
    for c in children {
        let ok = match c {
            Formula::And(inner) if op == Op::And => inner.into_iter().all(|g| push(g, &mut kept)),
            Formula::Or(inner) if op == Op::Or => inner.into_iter().all(|g| push(g, &mut kept)),
            other => push(other, &mut kept),
        };
        if !ok {
            return Formula::Const(op.annihilator());
        }
    }

    kept.sort();
    kept.dedup();

    // x op ¬x. A compound x has its negation flattened into this node, so
    // a dual child is complemented when the negations of all its operands
    // are siblings.
    let present: BTreeSet<&Formula> = kept.iter().collect();
    let complemented = kept.iter().any(|c| match op.dual().children(c) {
        Some(parts) => parts.iter().all(|p| present.contains(&negate_canonical(p))),
        None => present.contains(&negate_canonical(c)),
    });
    if complemented {
        return Formula::Const(op.annihilator());
    }

    // x ∧ (x ∨ y) → x and x ∨ (x ∧ y) → x, generalized to sets of operands:
    // a dual-operator child is dropped when another child's operands are a
    // subset of its operands.
    let dual = op.dual();
    let operands = |c: &Formula| -> Vec<Formula> {
        match dual.children(c) {
            Some(cs) => cs.to_vec(),
            None => vec![c.clone()],
        }
    };
    let parts: Vec<Vec<Formula>> = kept.iter().map(operands).collect();
    let absorbed: Vec<bool> = (0..kept.len())
        .map(|y| {
            dual.children(&kept[y]).is_some()
                && (0..kept.len())
                    .any(|x| x != y && is_sorted_subset(&parts[x], &parts[y]))
        })
        .collect();
    let mut kept: Vec<Formula> = kept
        .into_iter()
        .zip(absorbed)
        .filter_map(|(c, gone)| (!gone).then_some(c))
        .collect();

    negative_absorption(op, &mut kept);
    eliminate(op, &mut kept);

    match kept.len() {
        0 => Formula::Const(op.identity()),
        1 => kept.pop().unwrap(),
        _ => op.build(kept),
    }
}

// x ∧ (¬x ∨ y) → x ∧ y and x ∨ (¬x ∧ y) → x ∨ y, applied child by child
// so that each rewrite sees the current siblings.
fn negative_absorption(op: Op, kept: &mut [Formula]) {
    let dual = op.dual();
    for y in 0..kept.len() {
        let Some(parts) = dual.children(&kept[y]) else {
            continue;
        };
        let remaining: Vec<Formula> = parts
            .iter()
            .filter(|p| {
                let neg = negate_canonical(p);
                !kept.iter().enumerate().any(|(x, sib)| x != y && *sib == neg)
            })
            .cloned()
            .collect();
        if remaining.len() == parts.len() {
            continue;
        }
        kept[y] = match remaining.len() {
            // every operand contradicted by a sibling
            0 => Formula::Const(dual.identity()),
            1 => remaining.into_iter().next().unwrap(),
            _ => dual.build(remaining),
        };
    }
}

// (x ∧ y) ∨ (x ∧ ¬y) → x and (x ∨ y) ∧ (x ∨ ¬y) → x: two dual children
// whose operands differ in exactly one complementary pair are merged.
fn eliminate(op: Op, kept: &mut Vec<Formula>) {
    let dual = op.dual();
    let operands = |c: &Formula| -> Vec<Formula> {
        match dual.children(c) {
            Some(cs) => cs.to_vec(),
            None => vec![c.clone()],
        }
    };
    'search: loop {
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                let (a, b) = (operands(&kept[i]), operands(&kept[j]));
                if a.len() != b.len() || a.len() < 2 {
                    continue;
                }
                let only_a: Vec<&Formula> = a.iter().filter(|p| !b.contains(p)).collect();
                let only_b: Vec<&Formula> = b.iter().filter(|p| !a.contains(p)).collect();
                if only_a.len() == 1 && only_b.len() == 1 && negate_canonical(only_a[0]) == *only_b[0] {
                    let mut common: Vec<Formula> = a.iter().filter(|p| b.contains(p)).cloned().collect();
                    let merged = if common.len() == 1 {
                        common.pop().unwrap()
                    } else {
                        dual.build(common)
                    };
                    kept.remove(j);
                    kept[i] = merged;
                    continue 'search;
                }
            }
        }
        break;
    }
}

fn is_sorted_subset(small: &[Formula], large: &[Formula]) -> bool {
    if small.len() > large.len() {
        return false;
    }
    let mut it = large.iter();
    'outer: for s in small {
        for l in it.by_ref() {
            match l.cmp(s) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => continue 'outer,
                std::cmp::Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

/// Normalize, iterate [`simplify_pass`] to a fixed point, normalize again.
pub fn simplify(f: &Formula) -> Result<Formula> {
    let mut current = normalize(f);
    let mut passes = 0;
    loop {
        let next = simplify_pass(&current);
        passes += 1;
        if next == current {
            break;
        }
        if passes >= MAX_PASSES {
            return Err(Error::IterationCap { passes });
        }
        current = next;
    }
    Ok(normalize(&current))
}
