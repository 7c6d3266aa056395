//! Reference logic functions used as fixtures.

use crate::formula::{Formula, TruthTable};

/// 4-to-1 multiplexer over `x_0 = s0, x_1 = s1, x_2..x_5 = sources 0..3`:
/// the output is source `2*s1 + s0`.
pub fn multiplexer_4to1() -> Formula {
    let v = Formula::var;
    let (s0, s1) = (v(0), v(1));
    Formula::or(vec![
        Formula::and(vec![
            s0.clone(),
            Formula::or(vec![s1.clone(), v(3)]),
            Formula::or(vec![Formula::not(s1.clone()), v(5)]),
        ]),
        Formula::and(vec![
            Formula::not(s0),
            Formula::or(vec![s1.clone(), v(2)]),
            Formula::or(vec![Formula::not(s1), v(4)]),
        ]),
    ])
}

fn table_from_fn(dim: usize, f: impl Fn(usize) -> bool) -> TruthTable {
    let bits: Vec<bool> = (0..1usize << dim).map(f).collect();
    TruthTable::from_bits(dim, &bits).expect("table size matches dim")
}

/// Majority of `n` inputs (ties count as 0).
pub fn majority_table(n: usize) -> TruthTable {
    table_from_fn(n, |i| 2 * i.count_ones() as usize > n)
}

pub fn parity_table(n: usize) -> TruthTable {
    table_from_fn(n, |i| i.count_ones() % 2 == 1)
}

/// `a > b` for two unsigned `bits`-wide numbers; `a` occupies the first
/// `bits` variables (most significant first), `b` the next `bits`.
pub fn comparator_table(bits: usize) -> TruthTable {
    table_from_fn(2 * bits, |i| (i >> bits) > (i & ((1 << bits) - 1)))
}
