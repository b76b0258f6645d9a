//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;

use iseq_core::dimacs::parse_dimacs;
use iseq_core::{
    Clause, ClauseSet, FormulaKind, FormulaSequence, Literal, PcnfFormula, Prefix, QuantifiedSet,
    Quantifier, Var,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn clause(raw: &[i32]) -> Clause {
    iseq_core::normalize_clause(raw).unwrap()
}

/// The running example with concrete clauses:
/// c1..c5 are cumulative, v1..v3 volatile.
pub struct RunningExample {
    pub c: [Clause; 5],
    pub v: [Clause; 3],
    pub formulas: Vec<ClauseSet>,
}

pub fn running_example() -> RunningExample {
    let c = [
        clause(&[1, 2]),
        clause(&[-1, 3]),
        clause(&[-2, 4]),
        clause(&[-3, -4, 5]),
        clause(&[-2, -5]),
    ];
    let v = [clause(&[-1]), clause(&[-4]), clause(&[-3, -5])];
    let set = |xs: &[&Clause]| xs.iter().map(|x| (*x).clone()).collect::<ClauseSet>();
    let formulas = vec![
        set(&[&c[0], &c[1], &v[0]]),
        set(&[&c[0], &c[1], &c[2], &v[0], &v[1]]),
        set(&[&c[0], &c[1], &c[2], &c[3], &v[0], &v[2]]),
        set(&[&c[0], &c[1], &c[2], &c[3], &c[4]]),
    ];
    RunningExample { c, v, formulas }
}

pub fn running_sequence() -> FormulaSequence {
    let formulas = (1..=4)
        .map(|i| {
            let path = data_dir().join(format!("running/f{i}.cnf"));
            let text = std::fs::read(path).unwrap();
            parse_dimacs(text.as_slice()).unwrap().formula
        })
        .collect();
    FormulaSequence::new(FormulaKind::Sat, formulas).unwrap()
}

fn random_clause<R: Rng>(rng: &mut R, nvars: u32) -> Clause {
    let len = rng.gen_range(1..=3.min(nvars as usize));
    let mut vars: Vec<u32> = (1..=nvars).collect();
    vars.shuffle(rng);
    let raw: Vec<i32> = vars[..len]
        .iter()
        .map(|&v| {
            if rng.gen_bool(0.5) {
                v as i32
            } else {
                -(v as i32)
            }
        })
        .collect();
    clause(&raw)
}

/// Random clause-set sequence: `2..=8` formulas drawn from a pool of at most
/// 30 clauses over `nvars` variables. Clauses come and go between steps and
/// roughly every other sequence re-adds a clause that was dropped earlier.
pub fn random_clause_sets<R: Rng>(rng: &mut R, nvars: u32) -> Vec<ClauseSet> {
    let n = rng.gen_range(2..=8);
    let pool_size = rng.gen_range(1..=30);
    let mut pool: Vec<Clause> = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..pool_size * 4 {
        if pool.len() == pool_size {
            break;
        }
        let c = random_clause(rng, nvars);
        if seen.insert(c.clone()) {
            pool.push(c);
        }
    }
    let mut current: BTreeSet<usize> = (0..pool.len()).filter(|_| rng.gen_bool(0.5)).collect();
    let mut ever: BTreeSet<usize> = current.clone();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let drop_p = rng.gen_range(0.0..0.4);
            let add_p = rng.gen_range(0.0..0.4);
            current.retain(|_| !rng.gen_bool(drop_p));
            for k in 0..pool.len() {
                if !current.contains(&k) && rng.gen_bool(add_p) {
                    current.insert(k);
                }
            }
            // force a re-addition of something dropped before
            let dropped: Vec<usize> = ever.difference(&current).copied().collect();
            if !dropped.is_empty() && rng.gen_bool(0.5) {
                current.insert(*dropped.choose(rng).unwrap());
            }
            ever.extend(current.iter().copied());
        }
        out.push(current.iter().map(|&k| pool[k].clone()).collect());
    }
    out
}

pub fn sat_sequence(sets: &[ClauseSet]) -> FormulaSequence {
    FormulaSequence::new(
        FormulaKind::Sat,
        sets.iter().cloned().map(PcnfFormula::cnf).collect(),
    )
    .unwrap()
}

/// Turns clause sets over variables `1..=nvars` into an update-compatible
/// QBF sequence.
///
/// The variables are split into alternating blocks of a fixed master prefix
/// and every formula gets the master prefix restricted to its variables
/// (plus a few random unused ones). An anchor clause holding one variable of
/// each interior block is present in every formula, so interior blocks never
/// disappear and the blocks around them never merge. The outermost and
/// innermost block may still come and go.
pub fn qbf_sequence<R: Rng>(rng: &mut R, sets: &[ClauseSet], nvars: u32) -> FormulaSequence {
    let nblocks = rng.gen_range(1..=nvars.min(5)) as usize;
    let mut order: Vec<Var> = (1..=nvars).collect();
    order.shuffle(rng);
    let mut blocks: Vec<Vec<Var>> = vec![Vec::new(); nblocks];
    for (i, &v) in order.iter().enumerate() {
        let b = if i < nblocks {
            i
        } else {
            rng.gen_range(0..nblocks)
        };
        blocks[b].push(v);
    }
    let first = if rng.gen_bool(0.5) {
        Quantifier::Exists
    } else {
        Quantifier::Forall
    };
    let quant = |b: usize| {
        if b.is_multiple_of(2) {
            first
        } else {
            first.dual()
        }
    };

    let anchor_vars: Vec<i32> = (1..nblocks.saturating_sub(1))
        .map(|b| *blocks[b].choose(rng).unwrap() as i32)
        .collect();
    let anchor = (!anchor_vars.is_empty()).then(|| clause(&anchor_vars));

    let formulas = sets
        .iter()
        .map(|set| {
            let mut clauses = set.clone();
            if let Some(a) = &anchor {
                clauses.insert(a.clone());
            }
            let mut keep = iseq_core::occurring_variables(&clauses);
            for v in 1..=nvars {
                if rng.gen_bool(0.1) {
                    keep.insert(v);
                }
            }
            let sets = blocks.iter().enumerate().filter_map(|(b, vars)| {
                QuantifiedSet::new(quant(b), vars.iter().copied().filter(|v| keep.contains(v))).ok()
            });
            PcnfFormula::closed(Prefix::normalized(sets).unwrap(), clauses).unwrap()
        })
        .collect();
    FormulaSequence::new(FormulaKind::Qbf, formulas).unwrap()
}

/// Classification oracle written against the definitions, independent of
/// both the library's algorithm and its brute-force helper. Returns
/// (cumulative, volatile) per step.
pub fn definitional_classify(sets: &[ClauseSet]) -> Vec<(ClauseSet, ClauseSet)> {
    let n = sets.len();
    (0..n)
        .map(|i| {
            let volatile: ClauseSet = sets[i]
                .iter()
                .filter(|c| (i + 1..n).any(|j| !sets[j].contains(*c)))
                .cloned()
                .collect();
            let cumulative: ClauseSet = sets[i]
                .iter()
                .filter(|c| i == 0 || !sets[i - 1].contains(*c))
                .filter(|c| (i + 1..n).all(|j| sets[j].contains(*c)))
                .cloned()
                .collect();
            (cumulative, volatile)
        })
        .collect()
}

/// Exhaustive truth-table satisfiability over the occurring variables.
pub fn truth_table_sat(clauses: &ClauseSet) -> bool {
    let vars: Vec<Var> = iseq_core::occurring_variables(clauses)
        .into_iter()
        .collect();
    assert!(vars.len() <= 20, "truth table too large");
    let bit = |v: Var| 1u32 << vars.iter().position(|&x| x == v).unwrap();
    let masks: Vec<(u32, u32)> = clauses
        .iter()
        .map(|c| {
            c.literals().iter().fold((0, 0), |(p, n), l: &Literal| {
                if l.is_negative() {
                    (p, n | bit(l.var()))
                } else {
                    (p | bit(l.var()), n)
                }
            })
        })
        .collect();
    (0u32..1 << vars.len()).any(|a| masks.iter().all(|&(p, n)| a & p != 0 || !a & n != 0))
}

/// QBF semantics by full enumeration: the matrix is evaluated on every
/// complete assignment (variables in prefix order, innermost varying
/// fastest) and the table is folded from the innermost variable outwards.
pub fn enumeration_qbf(f: &PcnfFormula) -> bool {
    let order: Vec<(Var, Quantifier)> = f
        .prefix()
        .sets()
        .iter()
        .flat_map(|s| s.vars().iter().map(move |&v| (v, s.quantifier())))
        .collect();
    let k = order.len();
    assert!(k <= 20, "enumeration too large");
    let pos = |v: Var| {
        order
            .iter()
            .position(|&(x, _)| x == v)
            .expect("closed formula")
    };
    // variable at prefix position i is bit (k - 1 - i)
    let masks: Vec<(u32, u32)> = f
        .clauses()
        .iter()
        .map(|c| {
            c.literals().iter().fold((0, 0), |(p, n), l| {
                let b = 1u32 << (k - 1 - pos(l.var()));
                if l.is_negative() {
                    (p, n | b)
                } else {
                    (p | b, n)
                }
            })
        })
        .collect();
    let mut table: Vec<bool> = (0u32..1 << k)
        .map(|a| masks.iter().all(|&(p, n)| a & p != 0 || !a & n != 0))
        .collect();
    for i in (0..k).rev() {
        let q = order[i].1;
        table = table
            .chunks(2)
            .map(|pair| match q {
                Quantifier::Exists => pair[0] || pair[1],
                Quantifier::Forall => pair[0] && pair[1],
            })
            .collect();
    }
    table[0]
}

/// BMC-style sequence: a base that grows by `growth` cumulative clauses per
/// step plus a volatile tail (10% of each formula) that is replaced every
/// step. Clauses are random 3-literal clauses over `nvars` variables; fresh
/// ones are made unique by construction.
pub fn bmc_like<R: Rng>(
    rng: &mut R,
    n: usize,
    base: usize,
    growth: usize,
    nvars: u32,
) -> Vec<ClauseSet> {
    let mut seen: HashSet<Clause> = HashSet::new();
    let mut fresh = |rng: &mut R| loop {
        let a = rng.gen_range(1..=nvars) as i32;
        let b = rng.gen_range(1..=nvars) as i32;
        let c = rng.gen_range(1..=nvars) as i32;
        let s = |x: i32, rng: &mut R| if rng.gen_bool(0.5) { x } else { -x };
        let cl = clause(&[s(a, rng), s(b, rng), s(c, rng)]);
        if seen.insert(cl.clone()) {
            return cl;
        }
    };
    let mut permanent: Vec<Clause> = (0..base).map(|_| fresh(rng)).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            for _ in 0..growth {
                permanent.push(fresh(rng));
            }
        }
        let tail = permanent.len() / 9;
        let mut f: ClauseSet = permanent.iter().cloned().collect();
        for _ in 0..tail {
            f.insert(fresh(rng));
        }
        out.push(f);
    }
    out
}
