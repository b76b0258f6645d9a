//! Value types for literals, clauses, quantifier prefixes and formula sequences.
//!
//! Everything here is immutable once built. Clauses are normalized on
//! construction so that structural equality coincides with set equality,
//! which is what the diffing in [`crate::analyzer`] relies on.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::num::NonZeroI32;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

/// Variable identifier, always `>= 1`.
pub type Var = u32;

/// Clause set with set semantics and stable (insertion) iteration order.
pub type ClauseSet = IndexSet<Clause>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("literal 0 is not allowed inside a clause")]
    ZeroLiteral,
    #[error("literal {0} is out of range")]
    LiteralOutOfRange(i64),
    #[error("quantified sets must not be empty")]
    EmptyQuantifiedSet,
    #[error("adjacent quantified sets at levels {0} and {} share a quantifier", .0 + 1)]
    NonAlternating(usize),
    #[error("variable {0} is bound by more than one quantified set")]
    DuplicateQuantification(Var),
    #[error("variable {0} occurs in the matrix but is not quantified")]
    FreeVariable(Var),
    #[error("a formula sequence needs at least two formulas, got {0}")]
    SequenceTooShort(usize),
    #[error("formula {0} of a SAT sequence carries a quantifier prefix")]
    PrefixInSatSequence(usize),
}

/// A nonzero DIMACS literal.
///
/// Ordering is by variable first, positive before negative.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal(NonZeroI32);

impl Literal {
    pub fn new(value: i32) -> Result<Self, FormulaError> {
        match NonZeroI32::new(value) {
            None => Err(FormulaError::ZeroLiteral),
            Some(_) if value == i32::MIN => Err(FormulaError::LiteralOutOfRange(value.into())),
            Some(v) => Ok(Literal(v)),
        }
    }

    pub fn positive(var: Var) -> Self {
        Self::from_var(var, false)
    }

    pub fn negative(var: Var) -> Self {
        Self::from_var(var, true)
    }

    fn from_var(var: Var, negated: bool) -> Self {
        assert!(
            var >= 1 && var <= i32::MAX as u32,
            "variable id {var} out of range"
        );
        let v = var as i32;
        Literal(NonZeroI32::new(if negated { -v } else { v }).unwrap())
    }

    pub fn value(self) -> i32 {
        self.0.get()
    }

    pub fn var(self) -> Var {
        self.0.get().unsigned_abs()
    }

    pub fn is_negative(self) -> bool {
        self.0.get() < 0
    }

    fn key(self) -> (Var, bool) {
        (self.var(), self.is_negative())
    }
}

impl std::ops::Neg for Literal {
    type Output = Literal;

    fn neg(self) -> Literal {
        Literal(-self.0)
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// A clause in normal form: literals sorted by `(var, sign)` with duplicates
/// removed. Tautologies are kept as they are.
///
/// Cloning is cheap; the literal buffer is shared.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    lits: Arc<[Literal]>,
}

impl Clause {
    pub fn from_literals(mut lits: Vec<Literal>) -> Self {
        lits.sort_unstable();
        lits.dedup();
        Clause { lits: lits.into() }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.lits.iter().map(|l| l.var())
    }

    pub fn max_var(&self) -> Var {
        self.vars().max().unwrap_or(0)
    }

    /// Copy of this clause with `extra` appended. Used for selector literals,
    /// which are fresh and therefore sort last.
    pub fn with_literal(&self, extra: Literal) -> Clause {
        let mut lits = self.lits.to_vec();
        lits.push(extra);
        Clause::from_literals(lits)
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.lits.iter()).finish()
    }
}

/// Sorts and deduplicates raw DIMACS literals into a [`Clause`].
pub fn normalize_clause(raw: &[i32]) -> Result<Clause, FormulaError> {
    let lits = raw
        .iter()
        .map(|&v| Literal::new(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Clause::from_literals(lits))
}

pub fn occurring_variables<'a, I>(clauses: I) -> BTreeSet<Var>
where
    I: IntoIterator<Item = &'a Clause>,
{
    clauses.into_iter().flat_map(|c| c.vars()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantifier {
    Exists,
    Forall,
}

impl Quantifier {
    /// QDIMACS letter, `e` or `a`.
    pub fn letter(self) -> char {
        match self {
            Quantifier::Exists => 'e',
            Quantifier::Forall => 'a',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'e' => Some(Quantifier::Exists),
            'a' => Some(Quantifier::Forall),
            _ => None,
        }
    }

    pub fn dual(self) -> Self {
        match self {
            Quantifier::Exists => Quantifier::Forall,
            Quantifier::Forall => Quantifier::Exists,
        }
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantifiedSet {
    quantifier: Quantifier,
    vars: BTreeSet<Var>,
}

impl QuantifiedSet {
    pub fn new<I>(quantifier: Quantifier, vars: I) -> Result<Self, FormulaError>
    where
        I: IntoIterator<Item = Var>,
    {
        let vars: BTreeSet<Var> = vars.into_iter().collect();
        if vars.is_empty() {
            return Err(FormulaError::EmptyQuantifiedSet);
        }
        Ok(QuantifiedSet { quantifier, vars })
    }

    pub fn quantifier(&self) -> Quantifier {
        self.quantifier
    }

    pub fn vars(&self) -> &BTreeSet<Var> {
        &self.vars
    }

    pub fn matches(&self, other: &QuantifiedSet) -> bool {
        // both sides are sorted; walk the smaller one
        let (small, large) = if self.vars.len() <= other.vars.len() {
            (&self.vars, &other.vars)
        } else {
            (&other.vars, &self.vars)
        };
        small.iter().any(|v| large.contains(v))
    }

    pub(crate) fn vars_mut(&mut self) -> &mut BTreeSet<Var> {
        &mut self.vars
    }
}

impl fmt::Display for QuantifiedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.quantifier)?;
        for (i, v) in self.vars.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

/// Quantifier prefix. Position `i` in [`Prefix::sets`] is nesting level `i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Prefix {
    sets: Vec<QuantifiedSet>,
}

impl Prefix {
    pub fn empty() -> Self {
        Prefix::default()
    }

    /// Builds a prefix, rejecting non-alternating or overlapping sets.
    pub fn new(sets: Vec<QuantifiedSet>) -> Result<Self, FormulaError> {
        for (i, w) in sets.windows(2).enumerate() {
            if w[0].quantifier == w[1].quantifier {
                return Err(FormulaError::NonAlternating(i + 1));
            }
        }
        check_disjoint(&sets)?;
        Ok(Prefix { sets })
    }

    /// Builds a prefix from arbitrary sets: empty sets are dropped and runs
    /// of equal quantifiers are merged into the first set of the run.
    pub fn normalized<I>(sets: I) -> Result<Self, FormulaError>
    where
        I: IntoIterator<Item = QuantifiedSet>,
    {
        let sets: Vec<QuantifiedSet> = sets.into_iter().collect();
        check_disjoint(&sets)?;
        let mut out: Vec<QuantifiedSet> = Vec::with_capacity(sets.len());
        for set in sets {
            if set.vars.is_empty() {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.quantifier == set.quantifier => last.vars.extend(set.vars),
                _ => out.push(set),
            }
        }
        Ok(Prefix { sets: out })
    }

    pub fn sets(&self) -> &[QuantifiedSet] {
        &self.sets
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.sets.iter().flat_map(|s| s.vars.iter().copied())
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.sets.iter().any(|s| s.vars.contains(&var))
    }

    pub fn quantifier_of(&self, var: Var) -> Option<Quantifier> {
        self.sets
            .iter()
            .find(|s| s.vars.contains(&var))
            .map(|s| s.quantifier)
    }

    pub fn max_var(&self) -> Var {
        self.vars().max().unwrap_or(0)
    }

    pub fn into_sets(self) -> Vec<QuantifiedSet> {
        self.sets
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.sets.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

fn check_disjoint(sets: &[QuantifiedSet]) -> Result<(), FormulaError> {
    let mut seen = HashSet::new();
    for set in sets {
        for &v in &set.vars {
            if !seen.insert(v) {
                return Err(FormulaError::DuplicateQuantification(v));
            }
        }
    }
    Ok(())
}

/// Keeps only the variables in `keep`, dropping sets that become empty and
/// merging neighbours that end up with the same quantifier.
pub fn restrict_prefix(prefix: &Prefix, keep: &BTreeSet<Var>) -> Prefix {
    let mut out: Vec<QuantifiedSet> = Vec::with_capacity(prefix.sets.len());
    for set in &prefix.sets {
        let vars: BTreeSet<Var> = set.vars.intersection(keep).copied().collect();
        if vars.is_empty() {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.quantifier == set.quantifier => last.vars.extend(vars),
            _ => out.push(QuantifiedSet {
                quantifier: set.quantifier,
                vars,
            }),
        }
    }
    Prefix { sets: out }
}

/// A prenex CNF. Plain CNFs have an empty prefix and skip the closedness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcnfFormula {
    prefix: Prefix,
    clauses: ClauseSet,
}

impl PcnfFormula {
    pub fn cnf(clauses: ClauseSet) -> Self {
        PcnfFormula {
            prefix: Prefix::empty(),
            clauses,
        }
    }

    /// Builds a closed PCNF: every matrix variable must be quantified.
    pub fn closed(prefix: Prefix, clauses: ClauseSet) -> Result<Self, FormulaError> {
        for c in &clauses {
            for v in c.vars() {
                if !prefix.contains_var(v) {
                    return Err(FormulaError::FreeVariable(v));
                }
            }
        }
        Ok(PcnfFormula { prefix, clauses })
    }

    pub fn prefix(&self) -> &Prefix {
        &self.prefix
    }

    pub fn clauses(&self) -> &ClauseSet {
        &self.clauses
    }

    pub fn is_closed(&self) -> bool {
        self.clauses
            .iter()
            .flat_map(|c| c.vars())
            .all(|v| self.prefix.contains_var(v))
    }

    pub fn occurring_variables(&self) -> BTreeSet<Var> {
        occurring_variables(&self.clauses)
    }

    /// Prefix restricted to the variables that occur in the matrix.
    pub fn occurring_prefix(&self) -> Prefix {
        restrict_prefix(&self.prefix, &self.occurring_variables())
    }

    pub fn max_var(&self) -> Var {
        self.clauses
            .iter()
            .map(Clause::max_var)
            .max()
            .unwrap_or(0)
            .max(self.prefix.max_var())
    }

    pub fn into_parts(self) -> (Prefix, ClauseSet) {
        (self.prefix, self.clauses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulaKind {
    Sat,
    Qbf,
}

impl FormulaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaKind::Sat => "sat",
            FormulaKind::Qbf => "qbf",
        }
    }
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaSequence {
    kind: FormulaKind,
    formulas: Vec<PcnfFormula>,
}

impl FormulaSequence {
    pub fn new(kind: FormulaKind, formulas: Vec<PcnfFormula>) -> Result<Self, FormulaError> {
        if formulas.len() < 2 {
            return Err(FormulaError::SequenceTooShort(formulas.len()));
        }
        for (i, f) in formulas.iter().enumerate() {
            match kind {
                FormulaKind::Sat if !f.prefix.is_empty() => {
                    return Err(FormulaError::PrefixInSatSequence(i + 1))
                }
                FormulaKind::Qbf => {
                    if let Some(v) = f
                        .clauses
                        .iter()
                        .flat_map(|c| c.vars())
                        .find(|&v| !f.prefix.contains_var(v))
                    {
                        return Err(FormulaError::FreeVariable(v));
                    }
                }
                FormulaKind::Sat => {}
            }
        }
        Ok(FormulaSequence { kind, formulas })
    }

    pub fn kind(&self) -> FormulaKind {
        self.kind
    }

    pub fn formulas(&self) -> &[PcnfFormula] {
        &self.formulas
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }
}
