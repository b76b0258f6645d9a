//! Turns a formula sequence into per-step stack and prefix instructions.
//!
//! Clauses are split into cumulative ones (added once, never removed) and
//! volatile ones (pushed in a frame that the next step pops). For QBF
//! sequences the prefix of each formula is reached from the prefix left
//! behind by the previous step using add-set / add-vars instructions.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{
    occurring_variables, restrict_prefix, Clause, ClauseSet, FormulaKind, FormulaSequence, Prefix,
    Quantifier, Var,
};
use crate::script::{InstructionScript, ScriptStep};

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("at least two formulas are required, got {0}")]
    SequenceTooShort(usize),
    #[error("step {step}: {report}")]
    NotUpdateCompatible {
        step: usize,
        report: CompatibilityReport,
    },
    #[error("prefix {0} is not update-compatible to prefix {1}")]
    IncompatiblePrefixes(Prefix, Prefix),
    #[error("step {step}: the empty clause cannot be encoded in an instruction script")]
    EmptyClause { step: usize },
}

/// Cumulative and volatile clauses of one formula.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassifiedStep {
    pub cumulative: ClauseSet,
    pub volatile: ClauseSet,
}

/// Classifies the clauses of `sets` into cumulative and volatile ones.
///
/// Follows the classic three-phase scheme: the first set is split against
/// its successor, every middle set is split against both neighbours (moving
/// clauses that turn out to be removed later from their earlier cumulative
/// home into the volatile sets in between), and the last set only
/// contributes cumulative clauses.
pub fn classify_clauses(sets: &[&ClauseSet]) -> Result<Vec<ClassifiedStep>, AnalyzeError> {
    let n = sets.len();
    if n < 2 {
        return Err(AnalyzeError::SequenceTooShort(n));
    }
    let mut steps = vec![ClassifiedStep::default(); n];
    // index of the step whose cumulative set currently holds a clause
    let mut home: HashMap<Clause, usize> = HashMap::new();

    for c in sets[0] {
        if sets[1].contains(c) {
            steps[0].cumulative.insert(c.clone());
            home.insert(c.clone(), 0);
        } else {
            steps[0].volatile.insert(c.clone());
        }
    }

    for i in 1..n - 1 {
        let (prev, cur, next) = (sets[i - 1], sets[i], sets[i + 1]);
        for c in cur {
            if !next.contains(c) {
                steps[i].volatile.insert(c.clone());
                if prev.contains(c) {
                    if let Some(j) = home.remove(c) {
                        steps[j].cumulative.swap_remove(c);
                        for step in &mut steps[j..i] {
                            step.volatile.insert(c.clone());
                        }
                    }
                }
            } else if !prev.contains(c) {
                steps[i].cumulative.insert(c.clone());
                home.insert(c.clone(), i);
            }
        }
    }

    steps[n - 1].cumulative = sets[n - 1]
        .iter()
        .filter(|c| !sets[n - 2].contains(*c))
        .cloned()
        .collect();
    Ok(steps)
}

/// One prefix update. Levels are 1-based nesting levels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PrefixInstruction {
    /// Insert a new quantified set so that it ends up at `level`.
    AddSet {
        level: usize,
        quantifier: Quantifier,
        vars: BTreeSet<Var>,
    },
    /// Add variables to the set currently at `level`.
    AddVars { level: usize, vars: BTreeSet<Var> },
}

impl PrefixInstruction {
    pub fn vars(&self) -> &BTreeSet<Var> {
        match self {
            PrefixInstruction::AddSet { vars, .. } | PrefixInstruction::AddVars { vars, .. } => {
                vars
            }
        }
    }

    pub fn level(&self) -> usize {
        match self {
            PrefixInstruction::AddSet { level, .. } | PrefixInstruction::AddVars { level, .. } => {
                *level
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// A quantified set matches more than one set on the other side.
    I,
    /// Matching sets carry different quantifiers.
    Ii,
    /// Matching sets appear in a different relative order.
    Iii,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::I => "(i)",
            Condition::Ii => "(ii)",
            Condition::Iii => "(iii)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub condition: Condition,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub violations: Vec<Violation>,
}

impl CompatibilityReport {
    pub fn conditions(&self) -> BTreeSet<Condition> {
        self.violations.iter().map(|v| v.condition).collect()
    }
}

impl fmt::Display for CompatibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.compatible {
            return f.write_str("prefixes are update-compatible");
        }
        f.write_str("prefixes are not update-compatible")?;
        for v in &self.violations {
            write!(f, "; condition {}: {}", v.condition, v.detail)?;
        }
        Ok(())
    }
}

fn levels(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| (x + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks whether `r` can be turned into `s` by add-set / add-vars updates.
///
/// Every violation is reported. Condition (i) is also applied from the side
/// of `s`: a set of `s` matching several sets of `r` has no unambiguous
/// source either. Condition (iii) only compares matches with distinct sets
/// of `r`; pairs sharing an `r` set are already covered by (i).
pub fn check_update_compatible(r: &Prefix, s: &Prefix) -> CompatibilityReport {
    let rs = r.sets();
    let ss = s.sets();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (p, rset) in rs.iter().enumerate() {
        for (q, sset) in ss.iter().enumerate() {
            if rset.matches(sset) {
                edges.push((p, q));
            }
        }
    }
    let mut violations = Vec::new();

    for (p, rset) in rs.iter().enumerate() {
        let hits: Vec<usize> = edges.iter().filter(|e| e.0 == p).map(|e| e.1).collect();
        if hits.len() > 1 {
            violations.push(Violation {
                condition: Condition::I,
                detail: format!(
                    "set {} at level {} of R matches sets at levels {} of S",
                    rset,
                    p + 1,
                    levels(&hits)
                ),
            });
        }
    }
    for (q, sset) in ss.iter().enumerate() {
        let hits: Vec<usize> = edges.iter().filter(|e| e.1 == q).map(|e| e.0).collect();
        if hits.len() > 1 {
            violations.push(Violation {
                condition: Condition::I,
                detail: format!(
                    "set {} at level {} of S matches sets at levels {} of R",
                    sset,
                    q + 1,
                    levels(&hits)
                ),
            });
        }
    }
    for &(p, q) in &edges {
        if rs[p].quantifier() != ss[q].quantifier() {
            violations.push(Violation {
                condition: Condition::Ii,
                detail: format!(
                    "set {} at level {} of R matches {} at level {} of S",
                    rs[p],
                    p + 1,
                    ss[q],
                    q + 1
                ),
            });
        }
    }
    for (a, &(p1, q1)) in edges.iter().enumerate() {
        for &(p2, q2) in &edges[a + 1..] {
            if p1 == p2 || q1 == q2 {
                continue;
            }
            if (q1 < q2) != (p1 < p2) {
                violations.push(Violation {
                    condition: Condition::Iii,
                    detail: format!(
                        "levels {} and {} of S match levels {} and {} of R in swapped order",
                        q1.min(q2) + 1,
                        q1.max(q2) + 1,
                        if q1 < q2 { p1 } else { p2 } + 1,
                        if q1 < q2 { p2 } else { p1 } + 1,
                    ),
                });
            }
        }
    }
    CompatibilityReport {
        compatible: violations.is_empty(),
        violations,
    }
}

/// Emits the updates turning `r` into `s`.
///
/// Walks `s` left to right. `added` counts the sets inserted so far and
/// `level` is the level of the last set handled, so a matched set of `r` at
/// level `L` sits at `added + L` and an unmatched set goes right behind the
/// previous one. Add-vars updates with nothing to add are not emitted.
pub fn prefix_update_instructions(
    r: &Prefix,
    s: &Prefix,
) -> Result<Vec<PrefixInstruction>, AnalyzeError> {
    if !check_update_compatible(r, s).compatible {
        return Err(AnalyzeError::IncompatiblePrefixes(r.clone(), s.clone()));
    }
    let mut out = Vec::new();
    let mut added = 0usize;
    let mut level = 0usize;
    for q in s.sets() {
        match r.sets().iter().position(|m| m.matches(q)) {
            Some(pos) => {
                level = added + pos + 1;
                let m = &r.sets()[pos];
                let delta: BTreeSet<Var> = q.vars().difference(m.vars()).copied().collect();
                if !delta.is_empty() {
                    out.push(PrefixInstruction::AddVars { level, vars: delta });
                }
            }
            None => {
                added += 1;
                level += 1;
                out.push(PrefixInstruction::AddSet {
                    level,
                    quantifier: q.quantifier(),
                    vars: q.vars().clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Compiles a whole sequence into an instruction script.
///
/// For QBF sequences, the prefix a step starts from is the previous prefix
/// restricted to the variables of the clauses that survive the pop.
pub fn analyze_sequence(seq: &FormulaSequence) -> Result<InstructionScript, AnalyzeError> {
    let formulas = seq.formulas();
    let sets: Vec<&ClauseSet> = formulas.iter().map(|f| f.clauses()).collect();
    let classified = classify_clauses(&sets)?;

    let mut retained: BTreeSet<Var> = BTreeSet::new();
    let mut steps = Vec::with_capacity(classified.len());
    let mut max_var: Var = 0;

    for (i, cls) in classified.into_iter().enumerate() {
        let step_no = i + 1;
        if cls
            .cumulative
            .iter()
            .chain(&cls.volatile)
            .any(Clause::is_empty)
        {
            return Err(AnalyzeError::EmptyClause { step: step_no });
        }
        let prefix_ops = match seq.kind() {
            FormulaKind::Sat => Vec::new(),
            FormulaKind::Qbf => {
                let start = if i == 0 {
                    Prefix::empty()
                } else {
                    restrict_prefix(formulas[i - 1].prefix(), &retained)
                };
                let target = formulas[i].prefix();
                let report = check_update_compatible(&start, target);
                if !report.compatible {
                    return Err(AnalyzeError::NotUpdateCompatible {
                        step: step_no,
                        report,
                    });
                }
                prefix_update_instructions(&start, target)?
            }
        };
        retained.extend(occurring_variables(&cls.cumulative));

        let mut add: Vec<Clause> = cls.cumulative.into_iter().collect();
        let mut push: Vec<Clause> = cls.volatile.into_iter().collect();
        add.sort_unstable();
        push.sort_unstable();
        max_var = add
            .iter()
            .chain(&push)
            .map(Clause::max_var)
            .chain(prefix_ops.iter().flat_map(|op| op.vars().iter().copied()))
            .fold(max_var, Var::max);

        steps.push(ScriptStep {
            pop: i > 0,
            add,
            push,
            prefix_ops,
            solve: true,
        });
    }

    Ok(InstructionScript::new(seq.kind(), steps, max_var)
        .expect("analyzer output satisfies the script invariants"))
}
