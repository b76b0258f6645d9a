//! Built-in solvers and oracles used as replay backends and in tests.
//!
//! None of this is meant to be fast. The SAT solver is plain DPLL with unit
//! propagation, the QBF evaluator expands the prefix recursively.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use thiserror::Error;

use crate::analyzer::PrefixInstruction;
use crate::analyzer::{AnalyzeError, ClassifiedStep};
use crate::formula::{
    occurring_variables, Clause, ClauseSet, Literal, PcnfFormula, Quantifier, Var,
};
use crate::replay::{BackendError, Capabilities, PrefixState, SolveStatus, SolverSession};

pub const DEFAULT_QBF_VAR_CAP: usize = 24;

/// Truth values for the variables that were asked about.
pub type Assignment = HashMap<Var, bool>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("assumptions contain both {0} and its negation")]
    ConflictingAssumptions(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QbfError {
    #[error("variable {0} is not quantified")]
    NotClosed(Var),
    #[error("{vars} quantified variables exceed the evaluator cap of {cap}")]
    VariableCap { vars: usize, cap: usize },
}

fn deadline_passed(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// DPLL over dense variable indices; literal code is `2 * var + negated`.
struct Dpll {
    clauses: Vec<Vec<u32>>,
    occurs: Vec<Vec<u32>>,
    value: Vec<Option<bool>>,
    trail: Vec<u32>,
    /// (trail length before the decision, variable, already flipped)
    decisions: Vec<(usize, u32, bool)>,
    qhead: usize,
}

impl Dpll {
    fn lit_value(&self, code: u32) -> Option<bool> {
        self.value[(code >> 1) as usize].map(|b| b != (code & 1 == 1))
    }

    fn assign(&mut self, code: u32) {
        self.value[(code >> 1) as usize] = Some(code & 1 == 0);
        self.trail.push(code >> 1);
    }

    /// Checks clause `ci`; assigns its last open literal if it became unit.
    /// Returns false on conflict.
    fn visit(&mut self, ci: usize) -> bool {
        let mut open = None;
        let mut n_open = 0;
        for &l in &self.clauses[ci] {
            match self.lit_value(l) {
                Some(true) => return true,
                Some(false) => {}
                None => {
                    n_open += 1;
                    open = Some(l);
                }
            }
        }
        match (n_open, open) {
            (0, _) => false,
            (1, Some(l)) => {
                self.assign(l);
                true
            }
            _ => true,
        }
    }

    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let v = self.trail[self.qhead] as usize;
            self.qhead += 1;
            let false_code = 2 * v as u32 + u32::from(self.value[v] == Some(true));
            for k in 0..self.occurs[false_code as usize].len() {
                let ci = self.occurs[false_code as usize][k] as usize;
                if !self.visit(ci) {
                    return false;
                }
            }
        }
        true
    }

    fn backtrack(&mut self) -> bool {
        while let Some((pos, var, flipped)) = self.decisions.pop() {
            for v in self.trail.drain(pos..) {
                self.value[v as usize] = None;
            }
            self.qhead = pos;
            if !flipped {
                self.decisions.push((pos, var, true));
                self.assign(2 * var);
                return true;
            }
        }
        false
    }

    fn run(&mut self, deadline: Option<Instant>) -> SolveStatus {
        let mut ticks = 0u32;
        loop {
            ticks = ticks.wrapping_add(1);
            if ticks % 256 == 1 && deadline_passed(deadline) {
                return SolveStatus::Unknown;
            }
            if !self.propagate() {
                if !self.backtrack() {
                    return SolveStatus::Unsat;
                }
                continue;
            }
            // dense indices follow ascending variable ids
            match self.value.iter().position(Option::is_none) {
                None => return SolveStatus::Sat,
                Some(v) => {
                    self.decisions.push((self.trail.len(), v as u32, false));
                    self.assign(2 * v as u32 + 1);
                }
            }
        }
    }
}

/// Decides `clauses ∧ assumptions`, giving up with `Unknown` after `deadline`.
///
/// Assumptions are fixed before the search starts and never revisited.
/// Decisions take the lowest unassigned variable, false first.
pub fn solve_sat_until<'a, I>(
    clauses: I,
    assumptions: &[Literal],
    deadline: Option<Instant>,
) -> Result<SolveStatus, SatError>
where
    I: IntoIterator<Item = &'a Clause>,
{
    for &a in assumptions {
        if assumptions.contains(&-a) {
            return Err(SatError::ConflictingAssumptions(a));
        }
    }
    if deadline_passed(deadline) {
        return Ok(SolveStatus::Unknown);
    }
    let clauses: Vec<&Clause> = clauses.into_iter().collect();
    let vars: BTreeSet<Var> = clauses
        .iter()
        .flat_map(|c| c.vars())
        .chain(assumptions.iter().map(|l| l.var()))
        .collect();
    let dense: HashMap<Var, u32> = vars
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32))
        .collect();
    let code = |l: Literal| 2 * dense[&l.var()] + u32::from(l.is_negative());

    let mut solver = Dpll {
        clauses: clauses
            .iter()
            .map(|c| c.literals().iter().map(|&l| code(l)).collect())
            .collect(),
        occurs: vec![Vec::new(); 2 * vars.len()],
        value: vec![None; vars.len()],
        trail: Vec::new(),
        decisions: Vec::new(),
        qhead: 0,
    };
    for (ci, c) in solver.clauses.iter().enumerate() {
        for &l in c {
            solver.occurs[l as usize].push(ci as u32);
        }
    }
    for &a in assumptions {
        if solver.lit_value(code(a)).is_none() {
            solver.assign(code(a));
        }
    }
    for ci in 0..solver.clauses.len() {
        if !solver.visit(ci) {
            return Ok(SolveStatus::Unsat);
        }
    }
    if !solver.propagate() {
        return Ok(SolveStatus::Unsat);
    }
    Ok(solver.run(deadline))
}

pub fn solve_sat<'a, I>(clauses: I, assumptions: &[Literal]) -> Result<SolveStatus, SatError>
where
    I: IntoIterator<Item = &'a Clause>,
{
    solve_sat_until(clauses, assumptions, None)
}

/// Evaluates a closed PCNF by expanding quantifiers left to right:
/// existential variables need one satisfying branch, universal ones both.
///
/// Only variables occurring in the matrix are expanded; at most `var_cap`
/// of them are accepted.
pub fn solve_qbf_until(
    f: &PcnfFormula,
    var_cap: usize,
    deadline: Option<Instant>,
) -> Result<SolveStatus, QbfError> {
    if let Some(v) = f
        .clauses()
        .iter()
        .flat_map(|c| c.vars())
        .find(|&v| !f.prefix().contains_var(v))
    {
        return Err(QbfError::NotClosed(v));
    }
    let prefix = f.occurring_prefix();
    let order: Vec<(Var, Quantifier)> = prefix
        .sets()
        .iter()
        .flat_map(|s| s.vars().iter().map(move |&v| (v, s.quantifier())))
        .collect();
    if order.len() > var_cap {
        return Err(QbfError::VariableCap {
            vars: order.len(),
            cap: var_cap,
        });
    }
    let index: HashMap<Var, usize> = order
        .iter()
        .enumerate()
        .map(|(i, (v, _))| (*v, i))
        .collect();
    let matrix: Vec<Vec<(usize, bool)>> = f
        .clauses()
        .iter()
        .map(|c| {
            c.literals()
                .iter()
                .map(|l| (index[&l.var()], l.is_negative()))
                .collect()
        })
        .collect();
    let mut eval = Expansion {
        order: &order,
        matrix: &matrix,
        value: vec![None; order.len()],
        deadline,
        nodes: 0,
        timed_out: false,
    };
    let sat = eval.expand(0);
    Ok(if eval.timed_out {
        SolveStatus::Unknown
    } else if sat {
        SolveStatus::Sat
    } else {
        SolveStatus::Unsat
    })
}

pub fn solve_qbf(f: &PcnfFormula) -> Result<SolveStatus, QbfError> {
    solve_qbf_until(f, DEFAULT_QBF_VAR_CAP, None)
}

struct Expansion<'a> {
    order: &'a [(Var, Quantifier)],
    matrix: &'a [Vec<(usize, bool)>],
    value: Vec<Option<bool>>,
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
}

impl Expansion<'_> {
    /// `Some(result)` once the partial assignment decides the matrix.
    fn matrix_value(&self) -> Option<bool> {
        let mut all_sat = true;
        for c in self.matrix {
            let mut sat = false;
            let mut open = false;
            for &(i, neg) in c {
                match self.value[i] {
                    Some(b) if b != neg => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => open = true,
                }
            }
            if !sat {
                if !open {
                    return Some(false);
                }
                all_sat = false;
            }
        }
        all_sat.then_some(true)
    }

    fn expand(&mut self, depth: usize) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(1024) && deadline_passed(self.deadline) {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        if let Some(v) = self.matrix_value() {
            return v;
        }
        let (_, q) = self.order[depth];
        let mut result = q == Quantifier::Forall;
        for b in [false, true] {
            self.value[depth] = Some(b);
            let sub = self.expand(depth + 1);
            if (q == Quantifier::Exists) == sub {
                result = sub;
                break;
            }
        }
        self.value[depth] = None;
        result
    }
}

/// Classifies every clause straight from the definitions: volatile in `F_i`
/// when some later formula lacks it, cumulative in `F_i` when it is new in
/// `F_i` and every later formula keeps it.
pub fn brute_force_classify(sets: &[&ClauseSet]) -> Result<Vec<ClassifiedStep>, AnalyzeError> {
    let n = sets.len();
    if n < 2 {
        return Err(AnalyzeError::SequenceTooShort(n));
    }
    Ok((0..n)
        .map(|i| {
            let mut step = ClassifiedStep::default();
            for c in sets[i] {
                let kept_later = sets[i + 1..].iter().all(|f| f.contains(c));
                let new_here = i == 0 || !sets[i - 1].contains(c);
                if !kept_later {
                    step.volatile.insert(c.clone());
                } else if new_here {
                    step.cumulative.insert(c.clone());
                }
            }
            step
        })
        .collect())
}

/// Assumption-only SAT session: no frames, no prefix, assumptions cleared
/// after every solve. The replayer emulates frames with selectors on top.
#[derive(Debug, Default)]
pub struct ReferenceSatSession {
    clauses: ClauseSet,
    assumptions: Vec<Literal>,
}

impl ReferenceSatSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clauses(&self) -> &ClauseSet {
        &self.clauses
    }
}

impl SolverSession for ReferenceSatSession {
    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    fn add_clause(&mut self, clause: &Clause) -> Result<(), BackendError> {
        self.clauses.insert(clause.clone());
        Ok(())
    }

    fn assume(&mut self, lit: Literal) -> Result<(), BackendError> {
        self.assumptions.push(lit);
        Ok(())
    }

    fn solve(&mut self, deadline: Option<Instant>) -> Result<SolveStatus, BackendError> {
        let assumptions = std::mem::take(&mut self.assumptions);
        solve_sat_until(&self.clauses, &assumptions, deadline)
            .map_err(|e| BackendError::Failure(e.to_string()))
    }
}

/// Session with native push/pop. In QBF mode it also keeps a prefix, drops
/// unused variables after each pop and evaluates with [`solve_qbf_until`].
#[derive(Debug)]
pub struct ReferenceStackSession {
    frames: Vec<Vec<Clause>>,
    prefix: PrefixState,
    qbf_var_cap: Option<usize>,
    assumptions: Vec<Literal>,
}

impl ReferenceStackSession {
    /// Plain SAT with native frames.
    pub fn sat() -> Self {
        ReferenceStackSession {
            frames: vec![Vec::new()],
            prefix: PrefixState::default(),
            qbf_var_cap: None,
            assumptions: Vec::new(),
        }
    }

    pub fn qbf(var_cap: usize) -> Self {
        ReferenceStackSession {
            qbf_var_cap: Some(var_cap),
            ..Self::sat()
        }
    }

    pub fn prefix(&self) -> &PrefixState {
        &self.prefix
    }

    fn all_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.frames.iter().flatten()
    }
}

impl SolverSession for ReferenceStackSession {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            native_push_pop: true,
            prefix_ops: self.qbf_var_cap.is_some(),
        }
    }

    fn add_clause(&mut self, clause: &Clause) -> Result<(), BackendError> {
        self.frames
            .last_mut()
            .expect("base frame")
            .push(clause.clone());
        Ok(())
    }

    fn assume(&mut self, lit: Literal) -> Result<(), BackendError> {
        if self.qbf_var_cap.is_some() {
            return Err(BackendError::Unsupported("assumptions in qbf mode"));
        }
        self.assumptions.push(lit);
        Ok(())
    }

    fn push_frame(&mut self) -> Result<(), BackendError> {
        self.frames.push(Vec::new());
        Ok(())
    }

    fn pop_frame(&mut self) -> Result<(), BackendError> {
        if self.frames.len() == 1 {
            return Err(BackendError::NoOpenFrame);
        }
        self.frames.pop();
        if self.qbf_var_cap.is_some() {
            let keep = occurring_variables(self.all_clauses());
            self.prefix.cleanup(&keep);
        }
        Ok(())
    }

    fn add_quantified_set(
        &mut self,
        level: usize,
        quantifier: Quantifier,
        vars: &BTreeSet<Var>,
    ) -> Result<(), BackendError> {
        if self.qbf_var_cap.is_none() {
            return Err(BackendError::Unsupported("add quantified set"));
        }
        self.prefix
            .apply(&PrefixInstruction::AddSet {
                level,
                quantifier,
                vars: vars.clone(),
            })
            .map_err(|e| BackendError::Failure(e.to_string()))
    }

    fn add_vars_to_set(&mut self, level: usize, vars: &BTreeSet<Var>) -> Result<(), BackendError> {
        if self.qbf_var_cap.is_none() {
            return Err(BackendError::Unsupported("add variables to quantified set"));
        }
        self.prefix
            .apply(&PrefixInstruction::AddVars {
                level,
                vars: vars.clone(),
            })
            .map_err(|e| BackendError::Failure(e.to_string()))
    }

    fn solve(&mut self, deadline: Option<Instant>) -> Result<SolveStatus, BackendError> {
        let assumptions = std::mem::take(&mut self.assumptions);
        match self.qbf_var_cap {
            None => solve_sat_until(self.all_clauses(), &assumptions, deadline)
                .map_err(|e| BackendError::Failure(e.to_string())),
            Some(cap) => {
                if deadline_passed(deadline) {
                    return Ok(SolveStatus::Unknown);
                }
                let clauses: ClauseSet = self.all_clauses().cloned().collect();
                let prefix = self.prefix.restricted(&occurring_variables(&clauses));
                let f = PcnfFormula::closed(prefix, clauses)
                    .map_err(|e| BackendError::Failure(e.to_string()))?;
                solve_qbf_until(&f, cap, deadline).map_err(|e| BackendError::Failure(e.to_string()))
            }
        }
    }
}
