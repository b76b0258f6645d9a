//! Replaying instruction scripts against incremental solver sessions.
//!
//! Backends with native push/pop receive the frame operations directly.
//! Assumption-only backends (the IPASIR model) get them emulated: every
//! frame owns a fresh selector variable `s`, its clauses are added as
//! `c ∨ s`, each solve assumes `¬s` for the open frames and a pop asserts
//! the unit `s`, which satisfies the frame's clauses for good.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analyzer::PrefixInstruction;
use crate::formula::{
    occurring_variables, Clause, ClauseSet, FormulaError, FormulaKind, Literal, PcnfFormula,
    Prefix, QuantifiedSet, Quantifier, Var,
};
use crate::script::{InstructionScript, ScriptStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Sat,
    Unsat,
    /// Timeout or the backend gave up.
    Unknown,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Sat => "SAT",
            SolveStatus::Unsat => "UNSAT",
            SolveStatus::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// 1-based step the solve belongs to.
    pub step_index: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub native_push_pop: bool,
    pub prefix_ops: bool,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("operation not supported by this backend: {0}")]
    Unsupported(&'static str),
    #[error("pop without an open frame")]
    NoOpenFrame,
    #[error("{0}")]
    Failure(String),
}

/// An incremental solver as seen by the replayer.
///
/// Frame and prefix operations have default implementations that reject the
/// call, so assumption-only backends implement just the clause, assumption
/// and solve entry points.
pub trait SolverSession {
    fn capabilities(&self) -> Capabilities;

    fn add_clause(&mut self, clause: &Clause) -> Result<(), BackendError>;

    fn assume(&mut self, lit: Literal) -> Result<(), BackendError>;

    /// Solves under the pending assumptions, which are cleared afterwards.
    /// Returns [`SolveStatus::Unknown`] once `deadline` has passed.
    fn solve(&mut self, deadline: Option<Instant>) -> Result<SolveStatus, BackendError>;

    fn push_frame(&mut self) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("push"))
    }

    fn pop_frame(&mut self) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("pop"))
    }

    fn add_quantified_set(
        &mut self,
        _level: usize,
        _quantifier: Quantifier,
        _vars: &BTreeSet<Var>,
    ) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("add quantified set"))
    }

    fn add_vars_to_set(
        &mut self,
        _level: usize,
        _vars: &BTreeSet<Var>,
    ) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("add variables to quantified set"))
    }
}

/// A single call issued to a [`SolverSession`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendCall {
    AddClause(Clause),
    PushFrame,
    PopFrame,
    AddQuantifiedSet {
        level: usize,
        quantifier: Quantifier,
        vars: BTreeSet<Var>,
    },
    AddVarsToSet {
        level: usize,
        vars: BTreeSet<Var>,
    },
    Assume(Literal),
    Solve,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("capability mismatch: {0}")]
    CapabilityMismatch(String),
    #[error("step {step}: backend failure: {source}")]
    BackendFailure { step: usize, source: BackendError },
    #[error("step {step}: {message}")]
    InvalidScript { step: usize, message: String },
    #[error("selector variables exhausted the variable range")]
    SelectorOverflow,
}

/// Selector bookkeeping for push/pop emulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorState {
    frame_stack: Vec<Var>,
    next_fresh_var: Var,
}

impl SelectorState {
    /// Selectors start right above `max_var`.
    pub fn new(max_var: Var) -> Self {
        SelectorState {
            frame_stack: Vec::new(),
            next_fresh_var: max_var + 1,
        }
    }

    pub fn open_frames(&self) -> &[Var] {
        &self.frame_stack
    }

    pub fn next_fresh_var(&self) -> Var {
        self.next_fresh_var
    }

    fn fresh(&mut self) -> Result<Var, ReplayError> {
        let v = self.next_fresh_var;
        if v > i32::MAX as Var {
            return Err(ReplayError::SelectorOverflow);
        }
        self.next_fresh_var += 1;
        Ok(v)
    }
}

/// Lowers one step to calls for an assumption-only backend.
pub fn emulate_push_pop(
    state: &mut SelectorState,
    step: &ScriptStep,
    step_index: usize,
) -> Result<Vec<BackendCall>, ReplayError> {
    let mut calls = Vec::with_capacity(step.add.len() + step.push.len() + 4);
    if step.pop {
        let Some(sel) = state.frame_stack.pop() else {
            return Err(ReplayError::InvalidScript {
                step: step_index,
                message: "pop without an open frame".into(),
            });
        };
        calls.push(BackendCall::AddClause(Clause::from_literals(vec![
            Literal::positive(sel),
        ])));
    }
    calls.extend(step.add.iter().cloned().map(BackendCall::AddClause));
    let sel = state.fresh()?;
    state.frame_stack.push(sel);
    let sel_lit = Literal::positive(sel);
    calls.extend(
        step.push
            .iter()
            .map(|c| BackendCall::AddClause(c.with_literal(sel_lit))),
    );
    calls.extend(step.prefix_ops.iter().map(prefix_call));
    if step.solve {
        calls.extend(
            state
                .frame_stack
                .iter()
                .map(|&s| BackendCall::Assume(Literal::negative(s))),
        );
        calls.push(BackendCall::Solve);
    }
    Ok(calls)
}

/// Lowers one step to calls for a backend with native push/pop.
pub fn native_calls(step: &ScriptStep) -> Vec<BackendCall> {
    let mut calls = Vec::with_capacity(step.add.len() + step.push.len() + 4);
    if step.pop {
        calls.push(BackendCall::PopFrame);
    }
    calls.extend(step.add.iter().cloned().map(BackendCall::AddClause));
    calls.push(BackendCall::PushFrame);
    calls.extend(step.push.iter().cloned().map(BackendCall::AddClause));
    calls.extend(step.prefix_ops.iter().map(prefix_call));
    if step.solve {
        calls.push(BackendCall::Solve);
    }
    calls
}

fn prefix_call(op: &PrefixInstruction) -> BackendCall {
    match op {
        PrefixInstruction::AddSet {
            level,
            quantifier,
            vars,
        } => BackendCall::AddQuantifiedSet {
            level: *level,
            quantifier: *quantifier,
            vars: vars.clone(),
        },
        PrefixInstruction::AddVars { level, vars } => BackendCall::AddVarsToSet {
            level: *level,
            vars: vars.clone(),
        },
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayOptions {
    /// Per-solve time limit.
    pub timeout: Option<Duration>,
}

/// Runs `script` on `backend`, returning one result per solve.
pub fn replay(
    script: &InstructionScript,
    backend: &mut dyn SolverSession,
    options: &ReplayOptions,
) -> Result<Vec<SolveResult>, ReplayError> {
    let caps = backend.capabilities();
    if script.kind() == FormulaKind::Qbf && !caps.prefix_ops {
        return Err(ReplayError::CapabilityMismatch(
            "qbf scripts need a backend with prefix operations".into(),
        ));
    }
    let mut selectors = SelectorState::new(script.declared_max_var());
    let mut results = Vec::with_capacity(script.steps().len());
    for (i, step) in script.steps().iter().enumerate() {
        let step_index = i + 1;
        let calls = if caps.native_push_pop {
            native_calls(step)
        } else {
            emulate_push_pop(&mut selectors, step, step_index)?
        };
        for call in calls {
            let fail = |source| ReplayError::BackendFailure {
                step: step_index,
                source,
            };
            match call {
                BackendCall::AddClause(c) => backend.add_clause(&c),
                BackendCall::PushFrame => backend.push_frame(),
                BackendCall::PopFrame => backend.pop_frame(),
                BackendCall::AddQuantifiedSet {
                    level,
                    quantifier,
                    vars,
                } => backend.add_quantified_set(level, quantifier, &vars),
                BackendCall::AddVarsToSet { level, vars } => backend.add_vars_to_set(level, &vars),
                BackendCall::Assume(l) => backend.assume(l),
                BackendCall::Solve => {
                    let start = Instant::now();
                    let deadline = options.timeout.map(|t| start + t);
                    let status = backend.solve(deadline).map_err(fail)?;
                    results.push(SolveResult {
                        status,
                        step_index,
                        elapsed: start.elapsed(),
                    });
                    Ok(())
                }
            }
            .map_err(fail)?;
        }
    }
    Ok(results)
}

/// Writes the per-step report followed by a summary line.
pub fn write_report<W: Write>(results: &[SolveResult], mut out: W) -> io::Result<()> {
    let mut counts = [0usize; 3];
    let mut total = Duration::ZERO;
    for r in results {
        writeln!(
            out,
            "step {} {} {}",
            r.step_index,
            r.status,
            r.elapsed.as_millis()
        )?;
        counts[match r.status {
            SolveStatus::Sat => 0,
            SolveStatus::Unsat => 1,
            SolveStatus::Unknown => 2,
        }] += 1;
        total += r.elapsed;
    }
    writeln!(
        out,
        "summary solves={} sat={} unsat={} unknown={} millis={}",
        results.len(),
        counts[0],
        counts[1],
        counts[2],
        total.as_millis()
    )
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixApplyError {
    #[error("nesting level {level} is out of range for a prefix with {len} sets")]
    LevelOutOfRange { level: usize, len: usize },
    #[error("variable {0} is already quantified")]
    AlreadyQuantified(Var),
}

/// The prefix a backend holds while prefix instructions are applied.
///
/// In between updates neighbouring sets may share a quantifier; they are
/// merged when unused variables are cleaned up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixState {
    sets: Vec<QuantifiedSet>,
}

impl PrefixState {
    pub fn new(prefix: &Prefix) -> Self {
        PrefixState {
            sets: prefix.sets().to_vec(),
        }
    }

    pub fn sets(&self) -> &[QuantifiedSet] {
        &self.sets
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.sets.iter().any(|s| s.vars().contains(&var))
    }

    /// `AddSet` inserts a set so that it sits at `level`; `AddVars` extends
    /// the set at `level`.
    pub fn apply(&mut self, op: &PrefixInstruction) -> Result<(), PrefixApplyError> {
        if let Some(v) = op.vars().iter().find(|&&v| self.contains_var(v)) {
            return Err(PrefixApplyError::AlreadyQuantified(*v));
        }
        let len = self.sets.len();
        match op {
            PrefixInstruction::AddSet {
                level,
                quantifier,
                vars,
            } => {
                if *level == 0 || *level > len + 1 {
                    return Err(PrefixApplyError::LevelOutOfRange { level: *level, len });
                }
                let set = QuantifiedSet::new(*quantifier, vars.iter().copied())
                    .expect("instructions carry variables");
                self.sets.insert(level - 1, set);
            }
            PrefixInstruction::AddVars { level, vars } => {
                if *level == 0 || *level > len {
                    return Err(PrefixApplyError::LevelOutOfRange { level: *level, len });
                }
                self.sets[level - 1].vars_mut().extend(vars.iter().copied());
            }
        }
        Ok(())
    }

    /// The prefix restricted to `keep`, with empty sets dropped and equal
    /// neighbours merged.
    pub fn restricted(&self, keep: &BTreeSet<Var>) -> Prefix {
        let sets = self.sets.iter().filter_map(|s| {
            QuantifiedSet::new(s.quantifier(), s.vars().intersection(keep).copied()).ok()
        });
        Prefix::normalized(sets).expect("state never binds a variable twice")
    }

    /// Drops unused variables and empty sets, as a solver does after a pop.
    pub fn cleanup(&mut self, keep: &BTreeSet<Var>) {
        self.sets = self.restricted(keep).into_sets();
    }
}

/// Applies `ops` to `r` and removes everything not in `keep`.
pub fn apply_prefix_instructions(
    r: &Prefix,
    ops: &[PrefixInstruction],
    keep: &BTreeSet<Var>,
) -> Result<Prefix, PrefixApplyError> {
    let mut state = PrefixState::new(r);
    for op in ops {
        state.apply(op)?;
    }
    Ok(state.restricted(keep))
}

/// Replays `script` symbolically and returns the formula visible at each
/// solve. QBF prefixes are restricted to the variables that occur.
pub fn reconstruct(script: &InstructionScript) -> Result<Vec<PcnfFormula>, ReplayError> {
    let qbf = script.kind() == FormulaKind::Qbf;
    let mut base = ClauseSet::new();
    let mut frame: Option<&[Clause]> = None;
    let mut prefix = PrefixState::default();
    let mut out = Vec::new();
    for (i, step) in script.steps().iter().enumerate() {
        let step_index = i + 1;
        let invalid = |message: String| ReplayError::InvalidScript {
            step: step_index,
            message,
        };
        if step.pop {
            if frame.take().is_none() {
                return Err(invalid("pop without an open frame".into()));
            }
            if qbf {
                prefix.cleanup(&occurring_variables(&base));
            }
        }
        base.extend(step.add.iter().cloned());
        frame = Some(&step.push);
        for op in &step.prefix_ops {
            prefix.apply(op).map_err(|e| invalid(e.to_string()))?;
        }
        if !step.solve {
            continue;
        }
        let mut clauses = base.clone();
        clauses.extend(frame.unwrap_or(&[]).iter().cloned());
        let formula = if qbf {
            let p = prefix.restricted(&occurring_variables(&clauses));
            PcnfFormula::closed(p, clauses).map_err(|e| match e {
                FormulaError::FreeVariable(v) => invalid(format!("variable {v} is not quantified")),
                other => invalid(other.to_string()),
            })?
        } else {
            PcnfFormula::cnf(clauses)
        };
        out.push(formula);
    }
    Ok(out)
}
