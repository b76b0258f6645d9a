//! The `iseq` instruction script: data model, text format and size statistics.
//!
//! ```text
//! p iseq <sat|qbf> <steps> <max-var>
//! step <i>
//! pop                      (every step but the first)
//! add                      (omitted when empty)
//! <clause> 0
//! 0
//! push                     (omitted when empty)
//! <clause> 0
//! 0
//! a-set <level> <e|a> <vars> 0
//! a-vars <level> <vars> 0
//! solve
//! end
//! ```
//!
//! Files are ASCII with LF line endings.

use std::collections::{BTreeSet, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::analyzer::PrefixInstruction;
use crate::dimacs::{first_non_ascii, parse_lit_token, write_clause_line};
use crate::formula::{Clause, FormulaKind, Literal, Quantifier, Var};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: prefix instruction in a sat script")]
    KindMismatch { line: usize },
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// One incremental step: optional pop, permanent adds, one pushed frame,
/// prefix updates and the solve call.
///
/// The frame is pushed even when `push` is empty, so that the pop of the
/// following step always has a frame to remove.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptStep {
    pub pop: bool,
    pub add: Vec<Clause>,
    pub push: Vec<Clause>,
    pub prefix_ops: Vec<PrefixInstruction>,
    pub solve: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionScript {
    kind: FormulaKind,
    steps: Vec<ScriptStep>,
    declared_max_var: Var,
}

impl InstructionScript {
    /// Validates the step schema and puts clause lists into canonical
    /// (sorted, duplicate-free) order.
    pub fn new(
        kind: FormulaKind,
        mut steps: Vec<ScriptStep>,
        declared_max_var: Var,
    ) -> Result<Self, ScriptError> {
        let invalid = |msg: String| Err(ScriptError::Invalid(msg));
        if steps.is_empty() {
            return invalid("a script needs at least one step".into());
        }
        if declared_max_var > i32::MAX as Var {
            return invalid(format!("max-var {declared_max_var} is out of range"));
        }
        for (i, step) in steps.iter_mut().enumerate() {
            let no = i + 1;
            if step.pop != (i > 0) {
                return invalid(if i == 0 {
                    "step 1 must not pop".into()
                } else {
                    format!("step {no} must pop the previous frame")
                });
            }
            if kind == FormulaKind::Sat && !step.prefix_ops.is_empty() {
                return invalid(format!("step {no} has prefix instructions in a sat script"));
            }
            for list in [&mut step.add, &mut step.push] {
                list.sort_unstable();
                list.dedup();
            }
            if step.add.iter().chain(&step.push).any(Clause::is_empty) {
                return invalid(format!("step {no} contains the empty clause"));
            }
            for op in &step.prefix_ops {
                if op.level() == 0 || op.vars().is_empty() {
                    return invalid(format!("step {no} has a malformed prefix instruction"));
                }
            }
            let used = step
                .add
                .iter()
                .chain(&step.push)
                .map(Clause::max_var)
                .chain(
                    step.prefix_ops
                        .iter()
                        .flat_map(|op| op.vars().iter().copied()),
                )
                .max()
                .unwrap_or(0);
            if used > declared_max_var {
                return invalid(format!(
                    "step {no} uses variable {used} beyond declared max-var {declared_max_var}"
                ));
            }
        }
        Ok(InstructionScript {
            kind,
            steps,
            declared_max_var,
        })
    }

    pub fn kind(&self) -> FormulaKind {
        self.kind
    }

    pub fn steps(&self) -> &[ScriptStep] {
        &self.steps
    }

    pub fn declared_max_var(&self) -> Var {
        self.declared_max_var
    }
}

pub fn serialize_script<W: Write>(s: &InstructionScript, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "p iseq {} {} {}",
        s.kind.as_str(),
        s.steps.len(),
        s.declared_max_var
    )?;
    for (i, step) in s.steps.iter().enumerate() {
        writeln!(out, "step {}", i + 1)?;
        if step.pop {
            writeln!(out, "pop")?;
        }
        for (keyword, list) in [("add", &step.add), ("push", &step.push)] {
            if list.is_empty() {
                continue;
            }
            writeln!(out, "{keyword}")?;
            for c in list {
                write_clause_line(&mut out, c)?;
            }
            writeln!(out, "0")?;
        }
        for op in &step.prefix_ops {
            match op {
                PrefixInstruction::AddSet {
                    level, quantifier, ..
                } => write!(out, "a-set {level} {}", quantifier.letter())?,
                PrefixInstruction::AddVars { level, .. } => write!(out, "a-vars {level}")?,
            }
            for v in op.vars() {
                write!(out, " {v}")?;
            }
            writeln!(out, " 0")?;
        }
        if step.solve {
            writeln!(out, "solve")?;
        }
        writeln!(out, "end")?;
    }
    Ok(())
}

pub fn script_to_string(s: &InstructionScript) -> String {
    let mut buf = Vec::new();
    serialize_script(s, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("script output is ASCII")
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Start,
    Popped,
    Added,
    Pushed,
    Prefix,
    Solved,
}

struct ScriptParser<R> {
    input: R,
    line_no: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> ScriptParser<R> {
    fn malformed<T>(&self, message: impl Into<String>) -> Result<T, ScriptError> {
        Err(ScriptError::Malformed {
            line: self.line_no.max(1),
            message: message.into(),
        })
    }

    /// Next line without its LF, or `None` at end of input.
    fn next_line(&mut self) -> Result<Option<String>, ScriptError> {
        self.buf.clear();
        if self.input.read_until(b'\n', &mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
        }
        if self.buf.contains(&b'\r') {
            return self.malformed("carriage return; scripts use LF line endings");
        }
        if let Some(b) = first_non_ascii(&self.buf) {
            return self.malformed(format!("non-ASCII byte 0x{b:02x}"));
        }
        Ok(Some(
            String::from_utf8(self.buf.clone()).expect("checked ASCII"),
        ))
    }

    fn expect_line(&mut self, what: &str) -> Result<String, ScriptError> {
        match self.next_line()? {
            Some(l) => Ok(l),
            None => self.malformed(format!("unexpected end of input, expected {what}")),
        }
    }

    fn number<T: std::str::FromStr>(
        &self,
        tok: Option<&str>,
        what: &str,
    ) -> Result<T, ScriptError> {
        match tok
            .filter(|t| t.bytes().all(|b| b.is_ascii_digit()))
            .map(str::parse)
        {
            Some(Ok(v)) => Ok(v),
            _ => self.malformed(format!("expected {what}")),
        }
    }

    /// Integers of a zero-terminated line, without the terminating zero.
    fn zero_terminated(&self, toks: &[&str]) -> Result<Vec<i32>, ScriptError> {
        let Some((&last, body)) = toks.split_last() else {
            return self.malformed("expected a zero-terminated list");
        };
        if last != "0" {
            return self.malformed("missing terminating 0");
        }
        body.iter()
            .map(|t| match parse_lit_token(t.as_bytes()) {
                Ok(0) => self.malformed("0 inside a list"),
                Ok(v) => Ok(v),
                Err(e) => self.malformed(e.to_string()),
            })
            .collect()
    }

    fn clause_block(&mut self, out: &mut Vec<Clause>) -> Result<(), ScriptError> {
        loop {
            let line = self.expect_line("a clause or the 0 sentinel")?;
            let toks: Vec<&str> = line.split_ascii_whitespace().collect();
            if toks == ["0"] {
                if out.is_empty() {
                    return self.malformed("empty clause section");
                }
                return Ok(());
            }
            let lits = self.zero_terminated(&toks)?;
            out.push(Clause::from_literals(
                lits.into_iter()
                    .map(|v| Literal::new(v).expect("nonzero, in range"))
                    .collect(),
            ));
        }
    }

    fn prefix_vars(&self, toks: &[&str]) -> Result<BTreeSet<Var>, ScriptError> {
        let raw = self.zero_terminated(toks)?;
        if raw.is_empty() {
            return self.malformed("prefix instruction without variables");
        }
        let mut vars = BTreeSet::new();
        for v in raw {
            if v < 0 {
                return self.malformed(format!("negative variable {v}"));
            }
            if !vars.insert(v as Var) {
                return self.malformed(format!("variable {v} listed twice"));
            }
        }
        Ok(vars)
    }

    fn prefix_op(
        &self,
        kind: FormulaKind,
        toks: &[&str],
    ) -> Result<PrefixInstruction, ScriptError> {
        if kind == FormulaKind::Sat {
            return Err(ScriptError::KindMismatch { line: self.line_no });
        }
        let level: usize = self.number(toks.get(1).copied(), "a nesting level")?;
        if level == 0 {
            return self.malformed("nesting levels start at 1");
        }
        if toks[0] == "a-set" {
            let quantifier = match toks.get(2).copied() {
                Some("e") => Quantifier::Exists,
                Some("a") => Quantifier::Forall,
                _ => return self.malformed("expected quantifier `e` or `a`"),
            };
            let vars = self.prefix_vars(&toks[3..])?;
            Ok(PrefixInstruction::AddSet {
                level,
                quantifier,
                vars,
            })
        } else {
            let vars = self.prefix_vars(&toks[2..])?;
            Ok(PrefixInstruction::AddVars { level, vars })
        }
    }

    fn step(&mut self, kind: FormulaKind, no: usize) -> Result<ScriptStep, ScriptError> {
        let mut step = ScriptStep::default();
        let mut phase = Phase::Start;
        loop {
            let line = self.expect_line("`end`")?;
            let toks: Vec<&str> = line.split_ascii_whitespace().collect();
            let keyword = toks.first().copied().unwrap_or("");
            let (next, arity_ok) = match keyword {
                "pop" => (Phase::Popped, toks.len() == 1),
                "add" => (Phase::Added, toks.len() == 1),
                "push" => (Phase::Pushed, toks.len() == 1),
                "a-set" | "a-vars" => (Phase::Prefix, true),
                "solve" => (Phase::Solved, toks.len() == 1),
                "end" if toks.len() == 1 => break,
                _ => return self.malformed(format!("unexpected line {line:?}")),
            };
            if !arity_ok {
                return self.malformed(format!("unexpected tokens after `{keyword}`"));
            }
            if next < phase || (next == phase && next != Phase::Prefix) {
                return self.malformed(format!("`{keyword}` out of order"));
            }
            phase = next;
            match keyword {
                "pop" if no == 1 => return self.malformed("step 1 must not pop"),
                "pop" => step.pop = true,
                "add" => self.clause_block(&mut step.add)?,
                "push" => self.clause_block(&mut step.push)?,
                "solve" => step.solve = true,
                _ => step.prefix_ops.push(self.prefix_op(kind, &toks)?),
            }
        }
        if no > 1 && !step.pop {
            return self.malformed(format!("step {no} must start with `pop`"));
        }
        Ok(step)
    }

    fn run(mut self) -> Result<InstructionScript, ScriptError> {
        let header = self.expect_line("the `p iseq` header")?;
        let toks: Vec<&str> = header.split_ascii_whitespace().collect();
        if toks.len() != 5 || toks[0] != "p" || toks[1] != "iseq" {
            return self.malformed("expected `p iseq <sat|qbf> <steps> <max-var>`");
        }
        let kind = match toks[2] {
            "sat" => FormulaKind::Sat,
            "qbf" => FormulaKind::Qbf,
            _ => return self.malformed("script kind must be `sat` or `qbf`"),
        };
        let nsteps: usize = self.number(Some(toks[3]), "a step count")?;
        let max_var: Var = self.number(Some(toks[4]), "a max-var")?;
        if nsteps == 0 {
            return self.malformed("a script needs at least one step");
        }
        if max_var > i32::MAX as Var {
            return self.malformed("max-var out of range");
        }

        let mut steps = Vec::with_capacity(nsteps.min(1 << 16));
        for no in 1..=nsteps {
            let line = self.expect_line(&format!("`step {no}`"))?;
            if line != format!("step {no}") {
                return self.malformed(format!("expected `step {no}`"));
            }
            let step = self.step(kind, no)?;
            let used = step
                .add
                .iter()
                .chain(&step.push)
                .map(Clause::max_var)
                .chain(
                    step.prefix_ops
                        .iter()
                        .flat_map(|op| op.vars().iter().copied()),
                )
                .max()
                .unwrap_or(0);
            if used > max_var {
                return self.malformed(format!(
                    "variable {used} exceeds declared max-var {max_var}"
                ));
            }
            steps.push(step);
        }
        if let Some(extra) = self.next_line()? {
            return self.malformed(format!("trailing content {extra:?}"));
        }
        InstructionScript::new(kind, steps, max_var)
    }
}

pub fn parse_script<R: BufRead>(input: R) -> Result<InstructionScript, ScriptError> {
    ScriptParser {
        input,
        line_no: 0,
        buf: Vec::new(),
    }
    .run()
}

/// Size of a script compared to writing every formula out in full.
///
/// Clause counts are occurrences; `distinct_script_clauses` counts each
/// clause once no matter how often it is re-pushed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStats {
    pub steps: usize,
    pub solves: usize,
    pub script_clauses: u64,
    pub distinct_script_clauses: u64,
    pub script_literals: u64,
    pub concatenated_clauses: u64,
    pub concatenated_literals: u64,
    pub ratio: f64,
}

pub fn script_stats(s: &InstructionScript) -> ScriptStats {
    let mut base: HashSet<&Clause> = HashSet::new();
    let mut base_lits = 0u64;
    let mut distinct: HashSet<&Clause> = HashSet::new();
    let mut st = ScriptStats {
        steps: s.steps.len(),
        solves: 0,
        script_clauses: 0,
        distinct_script_clauses: 0,
        script_literals: 0,
        concatenated_clauses: 0,
        concatenated_literals: 0,
        ratio: 1.0,
    };
    for step in &s.steps {
        for c in step.add.iter().chain(&step.push) {
            st.script_clauses += 1;
            st.script_literals += c.len() as u64;
            distinct.insert(c);
        }
        for c in &step.add {
            if base.insert(c) {
                base_lits += c.len() as u64;
            }
        }
        let frame = &step.push;
        if step.solve {
            st.solves += 1;
            let extra = frame.iter().filter(|c| !base.contains(c));
            let (n, l) = extra.fold((0u64, 0u64), |(n, l), c| (n + 1, l + c.len() as u64));
            st.concatenated_clauses += base.len() as u64 + n;
            st.concatenated_literals += base_lits + l;
        }
    }
    st.distinct_script_clauses = distinct.len() as u64;
    if st.script_clauses > 0 {
        st.ratio = st.concatenated_clauses as f64 / st.script_clauses as f64;
    }
    st
}
