//! DIMACS CNF and QDIMACS PCNF reading and writing.
//!
//! Input is consumed line by line from any [`BufRead`], so whole files never
//! have to be held in memory. Header counts that disagree with the body are
//! reported as warnings rather than errors.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::formula::{
    Clause, ClauseSet, FormulaKind, Literal, PcnfFormula, Prefix, QuantifiedSet, Quantifier, Var,
};

/// A located message produced while reading a file. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn diagnostic(&self) -> ParseDiagnostic {
        ParseDiagnostic {
            line: self.line,
            message: self.kind.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("end of input inside a clause")]
    UnterminatedClause,
    #[error("expected an integer, found {0:?}")]
    NonIntegerToken(String),
    #[error("literal {0} is out of range")]
    LiteralOutOfRange(String),
    #[error("non-ASCII byte 0x{0:02x} outside a comment")]
    NonAscii(u8),
    #[error("malformed quantifier line: {0}")]
    MalformedQuantifier(String),
    #[error("quantifier line after the first clause")]
    QuantifierAfterClause,
    #[error("variable {0} is quantified more than once")]
    DuplicateQuantification(Var),
    #[error("variable {0} is not quantified")]
    FreeVariable(Var),
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// Result of a successful parse.
#[derive(Debug, Clone)]
pub struct ParsedFormula {
    pub formula: PcnfFormula,
    pub declared_vars: u64,
    pub declared_clauses: u64,
    pub warnings: Vec<ParseDiagnostic>,
}

pub fn parse_dimacs<R: BufRead>(input: R) -> Result<ParsedFormula, ParseError> {
    Parser::new(input, false).run()
}

pub fn parse_qdimacs<R: BufRead>(input: R) -> Result<ParsedFormula, ParseError> {
    Parser::new(input, true).run()
}

/// Parses with the grammar matching `kind`.
pub fn parse_formula<R: BufRead>(input: R, kind: FormulaKind) -> Result<ParsedFormula, ParseError> {
    match kind {
        FormulaKind::Sat => parse_dimacs(input),
        FormulaKind::Qbf => parse_qdimacs(input),
    }
}

/// Guesses the formula kind from the presence of quantifier lines before the
/// first clause line. Unreadable or malformed input falls back to `Sat`; the
/// real parse reports the problem.
pub fn sniff_kind<R: BufRead>(mut input: R) -> FormulaKind {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        match input.read_until(b'\n', &mut buf) {
            Ok(0) | Err(_) => return FormulaKind::Sat,
            Ok(_) => {}
        }
        let line = trim_ws(&buf);
        match line.first() {
            None | Some(b'c') | Some(b'p') => continue,
            Some(b'e') | Some(b'a') => return FormulaKind::Qbf,
            Some(_) => return FormulaKind::Sat,
        }
    }
}

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c)
}

fn trim_ws(bytes: &[u8]) -> &[u8] {
    let start = bytes.iter().position(|&b| !is_ws(b)).unwrap_or(bytes.len());
    let end = bytes
        .iter()
        .rposition(|&b| !is_ws(b))
        .map_or(start, |e| e + 1);
    &bytes[start..end]
}

fn tokens(line: &[u8]) -> impl Iterator<Item = &[u8]> {
    line.split(|&b| is_ws(b)).filter(|t| !t.is_empty())
}

fn token_text(tok: &[u8]) -> String {
    let mut s = String::from_utf8_lossy(tok).into_owned();
    if s.len() > 32 {
        let mut cut = 32;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push_str("...");
    }
    s
}

pub(crate) enum IntToken {
    Value(i64),
    NotInteger,
    Overflow,
}

pub(crate) fn parse_int(tok: &[u8]) -> IntToken {
    let (neg, digits) = match tok.split_first() {
        Some((b'-', rest)) => (true, rest),
        Some((b'+', rest)) => (false, rest),
        _ => (false, tok),
    };
    if digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return IntToken::NotInteger;
    }
    let mut value: i64 = 0;
    for &d in digits {
        value = match value
            .checked_mul(10)
            .and_then(|v| v.checked_add(i64::from(d - b'0')))
        {
            Some(v) => v,
            None => return IntToken::Overflow,
        };
    }
    IntToken::Value(if neg { -value } else { value })
}

/// Parses a token as a DIMACS literal or terminating zero.
pub(crate) fn parse_lit_token(tok: &[u8]) -> Result<i32, ParseErrorKind> {
    match parse_int(tok) {
        IntToken::Value(v) if v.abs() <= i64::from(i32::MAX) => Ok(v as i32),
        IntToken::Value(_) | IntToken::Overflow => {
            Err(ParseErrorKind::LiteralOutOfRange(token_text(tok)))
        }
        IntToken::NotInteger => Err(ParseErrorKind::NonIntegerToken(token_text(tok))),
    }
}

pub(crate) fn first_non_ascii(bytes: &[u8]) -> Option<u8> {
    bytes.iter().copied().find(|b| !b.is_ascii())
}

struct Parser<R> {
    input: R,
    allow_prefix: bool,
    line_no: usize,
    header: Option<(u64, u64)>,
    header_line: usize,
    sets: Vec<QuantifiedSet>,
    quantified: HashSet<Var>,
    clauses: ClauseSet,
    clause_lines: usize,
    pending: Vec<Literal>,
    seen_clause: bool,
    warnings: Vec<ParseDiagnostic>,
}

impl<R: BufRead> Parser<R> {
    fn new(input: R, allow_prefix: bool) -> Self {
        Parser {
            input,
            allow_prefix,
            line_no: 0,
            header: None,
            header_line: 0,
            sets: Vec::new(),
            quantified: HashSet::new(),
            clauses: ClauseSet::new(),
            clause_lines: 0,
            pending: Vec::new(),
            seen_clause: false,
            warnings: Vec::new(),
        }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line_no.max(1),
            kind,
        }
    }

    fn run(mut self) -> Result<ParsedFormula, ParseError> {
        let mut buf = Vec::with_capacity(256);
        loop {
            buf.clear();
            let n = self
                .input
                .read_until(b'\n', &mut buf)
                .map_err(|e| self.err(e.into()))?;
            if n == 0 {
                break;
            }
            self.line_no += 1;
            self.line(&buf)?;
        }
        self.finish()
    }

    fn line(&mut self, raw: &[u8]) -> Result<(), ParseError> {
        let line = trim_ws(raw);
        match line.first() {
            None => return Ok(()),
            Some(b'c') => return Ok(()),
            _ => {}
        }
        if let Some(b) = first_non_ascii(line) {
            return Err(self.err(ParseErrorKind::NonAscii(b)));
        }
        if line[0] == b'p' {
            return self.header_line(line);
        }
        if self.header.is_none() {
            return Err(self.err(ParseErrorKind::MalformedHeader(
                "expected `p cnf <vars> <clauses>` before any content".into(),
            )));
        }
        if self.allow_prefix {
            let mut it = tokens(line);
            if let Some(q) = it.next().and_then(|t| match t {
                b"e" => Some(Quantifier::Exists),
                b"a" => Some(Quantifier::Forall),
                _ => None,
            }) {
                return self.quantifier_line(q, it);
            }
        }
        self.clause_tokens(line)
    }

    fn header_line(&mut self, line: &[u8]) -> Result<(), ParseError> {
        if self.header.is_some() {
            return Err(self.err(ParseErrorKind::MalformedHeader("duplicate header".into())));
        }
        let toks: Vec<&[u8]> = tokens(line).collect();
        let bad = |msg: &str| ParseErrorKind::MalformedHeader(msg.to_string());
        if toks.len() != 4 || toks[0] != b"p" || toks[1] != b"cnf" {
            return Err(self.err(bad("expected `p cnf <vars> <clauses>`")));
        }
        let count = |t: &[u8]| match parse_int(t) {
            IntToken::Value(v) if v >= 0 && t[0] != b'-' && t[0] != b'+' => Some(v as u64),
            _ => None,
        };
        match (count(toks[2]), count(toks[3])) {
            (Some(vars), Some(clauses)) => {
                self.header = Some((vars, clauses));
                self.header_line = self.line_no;
                Ok(())
            }
            _ => Err(self.err(bad("counts must be non-negative integers"))),
        }
    }

    fn quantifier_line<'a>(
        &mut self,
        q: Quantifier,
        toks: impl Iterator<Item = &'a [u8]>,
    ) -> Result<(), ParseError> {
        if self.seen_clause || !self.pending.is_empty() {
            return Err(self.err(ParseErrorKind::QuantifierAfterClause));
        }
        let mut vars = Vec::new();
        let mut terminated = false;
        for tok in toks {
            if terminated {
                return Err(self.err(ParseErrorKind::MalformedQuantifier(
                    "tokens after terminating 0".into(),
                )));
            }
            let v = parse_lit_token(tok).map_err(|k| self.err(k))?;
            if v == 0 {
                terminated = true;
            } else if v < 0 {
                return Err(self.err(ParseErrorKind::MalformedQuantifier(format!(
                    "negative variable {v}"
                ))));
            } else {
                vars.push(v as Var);
            }
        }
        if !terminated {
            return Err(self.err(ParseErrorKind::MalformedQuantifier(
                "missing terminating 0".into(),
            )));
        }
        let merge = matches!(self.sets.last(), Some(last) if last.quantifier() == q);
        let mut fresh = Vec::with_capacity(vars.len());
        for v in vars {
            if self.quantified.insert(v) {
                fresh.push(v);
            } else {
                // repeating a variable inside one (merged) set is harmless
                let same_set = merge && self.sets.last().is_some_and(|s| s.vars().contains(&v));
                if !same_set && !fresh.contains(&v) {
                    return Err(self.err(ParseErrorKind::DuplicateQuantification(v)));
                }
            }
        }
        if fresh.is_empty() {
            return Ok(());
        }
        if merge {
            self.sets.last_mut().unwrap().vars_mut().extend(fresh);
        } else {
            self.sets
                .push(QuantifiedSet::new(q, fresh).expect("nonempty"));
        }
        Ok(())
    }

    fn clause_tokens(&mut self, line: &[u8]) -> Result<(), ParseError> {
        for tok in tokens(line) {
            let v = parse_lit_token(tok).map_err(|k| self.err(k))?;
            if v == 0 {
                let lits = std::mem::take(&mut self.pending);
                self.end_clause(Clause::from_literals(lits))?;
            } else {
                self.pending
                    .push(Literal::new(v).expect("nonzero, in range"));
            }
        }
        Ok(())
    }

    fn end_clause(&mut self, clause: Clause) -> Result<(), ParseError> {
        self.seen_clause = true;
        self.clause_lines += 1;
        if self.allow_prefix {
            if let Some(v) = clause.vars().find(|v| !self.quantified.contains(v)) {
                return Err(self.err(ParseErrorKind::FreeVariable(v)));
            }
        }
        self.clauses.insert(clause);
        Ok(())
    }

    fn finish(mut self) -> Result<ParsedFormula, ParseError> {
        let Some((declared_vars, declared_clauses)) = self.header else {
            return Err(self.err(ParseErrorKind::MalformedHeader("missing header".into())));
        };
        if !self.pending.is_empty() {
            return Err(self.err(ParseErrorKind::UnterminatedClause));
        }
        if self.clause_lines as u64 != declared_clauses {
            self.warnings.push(ParseDiagnostic {
                line: self.header_line,
                message: format!(
                    "header declares {declared_clauses} clauses, found {}",
                    self.clause_lines
                ),
            });
        }
        let max_var = self
            .clauses
            .iter()
            .map(Clause::max_var)
            .chain(self.quantified.iter().copied())
            .max()
            .unwrap_or(0);
        if u64::from(max_var) > declared_vars {
            self.warnings.push(ParseDiagnostic {
                line: self.header_line,
                message: format!(
                    "header declares {declared_vars} variables, found variable {max_var}"
                ),
            });
        }
        let formula = if self.allow_prefix {
            let prefix =
                Prefix::new(self.sets).expect("parser keeps prefix alternating and disjoint");
            PcnfFormula::closed(prefix, self.clauses).expect("closedness checked per clause")
        } else {
            PcnfFormula::cnf(self.clauses)
        };
        Ok(ParsedFormula {
            formula,
            declared_vars,
            declared_clauses,
            warnings: self.warnings,
        })
    }
}

/// Writes `f` in canonical QDIMACS form. With an empty prefix the output is
/// plain DIMACS.
pub fn write_qdimacs<W: Write>(f: &PcnfFormula, mut out: W) -> io::Result<()> {
    let mut clauses: Vec<&Clause> = f.clauses().iter().collect();
    clauses.sort_unstable();
    writeln!(out, "p cnf {} {}", f.max_var(), clauses.len())?;
    for set in f.prefix().sets() {
        write!(out, "{}", set.quantifier().letter())?;
        for v in set.vars() {
            write!(out, " {v}")?;
        }
        writeln!(out, " 0")?;
    }
    for c in clauses {
        write_clause_line(&mut out, c)?;
    }
    Ok(())
}

pub fn to_qdimacs_string(f: &PcnfFormula) -> String {
    let mut buf = Vec::new();
    write_qdimacs(f, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("output is ASCII")
}

pub(crate) fn write_clause_line<W: Write>(out: &mut W, c: &Clause) -> io::Result<()> {
    for l in c.literals() {
        write!(out, "{} ", l.value())?;
    }
    writeln!(out, "0")
}
