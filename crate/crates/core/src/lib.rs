//! Incremental SAT/QBF benchmark scripts.
//!
//! A sequence of related (Q)DIMACS formulas is compiled into an `iseq`
//! instruction script: per step, at most one pop, one permanent add, one
//! pushed frame of volatile clauses, some prefix updates and a solve. The
//! script can then be replayed against any incremental backend implementing
//! [`replay::SolverSession`].
//!
//! ```
//! use iseq_core::{analyzer, dimacs, formula, reference, replay};
//!
//! let f1 = dimacs::parse_dimacs("p cnf 2 2\n1 2 0\n-1 0\n".as_bytes()).unwrap().formula;
//! let f2 = dimacs::parse_dimacs("p cnf 2 2\n1 2 0\n-2 0\n".as_bytes()).unwrap().formula;
//! let seq = formula::FormulaSequence::new(formula::FormulaKind::Sat, vec![f1, f2]).unwrap();
//! let script = analyzer::analyze_sequence(&seq).unwrap();
//!
//! let mut backend = reference::ReferenceSatSession::new();
//! let results = replay::replay(&script, &mut backend, &Default::default()).unwrap();
//! assert_eq!(results.len(), 2);
//! assert_eq!(replay::reconstruct(&script).unwrap(), seq.formulas());
//! ```

pub mod analyzer;
pub mod dimacs;
pub mod formula;
pub mod reference;
pub mod replay;
pub mod script;

pub use analyzer::{
    analyze_sequence, check_update_compatible, classify_clauses, prefix_update_instructions,
    AnalyzeError, ClassifiedStep, CompatibilityReport, Condition, PrefixInstruction,
};
pub use formula::{
    normalize_clause, occurring_variables, restrict_prefix, Clause, ClauseSet, FormulaKind,
    FormulaSequence, Literal, PcnfFormula, Prefix, QuantifiedSet, Quantifier, Var,
};
pub use replay::{reconstruct, replay, SolveResult, SolveStatus, SolverSession};
pub use script::{parse_script, script_stats, serialize_script, InstructionScript, ScriptStep};
