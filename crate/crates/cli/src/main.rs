use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use iseq_core::dimacs::{parse_formula, sniff_kind};
use iseq_core::reference::{ReferenceSatSession, ReferenceStackSession, DEFAULT_QBF_VAR_CAP};
use iseq_core::replay::{write_report, ReplayError, ReplayOptions};
use iseq_core::script::{parse_script, script_stats, serialize_script};
use iseq_core::{
    analyze_sequence, reconstruct, AnalyzeError, Clause, FormulaKind, FormulaSequence,
    InstructionScript, PcnfFormula, SolveStatus, SolverSession,
};
use rayon::prelude::*;

/// Colon-separated directories searched for `ipasir:<name>` libraries given
/// without a directory part.
const SOLVER_PATH_VAR: &str = "ISEQ_SOLVER_PATH";

mod exit {
    pub const OK: u8 = 0;
    pub const MISMATCH: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const INCOMPATIBLE: u8 = 3;
    pub const UNKNOWN: u8 = 4;
    pub const BACKEND: u8 = 5;
    pub const USAGE: u8 = 64;
}

#[derive(Parser)]
#[command(
    name = "iseq",
    version,
    about = "Incremental instruction scripts for sequences of CNF/PCNF formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a sequence of (Q)DIMACS files into an instruction script
    Analyze {
        /// Formula files in sequence order
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = KindArg::Auto)]
        kind: KindArg,
        /// Write the script here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a script against a solver backend and report every solve
    Replay {
        script: PathBuf,
        /// reference-sat, reference-qbf or ipasir:<library>
        #[arg(long, default_value = "reference-sat", value_parser = parse_backend)]
        backend: Backend,
        /// Time limit per solve call
        #[arg(long)]
        timeout_ms: Option<u64>,
        /// Largest number of variables reference-qbf expands
        #[arg(long, default_value_t = DEFAULT_QBF_VAR_CAP)]
        qbf_var_cap: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check that a script rebuilds the given formulas step by step
    Verify {
        script: PathBuf,
        #[arg(required = true)]
        formulas: Vec<PathBuf>,
    },
    /// Print size statistics of a script
    Stats {
        script: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Sat,
    Qbf,
    Auto,
}

#[derive(Clone, Debug)]
enum Backend {
    ReferenceSat,
    ReferenceQbf,
    Ipasir(PathBuf),
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "reference-sat" => Ok(Backend::ReferenceSat),
        "reference-qbf" => Ok(Backend::ReferenceQbf),
        _ => match s.strip_prefix("ipasir:") {
            Some(p) if !p.is_empty() => Ok(Backend::Ipasir(PathBuf::from(p))),
            _ => Err(format!(
                "unknown backend {s:?}; expected reference-sat, reference-qbf or ipasir:<library>"
            )),
        },
    }
}

/// A failed command: exit code plus the lines to print on stderr.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    let result = match cli.command {
        Command::Analyze {
            inputs,
            kind,
            output,
        } => analyze(&inputs, kind, output.as_deref()),
        Command::Replay {
            script,
            backend,
            timeout_ms,
            qbf_var_cap,
            output,
        } => replay_cmd(
            &script,
            &backend,
            timeout_ms,
            qbf_var_cap,
            output.as_deref(),
        ),
        Command::Verify { script, formulas } => verify(&script, &formulas),
        Command::Stats { script, output } => stats(&script, output.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("iseq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| fail(exit::INPUT, format!("{}: {e}", path.display())))
}

/// Runs `body` against stdout or a freshly created `path`.
fn with_output<F>(path: Option<&Path>, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let shown = path.map_or("stdout".to_string(), |p| p.display().to_string());
    let res = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w).and_then(|_| w.flush())
        }
    };
    res.map_err(|e| fail(exit::INPUT, format!("{shown}: {e}")))
}

fn read_formulas(paths: &[PathBuf], kind: FormulaKind) -> Result<Vec<PcnfFormula>, Failure> {
    let parsed: Vec<Result<PcnfFormula, Failure>> = paths
        .par_iter()
        .map(|p| {
            let parsed = parse_formula(open(p)?, kind)
                .map_err(|e| fail(exit::INPUT, format!("{}: {e}", p.display())))?;
            for w in &parsed.warnings {
                eprintln!("iseq: {}: warning: {w}", p.display());
            }
            Ok(parsed.formula)
        })
        .collect();
    parsed.into_iter().collect()
}

fn analyze(inputs: &[PathBuf], kind: KindArg, output: Option<&Path>) -> Result<u8, Failure> {
    let kind = match kind {
        KindArg::Sat => FormulaKind::Sat,
        KindArg::Qbf => FormulaKind::Qbf,
        KindArg::Auto => sniff_kind(open(&inputs[0])?),
    };
    let formulas = read_formulas(inputs, kind)?;
    let seq = FormulaSequence::new(kind, formulas).map_err(|e| fail(exit::INPUT, e.to_string()))?;
    let script = analyze_sequence(&seq).map_err(|e| match e {
        AnalyzeError::NotUpdateCompatible { step, ref report } => fail(
            exit::INCOMPATIBLE,
            format!(
                "step {step} ({} -> {}): {report}",
                inputs[step - 2].display(),
                inputs[step - 1].display()
            ),
        ),
        e => fail(exit::INPUT, e.to_string()),
    })?;
    with_output(output, |w| serialize_script(&script, w))?;
    Ok(exit::OK)
}

fn load_script(path: &Path) -> Result<InstructionScript, Failure> {
    parse_script(open(path)?).map_err(|e| fail(exit::INPUT, format!("{}: {e}", path.display())))
}

/// Finds an IPASIR library: paths with a directory part are taken as they
/// are, bare names are looked up in the solver search path.
fn resolve_library(path: &Path) -> Option<PathBuf> {
    if path.components().count() > 1 || path.is_absolute() {
        return path.is_file().then(|| path.to_path_buf());
    }
    let dirs = std::env::var_os(SOLVER_PATH_VAR)?;
    std::env::split_paths(&dirs)
        .map(|d| d.join(path))
        .find(|p| p.is_file())
}

fn make_backend(backend: &Backend, qbf_var_cap: usize) -> Result<Box<dyn SolverSession>, Failure> {
    match backend {
        Backend::ReferenceSat => Ok(Box::new(ReferenceSatSession::new())),
        Backend::ReferenceQbf => Ok(Box::new(ReferenceStackSession::qbf(qbf_var_cap))),
        Backend::Ipasir(path) => match resolve_library(path) {
            None => Err(fail(
                exit::BACKEND,
                format!(
                    "cannot load solver library {} (not found; {SOLVER_PATH_VAR} is searched for bare names)",
                    path.display()
                ),
            )),
            Some(found) => Err(fail(
                exit::BACKEND,
                format!(
                    "cannot load solver library {}: this build has no IPASIR adapter",
                    found.display()
                ),
            )),
        },
    }
}

fn replay_cmd(
    script_path: &Path,
    backend: &Backend,
    timeout_ms: Option<u64>,
    qbf_var_cap: usize,
    output: Option<&Path>,
) -> Result<u8, Failure> {
    let script = load_script(script_path)?;
    let mut session = make_backend(backend, qbf_var_cap)?;
    let options = ReplayOptions {
        timeout: timeout_ms.map(Duration::from_millis),
    };
    let results = iseq_core::replay(&script, session.as_mut(), &options).map_err(|e| match e {
        ReplayError::InvalidScript { .. } => fail(exit::INPUT, e.to_string()),
        e => fail(exit::BACKEND, e.to_string()),
    })?;
    with_output(output, |w| write_report(&results, w))?;
    if results.iter().any(|r| r.status == SolveStatus::Unknown) {
        Ok(exit::UNKNOWN)
    } else {
        Ok(exit::OK)
    }
}

fn clause_text(c: &Clause) -> String {
    let mut s = String::new();
    for l in c.literals() {
        s.push_str(&l.to_string());
        s.push(' ');
    }
    s.push('0');
    s
}

fn verify(script_path: &Path, formula_paths: &[PathBuf]) -> Result<u8, Failure> {
    let script = load_script(script_path)?;
    let originals = read_formulas(formula_paths, script.kind())?;
    let rebuilt = reconstruct(&script).map_err(|e| fail(exit::INPUT, e.to_string()))?;

    for (i, (want, got)) in originals.iter().zip(&rebuilt).enumerate() {
        let step = i + 1;
        let missing: Vec<&Clause> = want
            .clauses()
            .iter()
            .filter(|c| !got.clauses().contains(*c))
            .collect();
        let extra: Vec<&Clause> = got
            .clauses()
            .iter()
            .filter(|c| !want.clauses().contains(*c))
            .collect();
        let want_prefix = want.occurring_prefix();
        let prefix_differs = want_prefix != *got.prefix();
        if missing.is_empty() && extra.is_empty() && !prefix_differs {
            continue;
        }
        let mut sorted_missing = missing;
        sorted_missing.sort();
        let mut sorted_extra = extra;
        sorted_extra.sort();
        let mut lines = vec![format!(
            "step {step} does not match {}",
            formula_paths[i].display()
        )];
        for c in sorted_missing {
            lines.push(format!("step {step}: missing clause {}", clause_text(c)));
        }
        for c in sorted_extra {
            lines.push(format!("step {step}: extra clause {}", clause_text(c)));
        }
        if prefix_differs {
            lines.push(format!(
                "step {step}: prefix {} expected, script gives {}",
                want_prefix,
                got.prefix()
            ));
        }
        eprintln!("{}", lines.join("\n"));
        return Ok(exit::MISMATCH);
    }
    if originals.len() != rebuilt.len() {
        eprintln!(
            "script has {} steps but {} formulas were given",
            rebuilt.len(),
            originals.len()
        );
        return Ok(exit::MISMATCH);
    }
    println!("ok {} steps", rebuilt.len());
    Ok(exit::OK)
}

fn stats(script_path: &Path, output: Option<&Path>) -> Result<u8, Failure> {
    let script = load_script(script_path)?;
    let st = script_stats(&script);
    with_output(output, |w| {
        writeln!(w, "kind={}", script.kind())?;
        writeln!(w, "steps={}", st.steps)?;
        writeln!(w, "solves={}", st.solves)?;
        writeln!(w, "script_clauses={}", st.script_clauses)?;
        writeln!(w, "distinct_script_clauses={}", st.distinct_script_clauses)?;
        writeln!(w, "script_literals={}", st.script_literals)?;
        writeln!(w, "concatenated_clauses={}", st.concatenated_clauses)?;
        writeln!(w, "concatenated_literals={}", st.concatenated_literals)?;
        writeln!(w, "ratio={:.6}", st.ratio)
    })?;
    Ok(exit::OK)
}
