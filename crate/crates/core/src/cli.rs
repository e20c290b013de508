//! The `cqp` command line.
//!
//! Exit codes: 0 success (or EQUIVALENT), 1 type diagnostics or NOT
//! EQUIVALENT, 2 other data errors (parse errors, runtime errors), 64 usage
//! errors, 66 unreadable files, 70 exceeded state or qubit caps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value as Json};

use crate::equiv::{branching_bisim, check_congruence_samples, minimize, CongruenceOptions, SampleOutcome};
use crate::qstate::{QStateError, StateVector};
use crate::semantics::{
    basis_qubit_tests, default_qubit_tests, entry_alphabet, explore, initial_configuration, run_sampled,
    ExploreOptions, Label, Plts, SemanticsError, StateKind, DEFAULT_MAX_STATES,
};
use crate::syntax::{parse_program, pretty_print_program, Program};
use crate::types::check_program;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CAP: i32 = 70;

#[derive(Parser, Debug)]
#[command(
    name = "cqp",
    version,
    about = "Parse, type check, run and compare quantum processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Exploration bound on the number of states.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Qubit states injected on input channels: basis, default or file:<path>.
    #[arg(long, default_value = "default")]
    qubit_tests: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a file and print it back in normal form.
    Parse {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check the no-cloning discipline against the file's signatures.
    Typecheck {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Follow one seeded path through the program.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Build the full transition system.
    Explore {
        file: PathBuf,
        /// Print the transition system as JSON.
        #[arg(long)]
        dump_plts: bool,
        /// Quotient by branching bisimulation before printing.
        #[arg(long)]
        minimize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Decide branching bisimilarity of two programs.
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two programs inside randomly generated contexts.
    Congruence {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<SemanticsError> for Failure {
    fn from(e: SemanticsError) -> Self {
        let code = match e {
            SemanticsError::StateCap { .. } | SemanticsError::Quantum(QStateError::Capacity { .. }) => EXIT_CAP,
            _ => EXIT_DATA,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

fn load(path: &Path) -> Result<Program, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_NO_INPUT, format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| Failure::new(EXIT_DATA, format!("{}:{e}", path.display())))
}

fn parse_tests(spec: &str) -> Result<Vec<StateVector>, Failure> {
    match spec {
        "default" => Ok(default_qubit_tests()),
        "basis" => Ok(basis_qubit_tests()),
        _ => {
            let Some(path) = spec.strip_prefix("file:") else {
                return Err(Failure::new(
                    EXIT_USAGE,
                    format!("--qubit-tests expects basis, default or file:<path>, got `{spec}`"),
                ));
            };
            let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_NO_INPUT, format!("{path}: {e}")))?;
            let mut tests = Vec::new();
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let nums: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| Failure::new(EXIT_DATA, format!("{path}:{}: {e}", n + 1)))?;
                let [ar, ai, br, bi] = nums[..] else {
                    return Err(Failure::new(
                        EXIT_DATA,
                        format!("{path}:{}: expected `a_re a_im b_re b_im`", n + 1),
                    ));
                };
                let state = StateVector::normalized(vec![Complex64::new(ar, ai), Complex64::new(br, bi)])
                    .map_err(|e| Failure::new(EXIT_DATA, format!("{path}:{}: {e}", n + 1)))?;
                tests.push(state);
            }
            Ok(tests)
        }
    }
}

fn explore_file(path: &Path, common: &Common) -> Result<Plts, Failure> {
    let program = Arc::new(load(path)?);
    let tests = parse_tests(&common.qubit_tests)?;
    let entry = program
        .entry()
        .ok_or_else(|| Failure::new(EXIT_DATA, format!("{}: no process to run", path.display())))?;
    let alphabet = entry_alphabet(&program, tests);
    let config = initial_configuration(program, &entry)?;
    Ok(explore(
        &config,
        &ExploreOptions {
            max_states: common.max_states,
            alphabet,
        },
    )?)
}

fn amplitudes(state: &StateVector) -> Json {
    Json::Array(state.amplitudes().iter().map(|a| json!([a.re, a.im])).collect())
}

fn cmd_parse(file: &Path, as_json: bool, out: &mut dyn Write) -> Outcome {
    let program = load(file)?;
    if as_json {
        let defs: Vec<Json> = program
            .definitions
            .iter()
            .map(|d| json!({"name": d.name, "params": d.params, "body": d.body.to_string()}))
            .collect();
        let entry = program.entry().map(|e| json!({"process": e.process, "args": e.args}));
        let _ = writeln!(out, "{}", json!({"definitions": defs, "entry": entry}));
    } else {
        let _ = write!(out, "{}", pretty_print_program(&program));
    }
    Ok(EXIT_OK)
}

fn cmd_typecheck(file: &Path, as_json: bool, out: &mut dyn Write) -> Outcome {
    let program = load(file)?;
    let diags = check_program(&program);
    if as_json {
        let items: Vec<Json> = diags
            .iter()
            .map(|d| {
                json!({
                    "file": file.display().to_string(),
                    "line": d.pos.line,
                    "col": d.pos.col,
                    "category": d.category.to_string(),
                    "message": d.message,
                })
            })
            .collect();
        let _ = writeln!(out, "{}", json!({"ok": diags.is_empty(), "diagnostics": items}));
    } else if diags.is_empty() {
        let _ = writeln!(out, "OK");
    } else {
        for d in &diags {
            let _ = writeln!(out, "{}:{d}", file.display());
        }
    }
    Ok(if diags.is_empty() { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_run(file: &Path, seed: u64, max_steps: usize, common: &Common, out: &mut dyn Write) -> Outcome {
    let program = Arc::new(load(file)?);
    let tests = parse_tests(&common.qubit_tests)?;
    let entry = program
        .entry()
        .ok_or_else(|| Failure::new(EXIT_DATA, format!("{}: no process to run", file.display())))?;
    let alphabet = entry_alphabet(&program, tests);
    let config = initial_configuration(program, &entry)?;
    let trace = run_sampled(&config, seed, &alphabet, max_steps)?;
    let channels = config.visible.clone();
    if common.json {
        let mut steps = vec![json!({
            "step": 0,
            "label": "init",
            "state": amplitudes(&config.state),
            "term": config.render_term(),
        })];
        for (i, s) in trace.iter().enumerate() {
            let mut obj = json!({
                "step": i + 1,
                "label": s.label.render(&channels),
                "state": amplitudes(&s.config.state),
                "term": s.config.render_term(),
            });
            if let Some(p) = s.probability {
                obj["probability"] = json!(p);
            }
            steps.push(obj);
        }
        let _ = writeln!(out, "{}", Json::Array(steps));
    } else {
        let _ = writeln!(out, "init | {} | {}", config.state.dirac(), config.render_term());
        for s in &trace {
            let mut label = s.label.render(&channels);
            if let Some(p) = s.probability {
                label.push_str(&format!(" (p={p:.4})"));
            }
            let _ = writeln!(out, "{label} | {} | {}", s.config.state.dirac(), s.config.render_term());
        }
    }
    Ok(EXIT_OK)
}

fn summary(p: &Plts) -> Json {
    let probabilistic = p.states.iter().filter(|s| s.kind == StateKind::Probabilistic).count();
    let terminal = p.states.iter().filter(|s| s.terminal).count();
    let visible = p.edges.iter().filter(|e| e.label.is_visible()).count();
    json!({
        "states": p.num_states(),
        "edges": p.edges.len(),
        "probabilistic": probabilistic,
        "terminal": terminal,
        "visible_edges": visible,
    })
}

fn cmd_explore(file: &Path, dump: bool, quotient: bool, common: &Common, out: &mut dyn Write) -> Outcome {
    let mut plts = explore_file(file, common)?;
    if quotient {
        plts = minimize(&plts);
    }
    if dump {
        let _ = writeln!(out, "{}", plts.to_json());
    } else if common.json {
        let _ = writeln!(out, "{}", summary(&plts));
    } else {
        let s = summary(&plts);
        let _ = writeln!(
            out,
            "states {} edges {} probabilistic {} terminal {}",
            s["states"], s["edges"], s["probabilistic"], s["terminal"]
        );
        for e in &plts.edges {
            let payload = match (&e.label, &e.payload) {
                (Label::Output { .. }, Some(rho)) => format!("  purity {:.4}", rho.purity()),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{} --{}--> {}{payload}",
                e.src,
                e.label.render(&plts.channels),
                e.dst
            );
        }
    }
    Ok(EXIT_OK)
}

fn cmd_equiv(left: &Path, right: &Path, common: &Common, out: &mut dyn Write) -> Outcome {
    let a = explore_file(left, common)?;
    let b = explore_file(right, common)?;
    let verdict = branching_bisim(&a, &b);
    if common.json {
        let _ = writeln!(out, "{}", verdict.to_json());
    } else {
        let _ = writeln!(out, "{verdict}");
    }
    Ok(if verdict.equivalent { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_congruence(
    left: &Path,
    right: &Path,
    samples: usize,
    seed: u64,
    common: &Common,
    out: &mut dyn Write,
) -> Outcome {
    let (a, b) = (load(left)?, load(right)?);
    let options = CongruenceOptions {
        max_states: common.max_states,
        tests: parse_tests(&common.qubit_tests)?,
    };
    let report = check_congruence_samples(&a, &b, seed, samples, &options);
    if common.json {
        let items: Vec<Json> = report
            .samples
            .iter()
            .map(|s| {
                let (status, detail) = match &s.outcome {
                    SampleOutcome::Equivalent => ("equivalent", Json::Null),
                    SampleOutcome::Counterexample(w) => ("counterexample", w.to_json()),
                    SampleOutcome::Skipped(r) => ("skipped", json!(r)),
                    SampleOutcome::Error(r) => ("error", json!(r)),
                };
                json!({"context": s.context, "status": status, "detail": detail})
            })
            .collect();
        let _ = writeln!(
            out,
            "{}",
            json!({
                "equivalent": report.equivalent(),
                "counterexamples": report.counterexamples(),
                "skipped": report.skipped(),
                "errors": report.errors(),
                "samples": items,
            })
        );
    } else {
        for s in &report.samples {
            match &s.outcome {
                SampleOutcome::Equivalent => {}
                SampleOutcome::Counterexample(w) => {
                    let _ = writeln!(out, "counterexample: {}\n  {w}", s.context);
                }
                SampleOutcome::Skipped(r) => {
                    let _ = writeln!(out, "skipped: {}\n  {r}", s.context);
                }
                SampleOutcome::Error(r) => {
                    let _ = writeln!(out, "error: {}\n  {r}", s.context);
                }
            }
        }
        let _ = writeln!(
            out,
            "samples {} equivalent {} counterexamples {} skipped {} errors {}",
            report.samples.len(),
            report.equivalent(),
            report.counterexamples(),
            report.skipped(),
            report.errors()
        );
    }
    Ok(if report.counterexamples() == 0 && report.errors() == 0 {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

/// Runs the command line with `args` (including the program name) and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Parse { file, json } => cmd_parse(file, *json, out),
        Command::Typecheck { file, json } => cmd_typecheck(file, *json, out),
        Command::Run {
            file,
            seed,
            max_steps,
            common,
        } => cmd_run(file, *seed, *max_steps, common, out),
        Command::Explore {
            file,
            dump_plts,
            minimize,
            common,
        } => cmd_explore(file, *dump_plts, *minimize, common, out),
        Command::Equiv { left, right, common } => cmd_equiv(left, right, common, out),
        Command::Congruence {
            left,
            right,
            samples,
            seed,
            common,
        } => cmd_congruence(left, right, *samples, *seed, common, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
