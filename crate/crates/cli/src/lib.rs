//! The `coolc` driver: compile, pre-execute and run COOL programs.

pub mod ccode;

use ccode::Stage;
use clap::{Args, Parser, Subcommand};
use cool::frontend::SourceUnit;
use cool::inference::InferenceConfig;
use cool::loader::Tables;
use cool::runtime::{run_program, RuntimeConfig};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPILE: i32 = 1;
pub const EXIT_INFERENCE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "coolc", version, about = "Compile, pre-execute and run COOL programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Translate sources into character code.
    Compile(StageArgs),
    /// Bind every expression and derive reverse functions.
    Preexec(StageArgs),
    /// Execute sources or a `.ccode` file.
    Run(StageArgs),
}

#[derive(Args, Debug, Clone)]
pub struct StageArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub silo_size: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_rounds: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_tree_nodes: u64,
    /// Write `round <k> weight <w> <digest>` lines here.
    #[arg(long)]
    pub trace_silo: Option<PathBuf>,
    #[arg(short = 'o')]
    pub output: Option<PathBuf>,
}

impl StageArgs {
    pub fn inference_config(&self, trace: bool) -> InferenceConfig {
        InferenceConfig {
            silo_capacity: Some(self.silo_size as usize),
            max_rounds: self.max_rounds as usize,
            max_tree_nodes: self.max_tree_nodes as usize,
            trace,
            ..InferenceConfig::default()
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl ToString) -> Failure {
    Failure { code, message: message.to_string() }
}

/// Sources or a single `.ccode` file, whichever the inputs are.
pub fn load_inputs(inputs: &[PathBuf]) -> Result<(Tables, Stage), Failure> {
    let mut units = Vec::new();
    let mut ccode = None;
    for p in inputs {
        let text = std::fs::read_to_string(p).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", p.display())))?;
        if text.starts_with(ccode::HEADER) {
            ccode = Some((p, text));
        } else {
            units.push(SourceUnit::new(p.display().to_string(), text));
        }
    }
    match ccode {
        Some((p, text)) => {
            if inputs.len() > 1 {
                return Err(fail(EXIT_USAGE, "a .ccode input must be the only input"));
            }
            ccode::deserialize(&text).map_err(|e| fail(EXIT_COMPILE, format!("{}: {e}", p.display())))
        }
        None => cool::pipeline::compile(&units).map(|t| (t, Stage::Compiled)).map_err(|e| fail(EXIT_COMPILE, e)),
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| fail(EXIT_USAGE, format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn preexecute(
    tables: Tables,
    stage: Stage,
    args: &StageArgs,
    trace_env: bool,
    err: &mut dyn Write,
) -> Result<Tables, Failure> {
    if stage == Stage::Preexec {
        return Ok(tables);
    }
    let tracing = trace_env || args.trace_silo.is_some();
    let (tables, report) =
        cool::pipeline::preexec(tables, &args.inference_config(tracing)).map_err(|e| fail(EXIT_INFERENCE, e))?;
    let mut text = String::new();
    for l in &report.log.trace {
        text.push_str(l);
        text.push('\n');
    }
    if let Some(p) = &args.trace_silo {
        write_atomic(p, &text)?;
    }
    if trace_env {
        let _ = err.write_all(text.as_bytes());
    }
    Ok(tables)
}

fn emit(args: &StageArgs, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match &args.output {
        Some(p) => write_atomic(p, text),
        None => out.write_all(text.as_bytes()).map_err(|e| fail(EXIT_USAGE, e)),
    }
}

fn dispatch(cli: &Cli, trace_env: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Compile(a) => {
            let (tables, stage) = load_inputs(&a.inputs)?;
            emit(a, &ccode::serialize(&tables, stage), out)
        }
        Command::Preexec(a) => {
            let (tables, stage) = load_inputs(&a.inputs)?;
            let tables = preexecute(tables, stage, a, trace_env, err)?;
            emit(a, &ccode::serialize(&tables, Stage::Preexec), out)
        }
        Command::Run(a) => {
            let (tables, stage) = load_inputs(&a.inputs)?;
            let tables = preexecute(tables, stage, a, trace_env, err)?;
            let report = run_program(&tables, RuntimeConfig::default()).map_err(|e| fail(EXIT_RUNTIME, e))?;
            let mut text = String::new();
            for o in &report.outputs {
                text.push_str(o);
                text.push('\n');
            }
            emit(a, &text, out)
        }
    }
}

/// Runs the driver on `args` (program name first) and returns the exit code.
pub fn main_with(args: &[String], trace_env: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(&cli, trace_env, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "coolc: {}", f.message);
            f.code
        }
    }
}
