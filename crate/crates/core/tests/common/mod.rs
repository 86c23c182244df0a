#![allow(dead_code)]

pub mod suites;

use cool::code::{CodeType, Operand};
use cool::inference::{search_bind, ByName, Candidate, InferenceConfig, SearchEnv, SearchFailure, SearchLog, Segment};
use cool::loader::{Address, Tables};
use rand::rngs::StdRng;
use rand::Rng;
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

pub fn corpus(name: &str) -> String {
    let dir = corpus_dir();
    for e in std::fs::read_dir(&dir).expect("corpus dir") {
        let p = e.expect("entry").path();
        let stem = p.file_stem().unwrap().to_string_lossy().to_string();
        if stem == name || stem.starts_with(&format!("{name}_")) {
            return std::fs::read_to_string(p).expect("corpus file");
        }
    }
    panic!("no corpus program {name}");
}

pub fn compile(src: &str) -> Tables {
    cool::pipeline::compile_str("test.cool", src).expect("compiles")
}

/// Runs a full program with default settings and returns its outputs.
pub fn run(src: &str) -> Vec<String> {
    let (t, _) = cool::pipeline::preexec(compile(src), &InferenceConfig::default()).expect("pre-executes");
    cool::runtime::run_program(&t, Default::default()).expect("runs").outputs
}

pub fn run_number(src: &str) -> Vec<f64> {
    run(src).iter().map(|s| s.parse().expect("numeric output")).collect()
}

/// The longest expression of the last expression statement.
pub fn last_statement(t: &Tables) -> Segment {
    let a = t
        .code
        .values()
        .rev()
        .find(|l| l.kind == CodeType::Expr && l.scope.is_empty())
        .map(|l| l.address.clone())
        .expect("an expression statement");
    Segment::new(t.longest_expression_at(&a).iter().map(|x| t.code[x].clone()).collect())
}

pub fn search(t: &Tables, seg: &Segment, config: &InferenceConfig) -> (Result<Candidate, SearchFailure>, SearchLog) {
    let receiver = |_: &Segment, _: &Address| None;
    let position = seg.root().clone();
    let env = SearchEnv { tables: t, ident: &ByName, scope: Address::empty(), position, receiver_class: &receiver };
    let mut log = SearchLog::default();
    let r = search_bind(seg, &env, config, &mut log);
    (r, log)
}

pub const VARS: [&str; 3] = ["x", "y", "z"];

/// Random arithmetic expression with at most `nodes` operators.
pub fn random_expr(rng: &mut StdRng, nodes: usize) -> String {
    if nodes == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            VARS[rng.gen_range(0..VARS.len())].to_string()
        } else {
            rng.gen_range(1..6).to_string()
        };
    }
    let left = rng.gen_range(0..nodes);
    let op = ["+", "-", "*"][rng.gen_range(0..3)];
    format!("({} {op} {})", random_expr(rng, left), random_expr(rng, nodes - 1 - left))
}

/// Value of the subtree at `op` (an operand of some line of `seg`).
pub fn eval_operand(seg: &Segment, op: &Operand, env: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
    match op {
        Operand::Number(n) => Some(*n),
        Operand::Ident(s) => env(s),
        Operand::Addr(a) => seg.eval_with(a, env),
        _ => None,
    }
}
