//! End-to-end acceptance checks; prints one PASS/FAIL line per criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::suites::*;
use common::*;
use cool::inference::{InferenceConfig, InferenceError};
use cool::inversion::InversionError;
use coolc::ccode::{self, Stage};
use rand::rngs::StdRng;
use rand::SeedableRng;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

type Check = Result<String, String>;

fn cool_path(name: &str) -> PathBuf {
    std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_stem().unwrap().to_string_lossy().starts_with(&format!("{name}_")))
        .unwrap_or_else(|| panic!("no corpus file {name}"))
}

/// Runs the binary, returning stdout lines, exit code and wall time.
fn coolc(args: &[&str]) -> (Vec<String>, i32, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_coolc")).args(args).output().expect("spawn coolc");
    let lines = String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect();
    (lines, out.status.code().unwrap_or(-1), start.elapsed())
}

fn run_file(name: &str) -> (Vec<String>, i32, Duration) {
    let p = cool_path(name);
    coolc(&["run", p.to_str().unwrap()])
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn numeric_output(name: &str, want: f64, tol: f64) -> Check {
    let (lines, code, time) = run_file(name);
    let got: Option<f64> = lines.last().and_then(|l| l.parse().ok());
    let ok = code == 0 && got.is_some_and(|g| (g - want).abs() <= tol) && time < Duration::from_secs(5);
    ensure(ok, format!("{name} printed {lines:?} (exit {code}, {:.0} ms)", time.as_secs_f64() * 1e3))
}

fn c1() -> Check {
    let (lines, _, _) = run_file("code15");
    ensure(lines.len() == 1, format!("{} line(s)", lines.len()))?;
    numeric_output("code15", 36.100_505_063_388_33, 1e-9)
}

fn c2() -> Check {
    numeric_output("code20", 18.19803902718557, 1e-9)
}

fn c3() -> Check {
    numeric_output("code06", 1.0, 1e-12)
}

fn c4() -> Check {
    let (a, _, _) = run_file("code03");
    let (b, _, _) = run_file("code10");
    let pre = cool::frontend::precompile(
        &[cool::frontend::SourceUnit::new("u", "add (a) and (b) to (c)")],
        &Default::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(a == ["1"] && b == ["2"] && pre == "add_ARG_and_ARG_to(a,b,c)", format!("code3 {a:?}, code10 {b:?}, `{pre}`"))
}

fn c5() -> Check {
    let (order, _) = table1_order();
    ensure(order == [2, 3, 5, 4, 1], format!("call order {order:?}"))
}

fn c6() -> Check {
    let mut rng = StdRng::seed_from_u64(61);
    let mut v = 0;
    for m in [1, 2, 8, 64] {
        v += (0..1000).map(|_| silo_sequence(&mut rng, m, 40)).sum::<usize>();
    }
    ensure(v == 0, format!("4000 sequences, {v} violations"))
}

fn c7() -> Check {
    let (checked, failures) = soundness_suite(500, 71);
    let orphans = orphan_suite(100, 72);
    ensure(
        failures == 0 && orphans == 0 && checked > 0,
        format!("{checked} rewrites, {failures} unsound, {orphans} repair mismatches"),
    )
}

fn c8() -> Check {
    let (bad, total) = oracle_suite(24, 81);
    ensure(bad == 0 && total > 24, format!("24 instances, {total} segments, {bad} mismatches"))
}

fn c9() -> Check {
    let (e22, e8) = round_trip_error(100, 91);
    let (_, d) = code22();
    let lp = preexec(&corpus("loop_not_invertible"));
    let refused = matches!(lp, Err(InferenceError::Inversion(InversionError::NotInvertible { .. })));
    ensure(
        e22 <= 1e-9 && e8 <= 1e-9 && d.blocks.len() == 14 && refused,
        format!("max error code22 {e22:e}, code8 {e8:e}; {} blocks; while refused: {refused}", d.blocks.len()),
    )
}

fn c10() -> Check {
    let mut worst = 0;
    let mut n = 0;
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let src = std::fs::read_to_string(e.unwrap().path()).unwrap();
        if let Ok((_, r)) = cool::pipeline::preexec(compile(&src), &InferenceConfig::default()) {
            worst = worst.max(r.max_visits());
            n += 1;
        }
    }
    ensure(worst <= 1 && n > 0, format!("{n} programs, max visits per line {worst}"))
}

fn c11() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = e.unwrap().path();
        let ps = p.to_str().unwrap();
        let first = coolc(&["run", ps]);
        let second = coolc(&["run", ps]);
        if first.0 != second.0 || first.1 != second.1 {
            return Err(format!("{} differs across runs", p.display()));
        }
        let src = std::fs::read_to_string(&p).unwrap();
        let Ok(t) = cool::pipeline::compile_str("t", &src) else { continue };
        let text = ccode::serialize(&t, Stage::Compiled);
        let (back, _) = ccode::deserialize(&text).map_err(|e| e.to_string())?;
        if back != t || ccode::serialize(&back, Stage::Compiled) != text {
            return Err(format!("{} does not round-trip", p.display()));
        }
        if let Ok((pt, _)) = cool::pipeline::preexec(t, &InferenceConfig::default()) {
            let text = ccode::serialize(&pt, Stage::Preexec);
            if ccode::deserialize(&text).map_err(|e| e.to_string())?.0 != pt {
                return Err(format!("{} pre-executed tables do not round-trip", p.display()));
            }
        }
        let out = tmp.path().join("p.ccode");
        coolc(&["compile", ps, "-o", out.to_str().unwrap()]);
        let via = coolc(&["run", out.to_str().unwrap()]);
        if via.0 != first.0 || via.1 != first.1 {
            return Err(format!("{} differs when run from .ccode", p.display()));
        }
        files += 1;
    }
    Ok(format!("{files} programs deterministic and lossless"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("code 15 end to end", c1),
        ("code 20 end to end", c2),
        ("code 6 double root", c3),
        ("documented corpus behaviours", c4),
        ("mixed-direction call ordering", c5),
        ("silo property suite", c6),
        ("rewrite soundness", c7),
        ("search vs brute force", c8),
        ("inversion round trip", c9),
        ("single-pass pre-execution", c10),
        ("determinism and serialization", c11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
