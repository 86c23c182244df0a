//! Property suites shared by the crate tests and the acceptance target.

use super::*;
use cool::code::{CodeLine, CodeType, Operand};
use cool::inference::rewrite::{apply_exp_replacement, apply_value_binding, bind_builtins, is_tree, repair_detached, AddressSource};
use cool::inference::{
    accessible_functions, match_segment, ByName, CodeTableSilo, InferenceConfig, InferenceError, InsertOutcome, Segment,
};
use cool::inversion::{disassemble, Disassembly, FreshNames};
use cool::loader::{Address, Tables};
use cool::runtime::{run_program, ExecutionReport, RuntimeConfig, RuntimeError};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet};

/// Checks one randomized insertion sequence against rules a/b; returns violations.
pub fn silo_sequence(rng: &mut StdRng, m: usize, len: usize) -> usize {
    let mut silo = CodeTableSilo::new(Some(m));
    let mut violations = 0;
    for _ in 0..len {
        let w = rng.gen_range(-5..6) as f64;
        let key = format!("k{}", rng.gen_range(0..6));
        let before: Vec<(f64, String, u64)> = silo.entries().iter().map(|e| (e.weight, e.key.clone(), e.seq())).collect();
        let dup = before.iter().any(|(bw, bk, _)| *bw == w && *bk == key);
        let outcome = silo.insert(w, key.clone(), ());
        let after: Vec<(f64, String, u64)> = silo.entries().iter().map(|e| (e.weight, e.key.clone(), e.seq())).collect();
        let min = before.first().map(|e| e.0);
        let expected = if dup {
            InsertOutcome::Duplicate
        } else if before.len() < m {
            InsertOutcome::Inserted
        } else if w <= min.unwrap() {
            InsertOutcome::Rejected
        } else {
            InsertOutcome::Evicted
        };
        let mut ok = outcome == expected;
        match expected {
            InsertOutcome::Duplicate | InsertOutcome::Rejected => ok &= after == before,
            InsertOutcome::Inserted => ok &= after.len() == before.len() + 1,
            InsertOutcome::Evicted => {
                // the oldest of the minimum-weight entries leaves
                let victim = before.iter().filter(|e| e.0 == min.unwrap()).min_by_key(|e| e.2).unwrap();
                ok &= after.len() == m && !after.contains(victim);
            }
        }
        ok &= after.len() <= m;
        ok &= after.windows(2).all(|p| p[0].0 <= p[1].0);
        let pairs: BTreeSet<(u64, &String)> = after.iter().map(|e| (e.0.to_bits(), &e.1)).collect();
        ok &= pairs.len() == after.len();
        ok &= after.iter().any(|e| e.0 == w && e.1 == key) || matches!(expected, InsertOutcome::Rejected);
        if !ok {
            violations += 1;
        }
    }
    violations
}


pub const RULE_POOL: [&str; 6] = [
    "exp: @(-1){#a + #b}{ return: b + a; }",
    "exp: @(-1){#a - #b}{ return: a + (-b); }",
    "exp: @(-10){$a == b}{ return: a - b == 0; }",
    "@(10){$a + b}{ a = ans - b; }",
    "@(10){$a == b;}{ a = b; }",
    "@(5){$a * b}{ a = ans / b; }",
];

/// A random search instance: at most three rules and a seven-node constraint.
pub fn instance(rng: &mut StdRng) -> String {
    let mut pool: Vec<&str> = RULE_POOL.to_vec();
    let n = rng.gen_range(1..=3);
    let mut src = String::new();
    for _ in 0..n {
        let i = rng.gen_range(0..pool.len());
        src.push_str(pool.remove(i));
        src.push('\n');
    }
    src.push_str("new: x = 0;\nnew: y = 0;\nnew: z = 0;\n");
    let lhs = random_expr(rng, 2);
    let op = ["+", "-", "*"][rng.gen_range(0..3)];
    let rhs = random_expr(rng, 2);
    src.push_str(&format!("$x {op} {lhs} == {rhs};\n"));
    src
}

pub type Reach = BTreeSet<(usize, u64, String)>;

/// Every segment reachable in at most `kmax` binding or rewriting steps.
pub fn brute_force(t: &Tables, seg: &Segment, kmax: usize) -> Reach {
    let mut start = seg.clone();
    bind_builtins(&mut start);
    let fs = accessible_functions(t, &Default::default(), seg.root());
    let src = AddressSource::for_tables(t);
    let mut out: Reach = BTreeSet::new();
    out.insert((0, 0f64.to_bits(), start.canonical()));
    if start.is_fully_bound() {
        return out;
    }
    let mut level = vec![(0.0, start)];
    for k in 1..=kmax {
        let mut next: Vec<(f64, Segment)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (w, s) in &level {
            for b in s.unbound_branches() {
                for fa in &fs {
                    let f = &t.functions[fa];
                    let Some(m) = match_segment(s, &b, f, t, &ByName) else { continue };
                    let child = if f.returns_expression {
                        match apply_exp_replacement(s, &m, f, t, &src) {
                            Some(c) => c,
                            None => continue,
                        }
                    } else {
                        let mut c = s.clone();
                        apply_value_binding(&mut c, &m);
                        c
                    };
                    let cw = w + f.weight;
                    let key = (cw.to_bits(), child.canonical());
                    if !seen.insert(key.clone()) {
                        continue;
                    }
                    out.insert((k, key.0, key.1));
                    if !child.is_fully_bound() {
                        next.push((cw, child));
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    out
}

/// Compares the exhaustive search against enumeration; returns mismatches and segments compared.
pub fn oracle_suite(instances: usize, seed: u64) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut bad = 0;
    let mut total = 0;
    for _ in 0..instances {
        let src = instance(&mut rng);
        let kmax = rng.gen_range(1..=4);
        let t = compile(&src);
        let seg = last_statement(&t);
        let cfg = InferenceConfig { silo_capacity: None, max_rounds: kmax, exhaustive: true, ..Default::default() };
        let (_, log) = search(&t, &seg, &cfg);
        let got: Reach = log.reachable.iter().map(|(k, w, c)| (*k, w.to_bits(), c.segment.canonical())).collect();
        let want = brute_force(&t, &seg, kmax);
        total += want.len();
        if got != want {
            bad += 1;
        }
    }
    (bad, total)
}


pub const RULES: &str = "
exp: @(-1){#a + #b}{ return: b + a; }
exp: @(-1){#a - #b}{ return: a + (-b); }
exp: @(-10){$a == b}{ return: a - b == 0; }
exp: @(-1){#x * #a + #x * #b}{ return: x * (a + b); }
exp: @(-1){#a * (#b + #c)}{ return: a * b + a * c; }
new: x = 0;
new: y = 0;
new: z = 0;
";

pub fn program(stmt: &str) -> (Tables, Segment) {
    let t = compile(&format!("{RULES}{stmt}\n"));
    let seg = last_statement(&t);
    (t, seg)
}

pub fn rules(t: &Tables) -> Vec<Address> {
    t.functions.values().filter(|f| f.returns_expression).map(|f| f.decl_scope.clone()).collect()
}

/// Every single-step rewrite of `seg` by rule `f`.
pub fn rewrites(t: &Tables, seg: &Segment, f: &Address) -> Vec<Segment> {
    let info = &t.functions[f];
    let src = AddressSource::for_tables(t);
    seg.unbound_branches()
        .iter()
        .filter_map(|b| match_segment(seg, b, info, t, &ByName))
        .filter_map(|m| apply_exp_replacement(seg, &m, info, t, &src))
        .collect()
}

pub fn value(seg: &Segment, env: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
    let root = seg.get(seg.root())?;
    let l = eval_operand(seg, &root.quad.left, env)?;
    match root.quad.op.as_str() {
        "==" => Some(l - eval_operand(seg, &root.quad.right, env)?),
        _ => Some(l),
    }
}

pub fn infix(seg: &Segment, op: &Operand) -> String {
    match op {
        Operand::Addr(a) => {
            let l = seg.get(a).unwrap();
            if l.quad.op == "u-" {
                return format!("(-{})", infix(seg, &l.quad.left));
            }
            format!("({} {} {})", infix(seg, &l.quad.left), l.quad.op, infix(seg, &l.quad.right))
        }
        other => other.to_string(),
    }
}

pub fn root_infix(seg: &Segment) -> String {
    let r = seg.get(seg.root()).unwrap();
    format!("{} {} {}", infix(seg, &r.quad.left), r.quad.op, infix(seg, &r.quad.right))
}


/// Rewrite soundness over random expressions for all five rules.
pub fn soundness_suite(samples: usize, seed: u64) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    let mut failures = 0;
    for _ in 0..samples {
        let n = rng.gen_range(1..7);
        let e = random_expr(&mut rng, n);
        let stmt = if rng.gen_bool(0.3) {
            format!("{e} + $x == {};", random_expr(&mut rng, 2))
        } else {
            format!("{e} --> 0;")
        };
        let (t, seg) = program(&stmt);
        let vals: Vec<f64> = (0..3).map(|_| rng.gen_range(-9..10) as f64).collect();
        let env = |n: &str| VARS.iter().position(|v| *v == n).map(|i| vals[i]);
        let before = value(&seg, &env).expect("evaluable");
        for f in rules(&t) {
            for out in rewrites(&t, &seg, &f) {
                checked += 1;
                let after = value(&out, &env);
                let sound = after.is_some_and(|a| (a - before).abs() <= 1e-9 * before.abs().max(1.0));
                if !sound || !is_tree(&out) || repair_detached(&out) != out {
                    failures += 1;
                }
            }
        }
    }
    (checked, failures)
}


pub fn scrub(src: &str, from: &str) -> String {
    src[..src.find(from).unwrap()].to_string()
}

/// F(R(t, p), p) for code 22 and the target `t`.
pub fn round_trip_22(p: f64, t: f64) -> Vec<f64> {
    let head = scrub(&corpus("code15"), "new: x = 0;");
    run_number(&format!(
        "{head}new: x = 0;\nnew: p = {p};\nnew: t = {t};\nget result from ($x) and (p) == t;\n\
         new: r = 0;\nr = get result from (x) and (p);\nr --> 0;\n"
    ))
}

pub fn round_trip_8(p: f64, t: f64) -> Vec<f64> {
    let head = scrub(&corpus("code08"), "new: kg = 0;");
    run_number(&format!(
        "{head}new: kg = 0;\nnew: p = {p};\nnew: t = {t};\napple unit price (p) can be bought ($kg) kg == t;\n\
         new: r = 0;\nr = price of buying (kg) kg of apple unit price (p);\nr --> 0;\n"
    ))
}

/// Largest |F(R(t,p),p) - t| over `n` random inputs of both derived reverses.
pub fn round_trip_error(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut e22: f64 = 0.0;
    let mut e8: f64 = 0.0;
    for _ in 0..n {
        let (p, t) = (rng.gen_range(-50.0..50.0), rng.gen_range(-100.0..100.0));
        e22 = e22.max((round_trip_22(p, t)[0] - t).abs());
        let (p, t) = (rng.gen_range(0.5..20.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, rng.gen_range(-100.0..100.0));
        e8 = e8.max((round_trip_8(p, t)[0] - t).abs());
    }
    (e22, e8)
}


pub const TABLE1: &str = "
@{r1($a)}{ a = ans; }
@{f2(a)}{ return: a + 1; }
@{f3(a)}{ return: a + 2; }
@{r4($a)}{ a = ans; }
@{r5($a, b, c, $d)}{
  a = b;
  d = c;
}
new: x = 0;
new: y = 0;
r5(r1($x), f2(1), f3(2), r4($y));
x --> 0;
y --> 0;
";

/// Source positions (1-based) of the user calls in execution order.
pub fn table1_order() -> (Vec<usize>, Vec<String>) {
    let (t, r) = execute(TABLE1);
    let r = r.expect("runs");
    let fs: Vec<_> = t.functions.keys().cloned().collect();
    let order = r.calls.iter().map(|c| fs.iter().position(|f| *f == c.function).unwrap() + 1).collect();
    (order, r.outputs)
}


pub fn execute(src: &str) -> (Tables, Result<ExecutionReport, RuntimeError>) {
    let (t, _) = cool::pipeline::preexec(compile(src), &InferenceConfig::default()).expect("pre-executes");
    let r = run_program(&t, RuntimeConfig::default());
    (t, r)
}


pub fn copy_of(seg: &Segment, fresh: &mut u32) -> Vec<CodeLine> {
    let mut map = BTreeMap::new();
    for l in &seg.lines {
        *fresh += 1;
        map.insert(l.address.clone(), Address::new(vec![1, *fresh]).unwrap());
    }
    seg.lines
        .iter()
        .map(|l| {
            let mut c = l.clone();
            c.address = map[&l.address].clone();
            for i in 1..4 {
                if let Operand::Addr(a) = c.quad.slot(i) {
                    if let Some(n) = map.get(a) {
                        *c.quad.slot_mut(i) = Operand::Addr(n.clone());
                    }
                }
            }
            c
        })
        .collect()
}

/// Orphaned copies added to random segments; returns segments not restored exactly.
pub fn orphan_suite(n: usize, seed: u64) -> usize {
    let mut bad = 0;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fresh = 0;
    for _ in 0..n {
        let (_, seg) = program(&format!("{} --> 0;", random_expr(&mut rng, 5)));
        if repair_detached(&seg) != seg {
            bad += 1;
        }
        let (_, other) = program(&format!("{} --> 0;", random_expr(&mut rng, 3)));
        let mut dirty = seg.clone();
        for l in copy_of(&other, &mut fresh) {
            dirty.insert(l);
        }
        if repair_detached(&dirty) != seg {
            bad += 1;
        }
    }
    bad
}


pub fn preexec(src: &str) -> Result<Tables, InferenceError> {
    cool::pipeline::preexec(compile(src), &InferenceConfig::default()).map(|(t, _)| t)
}

pub fn code22() -> (Tables, Disassembly) {
    let t = preexec(&corpus("code15")).unwrap();
    let derive = t.code.values().find(|l| l.kind == CodeType::DeriveFunc).unwrap();
    let forward = t.functions[derive.quad.left.as_addr().unwrap()].clone();
    let pending: BTreeSet<String> = ["x".to_string()].into();
    let d = disassemble(&t, &forward, &pending, &mut FreshNames::for_tables(&t)).unwrap();
    (t, d)
}

