//! Round-based silo search binding an expression to functions.

use super::matching::{match_segment, Identity};
use super::rewrite::{apply_exp_replacement, apply_value_binding, bind_builtins, AddressSource};
use super::segment::Segment;
use super::silo::CodeTableSilo;
use crate::code::{is_call_op, CodeType, Operand};
use crate::loader::{Address, ScopeKind, Tables};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceConfig {
    /// `None` for an unbounded silo.
    pub silo_capacity: Option<usize>,
    pub max_rounds: usize,
    pub max_tree_nodes: usize,
    pub trace: bool,
    pub record_matches: bool,
    /// Explore every round fully and keep all reachable segments.
    pub exhaustive: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            silo_capacity: Some(64),
            max_rounds: 16,
            max_tree_nodes: 8,
            trace: false,
            record_matches: false,
            exhaustive: false,
        }
    }
}

/// A candidate with its derivation path of (function, weight) steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub segment: Segment,
    pub path: Vec<(Address, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct SearchLog {
    pub trace: Vec<String>,
    pub matches: Vec<String>,
    /// (round, weight, candidate) for every segment created, in order.
    pub reachable: Vec<(usize, f64, Candidate)>,
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("no binding found for the expression at {address} ({reason}); final silo: [{}]", silo.join(", "))]
pub struct SearchFailure {
    pub address: Address,
    pub reason: String,
    /// `weight:digest` pairs of the last non-empty silo.
    pub silo: Vec<String>,
}

/// Where a search happens: visible functions and variable identities.
pub struct SearchEnv<'a> {
    pub tables: &'a Tables,
    pub ident: &'a dyn Identity,
    pub scope: Address,
    /// Functions must be declared before this address.
    pub position: Address,
    /// Class scope of a method-call receiver given its access line.
    pub receiver_class: &'a dyn Fn(&Segment, &Address) -> Option<Address>,
}

/// Functions declared in a class and, leftmost first, in its ancestors.
pub fn class_members(tables: &Tables, class: &Address) -> Vec<Address> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    collect_members(tables, class, &mut out, &mut seen);
    out
}

fn collect_members(tables: &Tables, class: &Address, out: &mut Vec<Address>, seen: &mut BTreeSet<Address>) {
    if !seen.insert(class.clone()) {
        return;
    }
    out.extend(functions_in(tables, class, None));
    if let Some(info) = tables.classes.get(class) {
        for p in &info.parents {
            collect_members(tables, p, out, seen);
        }
    }
}

fn functions_in(tables: &Tables, scope: &Address, before: Option<&Address>) -> Vec<Address> {
    let mut fs: Vec<_> = tables
        .functions
        .values()
        .filter(|f| !f.body_scope.is_empty() && &tables.function_scope(f) == scope)
        .filter(|f| before.is_none_or(|b| &f.func_op < b))
        .collect();
    fs.sort_by(|a, b| a.func_op.cmp(&b.func_op));
    fs.into_iter().map(|f| f.decl_scope.clone()).collect()
}

/// Accessible functions from `scope` at `position`, in lookup order.
pub fn accessible_functions(tables: &Tables, scope: &Address, position: &Address) -> Vec<Address> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for s in tables.scope_chain(scope) {
        for f in functions_in(tables, &s, Some(position)) {
            if seen.insert(f.clone()) {
                out.push(f);
            }
        }
        if tables.scope_kind(&s) == ScopeKind::Class {
            for p in tables.classes.get(&s).map(|c| c.parents.clone()).unwrap_or_default() {
                for f in class_members(tables, &p) {
                    if seen.insert(f.clone()) {
                        out.push(f);
                    }
                }
            }
        }
    }
    out
}

fn candidate_functions(env: &SearchEnv<'_>, seg: &Segment, branch: &Address, general: &[Address]) -> Vec<Address> {
    let line = seg.get(branch).expect("branch line");
    if is_call_op(&line.quad.op) {
        if let Operand::Addr(a) = &line.quad.right {
            if seg.get(a).is_some_and(|l| l.kind == CodeType::AccessMember) {
                return (env.receiver_class)(seg, a).map(|c| class_members(env.tables, &c)).unwrap_or_default();
            }
        }
    }
    general.to_vec()
}

/// Children of one candidate in expansion order.
fn expand(env: &SearchEnv<'_>, cand: &Candidate, general: &[Address], src: &AddressSource, log: &mut SearchLog, record: bool) -> Vec<Candidate> {
    let mut out = Vec::new();
    for branch in cand.segment.unbound_branches() {
        for fa in candidate_functions(env, &cand.segment, &branch, general) {
            let f = &env.tables.functions[&fa];
            let Some(m) = match_segment(&cand.segment, &branch, f, env.tables, env.ident) else { continue };
            let child = if f.returns_expression {
                match apply_exp_replacement(&cand.segment, &m, f, env.tables, src) {
                    Some(s) => s,
                    None => continue,
                }
            } else {
                let mut s = cand.segment.clone();
                apply_value_binding(&mut s, &m);
                s
            };
            if record {
                log.matches.push(format!("{} at {} -> {}", fa, branch, child.digest()));
            }
            let mut path = cand.path.clone();
            path.push((fa, f.weight));
            out.push(Candidate { segment: child, path });
        }
    }
    out
}

fn weight_of(c: &Candidate) -> f64 {
    c.path.iter().map(|(_, w)| w).sum()
}

/// Binds every line of `longest`, rewriting it with expression rules as needed.
pub fn search_bind(
    longest: &Segment,
    env: &SearchEnv<'_>,
    config: &InferenceConfig,
    log: &mut SearchLog,
) -> Result<Candidate, SearchFailure> {
    let mut start = longest.clone();
    bind_builtins(&mut start);
    let root = Candidate { segment: start, path: Vec::new() };
    if config.exhaustive {
        log.reachable.push((0, 0.0, root.clone()));
    }
    if root.segment.is_fully_bound() {
        return Ok(root);
    }
    let general = accessible_functions(env.tables, &env.scope, &env.position);
    let src = AddressSource::for_tables(env.tables);
    let mut current = CodeTableSilo::new(config.silo_capacity);
    current.insert(0.0, root.segment.canonical(), root);
    let mut found: Option<Candidate> = None;
    let mut last: Vec<String> = Vec::new();
    let failure = |reason: &str, silo: Vec<String>| SearchFailure {
        address: longest.lines.first().map(|l| l.address.clone()).unwrap_or_default(),
        reason: reason.to_string(),
        silo,
    };
    for k in 1..=config.max_rounds {
        log.rounds = k;
        last = current.entries().iter().map(|e| format!("{}:{}", e.weight, e.value.segment.digest())).collect();
        let mut next = CodeTableSilo::new(config.silo_capacity);
        let mut seen_round: BTreeSet<(u64, String)> = BTreeSet::new();
        for entry in current.entries() {
            if config.trace {
                log.trace.push(format!("round {} weight {} {}", k, entry.weight, entry.value.segment.digest()));
            }
            for child in expand(env, &entry.value, &general, &src, log, config.record_matches) {
                let w = entry.weight + child.path.last().map_or(0.0, |(_, w)| *w);
                debug_assert!((w - weight_of(&child)).abs() < 1e-9);
                let key = child.segment.canonical();
                if config.exhaustive && seen_round.insert((w.to_bits(), key.clone())) {
                    log.reachable.push((k, w, child.clone()));
                }
                if child.segment.is_fully_bound() {
                    if !config.exhaustive {
                        return Ok(child);
                    }
                    found.get_or_insert(child);
                    continue;
                }
                next.insert(w, key, child);
            }
        }
        if next.is_empty() {
            return found.ok_or_else(|| failure("no candidates left", last));
        }
        current = next;
    }
    if let Some(c) = found {
        return Ok(c);
    }
    let final_silo = current.entries().iter().map(|e| format!("{}:{}", e.weight, e.value.segment.digest())).collect();
    let _ = last;
    Err(failure("round limit reached", final_silo))
}
