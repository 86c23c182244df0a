//! Derivation of reverse-function bodies from forward bodies.

pub mod blocks;
pub mod trees;

pub use blocks::{disassemble, BlockKind, CodeBlock, Disassembly, FreshNames, Var};
pub use trees::{build_dependency_trees, merge_tree, necessary_variables, prioritize_trees, DependencyTree, MergeFailure};

use crate::code::{Binding, CodeLine, CodeType, Exec, Operand, Pending, Quad};
use crate::inference::preexec::{declaration_formals, RecordIdentity, Records};
use crate::inference::{search_bind, InferenceConfig, SearchEnv, SearchLog, Segment};
use crate::loader::{allocate_between, Address, FunctionInfo, ScopeInfo, ScopeKind, Tables};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InversionError {
    #[error("function cannot be inverted: {reason}")]
    NotInvertible { reason: String },
    #[error("reverse derivation failed; unresolved blocks: {remaining}")]
    DerivationFailure { remaining: String },
}

fn not_invertible(reason: impl Into<String>) -> InversionError {
    InversionError::NotInvertible { reason: reason.into() }
}

/// Names the anonymous `$` parameter after the forward formal the reverse
/// declaration leaves out, then checks the names correspond.
pub fn name_reverse_formals(tables: &mut Tables, forward: &FunctionInfo, reverse: &FunctionInfo) -> Result<(), InversionError> {
    let fwd = declaration_formals(tables, forward);
    let lines = tables.scope_lines(&reverse.decl_scope);
    let mut named = BTreeSet::new();
    let mut anonymous = Vec::new();
    for a in &lines {
        let l = &tables.code[a];
        for i in 1..4 {
            if let Operand::Ident(n) = l.quad.slot(i) {
                if l.formal_or_local[i] {
                    if n == "$" {
                        anonymous.push((a.clone(), i));
                    } else {
                        named.insert(n.clone());
                    }
                }
            }
        }
    }
    let missing: Vec<String> = fwd.difference(&named).cloned().collect();
    if !anonymous.is_empty() {
        if missing.len() != 1 {
            return Err(not_invertible("the anonymous `$` parameter matches no single forward parameter"));
        }
        for (a, i) in anonymous {
            *tables.code.get_mut(&a).expect("decl line").quad.slot_mut(i) = Operand::Ident(missing[0].clone());
        }
        named.insert(missing[0].clone());
    }
    let fwd_no_ans: BTreeSet<String> = fwd.into_iter().collect();
    if named != fwd_no_ans {
        return Err(not_invertible("reverse parameters must match the forward parameters by name"));
    }
    Ok(())
}

fn pending_formals(tables: &Tables, f: &FunctionInfo) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in tables.scope_lines(&f.decl_scope) {
        let l = &tables.code[&a];
        for i in 1..4 {
            if let Operand::Ident(n) = l.quad.slot(i) {
                if l.formal_or_local[i] && l.pending[i] == Pending::True {
                    out.insert(n.clone());
                }
            }
        }
    }
    out
}

struct Synthetic(u32);

impl Synthetic {
    fn line(&mut self, kind: CodeType, quad: Quad) -> CodeLine {
        self.0 += 1;
        let mut l = CodeLine::new(Address::new(vec![u32::MAX, self.0]).expect("placeholder"), kind, quad);
        if kind == CodeType::Expr {
            l.bound = Binding::Builtin;
            l.root = true;
        }
        l
    }

    fn expr_end(&mut self) -> CodeLine {
        self.line(CodeType::ExprEnd, Quad::new(";", Operand::Empty, Operand::Empty, Operand::Empty))
    }
}

fn set_pending(lines: &mut [CodeLine], pending: &BTreeSet<Var>) {
    for l in lines {
        for i in 1..4 {
            if let Operand::Ident(n) = l.quad.slot(i) {
                l.pending[i] = if pending.contains(&Var::Name(n.clone())) { Pending::True } else { Pending::False };
            }
        }
        l.bound = Binding::None;
        l.root = false;
    }
}

fn lines_under(lines: &[CodeLine], a: &Address) -> Vec<CodeLine> {
    let seg = Segment::new(lines.to_vec());
    seg.subtree(a).iter().map(|x| seg.get(x).expect("subtree line").clone()).collect()
}

/// Splits a merged segment into the part to solve and the source of its root value.
fn solvable(merged: Vec<CodeLine>, dis: &Disassembly) -> (Vec<CodeLine>, Option<Operand>) {
    let root = merged.last().expect("merged segment").clone();
    let returned_temp = dis.returned_temp.as_ref();
    if root.quad.op == "=" {
        let known = match &root.quad.result {
            Operand::Ident(n) if dis.returned_name.as_deref() == Some(n.as_str()) => Some(Operand::Ident(n.clone())),
            Operand::Addr(a) if Some(a) == returned_temp => Some(Operand::Ident("ans".into())),
            _ => None,
        };
        if let (Some(src), Operand::Addr(r)) = (&known, &root.quad.left) {
            return (lines_under(&merged, r), Some(src.clone()));
        }
        return (merged, None);
    }
    if Some(&root.address) == returned_temp {
        return (merged, Some(Operand::Ident("ans".into())));
    }
    (merged, None)
}

fn describe(blocks: &[CodeBlock]) -> String {
    blocks.iter().map(|b| format!("[{}]", b.seq)).collect::<Vec<_>>().join(", ")
}

/// Derives and inserts the body of the reverse function named by a
/// DERIVE_FUNC line. Returns trace lines.
pub fn derive_reverse(
    tables: &mut Tables,
    derive_line: &Address,
    records: &Records,
    current: usize,
    config: &InferenceConfig,
    log: &mut SearchLog,
) -> Result<Vec<String>, InversionError> {
    let line = tables.code[derive_line].clone();
    let (Some(fa), Some(ra)) = (line.quad.left.as_addr().cloned(), line.quad.right.as_addr().cloned()) else {
        return Err(not_invertible("malformed derivation line"));
    };
    let forward = tables.functions.get(&fa).cloned().ok_or_else(|| not_invertible("unknown forward function"))?;
    let reverse = tables.functions.get(&ra).cloned().ok_or_else(|| not_invertible("unknown reverse declaration"))?;
    if forward.returns_expression || forward.body_scope.is_empty() {
        return Err(not_invertible("only value-returning functions with a body can be inverted"));
    }
    name_reverse_formals(tables, &forward, &reverse)?;
    let inputs = pending_formals(tables, &reverse);
    if inputs.is_empty() {
        return Err(not_invertible("the reverse declaration has no pending parameter"));
    }
    let mut fresh = FreshNames::for_tables(tables);
    let dis = disassemble(tables, &forward, &inputs, &mut fresh)?;
    let mut trace = vec![format!("derive {} from {}: {} blocks", ra, fa, dis.blocks.len())];

    let (mut dependent, independent): (Vec<CodeBlock>, Vec<CodeBlock>) =
        dis.blocks.iter().cloned().partition(|b| b.depends);
    let mut pending = dis.dependent.clone();
    let mut back: Vec<Vec<CodeLine>> = Vec::new();
    let mut syn = Synthetic(0);

    let scope = tables.function_scope(&reverse);
    let view: &Tables = tables;
    let ident = RecordIdentity { records, tables: view, current };
    let receiver = |s: &Segment, acc: &Address| records.receiver_class(s, acc, current);
    let env = SearchEnv { tables: view, ident: &ident, scope, position: derive_line.clone(), receiver_class: &receiver };

    while !dependent.is_empty() {
        let trees = prioritize_trees(build_dependency_trees(&dependent, &pending, config.max_tree_nodes), &dependent, &pending);
        let mut solved = None;
        for t in &trees {
            let name = format!("{:?}", t.nodes.iter().rev().collect::<Vec<_>>());
            let mut merged = match merge_tree(t, &dependent) {
                Ok(m) => m,
                Err(e) => {
                    trace.push(format!("tree {name}: {e}"));
                    continue;
                }
            };
            set_pending(&mut merged, &pending);
            let (lines, source) = solvable(merged, &dis);
            let inside: BTreeSet<&Address> = lines.iter().map(|l| &l.address).collect();
            let dangling = lines.iter().any(|l| {
                (1..3).any(|i| matches!(l.quad.slot(i), Operand::Addr(a) if !inside.contains(a) && pending.contains(&Var::Temp(a.clone()))))
            });
            if dangling {
                trace.push(format!("tree {name}: reads an unsolved temporary"));
                continue;
            }
            match search_bind(&Segment::new(lines), &env, config, log) {
                Ok(c) => {
                    trace.push(format!("tree {name}: bound"));
                    solved = Some((t.clone(), c.segment, source));
                    break;
                }
                Err(e) => trace.push(format!("tree {name}: {e}")),
            }
        }
        let Some((tree, seg, source)) = solved else {
            return Err(InversionError::DerivationFailure { remaining: describe(&dependent) });
        };
        let mut chunk = Vec::new();
        if let Some(src) = source {
            chunk.push(syn.line(CodeType::Expr, Quad::new("=", src, Operand::Empty, Operand::Addr(seg.root().clone()))));
            chunk.push(syn.expr_end());
        }
        chunk.extend(seg.lines);
        chunk.push(syn.expr_end());
        back.push(chunk);
        for b in dependent.iter().filter(|b| tree.nodes.contains(&b.seq)) {
            for v in b.mentions() {
                pending.remove(&v);
            }
        }
        dependent.retain(|b| !tree.nodes.contains(&b.seq));
        // blocks whose inputs are now all known run forward
        loop {
            let Some(pos) = dependent.iter().position(|b| b.uses().is_disjoint(&pending)) else { break };
            let b = dependent.remove(pos);
            for v in b.defines().into_iter().chain(b.marked().into_iter().map(Var::Name)) {
                pending.remove(&v);
            }
            let mut lines = b.lines.clone();
            set_pending(&mut lines, &pending);
            let c = search_bind(&Segment::new(lines), &env, config, log)
                .map_err(|_| InversionError::DerivationFailure { remaining: describe(std::slice::from_ref(&b)) })?;
            let mut chunk = c.segment.lines;
            chunk.push(syn.expr_end());
            back.push(chunk);
        }
    }

    // assemble the reverse body
    let mut chunks: Vec<Vec<CodeLine>> = Vec::new();
    let mut q = independent.into_iter().collect::<std::collections::VecDeque<_>>();
    let ss = q.pop_front().filter(|b| b.kind == BlockKind::ScopeStart).ok_or_else(|| not_invertible("body without scope start"))?;
    let se = q.pop_back().filter(|b| b.kind == BlockKind::ScopeEnd).ok_or_else(|| not_invertible("body without scope end"))?;
    chunks.push(ss.lines.clone());
    let decls: Vec<CodeLine> = dis
        .a_replace
        .iter()
        .map(|n| syn.line(CodeType::VarDecl, Quad::new("new", Operand::Ident(n.clone()), Operand::Empty, Operand::Empty)))
        .collect();
    chunks.push(decls);
    let mut open: BTreeSet<Address> = BTreeSet::new();
    while let Some(b) = q.pop_front() {
        let is_expr = matches!(b.kind, BlockKind::Expression | BlockKind::Return);
        if !is_expr && !open.is_empty() {
            chunks.push(vec![syn.expr_end()]);
            open.clear();
        }
        open.extend(b.lines.iter().map(|l| l.address.clone()));
        chunks.push(b.lines.clone());
        if is_expr {
            let shared = q.iter().any(|r| r.uses().iter().any(|v| matches!(v, Var::Temp(a) if open.contains(a))));
            if !shared {
                chunks.push(vec![syn.expr_end()]);
                open.clear();
            }
        } else {
            open.clear();
        }
    }
    chunks.extend(back);
    chunks.push(se.lines.clone());

    // relocate between the reverse FUNC_OP line and the next line
    let total: usize = chunks.iter().map(Vec::len).sum();
    let next = tables.next_address(&reverse.func_op);
    let mut fresh_addrs = allocate_between(&reverse.func_op, next.as_ref(), total).into_iter();
    let originals: BTreeSet<Address> = tables.scope_lines(&forward.body_scope).into_iter().collect();
    let mut global: BTreeMap<Address, Address> = BTreeMap::new();
    let mut placed: Vec<(Vec<CodeLine>, BTreeMap<Address, Address>)> = Vec::new();
    for chunk in chunks {
        let mut local = BTreeMap::new();
        for l in &chunk {
            let n = fresh_addrs.next().expect("enough addresses");
            if originals.contains(&l.address) {
                global.insert(l.address.clone(), n.clone());
            }
            local.insert(l.address.clone(), n);
        }
        placed.push((chunk, local));
    }
    let body = placed[0].1.values().next().cloned().expect("scope start address");
    let mut end = body.clone();
    for (chunk, local) in placed {
        for mut l in chunk {
            l.address = local[&l.address].clone();
            for i in 1..4 {
                if let Operand::Addr(a) = l.quad.slot(i) {
                    if let Some(n) = local.get(a).or_else(|| global.get(a)) {
                        *l.quad.slot_mut(i) = Operand::Addr(n.clone());
                    }
                }
            }
            l.scope = body.clone();
            l.exec = Exec::Conditional;
            end = l.address.clone();
            tables.code.insert(l.address.clone(), l);
        }
    }
    tables.scopes.insert(
        body.clone(),
        ScopeInfo {
            kind: ScopeKind::FunctionBody,
            start: body.clone(),
            end,
            param_query: reverse.decl_scope.clone(),
            parent: tables.function_scope(&reverse),
        },
    );
    if let Some(f) = tables.functions.get_mut(&ra) {
        f.body_scope = body.clone();
        f.returns = Vec::new();
    }
    if let Some(op) = tables.code.get_mut(&reverse.func_op) {
        op.quad.right = Operand::Addr(body.clone());
    }
    trace.push(format!("derived body {} with {} lines", body, total));
    Ok(trace)
}
