//! Disassembly of a forward body into code blocks.

use super::InversionError;
use crate::code::{Binding, CodeLine, CodeType, Operand, Pending, Quad};
use crate::inference::{align_call, Segment};
use crate::loader::{Address, FunctionInfo, Tables};
use std::collections::{BTreeMap, BTreeSet};

/// A variable as far as dependency analysis is concerned.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Name(String),
    /// Result slot of a line.
    Temp(Address),
}

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Var::Name(n) => write!(f, "{n}"),
            Var::Temp(a) => write!(f, "@{a}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Expression,
    ScopeStart,
    ScopeEnd,
    Return,
    Default,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeBlock {
    pub seq: usize,
    pub kind: BlockKind,
    pub lines: Vec<CodeLine>,
    pub depends: bool,
}

impl CodeBlock {
    pub fn root(&self) -> Option<&CodeLine> {
        self.lines.last()
    }

    fn has_line(&self, a: &Address) -> bool {
        self.lines.iter().any(|l| &l.address == a)
    }

    /// Variable whose value this block produces.
    pub fn defines(&self) -> Option<Var> {
        if self.kind != BlockKind::Expression {
            return None;
        }
        let r = self.root()?;
        if r.quad.op == "=" {
            match &r.quad.result {
                Operand::Ident(n) => Some(Var::Name(n.clone())),
                Operand::Addr(a) => Some(Var::Temp(a.clone())),
                _ => None,
            }
        } else {
            Some(Var::Temp(r.address.clone()))
        }
    }

    /// Variables read by this block, including temporaries of other blocks.
    pub fn uses(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for l in &self.lines {
            for i in 1..3 {
                match l.quad.slot(i) {
                    Operand::Ident(n) => {
                        out.insert(Var::Name(n.clone()));
                    }
                    Operand::Addr(a) if !self.has_line(a) => {
                        out.insert(Var::Temp(a.clone()));
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Uses plus the defined variable.
    pub fn mentions(&self) -> BTreeSet<Var> {
        let mut m = self.uses();
        m.extend(self.defines());
        m
    }

    /// Identifiers marked pending in the block.
    pub fn marked(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for l in &self.lines {
            for i in 1..4 {
                if let Operand::Ident(n) = l.quad.slot(i) {
                    if l.pending[i] == Pending::True {
                        out.insert(n.clone());
                    }
                }
            }
        }
        out
    }

    /// Resets pending flags from `pending` and strips bindings.
    pub fn make_dependent(&mut self, pending: &BTreeSet<Var>) {
        for l in &mut self.lines {
            for i in 1..4 {
                if let Operand::Ident(n) = l.quad.slot(i) {
                    l.pending[i] = if pending.contains(&Var::Name(n.clone())) { Pending::True } else { Pending::False };
                }
            }
            l.bound = Binding::None;
            l.root = false;
        }
    }

    pub fn segment(&self) -> Segment {
        Segment::new(self.lines.clone())
    }
}

/// Fresh `__inv<N>` names that avoid every identifier in the program.
#[derive(Clone, Debug)]
pub struct FreshNames {
    used: BTreeSet<String>,
    next: usize,
}

impl FreshNames {
    pub fn for_tables(tables: &Tables) -> Self {
        let mut used = BTreeSet::new();
        for l in tables.code.values() {
            for i in 1..4 {
                if let Operand::Ident(n) = l.quad.slot(i) {
                    used.insert(n.clone());
                }
            }
        }
        FreshNames { used, next: 1 }
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let n = format!("__inv{}", self.next);
            self.next += 1;
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Disassembly {
    pub blocks: Vec<CodeBlock>,
    /// Fresh variables needing a declaration in the reverse body.
    pub a_replace: Vec<String>,
    /// Final state of the replacement table.
    pub replacements: BTreeMap<String, String>,
    /// Variables depending on the pending inputs.
    pub dependent: BTreeSet<Var>,
    /// Temporary returned by the forward body, if any.
    pub returned_temp: Option<Address>,
    /// Renamed variable returned by the forward body, if any.
    pub returned_name: Option<String>,
}

fn not_invertible(reason: impl Into<String>) -> InversionError {
    InversionError::NotInvertible { reason: reason.into() }
}

fn formal_names(tables: &Tables, f: &FunctionInfo) -> BTreeSet<String> {
    crate::inference::preexec::declaration_formals(tables, f)
}

/// Lines of the call segment rooted at `root` within `le`.
fn call_lines(tables: &Tables, le: &Segment, root: &CodeLine) -> Vec<Address> {
    let mut out: BTreeSet<Address> = BTreeSet::new();
    out.insert(root.address.clone());
    if let Binding::Function(fa) = &root.bound {
        if let Some(f) = tables.functions.get(fa) {
            if let Some(m) = align_call(le, &root.address, f, tables) {
                out.extend(m.aligned.into_iter().map(|(c, _)| c));
            }
        }
    }
    // member accesses travel with the line that reads them
    let mut stack: Vec<Address> = out.iter().cloned().collect();
    while let Some(a) = stack.pop() {
        for c in le.children(&a) {
            if le.get(&c).is_some_and(|l| l.kind == CodeType::AccessMember) && out.insert(c.clone()) {
                stack.push(c);
            }
        }
    }
    out.into_iter().collect()
}

pub fn disassemble(
    tables: &Tables,
    forward: &FunctionInfo,
    pending_inputs: &BTreeSet<String>,
    fresh: &mut FreshNames,
) -> Result<Disassembly, InversionError> {
    let body = forward.body_scope.clone();
    let formals = formal_names(tables, forward);
    let mut out = Disassembly::default();
    out.dependent = pending_inputs.iter().map(|n| Var::Name(n.clone())).collect();
    let mut declared: BTreeSet<String> = BTreeSet::new();
    let mut table: BTreeMap<String, String> = BTreeMap::new();
    let mut seq = 0;
    let mut push = |out: &mut Disassembly, kind, lines: Vec<CodeLine>, depends| {
        seq += 1;
        out.blocks.push(CodeBlock { seq, kind, lines, depends });
    };
    let lines = tables.scope_lines(&body);
    let mut le_cache: Option<(Vec<Address>, Segment)> = None;
    let mut le_fresh: BTreeMap<String, String> = BTreeMap::new();
    for a in &lines {
        let line = &tables.code[a];
        if line.exec == crate::code::Exec::False {
            continue;
        }
        match line.kind {
            CodeType::ScopeStart if a == &body => push(&mut out, BlockKind::ScopeStart, vec![line.clone()], false),
            CodeType::ScopeEnd if line.scope == body => push(&mut out, BlockKind::ScopeEnd, vec![line.clone()], false),
            CodeType::ScopeStart | CodeType::ScopeEnd | CodeType::Jump => {
                return Err(not_invertible("loops and branches cannot be inverted"));
            }
            CodeType::ExprEnd => {
                le_cache = None;
                le_fresh.clear();
            }
            CodeType::VarDecl => {
                let name = line.quad.left.as_ident().unwrap_or_default().to_string();
                if formals.contains(&name) || !declared.insert(name.clone()) {
                    return Err(not_invertible(format!("`{name}` is declared twice in one body")));
                }
                push(&mut out, BlockKind::Default, vec![line.clone()], false);
            }
            CodeType::Expr | CodeType::AccessMember => {
                if !line.root {
                    continue;
                }
                let le = match &le_cache {
                    Some((addrs, seg)) if addrs.contains(a) => seg.clone(),
                    _ => {
                        let addrs = tables.longest_expression_at(a);
                        let seg = Segment::new(addrs.iter().map(|x| tables.code[x].clone()).collect());
                        le_cache = Some((addrs, seg.clone()));
                        seg
                    }
                };
                let mut block: Vec<CodeLine> =
                    call_lines(tables, &le, line).iter().map(|x| le.get(x).expect("call line").clone()).collect();
                let mut updates: Vec<(String, String)> = Vec::new();
                for l in &mut block {
                    for i in 1..4 {
                        let Operand::Ident(n) = l.quad.slot(i).clone() else { continue };
                        let is_target = i == 3 && l.quad.op == "=";
                        if i == 3 && !is_target {
                            continue;
                        }
                        let writes = is_target || l.pending[i] == Pending::True;
                        if writes && !(formals.contains(&n) || declared.contains(&n)) {
                            return Err(not_invertible(format!("the body changes outer variable `{n}`")));
                        }
                        let new = if is_target {
                            let f = fresh.fresh();
                            out.a_replace.push(f.clone());
                            updates.push((n.clone(), f.clone()));
                            f
                        } else if l.pending[i] == Pending::True {
                            let f = le_fresh
                                .entry(n.clone())
                                .or_insert_with(|| {
                                    let f = fresh.fresh();
                                    out.a_replace.push(f.clone());
                                    f
                                })
                                .clone();
                            updates.push((n.clone(), f.clone()));
                            f
                        } else {
                            table.get(&n).cloned().unwrap_or(n)
                        };
                        *l.quad.slot_mut(i) = Operand::Ident(new);
                    }
                }
                for (k, v) in updates {
                    table.insert(k, v);
                }
                let mut b = CodeBlock { seq: 0, kind: BlockKind::Expression, lines: block, depends: false };
                let depends = !b.uses().is_disjoint(&out.dependent);
                if depends {
                    out.dependent.extend(b.defines());
                    out.dependent.extend(b.marked().into_iter().map(Var::Name));
                    b.make_dependent(&out.dependent);
                }
                push(&mut out, BlockKind::Expression, b.lines, depends);
            }
            CodeType::Return => {
                let target = match &line.quad.left {
                    Operand::Addr(t) => {
                        out.returned_temp = Some(t.clone());
                        Operand::Addr(t.clone())
                    }
                    Operand::Ident(n) => {
                        let r = table.get(n).cloned().unwrap_or_else(|| n.clone());
                        out.returned_name = Some(r.clone());
                        Operand::Ident(r)
                    }
                    other => other.clone(),
                };
                let mut l = CodeLine::new(
                    a.clone(),
                    CodeType::Expr,
                    Quad::new("=", Operand::Ident("ans".to_string()), Operand::Empty, target),
                );
                l.scope = line.scope.clone();
                l.exec = line.exec;
                l.bound = Binding::Builtin;
                l.root = true;
                push(&mut out, BlockKind::Return, vec![l], false);
            }
            _ => push(&mut out, BlockKind::Default, vec![line.clone()], false),
        }
    }
    out.replacements = table;
    Ok(out)
}
