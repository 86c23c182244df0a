//! Character code to extended code table plus scope, function and class tables.

pub mod address;

pub use address::{allocate_between, compare_addresses, Address, AddressError};

use crate::code::{CodeLine, CodeType, Exec, Operand, Pending};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScopeKind {
    FunctionDeclaration,
    FunctionBody,
    Class,
    Conditional,
    Plain,
    Global,
}

impl ScopeKind {
    pub fn token(self) -> &'static str {
        match self {
            ScopeKind::FunctionDeclaration => "DECL",
            ScopeKind::FunctionBody => "BODY",
            ScopeKind::Class => "CLASS",
            ScopeKind::Conditional => "COND",
            ScopeKind::Plain => "PLAIN",
            ScopeKind::Global => "GLOBAL",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        [
            ScopeKind::FunctionDeclaration,
            ScopeKind::FunctionBody,
            ScopeKind::Class,
            ScopeKind::Conditional,
            ScopeKind::Plain,
            ScopeKind::Global,
        ]
        .into_iter()
        .find(|k| k.token() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScopeInfo {
    pub kind: ScopeKind,
    pub start: Address,
    pub end: Address,
    /// Declaration scope for function bodies, empty otherwise.
    pub param_query: Address,
    /// Enclosing scope; empty for top-level scopes.
    pub parent: Address,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionInfo {
    pub decl_scope: Address,
    pub decl_root: Address,
    /// Empty until a derived reverse body is inserted.
    pub body_scope: Address,
    pub returns: Vec<Address>,
    pub returns_expression: bool,
    pub is_reverse: bool,
    pub weight: f64,
    /// The FUNC_OP line; its scope is where the function is visible.
    pub func_op: Address,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub scope: Address,
    pub name: String,
    pub parents: Vec<Address>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tables {
    pub code: BTreeMap<Address, CodeLine>,
    pub scopes: BTreeMap<Address, ScopeInfo>,
    pub functions: BTreeMap<Address, FunctionInfo>,
    pub classes: BTreeMap<Address, ClassInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("unbalanced scopes at {address}")]
    UnbalancedScopes { address: Address },
    #[error("function declared at {address} has no body")]
    FunctionWithoutBody { address: Address },
    #[error("class `{class}` inherits undeclared class `{parent}`")]
    InheritanceOfUndeclaredClass { class: String, parent: String },
    #[error("malformed line {address}: {message}")]
    Malformed { address: Address, message: String },
}

pub fn load(program: Vec<CodeLine>) -> Result<Tables, LoadError> {
    let program = renumber(program);
    let mut tables = Tables::default();

    // scope extents and nesting
    let mut stack: Vec<Address> = Vec::new();
    let mut extents: Vec<(Address, Address, Address)> = Vec::new();
    let mut line_scope: Vec<Address> = Vec::with_capacity(program.len());
    let mut open: BTreeMap<Address, Address> = BTreeMap::new();
    for line in &program {
        match line.kind {
            CodeType::ScopeStart => {
                open.insert(line.address.clone(), stack.last().cloned().unwrap_or_default());
                stack.push(line.address.clone());
                line_scope.push(line.address.clone());
            }
            CodeType::ScopeEnd => {
                let Some(start) = stack.pop() else {
                    return Err(LoadError::UnbalancedScopes { address: line.address.clone() });
                };
                line_scope.push(start.clone());
                let parent = open[&start].clone();
                extents.push((start, line.address.clone(), parent));
            }
            _ => line_scope.push(stack.last().cloned().unwrap_or_default()),
        }
    }
    if let Some(start) = stack.pop() {
        return Err(LoadError::UnbalancedScopes { address: start });
    }

    let mut kinds: BTreeMap<Address, ScopeKind> = BTreeMap::new();
    let mut param_query: BTreeMap<Address, Address> = BTreeMap::new();
    let mut derived_targets = BTreeSet::new();
    for line in &program {
        match line.kind {
            CodeType::FuncOp => {
                if let Some(d) = line.quad.left.as_addr() {
                    kinds.insert(d.clone(), ScopeKind::FunctionDeclaration);
                    if let Some(b) = line.quad.right.as_addr() {
                        kinds.insert(b.clone(), ScopeKind::FunctionBody);
                        param_query.insert(b.clone(), d.clone());
                    }
                }
            }
            CodeType::ClassOp if line.quad.op == "class" => {
                if let Some(s) = line.quad.result.as_addr() {
                    kinds.insert(s.clone(), ScopeKind::Class);
                }
            }
            CodeType::Jump => {
                if let Some(t) = line.quad.right.as_addr() {
                    let is_scope = t.digits().first().is_some_and(|&i| {
                        program.get(i as usize - 1).is_some_and(|l| l.kind == CodeType::ScopeStart)
                    });
                    if is_scope {
                        kinds.entry(t.clone()).or_insert(ScopeKind::Conditional);
                    }
                }
            }
            CodeType::DeriveFunc => {
                if let Some(r) = line.quad.right.as_addr() {
                    derived_targets.insert(r.clone());
                }
            }
            _ => {}
        }
    }
    for (start, end, parent) in extents {
        let kind = kinds.get(&start).copied().unwrap_or(ScopeKind::Plain);
        let pq = param_query.get(&start).cloned().unwrap_or_default();
        tables.scopes.insert(start.clone(), ScopeInfo { kind, start, end, param_query: pq, parent });
    }

    for (mut line, scope) in program.into_iter().zip(line_scope) {
        line.scope = scope;
        line.exec = exec_flag(&tables.scopes, &line.scope);
        tables.code.insert(line.address.clone(), line);
    }

    propagate_pending(&mut tables);
    mark_formals(&mut tables);
    build_functions(&mut tables, &derived_targets)?;
    build_classes(&mut tables)?;
    Ok(tables)
}

/// Assigns addresses 1..N in order and rewrites address operands to match.
fn renumber(program: Vec<CodeLine>) -> Vec<CodeLine> {
    let map: BTreeMap<Address, Address> = program
        .iter()
        .enumerate()
        .map(|(i, l)| (l.address.clone(), Address::single(i as u32 + 1)))
        .collect();
    let fix = |op: &mut Operand| {
        if let Operand::Addr(a) = op {
            if let Some(n) = map.get(a) {
                *a = n.clone();
            } else {
                // address just past the last line (jump to end of program)
                let n = map.len() as u32 + 1;
                *a = Address::single(n);
            }
        }
    };
    program
        .into_iter()
        .enumerate()
        .map(|(i, mut l)| {
            l.address = Address::single(i as u32 + 1);
            fix(&mut l.quad.left);
            fix(&mut l.quad.right);
            fix(&mut l.quad.result);
            l
        })
        .collect()
}

fn exec_flag(scopes: &BTreeMap<Address, ScopeInfo>, scope: &Address) -> Exec {
    let mut exec = Exec::True;
    let mut cur = scope.clone();
    while let Some(info) = scopes.get(&cur) {
        match info.kind {
            ScopeKind::FunctionDeclaration => return Exec::False,
            ScopeKind::FunctionBody | ScopeKind::Class | ScopeKind::Conditional => exec = Exec::Conditional,
            _ => {}
        }
        cur = info.parent.clone();
    }
    exec
}

/// Runs of expression lines, each a longest expression, in table order.
pub fn longest_expressions(code: &BTreeMap<Address, CodeLine>) -> Vec<Vec<Address>> {
    let mut out = Vec::new();
    let mut cur: Vec<Address> = Vec::new();
    for (addr, line) in code {
        if line.kind.is_expression_part() {
            cur.push(addr.clone());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// A `$` or `#` marker on one occurrence applies to every occurrence of the
/// same name within the longest expression.
fn propagate_pending(tables: &mut Tables) {
    for run in longest_expressions(&tables.code) {
        let mut marks: BTreeMap<String, Pending> = BTreeMap::new();
        for a in &run {
            let line = &tables.code[a];
            for i in 1..4 {
                if let Operand::Ident(name) = line.quad.slot(i) {
                    if line.pending[i] != Pending::False {
                        marks.insert(name.clone(), line.pending[i]);
                    }
                }
            }
        }
        if marks.is_empty() {
            continue;
        }
        for a in &run {
            let line = tables.code.get_mut(a).expect("run address");
            for i in 1..4 {
                if let Operand::Ident(name) = &line.quad.slot(i) {
                    if let Some(p) = marks.get(name) {
                        line.pending[i] = *p;
                    }
                }
            }
        }
    }
}

/// In declaration scopes the shared flag means "is a formal parameter".
fn mark_formals(tables: &mut Tables) {
    for line in tables.code.values_mut() {
        if line.exec != Exec::False || !line.kind.is_expression_part() {
            continue;
        }
        line.formal_or_local[0] = false;
        for i in 1..4 {
            let ident = matches!(line.quad.slot(i), Operand::Ident(_));
            let is_self = i == 3 && line.quad.op != "=";
            line.formal_or_local[i] = ident && !is_self && line.formal_or_local[i];
        }
    }
}

fn build_functions(tables: &mut Tables, derived: &BTreeSet<Address>) -> Result<(), LoadError> {
    let func_ops: Vec<CodeLine> =
        tables.code.values().filter(|l| l.kind == CodeType::FuncOp).cloned().collect();
    for op in func_ops {
        let decl = op.quad.left.as_addr().cloned().ok_or_else(|| LoadError::Malformed {
            address: op.address.clone(),
            message: "function operation without declaration scope".into(),
        })?;
        let body = op.quad.right.as_addr().cloned().unwrap_or_default();
        if body.is_empty() && !derived.contains(&decl) {
            return Err(LoadError::FunctionWithoutBody { address: decl });
        }
        let decl_root = declaration_root(tables, &decl).ok_or_else(|| LoadError::Malformed {
            address: decl.clone(),
            message: "empty declaration expression".into(),
        })?;
        let returns_expression = op.quad.op == "exp";
        let is_reverse = !returns_expression && declaration_has_pending_formal(tables, &decl);
        let weight = match op.quad.result {
            Operand::Number(w) => w,
            _ => 0.0,
        };
        let returns = if body.is_empty() { Vec::new() } else { return_lines(tables, &body) };
        tables.functions.insert(
            decl.clone(),
            FunctionInfo {
                decl_scope: decl,
                decl_root,
                body_scope: body,
                returns,
                returns_expression,
                is_reverse,
                weight,
                func_op: op.address.clone(),
            },
        );
    }
    Ok(())
}

/// Last expression line of a declaration scope.
pub fn declaration_root(tables: &Tables, decl: &Address) -> Option<Address> {
    let info = tables.scopes.get(decl)?;
    tables
        .code
        .range(info.start.clone()..=info.end.clone())
        .filter(|(_, l)| l.kind.is_expression_part())
        .map(|(a, _)| a.clone())
        .next_back()
}

fn declaration_has_pending_formal(tables: &Tables, decl: &Address) -> bool {
    let Some(info) = tables.scopes.get(decl) else { return false };
    tables.code.range(info.start.clone()..=info.end.clone()).any(|(_, l)| {
        (1..4).any(|i| l.formal_or_local[i] && l.pending[i] == Pending::True)
    })
}

/// RETURN lines directly owned by a body, excluding nested function bodies.
pub fn return_lines(tables: &Tables, body: &Address) -> Vec<Address> {
    let Some(info) = tables.scopes.get(body) else { return Vec::new() };
    tables
        .code
        .range(info.start.clone()..=info.end.clone())
        .filter(|(_, l)| l.kind == CodeType::Return && tables.owning_body(&l.scope).as_ref() == Some(body))
        .map(|(a, _)| a.clone())
        .collect()
}

fn build_classes(tables: &mut Tables) -> Result<(), LoadError> {
    let lines: Vec<CodeLine> = tables.code.values().filter(|l| l.kind == CodeType::ClassOp).cloned().collect();
    let mut by_name: BTreeMap<String, Address> = BTreeMap::new();
    for line in lines {
        let name = line.quad.left.as_ident().unwrap_or_default().to_string();
        match line.quad.op.as_str() {
            "class" => {
                let scope = line.quad.result.as_addr().cloned().ok_or_else(|| LoadError::Malformed {
                    address: line.address.clone(),
                    message: "class without scope".into(),
                })?;
                by_name.insert(name.clone(), scope.clone());
                tables.classes.insert(scope.clone(), ClassInfo { scope, name, parents: Vec::new() });
            }
            "inherit" => {
                let parent = line.quad.right.as_ident().unwrap_or_default().to_string();
                let Some(p) = by_name.get(&parent).cloned() else {
                    return Err(LoadError::InheritanceOfUndeclaredClass { class: name, parent });
                };
                let scope = by_name[&name].clone();
                tables.classes.get_mut(&scope).expect("class entry").parents.push(p);
            }
            _ => {}
        }
    }
    Ok(())
}

impl Tables {
    pub fn line(&self, a: &Address) -> &CodeLine {
        &self.code[a]
    }

    pub fn scope_kind(&self, scope: &Address) -> ScopeKind {
        self.scopes.get(scope).map_or(ScopeKind::Global, |s| s.kind)
    }

    pub fn parent_scope(&self, scope: &Address) -> Option<Address> {
        self.scopes.get(scope).map(|s| s.parent.clone())
    }

    /// `scope`, its ancestors, and finally the global (empty) scope.
    pub fn scope_chain(&self, scope: &Address) -> Vec<Address> {
        let mut out = vec![scope.clone()];
        let mut cur = scope.clone();
        while let Some(info) = self.scopes.get(&cur) {
            cur = info.parent.clone();
            out.push(cur.clone());
        }
        out
    }

    /// Innermost function body enclosing `scope`.
    pub fn owning_body(&self, scope: &Address) -> Option<Address> {
        self.scope_chain(scope).into_iter().find(|s| self.scope_kind(s) == ScopeKind::FunctionBody)
    }

    /// Function whose body scope is `body`.
    pub fn function_of_body(&self, body: &Address) -> Option<&FunctionInfo> {
        self.functions.values().find(|f| &f.body_scope == body)
    }

    pub fn class_by_name(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.values().find(|c| c.name == name)
    }

    /// Scope in which a function is visible (the scope of its FUNC_OP line).
    pub fn function_scope(&self, f: &FunctionInfo) -> Address {
        self.code.get(&f.func_op).map(|l| l.scope.clone()).unwrap_or_default()
    }

    /// Lines of a scope including its start and end markers.
    pub fn scope_lines(&self, scope: &Address) -> Vec<Address> {
        match self.scopes.get(scope) {
            Some(info) => self.code.range(info.start.clone()..=info.end.clone()).map(|(a, _)| a.clone()).collect(),
            None => self.code.keys().cloned().collect(),
        }
    }

    pub fn next_address(&self, a: &Address) -> Option<Address> {
        use std::ops::Bound;
        self.code.range((Bound::Excluded(a.clone()), Bound::Unbounded)).next().map(|(k, _)| k.clone())
    }

    pub fn prev_address(&self, a: &Address) -> Option<Address> {
        self.code.range(..a.clone()).next_back().map(|(k, _)| k.clone())
    }

    /// The longest expression containing `a`.
    pub fn longest_expression_at(&self, a: &Address) -> Vec<Address> {
        let mut start = a.clone();
        while let Some(p) = self.prev_address(&start) {
            if self.code[&p].kind.is_expression_part() {
                start = p;
            } else {
                break;
            }
        }
        let mut out = vec![start.clone()];
        let mut cur = start;
        while let Some(n) = self.next_address(&cur) {
            if self.code[&n].kind.is_expression_part() {
                out.push(n.clone());
                cur = n;
            } else {
                break;
            }
        }
        out
    }
}
