//! The interpreter proper.

use super::record::{Loc, RecordArena};
use super::value::{apply_builtin, Value};
use super::RuntimeError;
use crate::code::{Binding, CodeLine, CodeType, Exec, Operand};
use crate::inference::{align_call, Segment};
use crate::loader::{Address, FunctionInfo, ScopeKind, Tables};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeConfig {
    pub max_depth: usize,
    /// Abort after this many executed lines.
    pub max_steps: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { max_depth: 200, max_steps: 10_000_000 }
    }
}

/// One user-function call, in execution order.
#[derive(Clone, Debug, PartialEq)]
pub struct CallEvent {
    pub line: Address,
    pub function: Address,
    pub reverse: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionReport {
    pub outputs: Vec<String>,
    pub calls: Vec<CallEvent>,
    pub records_created: usize,
    pub records_destroyed: usize,
}

enum Flow {
    Normal,
    Return(Value),
}

pub struct Runtime<'t> {
    tables: &'t Tables,
    config: RuntimeConfig,
    pub arena: RecordArena,
    pub outputs: Vec<String>,
    pub calls: Vec<CallEvent>,
    segments: HashMap<Address, (Vec<Address>, Segment)>,
    depth: usize,
    steps: usize,
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Number(n) => *n != 0.0,
        Value::Text(s) => !s.is_empty(),
        Value::Instance(_) => true,
        Value::Undefined => false,
    }
}

impl<'t> Runtime<'t> {
    pub fn new(tables: &'t Tables, config: RuntimeConfig) -> Self {
        Runtime {
            tables,
            config,
            arena: RecordArena::default(),
            outputs: Vec::new(),
            calls: Vec::new(),
            segments: HashMap::new(),
            depth: 0,
            steps: 0,
        }
    }

    fn err(&self, address: &Address, message: impl Into<String>) -> RuntimeError {
        RuntimeError { address: address.clone(), message: message.into() }
    }

    pub fn run(mut self) -> Result<ExecutionReport, RuntimeError> {
        let global = self.arena.create(Address::empty(), None);
        let first = self.tables.code.keys().next().cloned();
        self.exec_range(first, None, global)?;
        self.arena.destroy(global);
        Ok(ExecutionReport {
            outputs: self.outputs,
            calls: self.calls,
            records_created: self.arena.created,
            records_destroyed: self.arena.destroyed,
        })
    }

    /// Runs lines from `pc` until `stop` (exclusive) or the end of the table.
    fn exec_range(&mut self, mut pc: Option<Address>, stop: Option<&Address>, base: usize) -> Result<Flow, RuntimeError> {
        let mut stack = vec![base];
        while let Some(a) = pc {
            if Some(&a) == stop {
                break;
            }
            self.steps += 1;
            if self.steps > self.config.max_steps {
                return Err(self.err(&a, "step limit exceeded"));
            }
            let line = &self.tables.code[&a];
            let rec = *stack.last().expect("record stack");
            if line.exec == Exec::False && line.kind != CodeType::ScopeStart {
                pc = self.tables.next_address(&a);
                continue;
            }
            pc = match line.kind {
                CodeType::ScopeStart => match self.tables.scope_kind(&a) {
                    ScopeKind::FunctionDeclaration | ScopeKind::FunctionBody | ScopeKind::Class => {
                        let end = self.tables.scopes[&a].end.clone();
                        self.tables.next_address(&end)
                    }
                    _ => {
                        stack.push(self.arena.create(a.clone(), Some(rec)));
                        self.tables.next_address(&a)
                    }
                },
                CodeType::ScopeEnd => {
                    if stack.len() > 1 {
                        stack.pop();
                        self.arena.destroy(rec);
                    }
                    self.tables.next_address(&a)
                }
                CodeType::VarDecl => {
                    self.declare(line, rec)?;
                    self.tables.next_address(&a)
                }
                CodeType::Expr | CodeType::AccessMember => {
                    let last = self.eval_at(&a, rec)?;
                    self.tables.next_address(&last)
                }
                CodeType::Jump => {
                    let go = match &line.quad.left {
                        Operand::Number(n) => *n != 0.0,
                        Operand::Addr(c) => truthy(self.arena.get(rec).temps.get(c).unwrap_or(&Value::Undefined)),
                        other => return Err(self.err(&a, format!("bad jump condition {other}"))),
                    };
                    match (&line.quad.right, go) {
                        (Operand::Addr(t), true) => {
                            if self.tables.code.contains_key(t) {
                                Some(t.clone())
                            } else {
                                None
                            }
                        }
                        _ => self.tables.next_address(&a),
                    }
                }
                CodeType::Return => {
                    let v = self.read(&line.quad.left, true, rec, None, &a)?;
                    while stack.len() > 1 {
                        let r = stack.pop().expect("nested record");
                        self.arena.destroy(r);
                    }
                    return Ok(Flow::Return(v));
                }
                _ => self.tables.next_address(&a),
            };
        }
        while stack.len() > 1 {
            let r = stack.pop().expect("nested record");
            self.arena.destroy(r);
        }
        Ok(Flow::Normal)
    }

    fn declare(&mut self, line: &CodeLine, rec: usize) -> Result<(), RuntimeError> {
        let Some(name) = line.quad.left.as_ident() else {
            return Err(self.err(&line.address, "declaration without a name"));
        };
        let value = match line.quad.right.as_ident() {
            Some(class) => {
                let scope = self
                    .tables
                    .class_by_name(class)
                    .map(|c| c.scope.clone())
                    .ok_or_else(|| self.err(&line.address, format!("unknown class `{class}`")))?;
                Value::Instance(self.instantiate(&scope)?)
            }
            None => Value::Number(0.0),
        };
        self.arena.get_mut(rec).vars.insert(name.to_string(), value);
        Ok(())
    }

    /// Creates an instance record, parents first, and runs the class body in it.
    pub fn instantiate(&mut self, class: &Address) -> Result<usize, RuntimeError> {
        let info = self.tables.classes.get(class).cloned().ok_or_else(|| self.err(class, "not a class"))?;
        let mut parents = Vec::new();
        for p in &info.parents {
            parents.push(self.instantiate(p)?);
        }
        let r = self.arena.create(class.clone(), Some(0));
        {
            let rec = self.arena.get_mut(r);
            rec.is_instance = true;
            rec.query = parents;
        }
        let start = self.tables.next_address(class);
        let end = self.tables.scopes[class].end.clone();
        self.exec_range(start, Some(&end), r)?;
        Ok(r)
    }

    fn segment_at(&mut self, a: &Address) -> (Vec<Address>, Segment) {
        if let Some(s) = self.segments.get(a) {
            return s.clone();
        }
        let addrs = self.tables.longest_expression_at(a);
        let seg = Segment::new(addrs.iter().map(|x| self.tables.code[x].clone()).collect());
        for x in &addrs {
            self.segments.insert(x.clone(), (addrs.clone(), seg.clone()));
        }
        (addrs, seg)
    }

    /// Evaluates the longest expression containing `a`; returns its last address.
    fn eval_at(&mut self, a: &Address, rec: usize) -> Result<Address, RuntimeError> {
        let (addrs, seg) = self.segment_at(a);
        self.eval_longest_expression(&seg, rec)?;
        Ok(addrs.last().expect("non-empty expression").clone())
    }

    fn is_reverse_root(&self, l: &CodeLine) -> bool {
        match &l.bound {
            Binding::Function(f) => l.root && self.tables.functions.get(f).is_some_and(|f| f.is_reverse),
            _ => false,
        }
    }

    /// Forward roots front to back, then reverse roots back to front.
    pub fn eval_longest_expression(&mut self, seg: &Segment, rec: usize) -> Result<Value, RuntimeError> {
        for l in &seg.lines {
            if !l.root || l.kind != CodeType::Expr || self.is_reverse_root(l) {
                continue;
            }
            match &l.bound {
                Binding::Builtin => self.builtin(l, seg, rec)?,
                Binding::Function(f) => self.call(f, l, seg, rec, false)?,
                Binding::None => return Err(self.err(&l.address, "unbound expression")),
            }
        }
        for l in seg.lines.iter().rev() {
            if self.is_reverse_root(l) {
                if let Binding::Function(f) = &l.bound {
                    self.call(f, l, seg, rec, true)?;
                }
            }
        }
        Ok(seg
            .lines
            .last()
            .and_then(|l| self.arena.get(rec).temps.get(&l.address).cloned())
            .unwrap_or_default())
    }

    fn builtin(&mut self, l: &CodeLine, seg: &Segment, rec: usize) -> Result<(), RuntimeError> {
        let op = l.quad.op.as_str();
        let x = self.read(&l.quad.left, l.formal_or_local[1], rec, Some(seg), &l.address)?;
        let value = match op {
            "=" => {
                let target = self.locate(&l.quad.result, l.formal_or_local[3], rec, Some(seg), &l.address, true)?;
                self.arena.store(&target, x.clone());
                x
            }
            "-->" => {
                self.outputs.push(x.to_string());
                x
            }
            "u-" => apply_builtin(op, &x, &Value::Undefined).map_err(|e| self.err(&l.address, e.to_string()))?,
            _ => {
                let y = self.read(&l.quad.right, l.formal_or_local[2], rec, Some(seg), &l.address)?;
                apply_builtin(op, &x, &y).map_err(|e| self.err(&l.address, e.to_string()))?
            }
        };
        self.arena.get_mut(rec).temps.insert(l.address.clone(), value);
        Ok(())
    }

    /// Storage for an operand; `create` adds undeclared assignment targets.
    fn locate(
        &mut self,
        op: &Operand,
        local: bool,
        rec: usize,
        seg: Option<&Segment>,
        at: &Address,
        create: bool,
    ) -> Result<Loc, RuntimeError> {
        match op {
            Operand::Ident(n) => {
                let start = if local { Some(rec) } else { self.arena.get(rec).parent };
                match start.and_then(|s| self.arena.resolve(s, n)) {
                    Some(loc) => Ok(loc),
                    None if create => {
                        self.arena.get_mut(rec).vars.insert(n.clone(), Value::Number(0.0));
                        Ok(Loc::Var(rec, n.clone()))
                    }
                    None => Err(self.err(at, format!("unresolved identifier `{n}`"))),
                }
            }
            Operand::Addr(a) => match seg.and_then(|s| s.get(a)) {
                Some(acc) if acc.kind == CodeType::AccessMember => self.member(acc, rec, seg, at),
                _ => Ok(Loc::Temp(rec, a.clone())),
            },
            other => Err(self.err(at, format!("`{other}` is not storage"))),
        }
    }

    fn instance_of(&mut self, loc: &Loc, at: &Address) -> Result<usize, RuntimeError> {
        match self.arena.load(loc) {
            Some(Value::Instance(r)) => Ok(*r),
            _ => Err(self.err(at, "member access on a non-instance")),
        }
    }

    fn member(&mut self, acc: &CodeLine, rec: usize, seg: Option<&Segment>, at: &Address) -> Result<Loc, RuntimeError> {
        let base = self.locate(&acc.quad.left, acc.formal_or_local[1], rec, seg, at, false)?;
        let inst = self.instance_of(&base, at)?;
        let name = acc.quad.right.as_ident().unwrap_or_default().to_string();
        match self.arena.find_member(inst, &name) {
            Some(loc) => Ok(loc),
            None => Err(self.err(at, format!("no member `{name}`"))),
        }
    }

    fn read(&mut self, op: &Operand, local: bool, rec: usize, seg: Option<&Segment>, at: &Address) -> Result<Value, RuntimeError> {
        match op {
            Operand::Empty => Ok(Value::Undefined),
            Operand::Number(n) => Ok(Value::Number(*n)),
            Operand::Text(s) => Ok(Value::Text(s.clone())),
            _ => {
                let loc = self.locate(op, local, rec, seg, at, false)?;
                Ok(self.arena.load(&loc).cloned().unwrap_or_default())
            }
        }
    }

    /// Record that a call to `f` from `rec` hangs off.
    fn parent_for(&mut self, f: &FunctionInfo, l: &CodeLine, seg: &Segment, rec: usize) -> Result<usize, RuntimeError> {
        if let Operand::Addr(a) = &l.quad.right {
            if let Some(acc) = seg.get(a).filter(|x| x.kind == CodeType::AccessMember) {
                let base = self.locate(&acc.quad.left, acc.formal_or_local[1], rec, Some(seg), &l.address, false)?;
                return self.instance_of(&base, &l.address);
            }
        }
        let scope = self.tables.function_scope(f);
        if scope.is_empty() {
            return Ok(0);
        }
        let mut cur = Some(rec);
        while let Some(c) = cur {
            let r = self.arena.get(c);
            if r.scope == scope || self.class_chain_has(c, &scope) {
                return Ok(c);
            }
            cur = r.parent;
        }
        Ok(0)
    }

    fn class_chain_has(&self, r: usize, scope: &Address) -> bool {
        let rec = self.arena.get(r);
        rec.is_instance && (rec.scope == *scope || rec.query.iter().any(|&q| self.class_chain_has(q, scope)))
    }

    fn call(&mut self, fa: &Address, l: &CodeLine, seg: &Segment, rec: usize, reverse: bool) -> Result<(), RuntimeError> {
        let f = self.tables.functions.get(fa).cloned().ok_or_else(|| self.err(&l.address, "unknown function"))?;
        if f.body_scope.is_empty() {
            return Err(self.err(&l.address, "function has no body"));
        }
        let m = align_call(seg, &l.address, &f, self.tables)
            .ok_or_else(|| self.err(&l.address, "call does not match its declaration"))?;
        if self.depth >= self.config.max_depth {
            return Err(self.err(&l.address, "call depth limit exceeded"));
        }
        self.calls.push(CallEvent { line: l.address.clone(), function: fa.clone(), reverse });
        let parent = self.parent_for(&f, l, seg, rec)?;
        let callee = self.arena.create(f.body_scope.clone(), Some(parent));
        let mut written = Vec::new();
        for (formal, actual) in &m.subst.bindings {
            match &actual.operand {
                Operand::Number(_) | Operand::Text(_) => {
                    let v = self.read(&actual.operand, true, rec, Some(seg), &l.address)?;
                    self.arena.get_mut(callee).vars.insert(formal.clone(), v);
                }
                op => {
                    let loc = self.locate(op, actual.local, rec, Some(seg), &l.address, false)?;
                    written.push(loc.clone());
                    self.arena.get_mut(callee).cross_ref.insert(formal.clone(), loc);
                }
            }
        }
        if reverse {
            self.arena.get_mut(callee).cross_ref.insert("ans".into(), Loc::Temp(rec, l.address.clone()));
        }
        self.depth += 1;
        let start = self.tables.next_address(&f.body_scope);
        let end = self.tables.scopes[&f.body_scope].end.clone();
        let flow = self.exec_range(start, Some(&end), callee);
        self.depth -= 1;
        self.arena.destroy(callee);
        if let Flow::Return(v) = flow? {
            if !reverse {
                self.arena.get_mut(rec).temps.insert(l.address.clone(), v);
            }
        }
        if reverse {
            for loc in &written {
                if let Some(Value::Number(n)) = self.arena.load(loc) {
                    if !n.is_finite() {
                        return Err(self.err(&l.address, "reverse function produced a non-finite value"));
                    }
                }
            }
        }
        Ok(())
    }
}
