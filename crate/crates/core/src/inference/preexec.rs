//! The single forward walk over the extended code table.

use super::matching::{Identity, VarId};
use super::search::{search_bind, InferenceConfig, SearchEnv, SearchLog};
use super::segment::Segment;
use super::InferenceError;
use crate::code::{CodeType, Exec, Operand};
use crate::inversion;
use crate::loader::{Address, FunctionInfo, ScopeKind, Tables};
use std::collections::{BTreeMap, BTreeSet};

/// Pre-execution active record: names only, no values.
#[derive(Clone, Debug, Default)]
pub struct PreRecord {
    pub scope: Address,
    pub names: BTreeSet<String>,
    /// Instance variables and the class scope they refer to.
    pub instances: BTreeMap<String, Address>,
    pub parent: Option<usize>,
    pub query: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Records {
    pub records: Vec<PreRecord>,
    /// One shared record per class.
    pub class_records: BTreeMap<Address, usize>,
    /// Most recent record created for each scope.
    pub scope_records: BTreeMap<Address, usize>,
}

impl Default for Records {
    fn default() -> Self {
        Records { records: vec![PreRecord::default()], class_records: BTreeMap::new(), scope_records: BTreeMap::new() }
    }
}

impl Records {
    pub fn push(&mut self, rec: PreRecord) -> usize {
        self.scope_records.insert(rec.scope.clone(), self.records.len());
        self.records.push(rec);
        self.records.len() - 1
    }

    fn find_in(&self, r: usize, name: &str, seen: &mut BTreeSet<usize>) -> Option<usize> {
        if !seen.insert(r) {
            return None;
        }
        if self.records[r].names.contains(name) {
            return Some(r);
        }
        self.records[r].query.iter().find_map(|&q| self.find_in(q, name, seen))
    }

    /// Data table, then parameter-query records, then the parent chain.
    pub fn resolve(&self, from: usize, name: &str, local: bool) -> Option<VarId> {
        let mut cur = if local { Some(from) } else { self.records[from].parent };
        while let Some(r) = cur {
            if let Some(found) = self.find_in(r, name, &mut BTreeSet::new()) {
                return Some(VarId { record: found, name: name.to_string() });
            }
            cur = self.records[r].parent;
        }
        None
    }

    pub fn instance_class(&self, v: &VarId) -> Option<Address> {
        self.records[v.record].instances.get(&v.name).cloned()
    }

    /// Resolves a member access line to the member variable.
    pub fn resolve_path(&self, seg: &Segment, access: &Address, from: usize) -> Option<VarId> {
        let line = seg.get(access)?;
        let base = match &line.quad.left {
            Operand::Ident(n) => self.resolve(from, n, line.formal_or_local[1])?,
            Operand::Addr(a) => self.resolve_path(seg, a, from)?,
            _ => return None,
        };
        let member = line.quad.right.as_ident()?;
        let class = self.instance_class(&base)?;
        let rec = *self.class_records.get(&class)?;
        let found = self.find_in(rec, member, &mut BTreeSet::new())?;
        Some(VarId { record: found, name: member.to_string() })
    }

    /// Class scope of the receiver of a method call through `access`.
    pub fn receiver_class(&self, seg: &Segment, access: &Address, from: usize) -> Option<Address> {
        let line = seg.get(access)?;
        let base = match &line.quad.left {
            Operand::Ident(n) => self.resolve(from, n, line.formal_or_local[1])?,
            Operand::Addr(a) => self.resolve_path(seg, a, from)?,
            _ => return None,
        };
        self.instance_class(&base)
    }
}

/// Identity lookups against the pre-execution records.
pub struct RecordIdentity<'a> {
    pub records: &'a Records,
    pub tables: &'a Tables,
    pub current: usize,
}

impl Identity for RecordIdentity<'_> {
    fn candidate(&self, seg: &Segment, operand: &Operand, local: bool) -> Option<VarId> {
        match operand {
            Operand::Ident(n) => self.records.resolve(self.current, n, local),
            Operand::Addr(a) if seg.get(a).is_some_and(|l| l.kind == CodeType::AccessMember) => {
                self.records.resolve_path(seg, a, self.current)
            }
            _ => None,
        }
    }

    fn declared(&self, f: &FunctionInfo, name: &str) -> Option<VarId> {
        let scope = self.tables.function_scope(f);
        let rec = if scope.is_empty() { 0 } else { *self.records.scope_records.get(&scope)? };
        self.records.resolve(rec, name, true)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PreExecReport {
    /// How many times the walk visited each line.
    pub visits: BTreeMap<Address, usize>,
    pub searches: usize,
    pub log: SearchLog,
    /// Reverse declarations whose bodies were derived.
    pub derived: Vec<Address>,
    pub inversion_trace: Vec<String>,
}

impl PreExecReport {
    pub fn max_visits(&self) -> usize {
        self.visits.values().copied().max().unwrap_or(0)
    }
}

fn in_exp_body(tables: &Tables, scope: &Address) -> bool {
    tables
        .owning_body(scope)
        .and_then(|b| tables.function_of_body(&b))
        .is_some_and(|f| f.returns_expression)
}

/// Formal names of a declaration, plus `ans` for reverse functions.
pub fn declaration_formals(tables: &Tables, f: &FunctionInfo) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in tables.scope_lines(&f.decl_scope) {
        let l = &tables.code[&a];
        for i in 1..4 {
            if let Operand::Ident(n) = l.quad.slot(i) {
                if l.formal_or_local[i] {
                    out.insert(n.clone());
                }
            }
        }
    }
    if f.is_reverse {
        out.insert("ans".to_string());
    }
    out
}

pub struct PreExecutor<'c> {
    pub tables: Tables,
    pub records: Records,
    pub report: PreExecReport,
    config: &'c InferenceConfig,
    stack: Vec<usize>,
}

impl<'c> PreExecutor<'c> {
    pub fn new(tables: Tables, config: &'c InferenceConfig) -> Self {
        PreExecutor { tables, records: Records::default(), report: PreExecReport::default(), config, stack: vec![0] }
    }

    fn current(&self) -> usize {
        *self.stack.last().expect("global record")
    }

    pub fn run(&mut self) -> Result<(), InferenceError> {
        let mut cursor = self.tables.code.keys().next().cloned();
        while let Some(a) = cursor {
            *self.report.visits.entry(a.clone()).or_insert(0) += 1;
            self.step(&a)?;
            cursor = self.tables.next_address(&a);
        }
        Ok(())
    }

    fn step(&mut self, a: &Address) -> Result<(), InferenceError> {
        let line = self.tables.code[a].clone();
        if line.exec == Exec::False {
            return Ok(());
        }
        match line.kind {
            CodeType::ScopeStart => self.enter_scope(a),
            CodeType::ScopeEnd => {
                if self.stack.len() > 1 {
                    self.stack.pop();
                }
            }
            CodeType::VarDecl => {
                let cur = self.current();
                if let Some(name) = line.quad.left.as_ident() {
                    self.records.records[cur].names.insert(name.to_string());
                    if let Some(class) = line.quad.right.as_ident().and_then(|c| self.tables.class_by_name(c)) {
                        let scope = class.scope.clone();
                        self.records.records[cur].instances.insert(name.to_string(), scope);
                    }
                }
            }
            CodeType::Expr | CodeType::AccessMember => {
                if !line.bound.is_bound() && !in_exp_body(&self.tables, &line.scope) {
                    self.bind_expression(a)?;
                }
            }
            CodeType::DeriveFunc => {
                let cur = self.current();
                let trace = inversion::derive_reverse(
                    &mut self.tables,
                    a,
                    &self.records,
                    cur,
                    self.config,
                    &mut self.report.log,
                )?;
                self.report.inversion_trace.extend(trace);
                if let Some(r) = line.quad.right.as_addr() {
                    self.report.derived.push(r.clone());
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn enter_scope(&mut self, a: &Address) {
        let parent = self.current();
        let mut rec = PreRecord { scope: a.clone(), parent: Some(parent), ..Default::default() };
        match self.tables.scope_kind(a) {
            ScopeKind::FunctionBody => {
                if let Some(f) = self.tables.function_of_body(a) {
                    rec.names = declaration_formals(&self.tables, f);
                }
            }
            ScopeKind::Class => {
                if let Some(c) = self.tables.classes.get(a) {
                    rec.query = c.parents.iter().filter_map(|p| self.records.class_records.get(p).copied()).collect();
                }
            }
            _ => {}
        }
        let id = self.records.push(rec);
        if self.tables.scope_kind(a) == ScopeKind::Class {
            self.records.class_records.insert(a.clone(), id);
        }
        self.stack.push(id);
    }

    fn bind_expression(&mut self, a: &Address) -> Result<(), InferenceError> {
        let addrs = self.tables.longest_expression_at(a);
        let seg = Segment::new(addrs.iter().map(|x| self.tables.code[x].clone()).collect());
        let scope = self.tables.code[a].scope.clone();
        let exec = self.tables.code[a].exec;
        let current = self.current();
        let ident = RecordIdentity { records: &self.records, tables: &self.tables, current };
        let records = &self.records;
        let receiver = move |s: &Segment, acc: &Address| records.receiver_class(s, acc, current);
        let env = SearchEnv { tables: &self.tables, ident: &ident, scope: scope.clone(), position: a.clone(), receiver_class: &receiver };
        self.report.searches += 1;
        let found = search_bind(&seg, &env, self.config, &mut self.report.log).map_err(InferenceError::Search)?;
        for x in &addrs {
            self.tables.code.remove(x);
        }
        for mut l in found.segment.lines {
            l.scope = scope.clone();
            l.exec = exec;
            self.tables.code.insert(l.address.clone(), l);
        }
        Ok(())
    }
}
