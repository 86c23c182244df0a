//! Structural matching of candidate segments against declaration expressions.

use super::segment::Segment;
use crate::code::{is_call_op, CodeLine, CodeType, Operand, Pending};
use crate::loader::{Address, FunctionInfo, Tables};
use std::collections::BTreeMap;

/// A resolved variable: owning pre-execution record and name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct VarId {
    pub record: usize,
    pub name: String,
}

/// Variable identity lookups needed by the actual-parameter condition.
pub trait Identity {
    /// Variable named by a candidate operand (identifier or access line).
    fn candidate(&self, seg: &Segment, operand: &Operand, local: bool) -> Option<VarId>;
    /// Variable named by a non-formal identifier in `f`'s declaration.
    fn declared(&self, f: &FunctionInfo, name: &str) -> Option<VarId>;
}

/// Identity by name only; used where no pre-execution records exist.
pub struct ByName;

impl Identity for ByName {
    fn candidate(&self, seg: &Segment, operand: &Operand, _local: bool) -> Option<VarId> {
        match operand {
            Operand::Ident(n) => Some(VarId { record: 0, name: n.clone() }),
            Operand::Addr(a) => seg.get(a).filter(|l| l.kind == CodeType::AccessMember).map(|l| VarId {
                record: 0,
                name: format!("{}.{}", l.quad.left, l.quad.right),
            }),
            _ => None,
        }
    }

    fn declared(&self, _f: &FunctionInfo, name: &str) -> Option<VarId> {
        Some(VarId { record: 0, name: name.to_string() })
    }
}

/// One formal parameter's actual: the candidate operand with its flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Actual {
    pub operand: Operand,
    pub pending: Pending,
    pub local: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MatchSubstitution {
    pub bindings: BTreeMap<String, Actual>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub function: Address,
    pub root: Address,
    /// Candidate line paired with the declaration line it aligns with.
    pub aligned: Vec<(Address, Address)>,
    pub subst: MatchSubstitution,
}

/// Declaration expression of `f` as a segment.
pub fn declaration_segment(tables: &Tables, f: &FunctionInfo) -> Segment {
    let lines = tables
        .scope_lines(&f.decl_scope)
        .into_iter()
        .map(|a| tables.code[&a].clone())
        .filter(|l| l.kind.is_expression_part())
        .collect();
    Segment::new(lines)
}

struct Matcher<'a> {
    cand: &'a Segment,
    decl: &'a Segment,
    f: &'a FunctionInfo,
    ident: &'a dyn Identity,
    /// Bound lines may not be aligned; runtime alignment lifts this.
    require_unbound: bool,
    aligned: Vec<(Address, Address)>,
    subst: MatchSubstitution,
}

/// Matches the branch of `cand` rooted at `root` against `f`'s declaration.
pub fn match_segment(
    cand: &Segment,
    root: &Address,
    f: &FunctionInfo,
    tables: &Tables,
    ident: &dyn Identity,
) -> Option<Match> {
    let decl = declaration_segment(tables, f);
    run(cand, root, f, &decl, ident, true)
}

/// Alignment used at runtime to recover actuals of an already bound call.
pub fn align_call(cand: &Segment, root: &Address, f: &FunctionInfo, tables: &Tables) -> Option<Match> {
    let decl = declaration_segment(tables, f);
    run(cand, root, f, &decl, &ByName, false)
}

fn run(
    cand: &Segment,
    root: &Address,
    f: &FunctionInfo,
    decl: &Segment,
    ident: &dyn Identity,
    require_unbound: bool,
) -> Option<Match> {
    let mut m = Matcher {
        cand,
        decl,
        f,
        ident,
        require_unbound,
        aligned: Vec::new(),
        subst: MatchSubstitution::default(),
    };
    if m.node(root, &f.decl_root) {
        m.aligned.sort();
        Some(Match { function: f.decl_scope.clone(), root: root.clone(), aligned: m.aligned, subst: m.subst })
    } else {
        None
    }
}

impl<'a> Matcher<'a> {
    fn node(&mut self, c: &Address, d: &Address) -> bool {
        let (Some(cl), Some(dl)) = (self.cand.get(c), self.decl.get(d)) else { return false };
        if cl.kind != CodeType::Expr || dl.kind != CodeType::Expr || cl.quad.op != dl.quad.op {
            return false;
        }
        if self.require_unbound && cl.bound.is_bound() {
            return false;
        }
        self.aligned.push((c.clone(), d.clone()));
        let receiver = is_call_op(&cl.quad.op)
            && dl.quad.right.is_empty()
            && matches!(&cl.quad.right, Operand::Addr(a) if self.cand.get(a).is_some_and(|l| l.kind == CodeType::AccessMember));
        let (cl, dl) = (cl.clone(), dl.clone());
        if !self.operand(&cl, 1, &dl, 1) {
            return false;
        }
        receiver || self.operand(&cl, 2, &dl, 2)
    }

    fn operand(&mut self, cl: &CodeLine, i: usize, dl: &CodeLine, j: usize) -> bool {
        let co = cl.quad.slot(i);
        match dl.quad.slot(j) {
            Operand::Empty => co.is_empty(),
            Operand::Number(_) | Operand::Text(_) => co.same(dl.quad.slot(j)),
            Operand::Addr(da) => match co {
                Operand::Addr(ca) => {
                    let is_access = self.cand.get(ca).is_none_or(|l| l.kind == CodeType::AccessMember);
                    !is_access && self.node(&ca.clone(), &da.clone())
                }
                _ => false,
            },
            Operand::Ident(name) => {
                if dl.formal_or_local[j] {
                    self.formal(name, cl, i, dl.pending[j])
                } else {
                    self.actual(name, cl, i)
                }
            }
        }
    }

    fn formal(&mut self, name: &str, cl: &CodeLine, i: usize, decl_pending: Pending) -> bool {
        let co = cl.quad.slot(i);
        if co.is_empty() {
            return false;
        }
        let pending = self.cand.operand_pending(cl, i);
        let ok = match decl_pending {
            Pending::Unrelated => true,
            Pending::True => pending,
            Pending::False => !pending,
        };
        if self.require_unbound && !ok {
            return false;
        }
        let actual = Actual {
            operand: co.clone(),
            pending: if pending { Pending::True } else { Pending::False },
            local: cl.formal_or_local[i],
        };
        match self.subst.bindings.get(name) {
            Some(prev) => self.same_actual(prev, &actual),
            None => {
                self.subst.bindings.insert(name.to_string(), actual);
                true
            }
        }
    }

    fn same_actual(&self, a: &Actual, b: &Actual) -> bool {
        match (&a.operand, &b.operand) {
            (Operand::Addr(x), Operand::Addr(y)) => self.cand.subtree_eq(x, self.cand, y),
            (Operand::Ident(x), Operand::Ident(y)) => x == y && a.local == b.local,
            (x, y) => x.same(y),
        }
    }

    /// `out:` parameter in the declaration: must be the very same variable.
    fn actual(&mut self, name: &str, cl: &CodeLine, i: usize) -> bool {
        let co = cl.quad.slot(i);
        if !self.require_unbound {
            return matches!(co, Operand::Ident(_) | Operand::Addr(_));
        }
        let lhs = self.ident.candidate(self.cand, co, cl.formal_or_local[i]);
        let rhs = self.ident.declared(self.f, name);
        matches!((lhs, rhs), (Some(a), Some(b)) if a == b)
    }
}

/// The five node-matching conditions for one operand pair.
///
/// `node1` is slot `i` of `cand_line`; `node2` is slot `j` of `decl_line`.
pub fn match_node(
    cand: &Segment,
    cand_line: &CodeLine,
    i: usize,
    decl_line: &CodeLine,
    j: usize,
    f: &FunctionInfo,
    ident: &dyn Identity,
) -> bool {
    let decl = Segment::new(vec![decl_line.clone()]);
    let mut m = Matcher {
        cand,
        decl: &decl,
        f,
        ident,
        require_unbound: true,
        aligned: Vec::new(),
        subst: MatchSubstitution::default(),
    };
    match decl_line.quad.slot(j) {
        Operand::Addr(_) => false,
        _ => m.operand(cand_line, i, decl_line, j),
    }
}
