//! Code replacement for expression rules and the repairs that follow it.

use super::matching::Match;
use super::segment::Segment;
use crate::code::{is_builtin_op, Binding, CodeLine, CodeType, Operand, Pending};
use crate::loader::{allocate_between, Address, FunctionInfo, Tables};
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound;

/// Hands out addresses that collide neither with the code table nor with
/// the segment being edited.
#[derive(Clone, Debug, Default)]
pub struct AddressSource {
    taken: BTreeSet<Address>,
}

impl AddressSource {
    pub fn new(taken: impl IntoIterator<Item = Address>) -> Self {
        AddressSource { taken: taken.into_iter().collect() }
    }

    pub fn for_tables(tables: &Tables) -> Self {
        Self::new(tables.code.keys().cloned())
    }

    pub fn reserve(&mut self, a: Address) {
        self.taken.insert(a);
    }

    fn next_taken(&self, seg: &Segment, lo: &Address) -> Option<Address> {
        let in_table = self.taken.range((Bound::Excluded(lo.clone()), Bound::Unbounded)).next().cloned();
        let in_seg = seg.lines.iter().map(|l| &l.address).find(|a| *a > lo).cloned();
        match (in_table, in_seg) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn prev_taken(&self, seg: &Segment, hi: &Address) -> Option<Address> {
        let in_table = self.taken.range(..hi.clone()).next_back().cloned();
        let in_seg = seg.lines.iter().map(|l| &l.address).rfind(|a| *a < hi).cloned();
        match (in_table, in_seg) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// `count` fresh addresses immediately after `lo`.
    pub fn after(&self, seg: &Segment, lo: &Address, count: usize) -> Vec<Address> {
        let hi = self.next_taken(seg, lo);
        allocate_between(lo, hi.as_ref(), count)
    }

    /// `count` fresh addresses immediately before `hi`.
    pub fn before(&self, seg: &Segment, hi: &Address, count: usize) -> Vec<Address> {
        let lo = self.prev_taken(seg, hi).expect("a line precedes every inserted reference");
        allocate_between(&lo, Some(hi), count)
    }
}

/// Binds determined built-in operations and member accesses.
pub fn bind_builtins(seg: &mut Segment) {
    let flags: Vec<(usize, bool)> = seg
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| (i, (1..3).any(|s| seg.operand_pending(l, s))))
        .collect();
    for (i, pending) in flags {
        let l = &mut seg.lines[i];
        if l.bound.is_bound() {
            continue;
        }
        match l.kind {
            CodeType::AccessMember => {
                l.bound = Binding::Builtin;
                l.root = false;
            }
            CodeType::Expr if is_builtin_op(&l.quad.op) && !pending => {
                l.bound = Binding::Builtin;
                l.root = true;
            }
            _ => {}
        }
    }
}

/// Marks the aligned lines of a value-function match.
pub fn apply_value_binding(seg: &mut Segment, m: &Match) {
    for (c, _) in &m.aligned {
        let l = seg.get_mut(c).expect("aligned line");
        l.bound = Binding::Function(m.function.clone());
        l.root = *c == m.root;
    }
}

/// The return expression of an expression rule: its root operand and lines.
pub fn return_expression(tables: &Tables, f: &FunctionInfo) -> Option<(Operand, Segment)> {
    let ret = tables.code.get(f.returns.first()?)?;
    let operand = ret.quad.left.clone();
    let lines = match &operand {
        Operand::Addr(a) => {
            let run = Segment::new(tables.longest_expression_at(a).iter().map(|x| tables.code[x].clone()).collect());
            let keep = run.subtree(a);
            Segment::new(keep.iter().map(|x| run.get(x).unwrap().clone()).collect())
        }
        _ => Segment::new(Vec::new()),
    };
    Some((operand, lines))
}

/// Replaces the matched branch with the rule's return expression.
pub fn apply_exp_replacement(
    host: &Segment,
    m: &Match,
    f: &FunctionInfo,
    tables: &Tables,
    src: &AddressSource,
) -> Option<Segment> {
    let (ret, body) = return_expression(tables, f)?;
    let anchor = host.get(&m.root)?.clone();
    let is_root = &m.root == host.root();
    let mut seg = host.clone();

    let substitute = |seg: &Segment, op: &Operand, pending: &mut Pending, local: &mut bool| -> Operand {
        if let Operand::Ident(name) = op {
            if let Some(actual) = m.subst.bindings.get(name) {
                *local = actual.local;
                *pending = match &actual.operand {
                    Operand::Addr(a) if seg.subtree_pending(a) => Pending::True,
                    Operand::Ident(_) => actual.pending,
                    _ => Pending::False,
                };
                return actual.operand.clone();
            }
        }
        op.clone()
    };

    let new_root = match &ret {
        Operand::Addr(ra) => {
            let fresh = src.after(host, &m.root, body.lines.len());
            let map: BTreeMap<Address, Address> =
                body.lines.iter().map(|l| l.address.clone()).zip(fresh.iter().cloned()).collect();
            for old in &body.lines {
                let mut l = CodeLine::new(map[&old.address].clone(), CodeType::Expr, old.quad.clone());
                l.scope = anchor.scope.clone();
                l.exec = anchor.exec;
                for i in 1..4 {
                    let op = old.quad.slot(i).clone();
                    let mut pending = Pending::False;
                    let mut local = old.formal_or_local[i];
                    let new_op = match &op {
                        Operand::Addr(a) => Operand::Addr(map.get(a).cloned().unwrap_or_else(|| a.clone())),
                        Operand::Ident(_) => {
                            pending = old.pending[i];
                            substitute(host, &op, &mut pending, &mut local)
                        }
                        _ => op,
                    };
                    *l.quad.slot_mut(i) = new_op;
                    l.pending[i] = pending;
                    l.formal_or_local[i] = local;
                }
                if l.quad.op != "=" {
                    l.quad.result = Operand::Addr(l.address.clone());
                }
                seg.insert(l);
            }
            Operand::Addr(map[ra].clone())
        }
        other => {
            let mut pending = Pending::False;
            let mut local = true;
            let op = substitute(host, other, &mut pending, &mut local);
            if is_root {
                // a bare operand cannot stand as the whole expression
                match op {
                    Operand::Addr(_) => op,
                    _ => return None,
                }
            } else {
                op
            }
        }
    };

    if is_root {
        seg.remove(&m.root);
        if let Operand::Addr(a) = &new_root {
            // drop everything after the new root that is no longer reachable
            let keep: BTreeSet<Address> = seg.subtree(a).into_iter().collect();
            seg.lines.retain(|l| keep.contains(&l.address));
        }
    } else {
        let pend = match &new_root {
            Operand::Addr(a) if seg.subtree_pending(a) => Pending::True,
            Operand::Ident(name) => m.subst.bindings.get(name).map_or(Pending::False, |a| a.pending),
            _ => Pending::False,
        };
        for l in seg.lines.iter_mut() {
            for i in 1..4 {
                if i == 3 && l.quad.op != "=" {
                    continue;
                }
                if matches!(l.quad.slot(i), Operand::Addr(a) if *a == m.root) {
                    *l.quad.slot_mut(i) = new_root.clone();
                    l.pending[i] = pend;
                }
            }
        }
    }
    let mut seg = repair_detached(&seg);
    expand_rings(&mut seg, src);
    bind_builtins(&mut seg);
    Some(seg)
}

/// Removes lines not reachable from the root (the last line).
pub fn repair_detached(seg: &Segment) -> Segment {
    if seg.is_empty() {
        return seg.clone();
    }
    let keep: BTreeSet<Address> = seg.subtree(seg.root()).into_iter().collect();
    Segment::new(seg.lines.iter().filter(|l| keep.contains(&l.address)).cloned().collect())
}

/// Every (line, slot) that references another line of the segment.
fn references(seg: &Segment) -> Vec<(Address, usize, Address)> {
    let mut out = Vec::new();
    for l in &seg.lines {
        for i in 1..4 {
            if i == 3 && l.quad.op != "=" {
                continue;
            }
            if let Operand::Addr(a) = l.quad.slot(i) {
                if seg.contains(a) {
                    out.push((l.address.clone(), i, a.clone()));
                }
            }
        }
    }
    out
}

/// Copies any branch referenced more than once so the result is a tree.
pub fn expand_rings(seg: &mut Segment, src: &AddressSource) {
    loop {
        let refs = references(seg);
        let mut seen: BTreeMap<Address, usize> = BTreeMap::new();
        let mut dup = None;
        for (line, slot, target) in &refs {
            let n = seen.entry(target.clone()).or_insert(0);
            *n += 1;
            if *n == 2 {
                dup = Some((line.clone(), *slot, target.clone()));
                break;
            }
        }
        let Some((line, slot, target)) = dup else { return };
        let branch = seg.subtree(&target);
        let fresh = src.before(seg, &line, branch.len());
        let map: BTreeMap<Address, Address> = branch.iter().cloned().zip(fresh).collect();
        for old in &branch {
            let mut l = seg.get(old).expect("branch line").clone();
            l.address = map[old].clone();
            for i in 1..4 {
                if let Operand::Addr(a) = l.quad.slot(i) {
                    if let Some(n) = map.get(a) {
                        *l.quad.slot_mut(i) = Operand::Addr(n.clone());
                    }
                }
            }
            seg.insert(l);
        }
        let user = seg.get_mut(&line).expect("referencing line");
        *user.quad.slot_mut(slot) = Operand::Addr(map[&target].clone());
    }
}

/// True when no branch is referenced twice on any walk from the root.
pub fn is_tree(seg: &Segment) -> bool {
    let mut seen = BTreeSet::new();
    references(seg).into_iter().all(|(_, _, t)| seen.insert(t))
}
