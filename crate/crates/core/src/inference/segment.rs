//! Expression segments: ordered code lines forming one syntax tree.

use crate::code::{Binding, CodeLine, CodeType, Operand, Pending};
use crate::loader::Address;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Sorted ascending by address; the root is the last line.
    pub lines: Vec<CodeLine>,
}

impl Segment {
    pub fn new(mut lines: Vec<CodeLine>) -> Self {
        lines.sort_by(|a, b| a.address.cmp(&b.address));
        Segment { lines }
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn root(&self) -> &Address {
        &self.lines.last().expect("non-empty segment").address
    }

    pub fn index_of(&self, a: &Address) -> Option<usize> {
        self.lines.binary_search_by(|l| l.address.cmp(a)).ok()
    }

    pub fn get(&self, a: &Address) -> Option<&CodeLine> {
        self.index_of(a).map(|i| &self.lines[i])
    }

    pub fn get_mut(&mut self, a: &Address) -> Option<&mut CodeLine> {
        self.index_of(a).map(move |i| &mut self.lines[i])
    }

    pub fn contains(&self, a: &Address) -> bool {
        self.index_of(a).is_some()
    }

    /// Inserts in address order, replacing a line at the same address.
    pub fn insert(&mut self, line: CodeLine) {
        let pos = self.lines.partition_point(|l| l.address < line.address);
        if self.lines.get(pos).is_some_and(|l| l.address == line.address) {
            self.lines[pos] = line;
        } else {
            self.lines.insert(pos, line);
        }
    }

    pub fn remove(&mut self, a: &Address) -> Option<CodeLine> {
        self.index_of(a).map(|i| self.lines.remove(i))
    }

    pub fn addresses(&self) -> Vec<Address> {
        self.lines.iter().map(|l| l.address.clone()).collect()
    }

    /// Operand references of `a` that point into this segment.
    pub fn children(&self, a: &Address) -> Vec<Address> {
        self.get(a).map_or_else(Vec::new, |l| l.operand_refs().into_iter().filter(|c| self.contains(c)).collect())
    }

    /// Lines whose operands reference `a`.
    pub fn parents_of(&self, a: &Address) -> Vec<Address> {
        self.lines
            .iter()
            .filter(|l| l.operand_refs().contains(a))
            .map(|l| l.address.clone())
            .collect()
    }

    /// Addresses of the subtree rooted at `a`, in segment order.
    pub fn subtree(&self, a: &Address) -> Vec<Address> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![a.clone()];
        while let Some(x) = stack.pop() {
            if self.contains(&x) && seen.insert(x.clone()) {
                stack.extend(self.children(&x));
            }
        }
        seen.into_iter().collect()
    }

    /// True when any identifier leaf below `a` (inclusive) is pending.
    pub fn subtree_pending(&self, a: &Address) -> bool {
        self.subtree(a).iter().any(|x| {
            let l = self.get(x).expect("subtree line");
            (1..3).any(|i| matches!(l.quad.slot(i), Operand::Ident(_)) && l.pending[i] == Pending::True)
        })
    }

    /// Pending state of one operand slot of a line.
    pub fn operand_pending(&self, line: &CodeLine, slot: usize) -> bool {
        match line.quad.slot(slot) {
            Operand::Ident(_) => line.pending[slot] == Pending::True,
            Operand::Addr(a) if self.contains(a) => self.subtree_pending(a),
            _ => false,
        }
    }

    pub fn is_fully_bound(&self) -> bool {
        self.lines.iter().all(|l| l.bound.is_bound())
    }

    /// Unbound expression lines in post-order.
    pub fn unbound_branches(&self) -> Vec<Address> {
        self.lines
            .iter()
            .filter(|l| l.kind == CodeType::Expr && !l.bound.is_bound())
            .map(|l| l.address.clone())
            .collect()
    }

    /// Address-free textual form used for identity and hashing.
    pub fn canonical(&self) -> String {
        let index: BTreeMap<&Address, usize> = self.lines.iter().enumerate().map(|(i, l)| (&l.address, i)).collect();
        let operand = |o: &Operand| match o {
            Operand::Empty => "_".to_string(),
            Operand::Number(n) => format!("n{:?}", n),
            Operand::Text(s) => format!("s{:?}", s),
            Operand::Ident(s) => format!("i{s}"),
            Operand::Addr(a) => match index.get(a) {
                Some(i) => format!("#{i}"),
                None => format!("@{a}"),
            },
        };
        let mut out = String::new();
        for l in &self.lines {
            let bound = match &l.bound {
                Binding::None => "-".to_string(),
                Binding::Builtin => "*".to_string(),
                Binding::Function(f) => f.to_string(),
            };
            let _ = write!(
                out,
                "{}|{}|{}|{}|{}|{}{}{}|{}{}{}|{}|{};",
                l.kind.token(),
                l.quad.op,
                operand(&l.quad.left),
                operand(&l.quad.right),
                operand(&l.quad.result),
                l.pending[1].token(),
                l.pending[2].token(),
                l.pending[3].token(),
                l.formal_or_local[1] as u8,
                l.formal_or_local[2] as u8,
                l.formal_or_local[3] as u8,
                bound,
                l.root as u8
            );
        }
        out
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Structural equality of two subtrees, possibly in different segments.
    pub fn subtree_eq(&self, a: &Address, other: &Segment, b: &Address) -> bool {
        match (self.get(a), other.get(b)) {
            (Some(x), Some(y)) => {
                x.kind == y.kind
                    && x.quad.op == y.quad.op
                    && (1..3).all(|i| self.operand_eq(x, i, other, y, i))
            }
            _ => a == b,
        }
    }

    /// Structural equality of operand `i` of `x` and operand `j` of `y`.
    pub fn operand_eq(&self, x: &CodeLine, i: usize, other: &Segment, y: &CodeLine, j: usize) -> bool {
        match (x.quad.slot(i), y.quad.slot(j)) {
            (Operand::Addr(a), Operand::Addr(b)) => self.subtree_eq(a, other, b),
            (Operand::Ident(p), Operand::Ident(q)) => {
                p == q && x.formal_or_local[i] == y.formal_or_local[j]
            }
            (p, q) => p.same(q),
        }
    }

    /// Evaluates the tree at `a` with built-in arithmetic only.
    pub fn eval_with(&self, a: &Address, env: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        let l = self.get(a)?;
        let v = |i: usize| -> Option<f64> {
            match l.quad.slot(i) {
                Operand::Number(n) => Some(*n),
                Operand::Ident(s) => env(s),
                Operand::Addr(c) => self.eval_with(c, env),
                _ => None,
            }
        };
        crate::runtime::value::apply_builtin_number(&l.quad.op, v(1), v(2))
    }
}
