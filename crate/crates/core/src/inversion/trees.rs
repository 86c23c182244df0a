//! Dependency trees over pending code blocks and their merging.

use super::blocks::{CodeBlock, Var};
use crate::code::{CodeLine, Operand};
use crate::inference::Segment;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Upper bound on enumerated trees per root.
const MAX_TREES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyTree {
    /// Seq of the root block.
    pub root: usize,
    /// Seqs of all nodes, root included.
    pub nodes: BTreeSet<usize>,
    /// Child seq to parent seq.
    pub parent: BTreeMap<usize, usize>,
}

impl DependencyTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, seq: usize) -> Vec<usize> {
        self.parent.iter().filter(|(_, p)| **p == seq).map(|(c, _)| *c).collect()
    }
}

fn by_seq(blocks: &[CodeBlock]) -> BTreeMap<usize, &CodeBlock> {
    blocks.iter().map(|b| (b.seq, b)).collect()
}

/// Blocks in `blocks` whose pending result `b` reads.
fn suppliers(blocks: &[CodeBlock], b: &CodeBlock, pending: &BTreeSet<Var>) -> Vec<usize> {
    let uses = b.uses();
    blocks
        .iter()
        .filter(|s| s.seq != b.seq)
        .filter(|s| s.defines().is_some_and(|d| pending.contains(&d) && uses.contains(&d)))
        .map(|s| s.seq)
        .collect()
}

/// Every connected tree of at most `max_nodes` blocks rooted at the last block.
pub fn build_dependency_trees(dependent: &[CodeBlock], pending: &BTreeSet<Var>, max_nodes: usize) -> Vec<DependencyTree> {
    let Some(root) = dependent.iter().max_by_key(|b| b.seq) else { return Vec::new() };
    let index = by_seq(dependent);
    let supply: BTreeMap<usize, Vec<usize>> =
        dependent.iter().map(|b| (b.seq, suppliers(dependent, b, pending))).collect();
    let mut seen: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    let mut queue: VecDeque<BTreeSet<usize>> = VecDeque::new();
    let start: BTreeSet<usize> = [root.seq].into_iter().collect();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(set) = queue.pop_front() {
        if set.len() >= max_nodes || seen.len() >= MAX_TREES {
            continue;
        }
        for n in &set {
            for s in &supply[n] {
                if set.contains(s) {
                    continue;
                }
                let mut next = set.clone();
                next.insert(*s);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen.into_iter()
        .map(|nodes| {
            let mut parent = BTreeMap::new();
            for &n in &nodes {
                if n == root.seq {
                    continue;
                }
                let d = index[&n].defines();
                // the latest tree node reading the result adopts it
                let p = nodes
                    .iter()
                    .rev()
                    .copied()
                    .find(|&p| p != n && d.as_ref().is_some_and(|d| index[&p].uses().contains(d)));
                if let Some(p) = p {
                    parent.insert(n, p);
                }
            }
            DependencyTree { root: root.seq, nodes, parent }
        })
        .collect()
}

/// Pending variables the tree shares with dependent blocks outside it.
pub fn necessary_variables(tree: &DependencyTree, dependent: &[CodeBlock], pending: &BTreeSet<Var>) -> BTreeSet<Var> {
    let inside: BTreeSet<Var> = dependent
        .iter()
        .filter(|b| tree.nodes.contains(&b.seq))
        .flat_map(|b| b.mentions())
        .filter(|v| pending.contains(v))
        .collect();
    let outside: BTreeSet<Var> =
        dependent.iter().filter(|b| !tree.nodes.contains(&b.seq)).flat_map(|b| b.mentions()).collect();
    inside.intersection(&outside).cloned().collect()
}

/// Fewest necessary variables, then fewest nodes, then root and node order.
pub fn prioritize_trees(mut trees: Vec<DependencyTree>, dependent: &[CodeBlock], pending: &BTreeSet<Var>) -> Vec<DependencyTree> {
    trees.sort_by_cached_key(|t| {
        (necessary_variables(t, dependent, pending).len(), t.len(), t.root, t.nodes.iter().copied().collect::<Vec<_>>())
    });
    trees
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("block {child} could not be merged into block {parent}")]
pub struct MergeFailure {
    pub child: usize,
    pub parent: usize,
}

/// Lines of `lines` forming the tree under `a`.
fn subtree_lines(lines: &[CodeLine], a: &crate::loader::Address) -> Vec<CodeLine> {
    let seg = Segment::new(lines.to_vec());
    seg.subtree(a).iter().map(|x| seg.get(x).expect("subtree line").clone()).collect()
}

/// Folds child blocks into their parents, leaves first.
pub fn merge_tree(tree: &DependencyTree, blocks: &[CodeBlock]) -> Result<Vec<CodeLine>, MergeFailure> {
    let mut content: BTreeMap<usize, Vec<CodeLine>> =
        blocks.iter().filter(|b| tree.nodes.contains(&b.seq)).map(|b| (b.seq, b.lines.clone())).collect();
    let mut remaining = tree.parent.clone();
    while !remaining.is_empty() {
        let leaf = *remaining
            .keys()
            .rev()
            .find(|c| !remaining.values().any(|p| p == *c))
            .expect("trees are acyclic");
        let parent = remaining.remove(&leaf).expect("leaf has a parent");
        let child = content.remove(&leaf).expect("child content");
        let mut target = content.remove(&parent).expect("parent content");
        let croot = child.last().expect("non-empty block").clone();
        let mut replaced = 0;
        if croot.quad.op == "=" {
            let value = croot.quad.left.clone();
            let extra = match &value {
                Operand::Addr(a) => subtree_lines(&child, a),
                _ => Vec::new(),
            };
            let (lhs_name, lhs_addr) = match &croot.quad.result {
                Operand::Ident(n) => (Some(n.clone()), None),
                Operand::Addr(a) => (None, Some(a.clone())),
                _ => (None, None),
            };
            for l in &mut target {
                for i in 1..3 {
                    let hit = match l.quad.slot(i) {
                        Operand::Ident(n) => lhs_name.as_deref() == Some(n.as_str()),
                        Operand::Addr(a) => lhs_addr.as_ref() == Some(a),
                        _ => false,
                    };
                    if hit {
                        *l.quad.slot_mut(i) = value.clone();
                        l.pending[i] = croot.pending[1];
                        replaced += 1;
                    }
                }
            }
            target.extend(extra);
        } else {
            for l in &target {
                for i in 1..3 {
                    if matches!(l.quad.slot(i), Operand::Addr(a) if *a == croot.address) {
                        replaced += 1;
                    }
                }
            }
            target.extend(child);
        }
        if replaced == 0 {
            return Err(MergeFailure { child: leaf, parent });
        }
        target.sort_by(|a, b| a.address.cmp(&b.address));
        target.dedup_by(|a, b| a.address == b.address);
        content.insert(parent, target);
    }
    Ok(content.remove(&tree.root).expect("root content"))
}
