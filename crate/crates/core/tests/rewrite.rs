mod common;

use common::suites::*;
use cool::code::Operand;
use cool::inference::rewrite::{expand_rings, is_tree, repair_detached, AddressSource};
use cool::loader::Address;

#[test]
fn commutativity_swaps_operands() {
    let (t, seg) = program("x + y --> 0;");
    let out = rewrites(&t, &seg, &rules(&t)[0]);
    assert_eq!(out.len(), 1);
    assert_eq!(root_infix(&out[0]), "(y + x) --> 0");
}

#[test]
fn factoring_drops_the_orphan_branch() {
    let (t, seg) = program("(x + 1) * y + (x + 1) * z --> 0;");
    let out = rewrites(&t, &seg, &rules(&t)[3]);
    assert_eq!(out.len(), 1);
    assert_eq!(root_infix(&out[0]), "((x + 1) * (y + z)) --> 0");
    assert!(is_tree(&out[0]));
}

#[test]
fn distribution_expands_the_shared_branch() {
    let (t, seg) = program("(y + z) * (x + 1) --> 0;");
    let out = rewrites(&t, &seg, &rules(&t)[4]);
    assert_eq!(out.len(), 1);
    assert_eq!(root_infix(&out[0]), "(((y + z) * x) + ((y + z) * 1)) --> 0");
    assert!(is_tree(&out[0]));
}

#[test]
fn transposition_replaces_the_root() {
    let (t, seg) = program("$x + y == 4;");
    let out = rewrites(&t, &seg, &rules(&t)[2]);
    assert_eq!(out.len(), 1);
    assert_eq!(root_infix(&out[0]), "((x + y) - 4) == 0");
}

#[test]
fn repair_detached_removes_exactly_the_orphans() {
    assert_eq!(orphan_suite(50, 7), 0);
}

#[test]
fn expand_rings_splits_a_triple_reference() {
    let (t, mut seg) = program("(x + 1) * (x + 1) * (x + 1) --> 0;");
    let inner: Vec<Address> = seg.lines.iter().filter(|l| l.quad.op == "+").map(|l| l.address.clone()).collect();
    let keep = inner[0].clone();
    for l in seg.lines.clone() {
        let mut l = l;
        for i in 1..3 {
            if let Operand::Addr(a) = l.quad.slot(i) {
                if inner.contains(a) {
                    *l.quad.slot_mut(i) = Operand::Addr(keep.clone());
                }
            }
        }
        seg.insert(l);
    }
    let seg = repair_detached(&seg);
    assert!(!is_tree(&seg));
    let env = |n: &str| (n == "x").then_some(2.0);
    let before = value(&seg, &env);
    let mut out = seg.clone();
    expand_rings(&mut out, &AddressSource::for_tables(&t));
    assert!(is_tree(&out));
    assert_eq!(out.lines.iter().filter(|l| l.quad.op == "+").count(), 3);
    assert_eq!(value(&out, &env), before);
}

#[test]
fn rewrites_preserve_values() {
    let (checked, failures) = soundness_suite(500, 11);
    assert!(checked > 500, "only {checked} rewrites exercised");
    assert_eq!(failures, 0);
}
