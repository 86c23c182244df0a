mod common;

use common::suites::*;
use common::*;

fn near(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

#[test]
fn code15_back_solves_x() {
    let z = -1.0 + 98f64.sqrt();
    let want = 50.0 - 2.0 - z - 3.0;
    let got = run_number(&corpus("code15"));
    assert!(near(&got, &[want], 1e-9), "{got:?}");
    assert!(near(&got, &[36.100_505_063_388_33], 1e-9));
}

#[test]
fn code20_constructs_and_increases() {
    let x = -2.0 + 104f64.sqrt();
    let got = run_number(&corpus("code20"));
    assert!(near(&got, &[x, x + 10.0], 1e-9), "{got:?}");
    assert!(near(&got[1..], &[18.19803902718557], 1e-9));
}

#[test]
fn code6_finds_the_double_root() {
    assert!(near(&run_number(&corpus("code06")), &[1.0], 1e-12));
}

#[test]
fn documented_outputs() {
    assert_eq!(run(&corpus("code01")), ["3"]);
    assert_eq!(run(&corpus("code03")), ["1"]);
    assert_eq!(run(&corpus("code10")), ["2"]);
    assert_eq!(run(&corpus("code21")), ["7", "6", "7"]);
}

#[test]
fn table1_call_order() {
    let (order, outputs) = table1_order();
    assert_eq!(order, [2, 3, 5, 4, 1]);
    assert_eq!(outputs, ["2", "4"]);
}

#[test]
fn records_balance_without_instances() {
    for name in ["code01", "code03", "code06", "code08", "code10", "code15", "code21"] {
        let (_, r) = execute(&corpus(name));
        let r = r.unwrap();
        assert_eq!(r.records_created, r.records_destroyed, "{name}");
    }
}

#[test]
fn member_variable_lives_in_the_instance() {
    let (_, r) = execute(&corpus("code20"));
    let r = r.unwrap();
    assert!(r.records_created > r.records_destroyed);
}

#[test]
fn runtime_errors() {
    let (_, r) = execute("new: x = 0;\nx = 1 / x;\n");
    assert!(r.unwrap_err().message.contains("division"));
    let (_, r) = execute("new: x = -8;\nx = x ^ 0.5;\nx --> 0;\n");
    assert!(r.is_err());
}

#[test]
fn deep_recursion_is_bounded() {
    let src = "@{loop(a)}{\n  return: loop(a);\n}\nnew: r = 0;\nr = loop(1);\n";
    let (_, r) = execute(src);
    assert!(r.unwrap_err().message.contains("depth"));
}

#[test]
fn outputs_are_deterministic() {
    for name in ["code15", "code20", "code21"] {
        assert_eq!(run(&corpus(name)), run(&corpus(name)));
    }
}
