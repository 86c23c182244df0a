use cool::code::{CodeLine, CodeType, Operand, Pending};
use cool::frontend::{compile_sources, parse, precompile, FrontendError, PrecompileConfig, SourceUnit};
use std::path::Path;

fn compile(src: &str) -> Vec<CodeLine> {
    compile_sources(&[SourceUnit::new("t.cool", src)]).unwrap()
}

fn render(lines: &[CodeLine]) -> Vec<String> {
    lines.iter().map(|l| l.to_string()).collect()
}

pub fn corpus() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cool"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn variable_declaration_golden() {
    assert_eq!(render(&compile("new: a = 1;")), ["1 VAR_DECL (new, a, _, _)", "2 EXPR (=, 1, _, a)", "3 EXPR_END (;, _, _, _)"]);
}

#[test]
fn function_definition_golden() {
    let lines = compile("@add(a,b){return: a+b;}");
    assert_eq!(
        render(&lines),
        [
            "1 SCOPE_START ({, _, _, _)",
            "2 EXPR (,, a, b, @2)",
            "3 EXPR (add, @2, _, @3)",
            "4 EXPR_END (;, _, _, _)",
            "5 SCOPE_END (}, _, _, _)",
            "6 FUNC_OP (func, @1, @7, 0)",
            "7 SCOPE_START ({, _, _, _)",
            "8 EXPR (+, a, b, @8)",
            "9 EXPR_END (;, _, _, _)",
            "10 RETURN (return, @8, _, _)",
            "11 SCOPE_END (}, _, _, _)",
        ]
    );
    assert!(lines[1].formal_or_local[1] && lines[1].formal_or_local[2]);
}

#[test]
fn while_loop_golden() {
    assert_eq!(
        render(&compile("while(a > 0){ }")),
        [
            "1 EXPR (>, a, 0, @1)",
            "2 EXPR_END (;, _, _, _)",
            "3 JUMP (jump, @1, @5, _)",
            "4 JUMP (jump, 1, @8, _)",
            "5 SCOPE_START ({, _, _, _)",
            "6 SCOPE_END (}, _, _, _)",
            "7 JUMP (jump, 1, @1, _)",
        ]
    );
}

#[test]
fn branch_layout() {
    let lines = render(&compile("if(a == 0){ a = 1; }elseif(a > 0){ a = 2; }else{ a = 3; }"));
    let jumps: Vec<_> = lines.iter().filter(|l| l.contains("JUMP")).cloned().collect();
    assert_eq!(
        jumps,
        [
            "3 JUMP (jump, @1, @8, _)",
            "6 JUMP (jump, @4, @13, _)",
            "7 JUMP (jump, 1, @18, _)",
            "12 JUMP (jump, 1, @22, _)",
            "17 JUMP (jump, 1, @22, _)",
        ]
    );
    assert_eq!(lines.len(), 21);
}

#[test]
fn pending_and_out_markers() {
    let lines = compile("$x + 1 == y; a = out: a + 1;");
    assert_eq!(lines[0].pending[1], Pending::True);
    let add = lines.iter().find(|l| l.quad.op == "+" && l.quad.left.as_ident() == Some("a")).unwrap();
    assert!(!add.formal_or_local[1]);
}

#[test]
fn method_call_layout() {
    let lines = render(&compile("m.increase(10);"));
    assert_eq!(lines, ["1 ACCESS_MEMBER (., m, increase, @1)", "2 EXPR (increase, 10, @1, @2)", "3 EXPR_END (;, _, _, _)"]);
}

#[test]
fn derive_layout() {
    let lines = compile("@f(a,b){ return: a*b; } => @g(b,$);");
    let kinds: Vec<_> = lines.iter().map(|l| l.kind).collect();
    assert_eq!(kinds.last(), Some(&CodeType::DeriveFunc));
    let derive = lines.last().unwrap();
    assert_eq!(derive.quad.left, Operand::Addr(cool::loader::Address::single(1)));
}

#[test]
fn errors() {
    assert!(matches!(parse("new: a; new: a;"), Err(FrontendError::DuplicateDeclaration { .. })));
    assert!(matches!(parse("a = ;"), Err(FrontendError::Syntax { .. })));
    assert!(matches!(parse("#a + 1;"), Err(FrontendError::Syntax { .. })));
    assert!(matches!(parse("{ a = 1;"), Err(FrontendError::Syntax { .. })));
}

#[test]
fn precompile_call_example() {
    let out = precompile(&[SourceUnit::new("u", "add (a) and (b) to (c)")], &PrecompileConfig::default()).unwrap();
    assert_eq!(out, "add_ARG_and_ARG_to(a,b,c)");
}

#[test]
fn corpus_parses_with_balanced_scopes() {
    for (name, src) in corpus() {
        let lines = compile_sources(&[SourceUnit::new(name.clone(), src)]).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut depth = 0i32;
        for l in &lines {
            match l.kind {
                CodeType::ScopeStart => depth += 1,
                CodeType::ScopeEnd => depth -= 1,
                _ => {}
            }
            assert!(depth >= 0, "{name}");
        }
        assert_eq!(depth, 0, "{name}");
    }
}
