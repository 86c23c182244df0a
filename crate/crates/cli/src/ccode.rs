//! Text format for code, scope, function and class tables.

use cool::code::{Binding, CodeLine, CodeType, Exec, Operand, Pending, Quad, TypeFlag};
use cool::loader::{Address, ClassInfo, FunctionInfo, ScopeInfo, ScopeKind, Tables};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use std::fmt::Write as _;
use std::str::FromStr;

pub const HEADER: &str = "COOLCC 1";
const SEPARATOR: &str = "---";
const ESCAPED: &AsciiSet = &CONTROLS.add(b'%');

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Compiled,
    Preexec,
}

impl Stage {
    fn token(self) -> &'static str {
        match self {
            Stage::Compiled => "compiled",
            Stage::Preexec => "preexec",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed .ccode at line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn esc(s: &str) -> String {
    utf8_percent_encode(s, ESCAPED).to_string()
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Empty => String::new(),
        Operand::Number(n) => n.to_string(),
        Operand::Text(s) | Operand::Ident(s) => esc(s),
        Operand::Addr(a) => a.to_string(),
    }
}

fn flag(b: bool) -> char {
    if b {
        'T'
    } else {
        'F'
    }
}

fn join_addrs(v: &[Address]) -> String {
    if v.is_empty() {
        "-".into()
    } else {
        v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub fn serialize(tables: &Tables, stage: Stage) -> String {
    let mut out = format!("{HEADER}\nSTAGE {}\n", stage.token());
    for l in tables.code.values() {
        let tf: Vec<String> = l.type_flags().iter().map(|t| t.token().to_string()).collect();
        let pf: Vec<String> = l.pending.iter().map(|p| p.token().to_string()).collect();
        let ff: Vec<String> = l.formal_or_local.iter().map(|b| flag(*b).to_string()).collect();
        let bound = match &l.bound {
            Binding::None => "-".to_string(),
            Binding::Builtin => "*".to_string(),
            Binding::Function(a) => a.to_string(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.address,
            l.scope,
            l.exec.token(),
            l.kind.token(),
            esc(&l.quad.op),
            operand(&l.quad.left),
            operand(&l.quad.right),
            operand(&l.quad.result),
            tf.join(","),
            pf.join(","),
            ff.join(","),
            bound,
            u8::from(l.root)
        );
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    for s in tables.scopes.values() {
        let _ = writeln!(out, "SCOPE\t{}\t{}\t{}\t{}\t{}", s.start, s.kind.token(), s.end, s.param_query, s.parent);
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    for f in tables.functions.values() {
        let _ = writeln!(
            out,
            "FUNC\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            f.decl_scope,
            f.decl_root,
            f.body_scope,
            join_addrs(&f.returns),
            u8::from(f.returns_expression),
            u8::from(f.is_reverse),
            f.weight,
            f.func_op
        );
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    for c in tables.classes.values() {
        let _ = writeln!(out, "CLASS\t{}\t{}\t{}", c.scope, esc(&c.name), join_addrs(&c.parents));
    }
    out
}

struct Reader {
    line: usize,
}

impl Reader {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T, FormatError> {
        Err(FormatError { line: self.line, message: message.into() })
    }

    fn addr(&self, s: &str) -> Result<Address, FormatError> {
        Address::from_str(s).or_else(|_| self.fail(format!("bad address `{s}`")))
    }

    fn addrs(&self, s: &str) -> Result<Vec<Address>, FormatError> {
        if s == "-" {
            return Ok(Vec::new());
        }
        s.split(',').map(|a| self.addr(a)).collect()
    }

    fn text(&self, s: &str) -> Result<String, FormatError> {
        percent_decode_str(s)
            .decode_utf8()
            .map(|c| c.into_owned())
            .or_else(|_| self.fail("bad escape"))
    }

    fn bit(&self, s: &str) -> Result<bool, FormatError> {
        match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => self.fail(format!("bad 0/1 flag `{s}`")),
        }
    }

    fn list<'a>(&self, s: &'a str) -> Result<[&'a str; 4], FormatError> {
        let v: Vec<&str> = s.split(',').collect();
        match <[&str; 4]>::try_from(v) {
            Ok(a) => Ok(a),
            Err(_) => self.fail(format!("expected four flags in `{s}`")),
        }
    }

    fn operand(&self, flag: &str, s: &str) -> Result<Operand, FormatError> {
        Ok(match flag {
            "E" if s.is_empty() => Operand::Empty,
            "N" => Operand::Number(s.parse().or_else(|_| self.fail(format!("bad number `{s}`")))?),
            "S" => Operand::Text(self.text(s)?),
            "I" => Operand::Ident(self.text(s)?),
            "A" => Operand::Addr(self.addr(s)?),
            _ => return self.fail(format!("bad type flag `{flag}` for `{s}`")),
        })
    }

    fn code_line(&self, f: &[&str]) -> Result<CodeLine, FormatError> {
        if f.len() != 13 {
            return self.fail(format!("expected 13 fields, found {}", f.len()));
        }
        let exec = match f[2] {
            "T" => Exec::True,
            "F" => Exec::False,
            "C" => Exec::Conditional,
            x => return self.fail(format!("bad exec flag `{x}`")),
        };
        let kind = CodeType::from_token(f[3]).map_or_else(|| self.fail(format!("bad type `{}`", f[3])), Ok)?;
        let tf = self.list(f[8])?;
        if !matches!(tf[0], "E" | "I" | "S") {
            return self.fail(format!("bad operator flag `{}`", tf[0]));
        }
        let quad = Quad::new(
            self.text(f[4])?,
            self.operand(tf[1], f[5])?,
            self.operand(tf[2], f[6])?,
            self.operand(tf[3], f[7])?,
        );
        let mut line = CodeLine::new(self.addr(f[0])?, kind, quad);
        line.scope = self.addr(f[1])?;
        line.exec = exec;
        for (i, p) in self.list(f[9])?.iter().enumerate() {
            line.pending[i] = Pending::from_token(p).map_or_else(|| self.fail(format!("bad pending flag `{p}`")), Ok)?;
        }
        for (i, p) in self.list(f[10])?.iter().enumerate() {
            line.formal_or_local[i] = match *p {
                "T" => true,
                "F" => false,
                _ => return self.fail(format!("bad formal flag `{p}`")),
            };
        }
        line.bound = match f[11] {
            "-" => Binding::None,
            "*" => Binding::Builtin,
            a => Binding::Function(self.addr(a)?),
        };
        line.root = self.bit(f[12])?;
        let flags: Vec<TypeFlag> = line.type_flags().to_vec();
        if flags.iter().map(|t| t.token().to_string()).collect::<Vec<_>>() != tf {
            return self.fail("type flags disagree with operands");
        }
        Ok(line)
    }
}

pub fn deserialize(text: &str) -> Result<(Tables, Stage), FormatError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let mut r = Reader { line: 1 };
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return r.fail("missing header"),
    }
    r.line = 2;
    let stage = match lines.next() {
        Some((_, "STAGE compiled")) => Stage::Compiled,
        Some((_, "STAGE preexec")) => Stage::Preexec,
        _ => return r.fail("missing stage"),
    };
    let mut tables = Tables::default();
    let mut section = 0;
    for (n, l) in lines {
        r.line = n;
        if l.is_empty() {
            continue;
        }
        if l == SEPARATOR {
            section += 1;
            if section > 3 {
                return r.fail("too many sections");
            }
            continue;
        }
        let f: Vec<&str> = l.split('\t').collect();
        match (section, f[0]) {
            (0, _) => {
                let line = r.code_line(&f)?;
                tables.code.insert(line.address.clone(), line);
            }
            (1, "SCOPE") if f.len() == 6 => {
                let kind = ScopeKind::from_token(f[2]).map_or_else(|| r.fail(format!("bad scope kind `{}`", f[2])), Ok)?;
                let s = ScopeInfo {
                    kind,
                    start: r.addr(f[1])?,
                    end: r.addr(f[3])?,
                    param_query: r.addr(f[4])?,
                    parent: r.addr(f[5])?,
                };
                tables.scopes.insert(s.start.clone(), s);
            }
            (2, "FUNC") if f.len() == 9 => {
                let func = FunctionInfo {
                    decl_scope: r.addr(f[1])?,
                    decl_root: r.addr(f[2])?,
                    body_scope: r.addr(f[3])?,
                    returns: r.addrs(f[4])?,
                    returns_expression: r.bit(f[5])?,
                    is_reverse: r.bit(f[6])?,
                    weight: f[7].parse().or_else(|_| r.fail(format!("bad weight `{}`", f[7])))?,
                    func_op: r.addr(f[8])?,
                };
                tables.functions.insert(func.decl_scope.clone(), func);
            }
            (3, "CLASS") if f.len() == 4 => {
                let c = ClassInfo { scope: r.addr(f[1])?, name: r.text(f[2])?, parents: r.addrs(f[3])? };
                tables.classes.insert(c.scope.clone(), c);
            }
            _ => return r.fail(format!("unexpected record `{}`", f[0])),
        }
    }
    if section != 3 {
        return r.fail("missing table sections");
    }
    Ok((tables, stage))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_has_only_header_and_separators() {
        let text = serialize(&Tables::default(), Stage::Compiled);
        assert_eq!(text, "COOLCC 1\nSTAGE compiled\n---\n---\n---\n");
        assert_eq!(deserialize(&text).unwrap(), (Tables::default(), Stage::Compiled));
    }

    #[test]
    fn text_operands_are_escaped() {
        let mut t = Tables::default();
        let mut l = CodeLine::new(
            Address::single(1),
            CodeType::Expr,
            Quad::new("-->", Operand::Text("a\tb,%c\n".into()), Operand::Number(0.0), Operand::Addr(Address::single(1))),
        );
        l.bound = Binding::Builtin;
        l.root = true;
        t.code.insert(l.address.clone(), l);
        let text = serialize(&t, Stage::Preexec);
        assert_eq!(text.lines().nth(2).unwrap().matches('\t').count(), 12);
        assert_eq!(deserialize(&text).unwrap().0, t);
    }

    #[test]
    fn corrupted_flag_is_rejected() {
        let (t, _) = (cool::pipeline::compile_str("t", "new: x = 1;\n").unwrap(), ());
        let text = serialize(&t, Stage::Compiled).replacen("\tT\t", "\tX\t", 1);
        let err = deserialize(&text).unwrap_err();
        assert_eq!(err.line, 3);
    }
}
