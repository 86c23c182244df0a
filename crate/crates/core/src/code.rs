//! Character-code and extended-code records.
//!
//! One [`CodeLine`] type serves every stage. The compiler fills the code
//! type, quaternion and the raw `$`/`#`/`out:` markers; the loader fills
//! scope addresses, executable flags and propagated pending flags; the
//! inference stage fills bindings.

use crate::loader::Address;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeType {
    VarDecl,
    FuncOp,
    DeriveFunc,
    ScopeStart,
    ScopeEnd,
    Expr,
    Jump,
    ExprEnd,
    Return,
    AccessMember,
    ClassOp,
}

impl CodeType {
    pub const ALL: [CodeType; 11] = [
        CodeType::VarDecl,
        CodeType::FuncOp,
        CodeType::DeriveFunc,
        CodeType::ScopeStart,
        CodeType::ScopeEnd,
        CodeType::Expr,
        CodeType::Jump,
        CodeType::ExprEnd,
        CodeType::Return,
        CodeType::AccessMember,
        CodeType::ClassOp,
    ];

    pub fn token(self) -> &'static str {
        match self {
            CodeType::VarDecl => "VAR_DECL",
            CodeType::FuncOp => "FUNC_OP",
            CodeType::DeriveFunc => "DERIVE_FUNC",
            CodeType::ScopeStart => "SCOPE_START",
            CodeType::ScopeEnd => "SCOPE_END",
            CodeType::Expr => "EXPR",
            CodeType::Jump => "JUMP",
            CodeType::ExprEnd => "EXPR_END",
            CodeType::Return => "RETURN",
            CodeType::AccessMember => "ACCESS_MEMBER",
            CodeType::ClassOp => "CLASS_OP",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.token() == s)
    }

    /// Lines that belong to a longest expression.
    pub fn is_expression_part(self) -> bool {
        matches!(self, CodeType::Expr | CodeType::AccessMember)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Empty,
    Number(f64),
    Text(String),
    Ident(String),
    /// Reference to the result of another line (a temporary).
    Addr(Address),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypeFlag {
    Number,
    Text,
    Identifier,
    Address,
    Empty,
}

impl TypeFlag {
    pub fn token(self) -> char {
        match self {
            TypeFlag::Number => 'N',
            TypeFlag::Text => 'S',
            TypeFlag::Identifier => 'I',
            TypeFlag::Address => 'A',
            TypeFlag::Empty => 'E',
        }
    }
}

impl Operand {
    pub fn type_flag(&self) -> TypeFlag {
        match self {
            Operand::Empty => TypeFlag::Empty,
            Operand::Number(_) => TypeFlag::Number,
            Operand::Text(_) => TypeFlag::Text,
            Operand::Ident(_) => TypeFlag::Identifier,
            Operand::Addr(_) => TypeFlag::Address,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Operand::Empty)
    }

    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Operand::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_addr(&self) -> Option<&Address> {
        match self {
            Operand::Addr(a) => Some(a),
            _ => None,
        }
    }

    /// Structural equality: numbers compare by bit pattern.
    pub fn same(&self, other: &Operand) -> bool {
        match (self, other) {
            (Operand::Number(a), Operand::Number(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Empty => write!(f, "_"),
            Operand::Number(n) => write!(f, "{n}"),
            Operand::Text(s) => write!(f, "{s:?}"),
            Operand::Ident(s) => write!(f, "{s}"),
            Operand::Addr(a) => write!(f, "@{a}"),
        }
    }
}

/// (operator, left, right, result)
#[derive(Clone, Debug, PartialEq)]
pub struct Quad {
    pub op: String,
    pub left: Operand,
    pub right: Operand,
    pub result: Operand,
}

impl Quad {
    pub fn new(op: impl Into<String>, left: Operand, right: Operand, result: Operand) -> Self {
        Quad { op: op.into(), left, right, result }
    }

    /// Operand by slot index: 1 left, 2 right, 3 result.
    pub fn slot(&self, i: usize) -> &Operand {
        match i {
            1 => &self.left,
            2 => &self.right,
            3 => &self.result,
            _ => panic!("operand slot {i}"),
        }
    }

    pub fn slot_mut(&mut self, i: usize) -> &mut Operand {
        match i {
            1 => &mut self.left,
            2 => &mut self.right,
            3 => &mut self.result,
            _ => panic!("operand slot {i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    True,
    False,
    Conditional,
}

impl Exec {
    pub fn token(self) -> char {
        match self {
            Exec::True => 'T',
            Exec::False => 'F',
            Exec::Conditional => 'C',
        }
    }
}

/// Three-state pending flag. `Unrelated` only appears in exp declarations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pending {
    True,
    False,
    Unrelated,
}

impl Pending {
    pub fn token(self) -> char {
        match self {
            Pending::True => 'T',
            Pending::False => 'F',
            Pending::Unrelated => 'U',
        }
    }

    pub fn from_token(c: &str) -> Option<Self> {
        match c {
            "T" => Some(Pending::True),
            "F" => Some(Pending::False),
            "U" => Some(Pending::Unrelated),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    None,
    Builtin,
    Function(Address),
}

impl Binding {
    pub fn is_bound(&self) -> bool {
        !matches!(self, Binding::None)
    }
}

/// Built-in operator symbols. Calls and `,` are never built-in.
pub const BUILTIN_OPS: &[&str] = &[
    "+", "-", "*", "/", "^", "u-", "==", ">", "<", ">=", "<=", "=", "-->",
];

pub fn is_builtin_op(op: &str) -> bool {
    BUILTIN_OPS.contains(&op)
}

pub const ARG_SEPARATOR: &str = ",";

/// True when `op` names a user function call.
pub fn is_call_op(op: &str) -> bool {
    op.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeLine {
    pub address: Address,
    pub scope: Address,
    pub exec: Exec,
    pub kind: CodeType,
    pub quad: Quad,
    /// Per slot (op, left, right, result).
    pub pending: [Pending; 4],
    /// Formal-parameter flag inside declaration scopes, local-lookup flag
    /// elsewhere (false means `out:`).
    pub formal_or_local: [bool; 4],
    pub bound: Binding,
    pub root: bool,
}

pub type CharacterCodeLine = CodeLine;

impl CodeLine {
    pub fn new(address: Address, kind: CodeType, quad: Quad) -> Self {
        CodeLine {
            address,
            scope: Address::empty(),
            exec: Exec::True,
            kind,
            quad,
            pending: [Pending::False; 4],
            formal_or_local: [true; 4],
            bound: Binding::None,
            root: false,
        }
    }

    pub fn type_flags(&self) -> [TypeFlag; 4] {
        let op = if self.quad.op.is_empty() { TypeFlag::Empty } else if is_call_op(&self.quad.op) {
            TypeFlag::Identifier
        } else {
            TypeFlag::Text
        };
        [
            op,
            self.quad.left.type_flag(),
            self.quad.right.type_flag(),
            self.quad.result.type_flag(),
        ]
    }

    /// Addresses of lines whose results this line consumes.
    pub fn operand_refs(&self) -> Vec<Address> {
        let mut out = Vec::new();
        for i in [1, 2] {
            if let Operand::Addr(a) = self.quad.slot(i) {
                out.push(a.clone());
            }
        }
        if self.quad.op == "=" {
            if let Operand::Addr(a) = &self.quad.result {
                out.push(a.clone());
            }
        }
        out
    }
}

impl fmt::Display for CodeLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({}, {}, {}, {})",
            self.address,
            self.kind.token(),
            self.quad.op,
            self.quad.left,
            self.quad.right,
            self.quad.result
        )
    }
}
