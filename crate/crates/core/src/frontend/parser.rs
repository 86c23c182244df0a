//! Recursive-descent parser emitting quaternion character code directly.
//!
//! Sub-expressions are emitted before their parents, so every longest
//! expression is a post-order list whose last line is the root.

use super::lexer::{tokenize, Token, TokenKind};
use super::FrontendError;
use crate::code::{CodeLine, CodeType, Operand, Pending, Quad, ARG_SEPARATOR};
use crate::loader::Address;
use std::collections::BTreeSet;

/// An operand together with the markers attached to its occurrence.
#[derive(Clone, Debug)]
struct Item {
    operand: Operand,
    pending: Pending,
    local: bool,
}

impl Item {
    fn plain(operand: Operand) -> Self {
        Item { operand, pending: Pending::False, local: true }
    }

    fn empty() -> Self {
        Item::plain(Operand::Empty)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Code,
    Decl,
    ExpDecl,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end_offset: usize,
    lines: Vec<CodeLine>,
    declared: Vec<BTreeSet<String>>,
    ctx: Ctx,
}

pub fn parse(precompiled: &str) -> Result<Vec<CodeLine>, FrontendError> {
    let tokens = tokenize(precompiled)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end_offset: precompiled.len(),
        lines: Vec::new(),
        declared: vec![BTreeSet::new()],
        ctx: Ctx::Code,
    };
    while !p.at_end() {
        p.statement()?;
    }
    Ok(p.lines)
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.pos + k)
    }

    fn is(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text && t.kind != TokenKind::StringLiteral)
    }

    fn is_at(&self, k: usize, text: &str) -> bool {
        self.peek_at(k).is_some_and(|t| t.text == text && t.kind != TokenKind::StringLiteral)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end_offset, |t| t.offset)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn expect(&mut self, text: &str) -> Result<(), FrontendError> {
        if self.is(text) {
            self.pos += 1;
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), |t| format!("`{}`", t.text));
            self.error(format!("expected `{text}`, found {found}"))
        }
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.is(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn identifier(&mut self) -> Result<String, FrontendError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let s = t.text.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn next_address(&self) -> Address {
        Address::single(self.lines.len() as u32 + 1)
    }

    fn emit(&mut self, kind: CodeType, quad: Quad) -> Address {
        let addr = self.next_address();
        self.lines.push(CodeLine::new(addr.clone(), kind, quad));
        addr
    }

    fn emit_simple(&mut self, kind: CodeType, op: &str) -> Address {
        self.emit(kind, Quad::new(op, Operand::Empty, Operand::Empty, Operand::Empty))
    }

    fn line_mut(&mut self, addr: &Address) -> &mut CodeLine {
        let idx = addr.digits()[0] as usize - 1;
        &mut self.lines[idx]
    }

    /// Emits an expression line whose result is its own temporary.
    fn emit_expr(&mut self, kind: CodeType, op: &str, left: Item, right: Item) -> Item {
        let addr = self.next_address();
        let mut line = CodeLine::new(
            addr.clone(),
            kind,
            Quad::new(op, left.operand, right.operand, Operand::Addr(addr.clone())),
        );
        line.pending[1] = left.pending;
        line.pending[2] = right.pending;
        line.formal_or_local[1] = left.local;
        line.formal_or_local[2] = right.local;
        self.lines.push(line);
        Item::plain(Operand::Addr(addr))
    }

    fn declare(&mut self, name: &str) -> Result<(), FrontendError> {
        let scope = self.declared.last_mut().expect("scope stack");
        if !scope.insert(name.to_string()) {
            return Err(FrontendError::DuplicateDeclaration { offset: self.offset(), identifier: name.to_string() });
        }
        Ok(())
    }

    fn scope_start(&mut self) -> Address {
        self.declared.push(BTreeSet::new());
        self.emit_simple(CodeType::ScopeStart, "{")
    }

    fn scope_end(&mut self) -> Address {
        self.declared.pop();
        self.emit_simple(CodeType::ScopeEnd, "}")
    }

    fn expr_end(&mut self) {
        self.emit_simple(CodeType::ExprEnd, ";");
    }

    /// Ends a longest expression if any line was emitted since `mark`.
    fn close_expression(&mut self, mark: usize) {
        if self.lines.len() > mark {
            self.expr_end();
        }
    }

    fn statement(&mut self) -> Result<(), FrontendError> {
        if self.eat(";") {
            return Ok(());
        }
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of input");
        };
        match tok.text.as_str() {
            "new" if tok.kind == TokenKind::Keyword => self.var_decl(),
            "system" if tok.kind == TokenKind::Keyword => self.class_def(),
            "exp" if tok.kind == TokenKind::Keyword => {
                self.pos += 1;
                self.expect(":")?;
                self.expect("@")?;
                self.function_def(true)
            }
            "@" => {
                self.pos += 1;
                self.function_def(false)
            }
            "while" if tok.kind == TokenKind::Keyword => self.while_loop(),
            "if" if tok.kind == TokenKind::Keyword => self.branch(),
            "return" if tok.kind == TokenKind::Keyword => {
                self.pos += 1;
                self.expect(":")?;
                let mark = self.lines.len();
                let value = self.expression()?;
                self.close_expression(mark);
                self.expect(";")?;
                let addr = self.emit(CodeType::Return, Quad::new("return", value.operand, Operand::Empty, Operand::Empty));
                let line = self.line_mut(&addr);
                line.pending[1] = value.pending;
                line.formal_or_local[1] = value.local;
                Ok(())
            }
            "{" => {
                self.pos += 1;
                self.scope_start();
                self.block_body()?;
                self.scope_end();
                self.eat(";");
                Ok(())
            }
            _ if tok.kind == TokenKind::Identifier && self.is_at(1, ":") && !self.is_at(2, "$") => {
                self.instance_decl()
            }
            _ => {
                let mark = self.lines.len();
                self.expression()?;
                self.close_expression(mark);
                self.expect(";")
            }
        }
    }

    /// Statements up to and including the closing `}`.
    fn block_body(&mut self) -> Result<(), FrontendError> {
        loop {
            if self.eat("}") {
                return Ok(());
            }
            if self.at_end() {
                return self.error("expected `}`");
            }
            self.statement()?;
        }
    }

    fn var_decl(&mut self) -> Result<(), FrontendError> {
        self.pos += 1;
        self.expect(":")?;
        loop {
            let name = self.identifier()?;
            self.declare(&name)?;
            self.emit(CodeType::VarDecl, Quad::new("new", Operand::Ident(name.clone()), Operand::Empty, Operand::Empty));
            if self.eat("=") {
                let mark = self.lines.len();
                let value = self.expression()?;
                let addr = self.next_address();
                let mut line = CodeLine::new(
                    addr,
                    CodeType::Expr,
                    Quad::new("=", value.operand, Operand::Empty, Operand::Ident(name)),
                );
                line.pending[1] = value.pending;
                line.formal_or_local[1] = value.local;
                self.lines.push(line);
                self.close_expression(mark);
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")
    }

    fn instance_decl(&mut self) -> Result<(), FrontendError> {
        let class = self.identifier()?;
        self.expect(":")?;
        let name = self.identifier()?;
        self.declare(&name)?;
        self.emit(CodeType::VarDecl, Quad::new("new", Operand::Ident(name), Operand::Ident(class), Operand::Empty));
        self.expect(";")
    }

    fn class_def(&mut self) -> Result<(), FrontendError> {
        self.pos += 1;
        self.expect(":")?;
        let name = self.identifier()?;
        self.declare(&name)?;
        let mut parents = Vec::new();
        if self.eat("<<") {
            loop {
                parents.push(self.identifier()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        let class_line = self.emit(CodeType::ClassOp, Quad::new("class", Operand::Ident(name.clone()), Operand::Empty, Operand::Empty));
        for parent in parents {
            self.emit(CodeType::ClassOp, Quad::new("inherit", Operand::Ident(name.clone()), Operand::Ident(parent), Operand::Empty));
        }
        self.expect("{")?;
        let ss = self.scope_start();
        self.line_mut(&class_line).quad.result = Operand::Addr(ss);
        self.block_body()?;
        self.scope_end();
        self.eat(";");
        Ok(())
    }

    fn weight(&mut self) -> Result<f64, FrontendError> {
        if !(self.is("(") && (self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Number) || self.is_at(1, "-"))) {
            return Ok(0.0);
        }
        self.pos += 1;
        let negative = self.eat("-");
        let tok = self.peek().cloned();
        let value = match tok {
            Some(t) if t.kind == TokenKind::Number => {
                self.pos += 1;
                t.text.parse::<f64>().expect("lexer validated number")
            }
            _ => return self.error("expected weight"),
        };
        self.expect(")")?;
        Ok(if negative { -value } else { value })
    }

    /// Declaration scope: `{expr[;]}` or a bare call form.
    fn declaration(&mut self, exp: bool) -> Result<Address, FrontendError> {
        let saved = self.ctx;
        self.ctx = if exp { Ctx::ExpDecl } else { Ctx::Decl };
        let ss = self.scope_start();
        let mark = self.lines.len();
        if self.eat("{") {
            self.expression()?;
            self.eat(";");
            self.expect("}")?;
        } else {
            self.expression()?;
        }
        if self.lines.len() == mark {
            return self.error("declaration must be an expression with at least one operator");
        }
        self.expr_end();
        self.scope_end();
        self.ctx = saved;
        Ok(ss)
    }

    fn function_def(&mut self, exp: bool) -> Result<(), FrontendError> {
        let weight = self.weight()?;
        let decl = self.declaration(exp)?;
        let func_op = self.emit(
            CodeType::FuncOp,
            Quad::new(if exp { "exp" } else { "func" }, Operand::Addr(decl.clone()), Operand::Empty, Operand::Number(weight)),
        );
        self.expect("{")?;
        let body = self.scope_start();
        self.line_mut(&func_op).quad.right = Operand::Addr(body);
        self.block_body()?;
        self.scope_end();
        if self.eat("=>") {
            if exp {
                return self.error("functions returning expressions cannot be inverted");
            }
            self.expect("@")?;
            let rweight = self.weight()?;
            let rdecl = self.declaration(false)?;
            self.emit(
                CodeType::FuncOp,
                Quad::new("func", Operand::Addr(rdecl.clone()), Operand::Empty, Operand::Number(rweight)),
            );
            self.emit(CodeType::DeriveFunc, Quad::new("=>", Operand::Addr(decl), Operand::Addr(rdecl), Operand::Empty));
            self.expect(";")?;
        } else {
            self.eat(";");
        }
        Ok(())
    }

    fn jump(&mut self, cond: Item, target: Option<Address>) -> Address {
        let addr = self.emit(
            CodeType::Jump,
            Quad::new("jump", cond.operand, target.map_or(Operand::Empty, Operand::Addr), Operand::Empty),
        );
        let line = self.line_mut(&addr);
        line.pending[1] = cond.pending;
        line.formal_or_local[1] = cond.local;
        addr
    }

    fn patch_jump(&mut self, jump: &Address, target: Address) {
        self.line_mut(jump).quad.right = Operand::Addr(target);
    }

    fn condition(&mut self) -> Result<Item, FrontendError> {
        self.expect("(")?;
        let mark = self.lines.len();
        let cond = self.expression()?;
        self.close_expression(mark);
        self.expect(")")?;
        Ok(cond)
    }

    fn scoped_block(&mut self) -> Result<Address, FrontendError> {
        self.expect("{")?;
        let ss = self.scope_start();
        self.block_body()?;
        self.scope_end();
        Ok(ss)
    }

    // head: cond; JUMP cond->body; JUMP 1->exit; body; JUMP 1->head
    fn while_loop(&mut self) -> Result<(), FrontendError> {
        self.pos += 1;
        let head = self.next_address();
        let cond = self.condition()?;
        let enter = self.jump(cond, None);
        let exit = self.jump(Item::plain(Operand::Number(1.0)), None);
        let body = self.scoped_block()?;
        self.patch_jump(&enter, body);
        self.jump(Item::plain(Operand::Number(1.0)), Some(head));
        let after = self.next_address();
        self.patch_jump(&exit, after);
        Ok(())
    }

    fn branch(&mut self) -> Result<(), FrontendError> {
        self.pos += 1;
        let mut enters = vec![{
            let c = self.condition()?;
            self.jump(c, None)
        }];
        let mut bodies_src = Vec::new();
        // collect tokens positions of blocks: parse conditions first requires
        // lookahead, so bodies are parsed in a second phase below
        bodies_src.push(self.skip_block()?);
        while self.is("elseif") {
            self.pos += 1;
            let c = self.condition()?;
            enters.push(self.jump(c, None));
            bodies_src.push(self.skip_block()?);
        }
        let else_src = if self.eat("else") { Some(self.skip_block()?) } else { None };
        let fallthrough = self.jump(Item::plain(Operand::Number(1.0)), None);
        let resume = self.pos;
        let mut to_end = Vec::new();
        for (i, start) in bodies_src.iter().enumerate() {
            self.pos = *start;
            let ss = self.scoped_block()?;
            self.patch_jump(&enters[i], ss);
            to_end.push(self.jump(Item::plain(Operand::Number(1.0)), None));
        }
        if let Some(start) = else_src {
            self.pos = start;
            let ss = self.scoped_block()?;
            self.patch_jump(&fallthrough, ss);
        } else {
            to_end.push(fallthrough);
        }
        self.pos = resume;
        let end = self.next_address();
        for j in to_end {
            self.patch_jump(&j, end.clone());
        }
        Ok(())
    }

    /// Skips a balanced `{...}` returning its start token index.
    fn skip_block(&mut self) -> Result<usize, FrontendError> {
        let start = self.pos;
        self.expect("{")?;
        let mut depth = 1;
        while depth > 0 {
            let Some(t) = self.peek() else {
                return self.error("expected `}`");
            };
            if t.kind == TokenKind::Punctuation {
                if t.text == "{" {
                    depth += 1;
                } else if t.text == "}" {
                    depth -= 1;
                }
            }
            self.pos += 1;
        }
        Ok(start)
    }

    // ---- expressions ----

    fn expression(&mut self) -> Result<Item, FrontendError> {
        let left = self.assignment()?;
        if self.eat("-->") {
            let right = self.assignment()?;
            return Ok(self.emit_expr(CodeType::Expr, "-->", left, right));
        }
        Ok(left)
    }

    fn assignment(&mut self) -> Result<Item, FrontendError> {
        let target = self.comparison()?;
        if self.is("=") {
            let at = self.offset();
            self.pos += 1;
            let value = self.assignment()?;
            let lvalue = match &target.operand {
                Operand::Ident(_) => true,
                Operand::Addr(a) => self.line_mut(a).kind == CodeType::AccessMember,
                _ => false,
            };
            if !lvalue {
                return Err(FrontendError::Syntax { offset: at, message: "left side of `=` is not assignable".into() });
            }
            let addr = self.next_address();
            let mut line = CodeLine::new(addr.clone(), CodeType::Expr, Quad::new("=", value.operand, Operand::Empty, target.operand));
            line.pending[1] = value.pending;
            line.formal_or_local[1] = value.local;
            line.pending[3] = target.pending;
            line.formal_or_local[3] = target.local;
            self.lines.push(line);
            return Ok(Item::plain(Operand::Addr(addr)));
        }
        Ok(target)
    }

    fn comparison(&mut self) -> Result<Item, FrontendError> {
        let mut left = self.additive()?;
        loop {
            let op = ["==", ">=", "<=", ">", "<"].into_iter().find(|op| self.is(op));
            let Some(op) = op else { return Ok(left) };
            self.pos += 1;
            let right = self.additive()?;
            left = self.emit_expr(CodeType::Expr, op, left, right);
        }
    }

    fn additive(&mut self) -> Result<Item, FrontendError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.is("+") {
                "+"
            } else if self.is("-") {
                "-"
            } else {
                return Ok(left);
            };
            self.pos += 1;
            let right = self.multiplicative()?;
            left = self.emit_expr(CodeType::Expr, op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Item, FrontendError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.is("*") {
                "*"
            } else if self.is("/") {
                "/"
            } else {
                return Ok(left);
            };
            self.pos += 1;
            let right = self.unary()?;
            left = self.emit_expr(CodeType::Expr, op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Item, FrontendError> {
        if self.eat("-") {
            let inner = self.unary()?;
            return Ok(self.emit_expr(CodeType::Expr, "u-", inner, Item::empty()));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Item, FrontendError> {
        let base = self.postfix()?;
        if self.eat("^") {
            let exponent = self.unary()?;
            return Ok(self.emit_expr(CodeType::Expr, "^", base, exponent));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Item, FrontendError> {
        let mut item = self.primary()?;
        while self.is(".") {
            self.pos += 1;
            let member = self.identifier()?;
            let access = self.emit_expr(CodeType::AccessMember, ".", item, Item::plain(Operand::Ident(member.clone())));
            if self.is("(") {
                let args = self.arguments()?;
                item = self.emit_expr(CodeType::Expr, &member, args, access);
            } else {
                item = access;
            }
        }
        Ok(item)
    }

    /// `( a, b, c )` folded into a left-nested chain of `,` lines.
    fn arguments(&mut self) -> Result<Item, FrontendError> {
        self.expect("(")?;
        if self.eat(")") {
            return Ok(Item::empty());
        }
        let mut acc = self.expression()?;
        while self.eat(",") {
            let next = self.expression()?;
            acc = self.emit_expr(CodeType::Expr, ARG_SEPARATOR, acc, next);
        }
        self.expect(")")?;
        Ok(acc)
    }

    fn primary(&mut self) -> Result<Item, FrontendError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("expected expression");
        };
        match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Item::plain(Operand::Number(tok.text.parse().expect("lexer validated number"))))
            }
            TokenKind::StringLiteral => {
                self.pos += 1;
                Ok(Item::plain(Operand::Text(tok.text)))
            }
            TokenKind::Identifier => {
                self.pos += 1;
                if self.is("(") {
                    let args = self.arguments()?;
                    return Ok(self.emit_expr(CodeType::Expr, &tok.text, args, Item::empty()));
                }
                Ok(Item::plain(Operand::Ident(tok.text)))
            }
            TokenKind::Keyword if tok.text == "out" => {
                self.pos += 1;
                self.expect(":")?;
                let name = self.identifier()?;
                Ok(Item { operand: Operand::Ident(name), pending: Pending::False, local: false })
            }
            _ if tok.text == "(" => {
                self.pos += 1;
                let inner = self.expression()?;
                self.expect(")")?;
                Ok(inner)
            }
            _ if tok.text == "$" => {
                self.pos += 1;
                if self.is(")") || self.is(",") {
                    if self.ctx == Ctx::Code {
                        return self.error("anonymous `$` parameter outside a declaration");
                    }
                    return Ok(Item { operand: Operand::Ident("$".into()), pending: Pending::True, local: true });
                }
                let name = self.identifier()?;
                Ok(Item { operand: Operand::Ident(name), pending: Pending::True, local: true })
            }
            _ if tok.text == "#" => {
                if self.ctx != Ctx::ExpDecl {
                    return self.error("`#` is only allowed in declarations of functions returning expressions");
                }
                self.pos += 1;
                let name = self.identifier()?;
                Ok(Item { operand: Operand::Ident(name), pending: Pending::Unrelated, local: true })
            }
            _ => self.error(format!("unexpected `{}`", tok.text)),
        }
    }
}
