//! Recursive-descent parser. Parsing goes through a small named surface
//! tree; a resolution pass then closes free uppercase variables and turns
//! names into de Bruijn indices.

use std::sync::Arc;

use super::formula::{AgentDecl, Formula};
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::builtins::{ADD, MUL, SUB};
use crate::term::Term;

#[derive(Debug, Clone)]
enum STerm {
    Name(String),
    Int(i64),
    App(Box<STerm>, Box<STerm>),
    Lam(String, Box<STerm>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bin {
    Impl,
    PAnd,
    POr,
    CAnd,
    COr,
}

#[derive(Debug, Clone)]
enum SForm {
    Atom(STerm),
    Bin(Bin, Box<SForm>, Box<SForm>),
    All(String, Box<SForm>),
    Ex(String, Box<SForm>),
    Bang(Box<SForm>),
}

pub fn is_var_name(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

fn is_keyword(name: &str) -> bool {
    matches!(name, "forall" | "exists")
}

fn cmp_pred(op: &str) -> &'static str {
    match op {
        ">=" => "geq",
        ">" => "gt",
        "<=" | "=<" => "leq",
        "<" => "lt",
        "=" => "eq",
        _ => "neq",
    }
}

fn op_app(op: &str, l: STerm, r: STerm) -> STerm {
    STerm::App(
        Box::new(STerm::App(Box::new(STerm::Name(op.to_string())), Box::new(l))),
        Box::new(r),
    )
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_token(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek_token();
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        ParseError {
            line: t.line,
            col: t.col,
            message: format!("expected {}, found {}", expected.join(" or "), t.tok.describe()),
            expected,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    // ---- formulas ----

    fn formula(&mut self) -> Result<SForm, ParseError> {
        let lhs = self.choice()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(SForm::Bin(Bin::Impl, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn choice(&mut self) -> Result<SForm, ParseError> {
        let mut lhs = self.por()?;
        let mut kind: Option<Bin> = None;
        loop {
            let op = match self.peek() {
                Tok::Plus => Bin::COr,
                Tok::Amp => Bin::CAnd,
                _ => return Ok(lhs),
            };
            if kind.is_some_and(|k| k != op) {
                let t = self.peek_token();
                return Err(ParseError {
                    line: t.line,
                    col: t.col,
                    message: "`+` and `&` cannot be mixed without parentheses".into(),
                    expected: vec!["`(`".into()],
                });
            }
            kind = Some(op);
            self.bump();
            let rhs = self.por()?;
            lhs = SForm::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn por(&mut self) -> Result<SForm, ParseError> {
        let mut lhs = self.pand()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.pand()?;
            lhs = SForm::Bin(Bin::POr, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pand(&mut self) -> Result<SForm, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.unary()?;
            lhs = SForm::Bin(Bin::PAnd, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SForm, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(SForm::Bang(Box::new(self.unary()?)))
            }
            Tok::Ident(kw) if is_keyword(&kw) => {
                self.bump();
                let x = self.ident("a binder name")?;
                self.expect(Tok::Dot, "`.`")?;
                let body = Box::new(self.formula()?);
                Ok(if kw == "forall" {
                    SForm::All(x, body)
                } else {
                    SForm::Ex(x, body)
                })
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) | Tok::Int(_) | Tok::Minus => self.atom(),
            _ => Err(self.error(&["a formula"])),
        }
    }

    fn atom(&mut self) -> Result<SForm, ParseError> {
        let head = match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => STerm::Int(-n),
                    _ => {
                        self.pos -= 1;
                        return Err(self.error(&["an integer"]));
                    }
                }
            }
            _ => self.simple()?,
        };
        let lhs = self.juxtapose(head)?;
        if let Tok::Cmp(op) = self.peek().clone() {
            self.bump();
            let rhs = self.term()?;
            let pred = cmp_pred(op);
            return Ok(SForm::Atom(op_app(pred, lhs, rhs)));
        }
        Ok(SForm::Atom(lhs))
    }

    // ---- terms ----

    fn term(&mut self) -> Result<STerm, ParseError> {
        if *self.peek() == Tok::Backslash {
            self.bump();
            let x = self.ident("a binder name")?;
            self.expect(Tok::Dot, "`.`")?;
            let body = self.term()?;
            return Ok(STerm::Lam(x, Box::new(body)));
        }
        self.additive()
    }

    fn additive(&mut self) -> Result<STerm, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ADD,
                Tok::Minus => SUB,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = op_app(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<STerm, ParseError> {
        let mut lhs = self.negation()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.negation()?;
            lhs = op_app(MUL, lhs, rhs);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> Result<STerm, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return match self.bump() {
                Tok::Int(n) => Ok(STerm::Int(-n)),
                _ => {
                    self.pos -= 1;
                    Err(self.error(&["an integer"]))
                }
            };
        }
        let head = self.simple()?;
        self.juxtapose(head)
    }

    fn starts_simple(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s),
            Tok::Int(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn juxtapose(&mut self, head: STerm) -> Result<STerm, ParseError> {
        let mut t = head;
        while self.starts_simple() {
            let arg = self.simple()?;
            t = STerm::App(Box::new(t), Box::new(arg));
        }
        Ok(t)
    }

    fn simple(&mut self) -> Result<STerm, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_keyword(&name) => {
                self.bump();
                let mut t = STerm::Name(name);
                let call = *self.peek() == Tok::LParen && !self.peek_token().spaced;
                if call {
                    self.bump();
                    loop {
                        let arg = self.term()?;
                        t = STerm::App(Box::new(t), Box::new(arg));
                        match self.peek() {
                            Tok::Comma => {
                                self.bump();
                            }
                            Tok::RParen => {
                                self.bump();
                                break;
                            }
                            _ => return Err(self.error(&["`,`", "`)`"])),
                        }
                    }
                }
                Ok(t)
            }
            Tok::Int(n) => {
                self.bump();
                Ok(STerm::Int(n))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.error(&["a term"])),
        }
    }

    fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }
}

// ---- resolution ----

fn free_vars_term(t: &STerm, scope: &mut Vec<String>, out: &mut Vec<String>) {
    match t {
        STerm::Name(n) => {
            if is_var_name(n) && !scope.contains(n) && !out.contains(n) {
                out.push(n.clone());
            }
        }
        STerm::Int(_) => {}
        STerm::App(f, a) => {
            free_vars_term(f, scope, out);
            free_vars_term(a, scope, out);
        }
        STerm::Lam(x, b) => {
            scope.push(x.clone());
            free_vars_term(b, scope, out);
            scope.pop();
        }
    }
}

fn free_vars_form(f: &SForm, scope: &mut Vec<String>, out: &mut Vec<String>) {
    match f {
        SForm::Atom(t) => free_vars_term(t, scope, out),
        SForm::Bin(_, a, b) => {
            free_vars_form(a, scope, out);
            free_vars_form(b, scope, out);
        }
        SForm::All(x, b) | SForm::Ex(x, b) => {
            scope.push(x.clone());
            free_vars_form(b, scope, out);
            scope.pop();
        }
        SForm::Bang(b) => free_vars_form(b, scope, out),
    }
}

fn core_term(t: &STerm, scope: &mut Vec<String>) -> Term {
    match t {
        STerm::Name(n) => match scope.iter().rposition(|s| s == n) {
            Some(p) => Term::Bound((scope.len() - 1 - p) as u32),
            None => Term::Const(n.as_str().into()),
        },
        STerm::Int(n) => Term::Int(*n),
        STerm::App(f, a) => Term::app(core_term(f, scope), core_term(a, scope)),
        STerm::Lam(x, b) => {
            scope.push(x.clone());
            let body = core_term(b, scope);
            scope.pop();
            Term::lam(x, body)
        }
    }
}

fn core_form(f: &SForm, scope: &mut Vec<String>) -> Formula {
    let rec = |g: &SForm, scope: &mut Vec<String>| Arc::new(core_form(g, scope));
    match f {
        SForm::Atom(t) => Formula::Atom(core_term(t, scope)),
        SForm::Bin(op, a, b) => {
            let (a, b) = (rec(a, scope), rec(b, scope));
            match op {
                Bin::Impl => Formula::Impl(a, b),
                Bin::PAnd => Formula::PAnd(a, b),
                Bin::POr => Formula::POr(a, b),
                Bin::CAnd => Formula::CAnd(a, b),
                Bin::COr => Formula::COr(a, b),
            }
        }
        SForm::All(x, b) | SForm::Ex(x, b) => {
            scope.push(x.clone());
            let body = rec(b, scope);
            scope.pop();
            if matches!(f, SForm::All(..)) {
                Formula::CAll(x.as_str().into(), body)
            } else {
                Formula::CEx(x.as_str().into(), body)
            }
        }
        SForm::Bang(b) => Formula::Bang(rec(b, scope)),
    }
}

/// Closes the free uppercase variables of `f` with `universal` (CAll) or
/// existential (CEx) quantifiers, outermost = first occurrence.
fn close(f: &SForm, universal: bool) -> Formula {
    let mut free = Vec::new();
    free_vars_form(f, &mut Vec::new(), &mut free);
    let mut scope = free.clone();
    let mut out = core_form(f, &mut scope);
    for v in free.iter().rev() {
        out = if universal {
            Formula::call(v, out)
        } else {
            Formula::cex(v, out)
        };
    }
    out
}

pub fn parse_program(text: &str) -> Result<Vec<AgentDecl>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut decls = Vec::new();
    while !p.at_eof() {
        let name = p.ident("an agent name")?;
        p.expect(Tok::Colon, "`:`")?;
        let f = p.formula()?;
        p.expect(Tok::Dot, "`.`")?;
        decls.push(AgentDecl {
            name,
            formula: Arc::new(close(&f, true)),
        });
    }
    Ok(decls)
}

pub fn parse_query(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    if *p.peek() == Tok::Dot {
        p.bump();
    }
    if !p.at_eof() {
        return Err(p.error(&["end of query"]));
    }
    Ok(close(&f, false))
}

/// Parses a closed term, e.g. an environment witness.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    if !p.at_eof() {
        return Err(p.error(&["end of term"]));
    }
    let mut free = Vec::new();
    free_vars_term(&t, &mut Vec::new(), &mut free);
    if let Some(v) = free.first() {
        return Err(ParseError {
            line: 1,
            col: 1,
            message: format!("term is not closed: free variable `{v}`"),
            expected: vec![],
        });
    }
    Ok(core_term(&t, &mut Vec::new()))
}
