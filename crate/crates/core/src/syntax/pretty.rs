//! Printer producing text that parses back to an alpha-equal value.

use std::collections::BTreeSet;

use super::formula::{AgentDecl, Formula};
use super::lexer::{is_ident_char, is_ident_start};
use crate::builtins::{as_arith, is_arith_op, ADD, MUL, SUB};
use crate::term::Term;

struct Names {
    /// Names of enclosing binders, innermost last.
    scope: Vec<String>,
    /// Constant names appearing anywhere in the printed value.
    consts: BTreeSet<String>,
}

impl Names {
    fn for_term(t: &Term) -> Self {
        let mut consts = BTreeSet::new();
        collect_consts(t, &mut consts);
        Self {
            scope: Vec::new(),
            consts,
        }
    }

    fn for_formula(f: &Formula) -> Self {
        let mut consts = BTreeSet::new();
        f.visit_atoms(&mut |t| collect_consts(t, &mut consts));
        Self {
            scope: Vec::new(),
            consts,
        }
    }

    fn bound(&self, i: u32) -> String {
        let i = i as usize;
        if i < self.scope.len() {
            self.scope[self.scope.len() - 1 - i].clone()
        } else {
            format!("_free{}", i - self.scope.len())
        }
    }

    /// A printable binder name based on `hint` that neither shadows an
    /// enclosing binder nor collides with a constant.
    fn fresh(&self, hint: &str) -> String {
        let base: String = if hint.starts_with(is_ident_start) && hint.chars().all(is_ident_char) {
            hint.to_string()
        } else {
            "x".to_string()
        };
        let taken = |n: &str| {
            self.scope.iter().any(|s| s == n)
                || self.consts.contains(n)
                || n == "forall"
                || n == "exists"
        };
        if !taken(&base) {
            return base;
        }
        let stem = base.trim_end_matches(|c: char| c.is_ascii_digit()).to_string();
        (1..)
            .map(|k| format!("{stem}{k}"))
            .find(|n| !taken(n))
            .expect("unbounded")
    }
}

fn collect_consts(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(c) => {
            out.insert(c.to_string());
        }
        Term::App(f, a) => {
            collect_consts(f, out);
            collect_consts(a, out);
        }
        Term::Lam(_, b) => collect_consts(b, out),
        _ => {}
    }
}

// Term precedence: 0 lambda, 1 additive, 2 multiplicative, 3 juxtaposition
// and negative literals, 4 atomic.
fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Lam(..) => 0,
        Term::Int(n) if *n < 0 => 3,
        _ => match as_arith(t) {
            Some((op, _, _)) if op == ADD || op == SUB => 1,
            Some(_) => 2,
            None => match (t, t.spine().0) {
                (Term::App(..), Term::Lam(..) | Term::Int(_)) => 3,
                (Term::App(..), Term::Const(c)) if is_arith_op(c) => 3,
                _ => 4,
            },
        },
    }
}

fn write_term(t: &Term, ctx: u8, names: &mut Names, out: &mut String) {
    let prec = term_prec(t);
    let paren = prec < ctx;
    if paren {
        out.push('(');
    }
    match t {
        Term::Const(c) => out.push_str(c),
        Term::Int(n) => out.push_str(&n.to_string()),
        Term::Bound(i) => out.push_str(&names.bound(*i)),
        Term::Meta(m) => out.push_str(&format!("_{}{}", m.name, m.id.0)),
        Term::Lam(hint, body) => {
            let x = names.fresh(hint);
            out.push('\\');
            out.push_str(&x);
            out.push_str(". ");
            names.scope.push(x);
            write_term(body, 0, names, out);
            names.scope.pop();
        }
        Term::App(..) => {
            if let Some((op, l, r)) = as_arith(t) {
                let (lp, rp) = if op == MUL { (2, 3) } else { (1, 2) };
                write_term(l, lp, names, out);
                out.push(' ');
                out.push_str(op);
                out.push(' ');
                write_term(r, rp, names, out);
            } else if matches!(t.spine().0, Term::Const(c) if is_arith_op(c)) {
                // an operator applied past its two operands: `(a + b) c`
                let Term::App(f, a) = t else { unreachable!() };
                write_term(f, 3, names, out);
                out.push(' ');
                write_term(a, 4, names, out);
            } else {
                let (head, args) = t.spine();
                let named_head = matches!(head, Term::Const(_) | Term::Bound(_) | Term::Meta(_));
                if named_head {
                    write_term(head, 4, names, out);
                    out.push('(');
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            out.push_str(", ");
                        }
                        write_term(a, 0, names, out);
                    }
                    out.push(')');
                } else {
                    write_term(head, 4, names, out);
                    for a in args {
                        out.push(' ');
                        write_term(a, 4, names, out);
                    }
                }
            }
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn pretty_term(t: &Term) -> String {
    let mut names = Names::for_term(t);
    let mut out = String::new();
    write_term(t, 0, &mut names, &mut out);
    out
}

// Formula precedence: 1 implication, 2 choice, 3 parallel or, 4 parallel and,
// 5 prefix, 6 atoms. Quantifiers print at 1 because their body extends to
// the right.
fn form_prec(f: &Formula) -> u8 {
    match f {
        Formula::Impl(..) | Formula::CAll(..) | Formula::CEx(..) => 1,
        Formula::CAnd(..) | Formula::COr(..) => 2,
        Formula::POr(..) => 3,
        Formula::PAnd(..) => 4,
        Formula::Bang(_) => 5,
        Formula::Atom(_) => 6,
    }
}

fn write_formula(f: &Formula, ctx: u8, names: &mut Names, out: &mut String) {
    let paren = form_prec(f) < ctx;
    if paren {
        out.push('(');
    }
    let binary = |a: &Formula, op: &str, b: &Formula, lp: u8, rp: u8, names: &mut Names, out: &mut String| {
        write_formula(a, lp, names, out);
        out.push(' ');
        out.push_str(op);
        out.push(' ');
        write_formula(b, rp, names, out);
    };
    match f {
        Formula::Atom(t) => write_term(t, 0, names, out),
        Formula::Impl(a, b) => binary(a, "->", b, 2, 1, names, out),
        Formula::CAnd(a, b) | Formula::COr(a, b) => {
            let op = if matches!(f, Formula::COr(..)) { "+" } else { "&" };
            // The left operand may continue the chain only with the same operator.
            let same = std::mem::discriminant(&**a) == std::mem::discriminant(f);
            binary(a, op, b, if same { 2 } else { 3 }, 3, names, out)
        }
        Formula::POr(a, b) => binary(a, "|", b, 3, 4, names, out),
        Formula::PAnd(a, b) => binary(a, "*", b, 4, 5, names, out),
        Formula::Bang(a) => {
            out.push('!');
            write_formula(a, 5, names, out);
        }
        Formula::CAll(hint, body) | Formula::CEx(hint, body) => {
            let kw = if matches!(f, Formula::CAll(..)) { "forall" } else { "exists" };
            let x = names.fresh(hint);
            out.push_str(kw);
            out.push(' ');
            out.push_str(&x);
            out.push_str(". ");
            names.scope.push(x);
            write_formula(body, 1, names, out);
            names.scope.pop();
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn pretty(f: &Formula) -> String {
    let mut names = Names::for_formula(f);
    let mut out = String::new();
    write_formula(f, 0, &mut names, &mut out);
    out
}

pub fn pretty_decl(d: &AgentDecl) -> String {
    format!("{}: {}.", d.name, pretty(&d.formula))
}

pub fn pretty_program(decls: &[AgentDecl]) -> String {
    decls.iter().map(|d| pretty_decl(d) + "\n").collect()
}
