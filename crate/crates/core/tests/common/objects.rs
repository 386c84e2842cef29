//! Object-level programs and goals for the Horn interpreter corpus, with
//! their translation to the SLD oracle.

use super::{Fo, FoClause, FoGoal};

/// Object-level programs and goals for the Horn interpreter.
pub enum Obj {
    Atom(Fo),
    And(Box<Obj>, Box<Obj>),
    Imp(Box<Obj>, Fo),
    All(usize, Box<Obj>),
    Some(usize, Box<Obj>),
}

pub fn and(a: Obj, b: Obj) -> Obj {
    Obj::And(Box::new(a), Box::new(b))
}
pub fn imp(g: Obj, h: Fo) -> Obj {
    Obj::Imp(Box::new(g), h)
}
pub fn all(v: usize, b: Obj) -> Obj {
    Obj::All(v, Box::new(b))
}
pub fn some(v: usize, b: Obj) -> Obj {
    Obj::Some(v, Box::new(b))
}
pub fn at(p: &str, arg: Fo) -> Fo {
    Fo::f(p, vec![arg])
}
pub fn atom(p: &str, arg: Fo) -> Obj {
    Obj::Atom(at(p, arg))
}

pub fn obj_term(t: &Fo) -> String {
    match t {
        Fo::Var(v) => format!("x{v}"),
        Fo::Fun(n, a) if a.is_empty() => n.clone(),
        Fo::Fun(n, a) => format!("({n} {})", a.iter().map(obj_term).collect::<Vec<_>>().join(" ")),
    }
}

pub fn obj_text(o: &Obj) -> String {
    match o {
        Obj::Atom(t) => obj_term(t),
        Obj::And(a, b) => format!("(and {} {})", obj_text(a), obj_text(b)),
        Obj::Imp(g, h) => format!("(imp {} {})", obj_text(g), obj_term(h)),
        Obj::All(v, b) => format!("(all (\\x{v}. {}))", obj_text(b)),
        Obj::Some(v, b) => format!("(some (\\x{v}. {}))", obj_text(b)),
    }
}

pub fn oracle_goal(o: &Obj) -> FoGoal {
    match o {
        Obj::Atom(t) => FoGoal::Atom(t.clone()),
        Obj::And(a, b) => FoGoal::and(oracle_goal(a), oracle_goal(b)),
        Obj::Some(_, b) => oracle_goal(b),
        _ => panic!("not a goal"),
    }
}

pub fn oracle_clauses(o: &Obj, out: &mut Vec<FoClause>) {
    match o {
        Obj::Atom(t) => out.push(FoClause { head: t.clone(), body: FoGoal::True }),
        Obj::And(a, b) => {
            oracle_clauses(a, out);
            oracle_clauses(b, out);
        }
        Obj::Imp(g, h) => out.push(FoClause { head: h.clone(), body: oracle_goal(g) }),
        Obj::All(_, b) => oracle_clauses(b, out),
        Obj::Some(..) => panic!("not a program"),
    }
}

pub fn horn_object_cases() -> Vec<(Obj, Obj)> {
    let (a, b) = (Fo::c("a"), Fo::c("b"));
    let x = |v| Fo::Var(v);
    vec![
        (and(atom("q", a.clone()), imp(atom("q", a.clone()), at("p", a.clone()))), atom("p", a.clone())),
        (
            and(atom("q", a.clone()), and(atom("r", b.clone()), imp(and(atom("q", a.clone()), atom("r", b.clone())), at("p", a.clone())))),
            and(atom("p", a.clone()), atom("r", b.clone())),
        ),
        (
            and(atom("q", a.clone()), all(0, imp(atom("q", x(0)), at("p", x(0))))),
            some(1, atom("p", x(1))),
        ),
        (
            and(atom("q", a.clone()), all(0, imp(atom("q", x(0)), at("p", x(0))))),
            atom("p", b.clone()),
        ),
        (
            and(atom("r", b.clone()), imp(and(atom("q", a.clone()), atom("r", b.clone())), at("p", a.clone()))),
            and(atom("p", a.clone()), atom("r", b.clone())),
        ),
        (
            and(atom("q", a.clone()), and(atom("r", b.clone()), all(0, imp(some(1, and(atom("q", x(1)), atom("r", x(0)))), at("p", x(0)))))),
            atom("p", b.clone()),
        ),
    ]
}

/// The interpreter query for object program `d` and goal `g`.
pub fn object_query(d: &Obj, g: &Obj) -> String {
    format!("pv {} {}", obj_text(d), obj_text(g))
}

/// Whether `g` follows from `d`, by SLD resolution.
pub fn object_expected(d: &Obj, g: &Obj) -> bool {
    let mut clauses = Vec::new();
    oracle_clauses(d, &mut clauses);
    super::sld_provable(&clauses, &oracle_goal(g), 32).expect("object programs are acyclic")
}
