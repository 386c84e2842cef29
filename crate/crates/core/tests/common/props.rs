//! Generators and property checks, runnable from both the property tests
//! and the acceptance target.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use taskcl::builtins::arith;
use taskcl::syntax::{parse_query, pretty, Formula};
use taskcl::term::{apply_subst, beta_normalize, MetaId, Substitution, Term};
use taskcl::unify::{unify, UnifyError};

const CONSTS: [&str; 6] = ["a", "b", "f", "g", "p", "x"];
const HINTS: [&str; 5] = ["x", "y", "z", "X", "f"];

/// Term shape with unresolved variable references; closed by `close_term`.
#[derive(Clone, Debug)]
pub enum Raw {
    Const(usize),
    Int(i64),
    Var(usize),
    Meta(usize),
    Lam(usize, Box<Raw>),
    App(Box<Raw>, Box<Raw>),
    Arith(usize, Box<Raw>, Box<Raw>),
}

fn raw_leaf(metas: bool) -> BoxedStrategy<Raw> {
    let mut leaves = vec![
        (3, (0..CONSTS.len()).prop_map(Raw::Const).boxed()),
        (2, (-20i64..20).prop_map(Raw::Int).boxed()),
        (3, (0usize..4).prop_map(Raw::Var).boxed()),
    ];
    if metas {
        leaves.push((3, (0usize..4).prop_map(Raw::Meta).boxed()));
    }
    proptest::strategy::Union::new_weighted(leaves).boxed()
}

pub fn raw_term(metas: bool) -> BoxedStrategy<Raw> {
    raw_leaf(metas)
        .prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                3 => (inner.clone(), inner.clone()).prop_map(|(f, a)| Raw::App(Box::new(f), Box::new(a))),
                2 => (0..HINTS.len(), inner.clone()).prop_map(|(h, b)| Raw::Lam(h, Box::new(b))),
                1 => (0usize..3, inner.clone(), inner).prop_map(|(o, l, r)| Raw::Arith(o, Box::new(l), Box::new(r))),
            ]
        })
        .boxed()
}

/// Arity of each generated meta; metas of arity k only occur applied to k
/// distinct bound variables.
pub const META_ARITY: [usize; 4] = [0, 0, 1, 2];

pub fn meta(i: usize) -> Term {
    Term::meta(i as u32, ["M", "N", "F", "G"][i])
}

pub fn close_term(r: &Raw, depth: u32) -> Term {
    match r {
        Raw::Const(i) => Term::constant(CONSTS[*i]),
        Raw::Int(n) => Term::int(*n),
        Raw::Var(i) if depth > 0 => Term::Bound(*i as u32 % depth),
        Raw::Var(i) => Term::constant(CONSTS[*i]),
        Raw::Meta(i) => {
            let k = META_ARITY[*i];
            if k > depth as usize {
                meta(0)
            } else {
                // distinct bound variables, innermost first, rotated by the id
                let args = (0..k as u32).map(|j| Term::Bound((j + *i as u32) % depth));
                Term::apps(meta(*i), args)
            }
        }
        Raw::Lam(h, b) => Term::lam(HINTS[*h], close_term(b, depth + 1)),
        Raw::App(f, a) => {
            let (f, a) = (close_term(f, depth), close_term(a, depth));
            if f.spine().0.is_meta() {
                // keep metas applied to bound variables only
                Term::apps(Term::constant("g"), [f, a])
            } else {
                Term::app(f, a)
            }
        }
        Raw::Arith(o, l, r) => arith(["+", "-", "*"][*o], close_term(l, depth), close_term(r, depth)),
    }
}

pub fn closed_term() -> impl Strategy<Value = Term> {
    raw_term(false).prop_map(|r| close_term(&r, 0))
}

#[derive(Clone, Debug)]
pub enum RawForm {
    Atom(Option<usize>, i64, Vec<Raw>),
    Bin(usize, Box<RawForm>, Box<RawForm>),
    Quant(bool, usize, Box<RawForm>),
    Bang(Box<RawForm>),
}

fn raw_formula() -> impl Strategy<Value = RawForm> {
    let atom = (
        proptest::option::weighted(0.85, 0usize..(CONSTS.len() + 4)),
        -30i64..30,
        proptest::collection::vec(raw_term(false), 0..3),
    )
        .prop_map(|(h, n, args)| RawForm::Atom(h, n, args));
    atom.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            4 => (0usize..5, inner.clone(), inner.clone()).prop_map(|(o, a, b)| RawForm::Bin(o, Box::new(a), Box::new(b))),
            2 => (any::<bool>(), 0..HINTS.len(), inner.clone()).prop_map(|(u, h, b)| RawForm::Quant(u, h, Box::new(b))),
            1 => inner.prop_map(|b| RawForm::Bang(Box::new(b))),
        ]
    })
}

// Atoms the parser can produce: an integer, or a named head with arguments.
fn close_formula(r: &RawForm, depth: u32) -> Formula {
    match r {
        RawForm::Atom(None, n, _) => Formula::atom(Term::int(*n)),
        RawForm::Atom(Some(h), _, args) => {
            let head = if *h < CONSTS.len() || depth == 0 {
                Term::constant(CONSTS[*h % CONSTS.len()])
            } else {
                Term::Bound((*h - CONSTS.len()) as u32 % depth)
            };
            Formula::atom(Term::apps(head, args.iter().map(|a| close_term(a, depth))))
        }
        RawForm::Bin(o, a, b) => {
            let (a, b) = (close_formula(a, depth), close_formula(b, depth));
            [Formula::imp, Formula::pand, Formula::por, Formula::cand, Formula::cor][*o](a, b)
        }
        RawForm::Quant(u, h, b) => {
            let body = close_formula(b, depth + 1);
            if *u {
                Formula::call(HINTS[*h], body)
            } else {
                Formula::cex(HINTS[*h], body)
            }
        }
        RawForm::Bang(b) => Formula::bang(close_formula(b, depth)),
    }
}

pub fn formula() -> impl Strategy<Value = Formula> {
    raw_formula().prop_map(|r| close_formula(&r, 0))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        max_global_rejects: 20 * cases,
        ..Config::default()
    })
}

pub type Outcome = Result<(), TestError<String>>;

fn fmt_err<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Outcome {
    r.map_err(|e| match e {
        TestError::Abort(m) => TestError::Abort(m),
        TestError::Fail(m, v) => TestError::Fail(m, format!("{v:?}")),
    })
}

pub fn roundtrip(cases: u32) -> Outcome {
    fmt_err(runner(cases).run(&formula(), |f| {
        let text = pretty(&f);
        let back = parse_query(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, f, "printed as {}", text);
        Ok(())
    }))
}

pub fn normalization_idempotent(cases: u32) -> Outcome {
    // redexes are made likely by wrapping generated pairs
    let redexy = (raw_term(false), raw_term(false), any::<bool>()).prop_map(|(b, a, wrap)| {
        let t = close_term(&b, 0);
        if wrap {
            Term::app(Term::lam("x", close_term(&b, 1)), close_term(&a, 0))
        } else {
            t
        }
    });
    fmt_err(runner(cases).run(&redexy, |t| {
        let Ok(n) = beta_normalize(&t, 10_000) else {
            return Err(TestCaseError::reject("diverges"));
        };
        prop_assert!(n.is_normal());
        prop_assert!(n.metas().is_subset(&t.metas()));
        let again = beta_normalize(&n, 10_000).map_err(|_| TestCaseError::fail("renormalizing ran out of fuel"))?;
        prop_assert_eq!(again, n);
        Ok(())
    }))
}

/// A value for each meta, abstracted over the meta's arity.
fn meta_value(metas: bool) -> impl Strategy<Value = [Raw; 4]> {
    [raw_term(metas), raw_term(metas), raw_term(metas), raw_term(metas)]
}

/// Simultaneous replacement of metas by closed values, without chasing
/// metas inside the values.
fn replace_once(t: &Term, vals: &[Term]) -> Term {
    match t {
        Term::Meta(m) => vals[m.id.0 as usize].clone(),
        Term::App(f, a) => Term::app(replace_once(f, vals), replace_once(a, vals)),
        Term::Lam(h, b) => Term::lam(h, replace_once(b, vals)),
        _ => t.clone(),
    }
}

fn meta_lambda(i: usize, body: &Raw) -> Term {
    let k = META_ARITY[i] as u32;
    (0..k).fold(close_term(body, k), |v, _| Term::lam("v", v))
}

fn value_subst(vals: &[Raw; 4]) -> Substitution {
    (0..4).map(|i| (MetaId(i as u32), meta_lambda(i, &vals[i]))).collect()
}

fn normal(t: &Term) -> Result<Term, TestCaseError> {
    beta_normalize(t, 10_000).map_err(|_| TestCaseError::reject("diverges"))
}

/// Every meta is applied to distinct variables bound inside the term.
pub fn is_pattern(t: &Term) -> bool {
    let (head, args) = t.spine();
    if head.is_meta() {
        let mut seen = Vec::new();
        return args.iter().all(|a| match a {
            Term::Bound(i) if !seen.contains(i) => {
                seen.push(*i);
                true
            }
            _ => false,
        });
    }
    match t {
        Term::App(f, a) => is_pattern(f) && is_pattern(a),
        Term::Lam(_, b) => is_pattern(b),
        _ => true,
    }
}

fn check_unifier(t1: &Term, t2: &Term, sigma: &Substitution) -> Result<(), TestCaseError> {
    prop_assert!(sigma.is_idempotent(), "not idempotent: {:?}", sigma);
    let l = normal(&apply_subst(sigma, t1))?;
    let r = normal(&apply_subst(sigma, t2))?;
    prop_assert_eq!(l, r);
    Ok(())
}

/// Soundness on arbitrary pairs, and completeness plus generality on pairs
/// built as (pattern, instance of the pattern).
pub fn unification_sound(cases: u32) -> Outcome {
    use std::sync::atomic::{AtomicU32, Ordering::Relaxed};
    let higher_order = AtomicU32::new(0);
    let pair_successes = AtomicU32::new(0);
    let pairs = (raw_term(true), raw_term(true), meta_value(false), meta_value(true), 0u8..3);
    let result = fmt_err(runner(cases).run(&pairs, |(a, b, vals, open_vals, mode)| {
        // two enclosing binders give the higher-arity metas room to occur
        let under2 = |r: &Raw| close_term(&Raw::Lam(0, Box::new(Raw::Lam(1, Box::new(r.clone())))), 0);
        let t1 = normal(&under2(&a))?;
        if mode == 0 {
            if !is_pattern(&t1) {
                return Err(TestCaseError::reject("not a pattern"));
            }
            let theta = value_subst(&vals);
            let t2 = normal(&apply_subst(&theta, &t1))?;
            let sigma = match unify(&t1, &t2, &Substitution::new()) {
                Ok(s) => s,
                Err(UnifyError::Fuel(_)) => return Err(TestCaseError::reject("fuel")),
                Err(e) => return Err(TestCaseError::fail(format!("{t1} vs its instance {t2}: {e}"))),
            };
            check_unifier(&t1, &t2, &sigma)?;
            if t1.metas().iter().any(|m| META_ARITY[m.0 as usize] > 0) {
                higher_order.fetch_add(1, Relaxed);
            }
            // sigma is at least as general as theta on t1
            let via = normal(&apply_subst(&theta, &normal(&apply_subst(&sigma, &t1))?))?;
            prop_assert_eq!(via, t2);
        } else {
            let t2 = if mode == 1 {
                // an instance that still contains metas, possibly t1's own
                let vals: Vec<Term> = (0..4).map(|i| meta_lambda(i, &open_vals[i])).collect();
                normal(&replace_once(&t1, &vals))?
            } else {
                normal(&under2(&b))?
            };
            match unify(&t1, &t2, &Substitution::new()) {
                Ok(sigma) => {
                    check_unifier(&t1, &t2, &sigma)?;
                    pair_successes.fetch_add(1, Relaxed);
                }
                Err(UnifyError::Fuel(_)) => return Err(TestCaseError::reject("fuel")),
                Err(_) => {}
            }
        }
        Ok(())
    }));
    result?;
    let (ho, ok) = (higher_order.into_inner(), pair_successes.into_inner());
    eprintln!("unification: {ho} higher-order instances, {ok} unifiable random pairs");
    if ho < cases / 20 || ok < cases / 50 {
        return Err(TestError::Abort(format!("weak coverage: {ho} higher-order instances, {ok} unifiable pairs").into()));
    }
    Ok(())
}
