//! Integer arithmetic and the builtin guard predicates.

use thiserror::Error;

use crate::term::Term;

pub const ADD: &str = "+";
pub const SUB: &str = "-";
pub const MUL: &str = "*";

/// Object-level connectives of the Horn meta-interpreter. `atom` is false
/// for anything headed by one of these.
pub const OBJECT_CONNECTIVES: [&str; 4] = ["and", "imp", "all", "some"];

const COMPARISONS: [&str; 6] = ["geq", "gt", "leq", "lt", "eq", "neq"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("arithmetic on a term that is not ground")]
    NotGround,
    #[error("integer overflow in {0}")]
    Overflow(String),
    #[error("`{0}` is not an arithmetic expression")]
    NotArithmetic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredError {
    #[error("builtin `{0}` applied to a term that is not ground")]
    NotGround(String),
    #[error("unknown builtin `{0}/{1}`")]
    UnknownBuiltin(String, usize),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

pub fn is_arith_op(name: &str) -> bool {
    matches!(name, ADD | SUB | MUL)
}

/// `Some((op, lhs, rhs))` when `t` is a binary arithmetic application.
pub fn as_arith(t: &Term) -> Option<(&str, &Term, &Term)> {
    let (head, args) = t.spine();
    match (head, args.as_slice()) {
        (Term::Const(op), [l, r]) if is_arith_op(op) => Some((op, l, r)),
        _ => None,
    }
}

pub fn arith(op: &str, l: Term, r: Term) -> Term {
    Term::apps(Term::constant(op), [l, r])
}

fn apply_op(op: &str, l: i64, r: i64) -> Result<i64, ArithError> {
    let res = match op {
        ADD => l.checked_add(r),
        SUB => l.checked_sub(r),
        MUL => l.checked_mul(r),
        _ => return Err(ArithError::NotArithmetic(op.to_string())),
    };
    res.ok_or_else(|| ArithError::Overflow(format!("{l} {op} {r}")))
}

/// Evaluates a ground arithmetic term to an integer.
pub fn eval_arith(t: &Term) -> Result<i64, ArithError> {
    match t {
        Term::Int(n) => Ok(*n),
        Term::Meta(_) => Err(ArithError::NotGround),
        _ => match as_arith(t) {
            Some((op, l, r)) => {
                let l = eval_arith(l);
                let r = eval_arith(r);
                match (l, r) {
                    (Ok(l), Ok(r)) => apply_op(op, l, r),
                    (Err(e @ ArithError::Overflow(_)), _) | (_, Err(e @ ArithError::Overflow(_))) => {
                        Err(e)
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            }
            None if !t.metas().is_empty() => Err(ArithError::NotGround),
            None => Err(ArithError::NotArithmetic(t.to_string())),
        },
    }
}

/// Folds every ground arithmetic subterm to an integer and drops the unit
/// and zero identities (`0*e`, `1*e`, `e+0`, `e-0`) around the rest.
pub fn fold_arith(t: &Term) -> Result<Term, ArithError> {
    if let Some((op, l, r)) = as_arith(t) {
        let l = fold_arith(l)?;
        let r = fold_arith(r)?;
        return Ok(match (op, &l, &r) {
            (_, Term::Int(a), Term::Int(b)) => Term::Int(apply_op(op, *a, *b)?),
            (MUL, Term::Int(0), _) | (MUL, _, Term::Int(0)) => Term::Int(0),
            (MUL, Term::Int(1), _) | (ADD, Term::Int(0), _) => r,
            (MUL, _, Term::Int(1)) | (ADD, _, Term::Int(0)) | (SUB, _, Term::Int(0)) => l,
            _ => arith(op, l, r),
        });
    }
    match t {
        Term::App(f, a) => {
            let f2 = fold_arith(f)?;
            let a2 = fold_arith(a)?;
            Ok(Term::app(f2, a2))
        }
        Term::Lam(x, b) => Ok(Term::Lam(x.clone(), fold_arith(b)?.into())),
        _ => Ok(t.clone()),
    }
}

/// One step of solving `expr = target` for its non-ground side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inversion {
    /// `expr = target` holds iff `term = value`.
    Solve(Term, i64),
    /// Holds for every value of the non-ground side (`0 * e = 0`).
    Always,
    Impossible,
    /// Both sides non-ground.
    Stuck,
}

/// Inverts a folded arithmetic expression against an integer.
pub fn invert(expr: &Term, target: i64) -> Result<Inversion, ArithError> {
    let Some((op, l, r)) = as_arith(expr) else {
        return Err(ArithError::NotArithmetic(expr.to_string()));
    };
    let overflow = || ArithError::Overflow(format!("solving {expr} = {target}"));
    Ok(match (op, l, r) {
        (ADD, e, Term::Int(k)) | (ADD, Term::Int(k), e) => {
            Inversion::Solve(e.clone(), target.checked_sub(*k).ok_or_else(overflow)?)
        }
        (SUB, e, Term::Int(k)) => {
            Inversion::Solve(e.clone(), target.checked_add(*k).ok_or_else(overflow)?)
        }
        (SUB, Term::Int(k), e) => {
            Inversion::Solve(e.clone(), k.checked_sub(target).ok_or_else(overflow)?)
        }
        (MUL, e, Term::Int(k)) | (MUL, Term::Int(k), e) => {
            if *k == 0 {
                if target == 0 {
                    Inversion::Always
                } else {
                    Inversion::Impossible
                }
            } else if target % k == 0 {
                Inversion::Solve(e.clone(), target / k)
            } else {
                Inversion::Impossible
            }
        }
        _ => match linear(expr) {
            Some((Some(x), c, d)) => {
                let rhs = target.checked_sub(d).ok_or_else(overflow)?;
                if c == 0 {
                    if rhs == 0 {
                        Inversion::Always
                    } else {
                        Inversion::Impossible
                    }
                } else if rhs % c == 0 {
                    Inversion::Solve(x, rhs / c)
                } else {
                    Inversion::Impossible
                }
            }
            _ => Inversion::Stuck,
        },
    })
}

/// Reads `expr` as `c * x + d` where every non-integer leaf is the same
/// term `x`. `None` if it is not linear in a single unknown or overflows.
fn linear(expr: &Term) -> Option<(Option<Term>, i64, i64)> {
    let Some((op, l, r)) = as_arith(expr) else {
        return match expr {
            Term::Int(n) => Some((None, 0, *n)),
            t => Some((Some(t.clone()), 1, 0)),
        };
    };
    let (xl, cl, dl) = linear(l)?;
    let (xr, cr, dr) = linear(r)?;
    let x = match (xl, xr) {
        (Some(a), Some(b)) if a != b => return None,
        (a, b) => a.or(b),
    };
    match op {
        ADD => Some((x, cl.checked_add(cr)?, dl.checked_add(dr)?)),
        SUB => Some((x, cl.checked_sub(cr)?, dl.checked_sub(dr)?)),
        MUL if cl == 0 => Some((x, dl.checked_mul(cr)?, dl.checked_mul(dr)?)),
        MUL if cr == 0 => Some((x, cl.checked_mul(dr)?, dl.checked_mul(dr)?)),
        _ => None,
    }
}

pub fn is_builtin_pred(name: &str, arity: usize) -> bool {
    (COMPARISONS.contains(&name) && arity == 2) || (name == "atom" && arity == 1)
}

/// Decides a builtin predicate. Arguments should already be resolved.
pub fn eval_pred(name: &str, args: &[Term]) -> Result<bool, PredError> {
    if !is_builtin_pred(name, args.len()) {
        return Err(PredError::UnknownBuiltin(name.to_string(), args.len()));
    }
    if name == "atom" {
        return match args[0].spine().0 {
            Term::Const(c) => Ok(!OBJECT_CONNECTIVES.contains(&c.as_ref())),
            Term::Int(_) => Ok(true),
            Term::Meta(_) => Err(PredError::NotGround(name.to_string())),
            _ => Ok(false),
        };
    }
    let value = |t: &Term| match eval_arith(t) {
        Err(ArithError::NotGround) => Err(PredError::NotGround(name.to_string())),
        other => other.map_err(PredError::from),
    };
    if name == "eq" || name == "neq" {
        // Structural comparison for non-arithmetic ground terms.
        let (a, b) = (&args[0], &args[1]);
        if !a.is_ground() || !b.is_ground() {
            return Err(PredError::NotGround(name.to_string()));
        }
        let same = match (eval_arith(a), eval_arith(b)) {
            (Ok(x), Ok(y)) => x == y,
            _ => a == b,
        };
        return Ok(if name == "eq" { same } else { !same });
    }
    let a = value(&args[0])?;
    let b = value(&args[1])?;
    Ok(match name {
        "geq" => a >= b,
        "gt" => a > b,
        "leq" => a <= b,
        "lt" => a < b,
        _ => unreachable!("checked by is_builtin_pred"),
    })
}
