//! First-order unification extended with higher-order patterns.
//!
//! A flexible term `M x1 .. xn` whose arguments are distinct bound
//! variables is solved by abstraction (`M := \x1..xn. t`). Anything else
//! with a meta at the head is reported as [`UnifyError::NonPattern`] rather
//! than guessed. The occurs check is always on.
//!
//! The unifier is generic over a [`Bindings`] store so the engine can use a
//! trailed triangular store while the public [`unify`] works on an
//! idempotent [`Substitution`].

use thiserror::Error;

use crate::builtins::{self, ArithError, Inversion};
use crate::term::{self, FuelExhausted, Meta, MetaId, Substitution, Term, DEFAULT_FUEL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("no unifier")]
    Failure,
    #[error("outside the pattern fragment: {0}")]
    NonPattern(String),
    #[error("arithmetic: {0}")]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Fuel(#[from] FuelExhausted),
}

pub trait Bindings {
    fn lookup(&self, id: MetaId) -> Option<&Term>;
    fn bind(&mut self, meta: &Meta, value: Term);
    fn fresh_meta(&mut self, hint: &str) -> Meta;
}

#[derive(Debug, Clone, Copy)]
pub struct UnifyOptions {
    /// Evaluate and invert `+ - *` when one side is an integer.
    pub arithmetic: bool,
    pub fuel: u64,
}

impl Default for UnifyOptions {
    fn default() -> Self {
        Self {
            arithmetic: false,
            fuel: DEFAULT_FUEL,
        }
    }
}

/// Replaces bound metas, following chains, without normalizing.
pub fn resolve<B: Bindings + ?Sized>(bindings: &B, t: &Term) -> Term {
    t.replace_metas(&|m| bindings.lookup(m).cloned())
}

/// [`resolve`] followed by beta normalization.
pub fn resolve_normal<B: Bindings + ?Sized>(
    bindings: &B,
    t: &Term,
    fuel: u64,
) -> Result<Term, FuelExhausted> {
    let r = resolve(bindings, t);
    if r.is_normal() {
        Ok(r)
    } else {
        term::beta_normalize(&r, fuel)
    }
}

/// Unifies under `bindings`, extending them on success. On failure the
/// store may hold partial bindings; callers undo them.
pub fn unify_in<B: Bindings>(
    bindings: &mut B,
    a: &Term,
    b: &Term,
    opts: UnifyOptions,
) -> Result<(), UnifyError> {
    Unifier {
        bindings,
        opts,
        fuel: opts.fuel,
        postponed: None,
    }
    .unify(a, b, 0)
}

/// Like [`unify_in`], but arithmetic equations that cannot be solved yet
/// (`4 * Y + Y = 120`) are returned for the caller to re-check once more
/// metas are bound.
pub fn unify_postponing<B: Bindings>(
    bindings: &mut B,
    a: &Term,
    b: &Term,
    opts: UnifyOptions,
) -> Result<Vec<(Term, Term)>, UnifyError> {
    let mut u = Unifier {
        bindings,
        opts,
        fuel: opts.fuel,
        postponed: Some(Vec::new()),
    };
    u.unify(a, b, 0)?;
    Ok(u.postponed.unwrap_or_default())
}

struct SubstStore {
    sigma: Substitution,
    next: u32,
}

impl Bindings for SubstStore {
    fn lookup(&self, id: MetaId) -> Option<&Term> {
        self.sigma.get(id)
    }

    fn bind(&mut self, meta: &Meta, value: Term) {
        self.sigma.insert(meta.id, value);
    }

    fn fresh_meta(&mut self, hint: &str) -> Meta {
        let id = MetaId(self.next);
        self.next += 1;
        Meta {
            id,
            name: hint.into(),
        }
    }
}

/// Most general unifier of `t1` and `t2` extending `sigma`.
pub fn unify(t1: &Term, t2: &Term, sigma: &Substitution) -> Result<Substitution, UnifyError> {
    let next = [t1.max_meta_id(), t2.max_meta_id(), sigma.max_meta_id()]
        .into_iter()
        .flatten()
        .max()
        .map_or(0, |m| m + 1);
    let mut store = SubstStore {
        sigma: sigma.clone(),
        next,
    };
    debug_assert!(
        term::apply_subst(sigma, t1).is_normal() && term::apply_subst(sigma, t2).is_normal(),
        "unify expects beta-normal inputs"
    );
    unify_in(&mut store, t1, t2, UnifyOptions::default())?;
    #[cfg(debug_assertions)]
    {
        let l = term::apply_subst(&store.sigma, t1);
        let r = term::apply_subst(&store.sigma, t2);
        debug_assert!(l == r, "unifier does not equalize: {l} vs {r}");
        debug_assert!(store.sigma.is_idempotent());
    }
    Ok(store.sigma)
}

struct Unifier<'b, B: Bindings> {
    bindings: &'b mut B,
    opts: UnifyOptions,
    fuel: u64,
    /// Stuck arithmetic equations, collected instead of failing when set.
    postponed: Option<Vec<(Term, Term)>>,
}

fn lambdas(n: usize, body: Term) -> Term {
    (0..n).rev().fold(body, |acc, k| Term::lam(&format!("x{k}"), acc))
}

impl<B: Bindings> Unifier<'_, B> {
    /// Dereferences a bound meta at the head and contracts head redexes.
    fn whnf(&mut self, t: &Term) -> Result<Term, UnifyError> {
        let mut cur = t.clone();
        loop {
            let (head, args) = cur.spine();
            let next = match head {
                Term::Meta(m) => match self.bindings.lookup(m.id) {
                    Some(v) => Term::apps(v.clone(), args.into_iter().cloned()),
                    None => return Ok(cur),
                },
                Term::Lam(_, body) if !args.is_empty() => {
                    if self.fuel == 0 {
                        return Err(FuelExhausted.into());
                    }
                    self.fuel -= 1;
                    let reduced = body.instantiate(args[0]);
                    Term::apps(reduced, args[1..].iter().map(|a| (*a).clone()))
                }
                _ => return Ok(cur),
            };
            cur = next;
        }
    }

    fn unify(&mut self, a: &Term, b: &Term, depth: u32) -> Result<(), UnifyError> {
        let a = self.whnf(a)?;
        let b = self.whnf(b)?;
        match (flex(&a), flex(&b)) {
            (Some((m, xs)), Some((n, ys))) => self.flex_flex(m, xs, &a, n, ys, &b),
            (Some((m, xs)), None) => self.flex_rigid(&m, &xs, &b),
            (None, Some((n, ys))) => self.flex_rigid(&n, &ys, &a),
            (None, None) => match (&a, &b) {
                (Term::Lam(_, x), Term::Lam(_, y)) => self.unify(x, y, depth + 1),
                // no eta
                (Term::Lam(..), _) | (_, Term::Lam(..)) => Err(UnifyError::Failure),
                _ => self.rigid_rigid(&a, &b, depth),
            },
        }
    }

    fn rigid_rigid(&mut self, a: &Term, b: &Term, depth: u32) -> Result<(), UnifyError> {
        if self.opts.arithmetic
            && (builtins::as_arith(a).is_some() || builtins::as_arith(b).is_some())
        {
            return self.unify_arith(a, b, depth);
        }
        let (ha, xs) = a.spine();
        let (hb, ys) = b.spine();
        let same_head = match (ha, hb) {
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Bound(x), Term::Bound(y)) => x == y,
            _ => false,
        };
        if !same_head || xs.len() != ys.len() {
            return Err(UnifyError::Failure);
        }
        for (x, y) in xs.into_iter().zip(ys) {
            self.unify(x, y, depth)?;
        }
        Ok(())
    }

    fn unify_arith(&mut self, a: &Term, b: &Term, depth: u32) -> Result<(), UnifyError> {
        let a = builtins::fold_arith(&resolve_normal(&*self.bindings, a, self.fuel)?)?;
        let b = builtins::fold_arith(&resolve_normal(&*self.bindings, b, self.fuel)?)?;
        if a == b {
            return Ok(());
        }
        let (expr, target) = match (&a, &b) {
            (Term::Int(x), Term::Int(y)) => {
                return if x == y { Ok(()) } else { Err(UnifyError::Failure) };
            }
            (Term::Int(n), e) | (e, Term::Int(n)) if builtins::as_arith(e).is_some() => (e, *n),
            _ => {
                // Both non-integer after folding: structural comparison if
                // both are still arithmetic, otherwise a clash.
                if builtins::as_arith(&a).is_some() && builtins::as_arith(&b).is_some() {
                    let (_, xs) = a.spine();
                    let (_, ys) = b.spine();
                    if a.head_symbol() != b.head_symbol() {
                        return self.stuck(a, b);
                    }
                    for (x, y) in xs.into_iter().zip(ys) {
                        self.unify(x, y, depth)?;
                    }
                    return Ok(());
                }
                if flex(&a).is_some() || flex(&b).is_some() {
                    return self.unify(&a, &b, depth);
                }
                return Err(UnifyError::Failure);
            }
        };
        match builtins::invert(expr, target)? {
            Inversion::Solve(side, value) => self.unify(&side, &Term::Int(value), depth),
            Inversion::Always => Ok(()),
            Inversion::Impossible => Err(UnifyError::Failure),
            Inversion::Stuck => self.stuck(expr.clone(), Term::Int(target)),
        }
    }

    fn stuck(&mut self, a: Term, b: Term) -> Result<(), UnifyError> {
        match &mut self.postponed {
            Some(list) => {
                list.push((a, b));
                Ok(())
            }
            None => Err(ArithError::NotGround.into()),
        }
    }

    fn flex_flex(
        &mut self,
        m: Meta,
        xs: Vec<Term>,
        a: &Term,
        n: Meta,
        ys: Vec<Term>,
        b: &Term,
    ) -> Result<(), UnifyError> {
        if m != n {
            return match self.flex_rigid(&m, &xs, b) {
                Err(UnifyError::NonPattern(_)) => self.flex_rigid(&n, &ys, a),
                other => other,
            };
        }
        let xv = pattern_vars(&xs).ok_or_else(|| non_pattern(a))?;
        let yv = pattern_vars(&ys).ok_or_else(|| non_pattern(b))?;
        if xv.len() != yv.len() {
            return Err(UnifyError::Failure);
        }
        if xv == yv {
            return Ok(());
        }
        // M x1..xn = M y1..yn: keep the positions where the arguments agree.
        let arity = xv.len();
        let kept: Vec<usize> = (0..arity).filter(|&i| xv[i] == yv[i]).collect();
        let h = self.bindings.fresh_meta(&m.name);
        let body = Term::apps(
            Term::Meta(h),
            kept.iter().map(|&i| Term::Bound((arity - 1 - i) as u32)),
        );
        self.bindings.bind(&m, lambdas(arity, body));
        Ok(())
    }

    fn flex_rigid(&mut self, m: &Meta, args: &[Term], rhs: &Term) -> Result<(), UnifyError> {
        let head = Term::apps(Term::Meta(m.clone()), args.iter().cloned());
        let vars = pattern_vars(args).ok_or_else(|| non_pattern(&head))?;
        let body = self.invert(m.id, &vars, rhs, 0)?;
        self.bindings.bind(m, lambdas(vars.len(), body));
        Ok(())
    }

    /// Rewrites `t` (seen under `inner` extra binders) so that it can be
    /// placed under the abstraction over `vars`.
    fn invert(&mut self, mid: MetaId, vars: &[u32], t: &Term, inner: u32) -> Result<Term, UnifyError> {
        let t = self.whnf(t)?;
        let n = vars.len() as u32;
        match &t {
            Term::Bound(i) if *i < inner => Ok(t.clone()),
            Term::Bound(i) => {
                let outer = i - inner;
                match vars.iter().position(|v| *v == outer) {
                    Some(p) => Ok(Term::Bound(inner + (n - 1 - p as u32))),
                    None => Err(UnifyError::Failure),
                }
            }
            Term::Const(_) | Term::Int(_) => Ok(t.clone()),
            Term::Lam(x, body) => Ok(Term::Lam(x.clone(), self.invert(mid, vars, body, inner + 1)?.into())),
            Term::Meta(other) if other.id == mid => Err(UnifyError::Failure),
            Term::Meta(_) => Ok(t.clone()),
            Term::App(..) => {
                let (head, args) = t.spine();
                if let Term::Meta(other) = head {
                    if other.id == mid {
                        return Err(UnifyError::Failure);
                    }
                    if self.prune(other, &args, vars, inner)? {
                        return self.invert(mid, vars, &t, inner);
                    }
                }
                let head = self.invert(mid, vars, head, inner)?;
                let mut out = head;
                for a in args {
                    out = Term::app(out, self.invert(mid, vars, a, inner)?);
                }
                Ok(out)
            }
        }
    }

    /// Drops arguments of a flexible subterm that would escape their scope.
    /// Returns true when a pruning binding was made.
    fn prune(&mut self, meta: &Meta, args: &[&Term], vars: &[u32], inner: u32) -> Result<bool, UnifyError> {
        let mut args_whnf = Vec::with_capacity(args.len());
        for a in args {
            args_whnf.push(self.whnf(a)?);
        }
        let in_scope = |t: &Term| match t {
            Term::Bound(i) => *i < inner || vars.contains(&(i - inner)),
            _ => true,
        };
        if args_whnf.iter().all(in_scope) {
            return Ok(false);
        }
        let Some(pv) = pattern_vars(&args_whnf) else {
            let t = Term::apps(Term::Meta(meta.clone()), args_whnf);
            return Err(non_pattern(&t));
        };
        let arity = pv.len();
        let kept: Vec<usize> = (0..arity).filter(|&k| in_scope(&args_whnf[k])).collect();
        let h = self.bindings.fresh_meta(&meta.name);
        let body = Term::apps(
            Term::Meta(h),
            kept.iter().map(|&k| Term::Bound((arity - 1 - k) as u32)),
        );
        self.bindings.bind(meta, lambdas(arity, body));
        Ok(true)
    }
}

/// Head meta and arguments of a flexible term.
fn flex(t: &Term) -> Option<(Meta, Vec<Term>)> {
    let (head, args) = t.spine();
    match head {
        Term::Meta(m) => Some((m.clone(), args.into_iter().cloned().collect())),
        _ => None,
    }
}

/// Indices of the arguments when they are distinct bound variables.
fn pattern_vars(args: &[Term]) -> Option<Vec<u32>> {
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        match a {
            Term::Bound(i) if !out.contains(i) => out.push(*i),
            _ => return None,
        }
    }
    Some(out)
}

fn non_pattern(t: &Term) -> UnifyError {
    UnifyError::NonPattern(t.to_string())
}
