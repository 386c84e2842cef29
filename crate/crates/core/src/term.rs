//! Untyped lambda terms in de Bruijn form.
//!
//! Bound variables are indices counting enclosing `Lam` binders (and, inside
//! formulas, enclosing quantifiers). Binder names are kept only as printing
//! hints and are ignored by equality, so `==` on terms is alpha-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub type Name = Arc<str>;

/// Step budget used when no explicit fuel is given.
pub const DEFAULT_FUEL: u64 = 100_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetaId(pub u32);

/// A unification variable. Equality is by id only.
#[derive(Clone, Debug)]
pub struct Meta {
    pub id: MetaId,
    pub name: Name,
}

impl PartialEq for Meta {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Meta {}

#[derive(Clone, Debug)]
pub enum Term {
    Const(Name),
    Int(i64),
    /// de Bruijn index of an enclosing binder.
    Bound(u32),
    Meta(Meta),
    App(Arc<Term>, Arc<Term>),
    /// Binder name hint plus body.
    Lam(Name, Arc<Term>),
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Term::Const(a), Term::Const(b)) => a == b,
            (Term::Int(a), Term::Int(b)) => a == b,
            (Term::Bound(a), Term::Bound(b)) => a == b,
            (Term::Meta(a), Term::Meta(b)) => a == b,
            (Term::App(f, a), Term::App(g, b)) => f == g && a == b,
            (Term::Lam(_, a), Term::Lam(_, b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Term {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("normalization fuel exhausted")]
pub struct FuelExhausted;

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Const(name.into())
    }

    pub fn int(value: i64) -> Term {
        Term::Int(value)
    }

    pub fn meta(id: u32, name: &str) -> Term {
        Term::Meta(Meta {
            id: MetaId(id),
            name: name.into(),
        })
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Arc::new(fun), Arc::new(arg))
    }

    pub fn apps(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    pub fn lam(name: &str, body: Term) -> Term {
        Term::Lam(name.into(), Arc::new(body))
    }

    /// Splits `h a1 .. an` into its head and arguments.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Term::App(f, a) = cur {
            args.push(a.as_ref());
            cur = f.as_ref();
        }
        args.reverse();
        (cur, args)
    }

    /// Name of the constant at the head of the spine, if any.
    pub fn head_symbol(&self) -> Option<&str> {
        match self.spine().0 {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_meta(&self) -> bool {
        matches!(self, Term::Meta(_))
    }

    /// Adds `by` to every index at or above `cutoff`.
    pub fn shift(&self, by: i64, cutoff: u32) -> Term {
        if by == 0 {
            return self.clone();
        }
        match self {
            Term::Bound(i) if *i >= cutoff => {
                let shifted = *i as i64 + by;
                debug_assert!(shifted >= 0, "negative de Bruijn index");
                Term::Bound(shifted as u32)
            }
            Term::App(f, a) => Term::app(f.shift(by, cutoff), a.shift(by, cutoff)),
            Term::Lam(x, b) => Term::Lam(x.clone(), Arc::new(b.shift(by, cutoff + 1))),
            _ => self.clone(),
        }
    }

    /// Substitutes `arg` for the outermost loose index of `self` (index 0 at
    /// the top level) and lowers the remaining loose indices by one. This is
    /// the body half of a beta step.
    pub fn instantiate(&self, arg: &Term) -> Term {
        self.instantiate_at(0, arg)
    }

    pub(crate) fn instantiate_at(&self, depth: u32, arg: &Term) -> Term {
        match self {
            Term::Bound(i) if *i == depth => arg.shift(depth as i64, 0),
            Term::Bound(i) if *i > depth => Term::Bound(i - 1),
            Term::App(f, a) => {
                Term::app(f.instantiate_at(depth, arg), a.instantiate_at(depth, arg))
            }
            Term::Lam(x, b) => Term::Lam(x.clone(), Arc::new(b.instantiate_at(depth + 1, arg))),
            _ => self.clone(),
        }
    }

    /// True when the term has no index pointing past `depth` binders.
    pub fn closed_under(&self, depth: u32) -> bool {
        match self {
            Term::Bound(i) => *i < depth,
            Term::App(f, a) => f.closed_under(depth) && a.closed_under(depth),
            Term::Lam(_, b) => b.closed_under(depth + 1),
            _ => true,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed_under(0)
    }

    /// Closed and free of metas.
    pub fn is_ground(&self) -> bool {
        self.is_closed() && self.metas().is_empty()
    }

    pub fn metas(&self) -> BTreeSet<MetaId> {
        let mut out = BTreeSet::new();
        self.collect_metas(&mut out);
        out
    }

    fn collect_metas(&self, out: &mut BTreeSet<MetaId>) {
        match self {
            Term::Meta(m) => {
                out.insert(m.id);
            }
            Term::App(f, a) => {
                f.collect_metas(out);
                a.collect_metas(out);
            }
            Term::Lam(_, b) => b.collect_metas(out),
            _ => {}
        }
    }

    pub fn max_meta_id(&self) -> Option<u32> {
        self.metas().iter().next_back().map(|m| m.0)
    }

    pub fn occurs(&self, id: MetaId) -> bool {
        match self {
            Term::Meta(m) => m.id == id,
            Term::App(f, a) => f.occurs(id) || a.occurs(id),
            Term::Lam(_, b) => b.occurs(id),
            _ => false,
        }
    }

    /// No subterm of the form `(\x. b) a`.
    pub fn is_normal(&self) -> bool {
        match self {
            Term::App(f, a) => {
                !matches!(f.as_ref(), Term::Lam(..)) && f.is_normal() && a.is_normal()
            }
            Term::Lam(_, b) => b.is_normal(),
            _ => true,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::App(f, a) => 1 + f.size() + a.size(),
            Term::Lam(_, b) => 1 + b.size(),
            _ => 1,
        }
    }

    /// Replaces metas using `lookup`, following chains in the image.
    pub fn replace_metas(&self, lookup: &dyn Fn(MetaId) -> Option<Term>) -> Term {
        match self {
            Term::Meta(m) => match lookup(m.id) {
                Some(t) => t.replace_metas(lookup),
                None => self.clone(),
            },
            Term::App(f, a) => Term::app(f.replace_metas(lookup), a.replace_metas(lookup)),
            Term::Lam(x, b) => Term::Lam(x.clone(), Arc::new(b.replace_metas(lookup))),
            _ => self.clone(),
        }
    }
}

/// Full normal-order beta normalization. Each beta step consumes one unit
/// of `fuel`.
pub fn beta_normalize(t: &Term, fuel: u64) -> Result<Term, FuelExhausted> {
    let mut remaining = fuel;
    normalize_with(t, &mut remaining)
}

pub(crate) fn normalize_with(t: &Term, fuel: &mut u64) -> Result<Term, FuelExhausted> {
    match t {
        Term::Lam(x, b) => Ok(Term::Lam(x.clone(), Arc::new(normalize_with(b, fuel)?))),
        Term::App(..) => {
            let (head, args) = t.spine();
            let mut head = head.clone();
            let mut args: Vec<Term> = args.into_iter().cloned().collect();
            args.reverse(); // pop from the end = leftmost argument
            loop {
                match head {
                    Term::Lam(_, body) if !args.is_empty() => {
                        if *fuel == 0 {
                            return Err(FuelExhausted);
                        }
                        *fuel -= 1;
                        let arg = args.pop().expect("non-empty");
                        let reduced = body.instantiate(&arg);
                        let (h, more) = reduced.spine();
                        let h = h.clone();
                        args.extend(more.into_iter().rev().cloned());
                        head = h;
                    }
                    _ => break,
                }
            }
            let head = match head {
                Term::Lam(..) => normalize_with(&head, fuel)?,
                other => other,
            };
            let mut out = head;
            while let Some(a) = args.pop() {
                out = Term::app(out, normalize_with(&a, fuel)?);
            }
            Ok(out)
        }
        _ => Ok(t.clone()),
    }
}

/// Alpha-equivalence. Indices make this structural equality.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    a == b
}

/// Idempotent map from metas to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<MetaId, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, id: MetaId) -> Option<&Term> {
        self.map.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MetaId, &Term)> {
        self.map.iter()
    }

    pub fn max_meta_id(&self) -> Option<u32> {
        self.map
            .iter()
            .flat_map(|(k, v)| std::iter::once(k.0).chain(v.max_meta_id()))
            .max()
    }

    /// Adds `id ↦ value`, keeping the map idempotent. The caller guarantees
    /// that `id` does not occur in `value` once the existing entries are
    /// applied to it.
    pub fn insert(&mut self, id: MetaId, value: Term) {
        let value = apply_subst(self, &value);
        debug_assert!(!value.occurs(id), "occurs-check violated on insert");
        let single = |m: MetaId| (m == id).then(|| value.clone());
        for image in self.map.values_mut() {
            if image.occurs(id) {
                *image = normalize_or_keep(image.replace_metas(&single));
            }
        }
        self.map.insert(id, value);
    }

    /// True when applying the substitution to its own images changes nothing.
    pub fn is_idempotent(&self) -> bool {
        self.map.values().all(|v| v.metas().iter().all(|m| !self.map.contains_key(m)))
    }
}

impl FromIterator<(MetaId, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (MetaId, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, v) in iter {
            s.insert(k, v);
        }
        s
    }
}

fn normalize_or_keep(t: Term) -> Term {
    if t.is_normal() {
        return t;
    }
    beta_normalize(&t, DEFAULT_FUEL).unwrap_or(t)
}

/// Replaces every meta in the domain of `sigma` and re-normalizes. A term
/// that does not normalize within the default fuel is returned unreduced.
pub fn apply_subst(sigma: &Substitution, t: &Term) -> Term {
    if sigma.is_empty() {
        return t.clone();
    }
    let replaced = t.replace_metas(&|m| sigma.get(m).cloned());
    normalize_or_keep(replaced)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::pretty_term(self))
    }
}
