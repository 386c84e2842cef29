use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::term::{MetaId, Name, Term};

/// Task formulas. Quantifiers bind de Bruijn index 0 in their body, sharing
/// the index space with lambda binders inside atoms.
#[derive(Clone, Debug)]
pub enum Formula {
    Atom(Term),
    /// `body -> head`
    Impl(Arc<Formula>, Arc<Formula>),
    /// parallel conjunction `*`
    PAnd(Arc<Formula>, Arc<Formula>),
    /// parallel disjunction `|`
    POr(Arc<Formula>, Arc<Formula>),
    /// choice conjunction `&`
    CAnd(Arc<Formula>, Arc<Formula>),
    /// choice disjunction `+`
    COr(Arc<Formula>, Arc<Formula>),
    /// choice universal `forall x.`
    CAll(Name, Arc<Formula>),
    /// choice existential `exists x.`
    CEx(Name, Arc<Formula>),
    /// replication `!`
    Bang(Arc<Formula>),
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        use Formula::*;
        match (self, other) {
            (Atom(a), Atom(b)) => a == b,
            (Impl(a, b), Impl(c, d))
            | (PAnd(a, b), PAnd(c, d))
            | (POr(a, b), POr(c, d))
            | (CAnd(a, b), CAnd(c, d))
            | (COr(a, b), COr(c, d)) => a == c && b == d,
            (CAll(_, a), CAll(_, b)) | (CEx(_, a), CEx(_, b)) => a == b,
            (Bang(a), Bang(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Formula {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentDecl {
    pub name: String,
    pub formula: Arc<Formula>,
}

impl Formula {
    pub fn atom(t: Term) -> Formula {
        Formula::Atom(t)
    }

    pub fn imp(body: Formula, head: Formula) -> Formula {
        Formula::Impl(Arc::new(body), Arc::new(head))
    }

    pub fn pand(a: Formula, b: Formula) -> Formula {
        Formula::PAnd(Arc::new(a), Arc::new(b))
    }

    pub fn por(a: Formula, b: Formula) -> Formula {
        Formula::POr(Arc::new(a), Arc::new(b))
    }

    pub fn cand(a: Formula, b: Formula) -> Formula {
        Formula::CAnd(Arc::new(a), Arc::new(b))
    }

    pub fn cor(a: Formula, b: Formula) -> Formula {
        Formula::COr(Arc::new(a), Arc::new(b))
    }

    pub fn call(x: &str, body: Formula) -> Formula {
        Formula::CAll(x.into(), Arc::new(body))
    }

    pub fn cex(x: &str, body: Formula) -> Formula {
        Formula::CEx(x.into(), Arc::new(body))
    }

    pub fn bang(a: Formula) -> Formula {
        Formula::Bang(Arc::new(a))
    }

    /// Short operator tag used in site paths.
    pub fn tag(&self) -> &'static str {
        match self {
            Formula::Atom(_) => "atom",
            Formula::Impl(..) => "impl",
            Formula::PAnd(..) => "pand",
            Formula::POr(..) => "por",
            Formula::CAnd(..) => "cand",
            Formula::COr(..) => "cor",
            Formula::CAll(..) => "call",
            Formula::CEx(..) => "cex",
            Formula::Bang(_) => "bang",
        }
    }

    pub fn children(&self) -> Vec<&Arc<Formula>> {
        match self {
            Formula::Atom(_) => vec![],
            Formula::Impl(a, b)
            | Formula::PAnd(a, b)
            | Formula::POr(a, b)
            | Formula::CAnd(a, b)
            | Formula::COr(a, b) => vec![a, b],
            Formula::CAll(_, a) | Formula::CEx(_, a) | Formula::Bang(a) => vec![a],
        }
    }

    /// Opens the outermost quantifier of `body` with `witness`. The witness
    /// must be closed.
    pub fn instantiate(body: &Formula, witness: &Term) -> Formula {
        body.map_terms_at(0, &|t, depth| t.instantiate_at(depth, witness))
    }

    /// Applies `f(term, binder_depth)` to every atom.
    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Formula {
        self.map_terms_at(0, &|t, _| f(t))
    }

    fn map_terms_at(&self, depth: u32, f: &dyn Fn(&Term, u32) -> Term) -> Formula {
        let rec = |a: &Arc<Formula>, d: u32| Arc::new(a.map_terms_at(d, f));
        match self {
            Formula::Atom(t) => Formula::Atom(f(t, depth)),
            Formula::Impl(a, b) => Formula::Impl(rec(a, depth), rec(b, depth)),
            Formula::PAnd(a, b) => Formula::PAnd(rec(a, depth), rec(b, depth)),
            Formula::POr(a, b) => Formula::POr(rec(a, depth), rec(b, depth)),
            Formula::CAnd(a, b) => Formula::CAnd(rec(a, depth), rec(b, depth)),
            Formula::COr(a, b) => Formula::COr(rec(a, depth), rec(b, depth)),
            Formula::CAll(x, a) => Formula::CAll(x.clone(), rec(a, depth + 1)),
            Formula::CEx(x, a) => Formula::CEx(x.clone(), rec(a, depth + 1)),
            Formula::Bang(a) => Formula::Bang(rec(a, depth)),
        }
    }

    pub fn closed_under(&self, depth: u32) -> bool {
        match self {
            Formula::Atom(t) => t.closed_under(depth),
            Formula::CAll(_, a) | Formula::CEx(_, a) => a.closed_under(depth + 1),
            _ => self.children().iter().all(|c| c.closed_under(depth)),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed_under(0)
    }

    pub fn metas(&self) -> BTreeSet<MetaId> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |t| out.extend(t.metas()));
        out
    }

    pub fn visit_atoms(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Formula::Atom(t) => f(t),
            _ => {
                for c in self.children() {
                    c.visit_atoms(f);
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(t) => t.size(),
            _ => 1 + self.children().iter().map(|c| c.size()).sum::<usize>(),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::pretty(self))
    }
}
