//! The machine player: depth-first search over machine choices with a
//! persistent work stack, a trailed meta store and copy-on-write resource
//! contexts. Environment moves clear every pending choice point.

use std::collections::HashMap;
use std::sync::Arc;

use super::env::{EnvError, EnvRequest, EnvResponse, EnvStrategy, RequestKind};
use super::transcript::{Consumption, Move, MoveKind, Outcome, Player, Transcript};
use super::{Limits, SolveError};
use crate::builtins::{self, PredError};
use crate::syntax::{parse_term, pretty, AgentDecl, Formula};
use crate::term::{beta_normalize, Meta, MetaId, Name, Term};
use crate::unify::{self, Bindings, UnifyError, UnifyOptions};

/// Reported terms larger than this many nodes are elided.
const REPORT_CAP: usize = 2000;
const MAX_DIAGNOSTICS: usize = 32;

// ---------------------------------------------------------------------------
// persistent stack

struct Node<T> {
    head: T,
    tail: List<T>,
}

struct List<T>(Option<Arc<Node<T>>>);

impl<T> Clone for List<T> {
    fn clone(&self) -> Self {
        List(self.0.clone())
    }
}

impl<T: Clone> List<T> {
    fn empty() -> Self {
        List(None)
    }

    fn push(&self, head: T) -> Self {
        List(Some(Arc::new(Node {
            head,
            tail: self.clone(),
        })))
    }

    fn pop(&self) -> Option<(T, List<T>)> {
        self.0.as_ref().map(|n| (n.head.clone(), n.tail.clone()))
    }
}

impl<T> Drop for List<T> {
    // Unlink iteratively so long stacks do not overflow on drop.
    fn drop(&mut self) {
        let mut cur = self.0.take();
        while let Some(node) = cur {
            match Arc::try_unwrap(node) {
                Ok(mut n) => cur = n.tail.0.take(),
                Err(_) => break,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// meta store

#[derive(Default)]
struct Store {
    vals: Vec<Option<Term>>,
    trail: Vec<MetaId>,
}

impl Bindings for Store {
    fn lookup(&self, id: MetaId) -> Option<&Term> {
        self.vals.get(id.0 as usize).and_then(|v| v.as_ref())
    }

    fn bind(&mut self, meta: &Meta, value: Term) {
        self.vals[meta.id.0 as usize] = Some(value);
        self.trail.push(meta.id);
    }

    fn fresh_meta(&mut self, hint: &str) -> Meta {
        let id = MetaId(self.vals.len() as u32);
        self.vals.push(None);
        Meta {
            id,
            name: hint.into(),
        }
    }
}

impl Store {
    fn undo(&mut self, trail_len: usize, metas_len: usize) {
        for id in self.trail.drain(trail_len..) {
            if let Some(v) = self.vals.get_mut(id.0 as usize) {
                *v = None;
            }
        }
        self.vals.truncate(metas_len);
    }
}

// ---------------------------------------------------------------------------
// state

#[derive(Clone)]
struct Res {
    id: u32,
    /// Site of the formula, or of the `!` node for banked entries.
    site: Arc<str>,
    f: Arc<Formula>,
    /// Hypothesis scope; 0 for the program.
    scope: u32,
}

type Sited = (Arc<Formula>, Arc<str>);

#[derive(Clone)]
struct Focus {
    f: Arc<Formula>,
    site: Arc<str>,
    target: Term,
    /// Id of the linear resource being decomposed, if any.
    origin: Option<u32>,
    scope: u32,
    subgoals: Vec<Sited>,
    leftovers: Vec<Sited>,
}

#[derive(Clone)]
enum Work {
    Prove {
        goal: Arc<Formula>,
        site: Arc<str>,
        answer: bool,
    },
    Backchain {
        target: Term,
        from: usize,
    },
    Builtin {
        atom: Term,
        from: usize,
        matched: bool,
    },
    Focus(Box<Focus>),
    Add {
        f: Arc<Formula>,
        site: Arc<str>,
        scope: u32,
    },
    Retire {
        scope: u32,
    },
    Record(Move),
}

/// Largest delayed equation the machine keeps re-checking.
const MAX_DELAYED_SIZE: usize = 4096;

#[derive(Clone)]
struct Frame {
    work: List<Work>,
    linear: Arc<Vec<Res>>,
    bank: Arc<Vec<Res>>,
    answers: Arc<Vec<(String, Meta)>>,
    /// Arithmetic equations waiting for their metas to be bound.
    delayed: Arc<Vec<(Term, Term)>>,
    next_res: u32,
    next_scope: u32,
}

struct Choice {
    frame: Frame,
    trail_len: usize,
    metas_len: usize,
    moves_len: usize,
    consumed_len: usize,
}

enum Halt {
    Fail,
    Budget,
    Error(SolveError),
}

impl From<SolveError> for Halt {
    fn from(e: SolveError) -> Self {
        Halt::Error(e)
    }
}

type Step = Result<(), Halt>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cand {
    LinAtom(usize),
    BankAtom(usize),
    LinComp(usize),
    BankComp(usize),
}

fn child(site: &str, i: usize) -> Arc<str> {
    format!("{site}/{i}").into()
}

fn tagged(site: &str, f: &Formula) -> String {
    format!("{site}/{}", f.tag())
}

/// Head constant or integer of an atom, `None` when flexible.
fn head_key(t: &Term) -> Option<&Term> {
    match t.spine().0 {
        h @ (Term::Const(_) | Term::Int(_)) => Some(h),
        _ => None,
    }
}

fn heads_compatible(a: &Term, b: &Term) -> bool {
    match (head_key(a), head_key(b)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

/// Whether focusing on `f` can end at an atom whose head matches `target`.
fn may_produce(f: &Formula, target: &Term) -> bool {
    match f {
        Formula::Atom(t) => heads_compatible(t, target),
        Formula::Impl(_, h) => may_produce(h, target),
        Formula::PAnd(a, b) | Formula::CAnd(a, b) | Formula::COr(a, b) | Formula::POr(a, b) => {
            may_produce(a, target) || may_produce(b, target)
        }
        Formula::CAll(_, b) | Formula::CEx(_, b) | Formula::Bang(b) => may_produce(b, target),
    }
}

fn push_all(mut list: List<Work>, items: Vec<Work>) -> List<Work> {
    for w in items.into_iter().rev() {
        list = list.push(w);
    }
    list
}

pub(super) struct Machine<'e> {
    env: &'e mut dyn EnvStrategy,
    limits: Limits,
    store: Store,
    frame: Frame,
    choices: Vec<Choice>,
    moves: Vec<Move>,
    consumed: Vec<Consumption>,
    steps: u64,
    diagnostics: Vec<String>,
}

impl<'e> Machine<'e> {
    pub(super) fn new(
        program: &[AgentDecl],
        query: &Formula,
        env: &'e mut dyn EnvStrategy,
        limits: Limits,
    ) -> Self {
        let mut items: Vec<Work> = program
            .iter()
            .enumerate()
            .map(|(i, d)| Work::Add {
                f: d.formula.clone(),
                site: format!("res[{i}]").into(),
                scope: 0,
            })
            .collect();
        items.push(Work::Prove {
            goal: Arc::new(query.clone()),
            site: "goal".into(),
            answer: true,
        });
        Machine {
            env,
            limits,
            store: Store::default(),
            frame: Frame {
                work: push_all(List::empty(), items),
                linear: Arc::new(Vec::new()),
                bank: Arc::new(Vec::new()),
                answers: Arc::new(Vec::new()),
                delayed: Arc::new(Vec::new()),
                next_res: 0,
                next_scope: 1,
            },
            choices: Vec::new(),
            moves: Vec::new(),
            consumed: Vec::new(),
            steps: 0,
            diagnostics: Vec::new(),
        }
    }

    pub(super) fn run(mut self) -> Result<Transcript, SolveError> {
        let outcome = loop {
            let Some((item, rest)) = self.frame.work.pop() else {
                let Some((l, r)) = self.frame.delayed.first().cloned() else {
                    break None;
                };
                let (l, r) = (unify::resolve(&self.store, &l), unify::resolve(&self.store, &r));
                self.diag(format!("arithmetic constraint {l} = {r} left undecided"));
                if !self.backtrack() {
                    break Some(Outcome::Failure);
                }
                continue;
            };
            if self.steps >= self.limits.max_steps {
                break Some(Outcome::BudgetExhausted);
            }
            self.steps += 1;
            self.frame.work = rest;
            match self.exec(item) {
                Ok(()) => {}
                Err(Halt::Fail) => {
                    if !self.backtrack() {
                        break Some(Outcome::Failure);
                    }
                }
                Err(Halt::Budget) => break Some(Outcome::BudgetExhausted),
                Err(Halt::Error(e)) => return Err(e),
            }
        };
        let mut rep = Reporter::new(&self.store, self.limits.term_fuel);
        let outcome = outcome.unwrap_or_else(|| {
            Outcome::Success(
                self.frame
                    .answers
                    .iter()
                    .map(|(name, m)| (name.clone(), rep.term(&Term::Meta(m.clone()))))
                    .collect(),
            )
        });
        let moves = rep.moves(&self.moves);
        let consumed = self
            .consumed
            .iter()
            .map(|c| Consumption {
                id: c.id,
                site: c.site.clone(),
                atom: rep.term(&c.atom),
            })
            .collect();
        Ok(Transcript {
            moves,
            consumed,
            outcome,
            steps: self.steps,
            diagnostics: self.diagnostics,
        })
    }

    fn diag(&mut self, msg: String) {
        if self.diagnostics.len() < MAX_DIAGNOSTICS && !self.diagnostics.contains(&msg) {
            self.diagnostics.push(msg);
        }
    }

    fn schedule(&mut self, items: Vec<Work>) {
        self.frame.work = push_all(self.frame.work.clone(), items);
    }

    /// Records an alternative to resume on backtracking: the current state
    /// with `items` scheduled first.
    fn push_choice(&mut self, items: Vec<Work>) {
        let mut frame = self.frame.clone();
        frame.work = push_all(frame.work, items);
        self.choices.push(Choice {
            frame,
            trail_len: self.store.trail.len(),
            metas_len: self.store.vals.len(),
            moves_len: self.moves.len(),
            consumed_len: self.consumed.len(),
        });
    }

    fn backtrack(&mut self) -> bool {
        let Some(c) = self.choices.pop() else {
            return false;
        };
        self.store.undo(c.trail_len, c.metas_len);
        self.moves.truncate(c.moves_len);
        self.consumed.truncate(c.consumed_len);
        self.frame = c.frame;
        true
    }

    fn fresh_res(&mut self) -> u32 {
        let id = self.frame.next_res;
        self.frame.next_res += 1;
        id
    }

    fn record(&mut self, who: Player, site: String, kind: MoveKind) {
        self.moves.push(Move { who, site, kind });
    }

    fn exec(&mut self, item: Work) -> Step {
        match item {
            Work::Prove { goal, site, answer } => self.prove(&goal, site, answer),
            Work::Backchain { target, from } => self.backchain(target, from),
            Work::Builtin {
                atom,
                from,
                matched,
            } => self.builtin(atom, from, matched),
            Work::Focus(f) => self.focus(*f),
            Work::Add { f, site, scope } => self.add(&f, site, scope),
            Work::Retire { scope } => {
                if self.frame.linear.iter().any(|r| r.scope == scope) {
                    Arc::make_mut(&mut self.frame.linear).retain(|r| r.scope != scope);
                }
                if self.frame.bank.iter().any(|r| r.scope == scope) {
                    Arc::make_mut(&mut self.frame.bank).retain(|r| r.scope != scope);
                }
                Ok(())
            }
            Work::Record(m) => {
                self.moves.push(m);
                Ok(())
            }
        }
    }

    // -- environment ------------------------------------------------------

    fn ask(&mut self, request: EnvRequest) -> Result<EnvResponse, Halt> {
        match self.env.respond(&request) {
            Ok(r) => Ok(r),
            Err(EnvError::Exhausted) => {
                let moves = Reporter::new(&self.store, self.limits.term_fuel).moves(&self.moves);
                Err(SolveError::EnvExhausted { request, moves }.into())
            }
            Err(EnvError::SiteMismatch { expected, actual }) => {
                Err(SolveError::SiteMismatch { expected, actual }.into())
            }
        }
    }

    fn ask_branch(&mut self, site: String, options: [&Formula; 2]) -> Result<usize, Halt> {
        let request = EnvRequest {
            site: site.clone(),
            kind: RequestKind::ChooseBranch {
                arity: options.len(),
                options: options.iter().map(|f| pretty(f)).collect(),
            },
        };
        match self.ask(request)? {
            EnvResponse::Pick(k) if k < options.len() => {
                self.record(Player::Env, site, MoveKind::Pick(k));
                self.choices.clear();
                Ok(k)
            }
            EnvResponse::Pick(k) => Err(SolveError::OutOfRange {
                site,
                pick: k,
                arity: options.len(),
            }
            .into()),
            _ => Err(SolveError::BadTerm {
                site,
                message: "a branch pick is required here".into(),
            }
            .into()),
        }
    }

    fn ask_term(&mut self, site: String, binder: &str) -> Result<Term, Halt> {
        let request = EnvRequest {
            site: site.clone(),
            kind: RequestKind::ChooseTerm {
                binder: binder.to_string(),
            },
        };
        let bad = |message: String| -> Halt {
            SolveError::BadTerm {
                site: site.clone(),
                message,
            }
            .into()
        };
        let t = match self.ask(request)? {
            EnvResponse::Witness(t) => t,
            EnvResponse::TermText(text) => parse_term(&text).map_err(|e| bad(e.to_string()))?,
            EnvResponse::Pick(_) => return Err(bad("a witness term is required here".into())),
        };
        let t = check_witness(&t, self.limits.term_fuel).map_err(bad)?;
        self.record(Player::Env, site, MoveKind::Witness(t.clone()));
        self.choices.clear();
        Ok(t)
    }

    // -- goals ------------------------------------------------------------

    fn prove(&mut self, goal: &Arc<Formula>, site: Arc<str>, answer: bool) -> Step {
        let prove = |g: &Arc<Formula>, i: usize, answer: bool| Work::Prove {
            goal: g.clone(),
            site: child(&site, i),
            answer,
        };
        match &**goal {
            Formula::Atom(t) => {
                let z = self.zonk(t)?;
                if builtin_call(&z).is_some() {
                    return self.builtin(z, 0, false);
                }
                self.backchain(z, 0)
            }
            Formula::PAnd(a, b) => {
                self.schedule(vec![prove(a, 0, answer), prove(b, 1, answer)]);
                Ok(())
            }
            Formula::POr(a, b) => {
                self.push_choice(vec![prove(b, 1, answer)]);
                self.schedule(vec![prove(a, 0, answer)]);
                Ok(())
            }
            Formula::CAnd(a, b) => {
                let k = self.ask_branch(tagged(&site, goal), [a, b])?;
                let next = if k == 0 { a } else { b };
                self.schedule(vec![prove(next, k, answer)]);
                Ok(())
            }
            Formula::COr(a, b) => {
                let at = tagged(&site, goal);
                self.push_choice(vec![
                    Work::Record(Move {
                        who: Player::Machine,
                        site: at.clone(),
                        kind: MoveKind::Pick(1),
                    }),
                    prove(b, 1, answer),
                ]);
                self.record(Player::Machine, at, MoveKind::Pick(0));
                self.schedule(vec![prove(a, 0, answer)]);
                Ok(())
            }
            Formula::CAll(x, body) => {
                let w = self.ask_term(tagged(&site, goal), x)?;
                let next = Arc::new(Formula::instantiate(body, &w));
                self.schedule(vec![prove(&next, 0, answer)]);
                Ok(())
            }
            Formula::CEx(x, body) => {
                let m = self.store.fresh_meta(x);
                if answer {
                    let name = answer_name(&self.frame.answers, x);
                    Arc::make_mut(&mut self.frame.answers).push((name, m.clone()));
                }
                let w = Term::Meta(m);
                self.record(Player::Machine, tagged(&site, goal), MoveKind::Witness(w.clone()));
                let next = Arc::new(Formula::instantiate(body, &w));
                self.schedule(vec![prove(&next, 0, answer)]);
                Ok(())
            }
            Formula::Impl(body, head) => {
                let scope = self.frame.next_scope;
                self.frame.next_scope += 1;
                self.schedule(vec![
                    Work::Add {
                        f: body.clone(),
                        site: child(&site, 0),
                        scope,
                    },
                    prove(head, 1, answer),
                    Work::Retire { scope },
                ]);
                Ok(())
            }
            Formula::Bang(_) => Err(polarity(&site, "`!` in goal position")),
        }
    }

    fn builtin(&mut self, atom: Term, from: usize, matched: bool) -> Step {
        let (name, args) = builtin_call(&atom).expect("builtin atom");
        let mut vals = Vec::with_capacity(args.len());
        for a in &args {
            vals.push(self.zonk(a)?);
        }
        match builtins::eval_pred(&name, &vals) {
            Ok(true) => Ok(()),
            Ok(false) => {
                let shown = self.zonk(&atom)?;
                self.diag(format!("builtin {shown} is false"));
                Err(Halt::Fail)
            }
            Err(PredError::NotGround(_)) if !matched => {
                // Instantiate from a hypothesis with the same head, then decide.
                let cands: Vec<Cand> = self.atom_candidates(&atom, true);
                let Some(&cand) = cands.get(from) else {
                    let shown = self.zonk(&atom)?;
                    self.diag(format!("builtin {shown} is not ground"));
                    return Err(Halt::Fail);
                };
                if from + 1 < cands.len() {
                    self.push_choice(vec![Work::Builtin {
                        atom: atom.clone(),
                        from: from + 1,
                        matched: false,
                    }]);
                }
                let hyp = match cand {
                    Cand::LinAtom(i) => self.frame.linear[i].clone(),
                    Cand::BankAtom(i) => {
                        let r = self.frame.bank[i].clone();
                        self.record(Player::Machine, format!("{}/bang", r.site), MoveKind::CopyBang);
                        r
                    }
                    _ => unreachable!("atom candidates only"),
                };
                let Formula::Atom(h) = &*hyp.f else {
                    unreachable!("atom candidates only")
                };
                self.unify(&atom, h)?;
                self.builtin(atom, 0, true)
            }
            Err(e) => {
                let shown = self.zonk(&atom)?;
                self.diag(format!("builtin {shown}: {e}"));
                Err(Halt::Fail)
            }
        }
    }

    /// Linear atoms then banked atoms whose head fits `target`. With
    /// `same_arity` the argument count must match as well.
    fn atom_candidates(&self, target: &Term, same_arity: bool) -> Vec<Cand> {
        let arity = target.spine().1.len();
        let fits = |r: &Res| match &*r.f {
            Formula::Atom(t) => {
                heads_compatible(t, target) && (!same_arity || t.spine().1.len() == arity)
            }
            _ => false,
        };
        let lin = self.frame.linear.iter().enumerate().filter(|(_, r)| fits(r));
        let bank = self.frame.bank.iter().enumerate().filter(|(_, r)| fits(r));
        lin.map(|(i, _)| Cand::LinAtom(i))
            .chain(bank.map(|(i, _)| Cand::BankAtom(i)))
            .collect()
    }

    fn candidates(&self, target: &Term) -> Vec<Cand> {
        let mut out = self.atom_candidates(target, false);
        let comp = |r: &Res| !matches!(&*r.f, Formula::Atom(_)) && may_produce(&r.f, target);
        out.extend(
            self.frame
                .linear
                .iter()
                .enumerate()
                .filter(|(_, r)| comp(r))
                .map(|(i, _)| Cand::LinComp(i)),
        );
        out.extend(
            self.frame
                .bank
                .iter()
                .enumerate()
                .filter(|(_, r)| comp(r))
                .map(|(i, _)| Cand::BankComp(i)),
        );
        out
    }

    fn backchain(&mut self, target: Term, from: usize) -> Step {
        let cands = self.candidates(&target);
        let Some(&cand) = cands.get(from) else {
            return Err(Halt::Fail);
        };
        if from + 1 < cands.len() {
            self.push_choice(vec![Work::Backchain {
                target: target.clone(),
                from: from + 1,
            }]);
        }
        match cand {
            Cand::LinAtom(i) => {
                let r = self.frame.linear[i].clone();
                let Formula::Atom(a) = &*r.f else { unreachable!() };
                self.unify(&target, a)?;
                Arc::make_mut(&mut self.frame.linear).remove(i);
                self.consumed.push(Consumption {
                    id: r.id,
                    site: r.site.to_string(),
                    atom: a.clone(),
                });
                Ok(())
            }
            Cand::BankAtom(i) => {
                let r = self.frame.bank[i].clone();
                self.record(Player::Machine, format!("{}/bang", r.site), MoveKind::CopyBang);
                let Formula::Atom(a) = &*r.f else { unreachable!() };
                self.unify(&target, a)
            }
            Cand::LinComp(i) => {
                let r = Arc::make_mut(&mut self.frame.linear).remove(i);
                self.focus(Focus {
                    f: r.f,
                    site: r.site,
                    target,
                    origin: Some(r.id),
                    scope: r.scope,
                    subgoals: Vec::new(),
                    leftovers: Vec::new(),
                })
            }
            Cand::BankComp(i) => {
                let r = self.frame.bank[i].clone();
                self.record(Player::Machine, format!("{}/bang", r.site), MoveKind::CopyBang);
                self.focus(Focus {
                    f: r.f,
                    site: child(&r.site, 0),
                    target,
                    origin: None,
                    scope: r.scope,
                    subgoals: Vec::new(),
                    leftovers: Vec::new(),
                })
            }
        }
    }

    // -- resources ----------------------------------------------------------

    fn focus(&mut self, mut fc: Focus) -> Step {
        let f = fc.f.clone();
        let site = fc.site.clone();
        let next = |fc: &Focus, f: &Arc<Formula>, i: usize| Focus {
            f: f.clone(),
            site: child(&site, i),
            ..fc.clone()
        };
        match &*f {
            Formula::Atom(a) => {
                self.unify(&fc.target, a)?;
                let id = match fc.origin {
                    Some(id) => id,
                    None => self.fresh_res(),
                };
                self.consumed.push(Consumption {
                    id,
                    site: site.to_string(),
                    atom: a.clone(),
                });
                let mut items: Vec<Work> = fc
                    .subgoals
                    .iter()
                    .map(|(g, s)| Work::Prove {
                        goal: g.clone(),
                        site: s.clone(),
                        answer: false,
                    })
                    .collect();
                items.extend(fc.leftovers.iter().map(|(l, s)| Work::Add {
                    f: l.clone(),
                    site: s.clone(),
                    scope: fc.scope,
                }));
                self.schedule(items);
                Ok(())
            }
            Formula::Impl(body, head) => {
                fc.subgoals.push((body.clone(), child(&site, 0)));
                let n = next(&fc, head, 1);
                self.focus(n)
            }
            Formula::PAnd(a, b) => {
                let mut opts = Vec::new();
                for (i, (x, y)) in [(a, b), (b, a)].into_iter().enumerate() {
                    if may_produce(x, &fc.target) {
                        let mut n = next(&fc, x, i);
                        n.leftovers.push((y.clone(), child(&site, 1 - i)));
                        opts.push(n);
                    }
                }
                let mut opts = opts.into_iter();
                let first = opts.next().ok_or(Halt::Fail)?;
                if let Some(second) = opts.next() {
                    self.push_choice(vec![Work::Focus(Box::new(second))]);
                }
                self.focus(first)
            }
            Formula::CAnd(a, b) => {
                let at = tagged(&site, &f);
                let opts: Vec<usize> = [a, b]
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| may_produce(x, &fc.target))
                    .map(|(i, _)| i)
                    .collect();
                let pick = |k: usize| if k == 0 { a } else { b };
                let first = *opts.first().ok_or(Halt::Fail)?;
                if let Some(&second) = opts.get(1) {
                    self.push_choice(vec![
                        Work::Record(Move {
                            who: Player::Machine,
                            site: at.clone(),
                            kind: MoveKind::Pick(second),
                        }),
                        Work::Focus(Box::new(next(&fc, pick(second), second))),
                    ]);
                }
                self.record(Player::Machine, at, MoveKind::Pick(first));
                let n = next(&fc, pick(first), first);
                self.focus(n)
            }
            Formula::CAll(x, body) => {
                let m = Term::Meta(self.store.fresh_meta(x));
                self.record(Player::Machine, tagged(&site, &f), MoveKind::Witness(m.clone()));
                let inst = Arc::new(Formula::instantiate(body, &m));
                let n = next(&fc, &inst, 0);
                self.focus(n)
            }
            Formula::COr(a, b) => {
                let k = self.ask_branch(tagged(&site, &f), [a, b])?;
                let n = next(&fc, if k == 0 { a } else { b }, k);
                self.focus(n)
            }
            Formula::CEx(x, body) => {
                let w = self.ask_term(tagged(&site, &f), x)?;
                let inst = Arc::new(Formula::instantiate(body, &w));
                let n = next(&fc, &inst, 0);
                self.focus(n)
            }
            Formula::Bang(a) => {
                self.record(Player::Machine, tagged(&site, &f), MoveKind::CopyBang);
                let id = self.fresh_res();
                Arc::make_mut(&mut self.frame.bank).push(Res {
                    id,
                    site: site.clone(),
                    f: a.clone(),
                    scope: fc.scope,
                });
                let n = next(&fc, a, 0);
                self.focus(n)
            }
            Formula::POr(..) => Err(polarity(&site, "`|` in resource position")),
        }
    }

    /// Adds a resource, splitting `*`, banking `!` and asking the
    /// environment to resolve `+` and `exists` right away.
    fn add(&mut self, f: &Arc<Formula>, site: Arc<str>, scope: u32) -> Step {
        match &**f {
            Formula::PAnd(a, b) => {
                self.schedule(vec![
                    Work::Add {
                        f: a.clone(),
                        site: child(&site, 0),
                        scope,
                    },
                    Work::Add {
                        f: b.clone(),
                        site: child(&site, 1),
                        scope,
                    },
                ]);
                Ok(())
            }
            Formula::Bang(a) => {
                let id = self.fresh_res();
                Arc::make_mut(&mut self.frame.bank).push(Res {
                    id,
                    site,
                    f: a.clone(),
                    scope,
                });
                Ok(())
            }
            Formula::COr(a, b) => {
                let k = self.ask_branch(tagged(&site, f), [a, b])?;
                let next = if k == 0 { a } else { b };
                self.schedule(vec![Work::Add {
                    f: next.clone(),
                    site: child(&site, k),
                    scope,
                }]);
                Ok(())
            }
            Formula::CEx(x, body) => {
                let w = self.ask_term(tagged(&site, f), x)?;
                self.schedule(vec![Work::Add {
                    f: Arc::new(Formula::instantiate(body, &w)),
                    site: child(&site, 0),
                    scope,
                }]);
                Ok(())
            }
            Formula::POr(..) => Err(polarity(&site, "`|` in resource position")),
            Formula::Atom(_) | Formula::Impl(..) | Formula::CAnd(..) | Formula::CAll(..) => {
                let id = self.fresh_res();
                Arc::make_mut(&mut self.frame.linear).push(Res {
                    id,
                    site,
                    f: f.clone(),
                    scope,
                });
                Ok(())
            }
        }
    }

    // -- terms --------------------------------------------------------------

    fn unify(&mut self, a: &Term, b: &Term) -> Step {
        let stuck = self.unify_postponing(a, b)?;
        if !stuck.is_empty() {
            Arc::make_mut(&mut self.frame.delayed).extend(stuck);
        }
        self.wake()
    }

    fn unify_postponing(&mut self, a: &Term, b: &Term) -> Result<Vec<(Term, Term)>, Halt> {
        let opts = UnifyOptions {
            arithmetic: true,
            fuel: self.limits.term_fuel,
        };
        match unify::unify_postponing(&mut self.store, a, b, opts) {
            Ok(stuck) => Ok(stuck),
            Err(UnifyError::Failure) => Err(Halt::Fail),
            Err(UnifyError::Fuel(_)) => {
                self.diag("term fuel exhausted during unification".into());
                Err(Halt::Budget)
            }
            Err(e) => {
                let (x, y) = (self.zonk(a)?, self.zonk(b)?);
                self.diag(format!("cannot unify {x} with {y}: {e}"));
                Err(Halt::Fail)
            }
        }
    }

    /// Re-checks delayed equations whose metas have been bound since they
    /// were postponed, until none changes.
    fn wake(&mut self) -> Step {
        loop {
            if self.frame.delayed.is_empty() {
                return Ok(());
            }
            let pending = std::mem::take(Arc::make_mut(&mut self.frame.delayed));
            let mut kept = Vec::with_capacity(pending.len());
            let mut changed = false;
            for (l, r) in pending {
                let (l2, r2) = (unify::resolve(&self.store, &l), unify::resolve(&self.store, &r));
                if l2 == l && r2 == r {
                    kept.push((l, r));
                    continue;
                }
                changed = true;
                if l2.size() + r2.size() > MAX_DELAYED_SIZE {
                    self.diag(format!(
                        "arithmetic constraint grew past {MAX_DELAYED_SIZE} nodes without being decided"
                    ));
                    return Err(Halt::Budget);
                }
                kept.extend(self.unify_postponing(&l2, &r2)?);
            }
            self.frame.delayed = Arc::new(kept);
            if !changed {
                return Ok(());
            }
        }
    }

    /// Resolves bound metas, beta-normalizes and folds ground arithmetic.
    fn zonk(&mut self, t: &Term) -> Result<Term, Halt> {
        let r = unify::resolve(&self.store, t);
        let r = if r.is_normal() {
            r
        } else {
            match beta_normalize(&r, self.limits.term_fuel) {
                Ok(n) => n,
                Err(_) => {
                    self.diag(format!("term fuel exhausted normalizing {r}"));
                    return Err(Halt::Budget);
                }
            }
        };
        Ok(builtins::fold_arith(&r).unwrap_or(r))
    }
}

fn polarity(site: &str, message: &str) -> Halt {
    SolveError::Polarity(super::PolarityError {
        site: site.to_string(),
        message: message.to_string(),
    })
    .into()
}

/// Name and arguments when `t` is a call of a builtin predicate.
fn builtin_call(t: &Term) -> Option<(String, Vec<Term>)> {
    let (head, args) = t.spine();
    match head {
        Term::Const(c) if builtins::is_builtin_pred(c, args.len()) => {
            Some((c.to_string(), args.into_iter().cloned().collect()))
        }
        _ => None,
    }
}

fn answer_name(existing: &[(String, Meta)], hint: &Name) -> String {
    let taken = |n: &str| existing.iter().any(|(e, _)| e == n);
    if !taken(hint) {
        return hint.to_string();
    }
    (2..)
        .map(|k| format!("{hint}_{k}"))
        .find(|n| !taken(n))
        .expect("unbounded")
}

/// Validates an environment witness: closed, free of metas, normalized and
/// arithmetic-folded.
pub(crate) fn check_witness(t: &Term, fuel: u64) -> Result<Term, String> {
    if !t.is_closed() {
        return Err(format!("witness `{t}` has unbound variables"));
    }
    if !t.is_ground() {
        return Err(format!("witness `{t}` contains unknowns"));
    }
    let n = beta_normalize(t, fuel).map_err(|_| format!("witness `{t}` does not normalize"))?;
    builtins::fold_arith(&n).map_err(|e| format!("witness `{t}`: {e}"))
}

/// Resolves terms for reporting. Meta values are memoized and capped so
/// long binding chains stay cheap.
struct Reporter<'s> {
    store: &'s Store,
    fuel: u64,
    memo: HashMap<MetaId, (Term, usize)>,
}

impl<'s> Reporter<'s> {
    fn new(store: &'s Store, fuel: u64) -> Self {
        let mut r = Reporter {
            store,
            fuel,
            memo: HashMap::new(),
        };
        // Later metas are usually bound deeper in a chain; resolving them
        // first keeps the recursion shallow.
        for id in (0..store.vals.len() as u32).rev() {
            if store.vals[id as usize].is_some() {
                r.resolve_meta(MetaId(id), "");
            }
        }
        r
    }

    fn resolve_meta(&mut self, id: MetaId, name: &str) -> (Term, usize) {
        if let Some(v) = self.memo.get(&id) {
            return v.clone();
        }
        let Some(value) = self.store.lookup(id) else {
            return (
                Term::Meta(Meta {
                    id,
                    name: name.into(),
                }),
                1,
            );
        };
        let (r, size) = self.resolve(&value.clone());
        let out = if size > REPORT_CAP {
            (Term::constant("..."), size)
        } else {
            let n = beta_normalize(&r, self.fuel).unwrap_or(r);
            let n = builtins::fold_arith(&n).unwrap_or(n);
            let s = n.size();
            (n, s)
        };
        self.memo.insert(id, out.clone());
        out
    }

    fn resolve(&mut self, t: &Term) -> (Term, usize) {
        match t {
            Term::Meta(m) => self.resolve_meta(m.id, &m.name),
            Term::App(f, a) => {
                let (f, sf) = self.resolve(f);
                let (a, sa) = self.resolve(a);
                (Term::app(f, a), 1 + sf.saturating_add(sa).min(REPORT_CAP))
            }
            Term::Lam(x, b) => {
                let (b, sb) = self.resolve(b);
                (Term::Lam(x.clone(), b.into()), 1 + sb)
            }
            _ => (t.clone(), 1),
        }
    }

    fn term(&mut self, t: &Term) -> Term {
        let (r, size) = self.resolve(t);
        if size > REPORT_CAP {
            return Term::constant("...");
        }
        let n = beta_normalize(&r, self.fuel).unwrap_or(r);
        builtins::fold_arith(&n).unwrap_or(n)
    }

    fn moves(&mut self, moves: &[Move]) -> Vec<Move> {
        moves
            .iter()
            .map(|m| Move {
                who: m.who,
                site: m.site.clone(),
                kind: match &m.kind {
                    MoveKind::Witness(t) => MoveKind::Witness(self.term(t)),
                    k => k.clone(),
                },
            })
            .collect()
    }
}
