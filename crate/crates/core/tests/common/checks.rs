//! Engine invariants and acceptance criteria as plain functions, so the
//! acceptance target and the individual test files share them.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use taskcl::engine::{
    self, verify_winnable, Domains, EnvError, EnvRequest, EnvResponse, EnvStrategy, Limits, Move, MoveKind, Outcome,
    Player, SolveError, Transcript,
};
use taskcl::session::{http::router, SessionRegistry};
use taskcl::syntax::{parse_program, AgentDecl, Formula, MoveEntry, MovePayload};
use taskcl::term::Term;
use tower::ServiceExt;

use super::objects::{horn_object_cases, object_expected, object_query};
use super::*;

pub type Check = Result<(), String>;
pub type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run_play(p: &Play, limits: Limits) -> Result<Transcript, String> {
    solve_with(&corpus(p.program), p.query, p.moves.clone(), limits).map_err(|e| e.to_string())
}

pub fn factorial_reproduction() -> Check {
    let start = Instant::now();
    let t = run_play(
        &Play { program: "factorial.taskcl", query: FACT_QUERY, moves: script("moves/y5.json") },
        Limits::default(),
    )?;
    let took = start.elapsed();
    ensure!(t.outcome == Outcome::Success(vec![("Z".into(), Term::int(120))]), "outcome {:?}", t.outcome);
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(())
}

pub fn factorial_sweep() -> Check {
    let program = corpus("factorial.taskcl");
    let start = Instant::now();
    for n in 0..7u32 {
        let t = solve_with(&program, FACT_QUERY, vec![MoveEntry::term(&n.to_string())], Limits::default())
            .map_err(|e| e.to_string())?;
        let want = Term::int(factorial_oracle(n));
        ensure!(t.outcome.binding("Z") == Some(&want), "n={n}: {:?}, oracle {want}", t.outcome);
    }
    ensure!(start.elapsed() < Duration::from_secs(1), "took {:?}", start.elapsed());
    Ok(())
}

pub fn lottery_dialogues() -> Check {
    let program = corpus("lottery.taskcl");
    for k in 0..2usize {
        let t = solve_with(&program, LOTTERY_QUERY, script(&format!("moves/pick{k}.json")), Limits::default())
            .map_err(|e| e.to_string())?;
        ensure!(t.outcome.is_success(), "pick {k}: {:?}", t.outcome);
        let last = t.moves.last().ok_or("empty transcript")?;
        ensure!(
            last.who == Player::Machine && last.site == "goal/cor" && last.kind == MoveKind::Pick(k),
            "pick {k}: last move {last:?}"
        );
    }
    let r = verify_winnable(&program, &query(LOTTERY_QUERY), &Domains::new(), Limits::default())
        .map_err(|e| e.to_string())?;
    ensure!(r.winnable && r.plays == 2, "winnable {} plays {}", r.winnable, r.plays);
    Ok(())
}

/// Each linear resource id is consumed at most once.
pub fn linear(t: &Transcript) -> Check {
    let ids: BTreeSet<u32> = t.consumed.iter().map(|c| c.id).collect();
    ensure!(ids.len() == t.consumed.len(), "a resource was consumed twice: {:?}", t.consumed);
    Ok(())
}

pub fn fastfood_run() -> Check {
    let program = corpus("fastfood.taskcl");
    let t = solve_with(&program, FASTFOOD_QUERY, script("moves/pay5.json"), Limits::default()).map_err(|e| e.to_string())?;
    ensure!(t.outcome.is_success(), "pay 5: {:?}", t.outcome);
    let mut atoms: Vec<String> = t.consumed.iter().map(|c| c.atom.to_string()).collect();
    atoms.sort();
    ensure!(atoms == ["m(2)", "m(coke)", "m(ham)"], "consumed {atoms:?}");
    linear(&t)?;
    let t = solve_with(&program, FASTFOOD_QUERY, script("moves/pay2.json"), Limits::default()).map_err(|e| e.to_string())?;
    ensure!(t.outcome == Outcome::Failure, "pay 2: {:?}", t.outcome);
    ensure!(t.diagnostics.iter().any(|d| d.contains("geq(2, 3)")), "diagnostics {:?}", t.diagnostics);
    Ok(())
}

pub fn horn_corpus() -> Check {
    let program = corpus("horn_interp.taskcl");
    let t = solve_with(&program, HORN_QUERY, vec![], Limits::default()).map_err(|e| e.to_string())?;
    ensure!(t.outcome.is_success(), "{:?}", t.outcome);
    let x = t
        .moves
        .iter()
        .find(|m| m.site == "res[6]/0/0/0/call")
        .ok_or("no instantiation of rule 7's X")?;
    ensure!(x.kind == MoveKind::Witness(Term::constant("a")), "X = {:?}", x.kind);
    let cases = horn_object_cases();
    ensure!(cases.len() >= 5, "only {} object cases", cases.len());
    for (i, (d, g)) in cases.iter().enumerate() {
        let want = object_expected(d, g);
        let t = solve_with(&program, &object_query(d, g), vec![], Limits::default()).map_err(|e| e.to_string())?;
        ensure!(t.outcome.is_success() == want, "case {i}: oracle says {want}, engine {:?}", t.outcome);
    }
    Ok(())
}

pub fn horn_conservativity() -> Check {
    let start = Instant::now();
    let mut rng = seeded_rng(1);
    for i in 0..100 {
        let h = random_horn(&mut rng);
        let want = sld_provable(&h.clauses, &h.goal, 64).ok_or("oracle depth bound hit")?;
        let program = parse_program(&h.program_text()).map_err(|e| e.to_string())?;
        let t = solve_with(&program, &h.query_text(), vec![], Limits::default()).map_err(|e| e.to_string())?;
        ensure!(
            t.outcome != Outcome::BudgetExhausted && t.outcome.is_success() == want,
            "instance {i}: oracle {want}, engine {:?}\n{}?- {}",
            t.outcome,
            h.program_text(),
            h.query_text()
        );
    }
    ensure!(start.elapsed() < Duration::from_secs(30), "took {:?}", start.elapsed());
    Ok(())
}

pub fn replay_determinism() -> Check {
    for (label, p) in corpus_plays() {
        let a = run_play(&p, Limits::default())?;
        let b = run_play(&p, Limits::default())?;
        ensure!(a == b, "{label}: two runs differ");
        let program = corpus(p.program);
        let (q, moves) = (p.query, p.moves.clone());
        let c = std::thread::spawn(move || solve_with(&program, q, moves, Limits::default()))
            .join()
            .map_err(|_| "thread panicked")?
            .map_err(|e| e.to_string())?;
        ensure!(a == c, "{label}: run on another thread differs");
    }
    Ok(())
}

/// Records every request and refuses it.
#[derive(Default)]
pub struct RefusingEnv {
    pub asked: Vec<EnvRequest>,
}

impl EnvStrategy for RefusingEnv {
    fn respond(&mut self, r: &EnvRequest) -> Result<EnvResponse, EnvError> {
        self.asked.push(r.clone());
        Err(EnvError::Exhausted)
    }
}

/// Env-free plays never consult the environment and still get the right
/// answer.
pub fn environment_freedom() -> Check {
    let mut cases: Vec<(Vec<AgentDecl>, String, bool)> = vec![
        (corpus("horn_interp.taskcl"), HORN_QUERY.to_string(), true),
        (corpus("factorial.taskcl"), "fact(5, 120)".to_string(), true),
        (corpus("factorial.taskcl"), "fact(4, 25)".to_string(), false),
    ];
    for (d, g) in horn_object_cases() {
        cases.push((corpus("horn_interp.taskcl"), object_query(&d, &g), object_expected(&d, &g)));
    }
    let mut rng = seeded_rng(3);
    for _ in 0..30 {
        let h = random_horn(&mut rng);
        let want = sld_provable(&h.clauses, &h.goal, 64).ok_or("oracle depth bound hit")?;
        cases.push((parse_program(&h.program_text()).unwrap(), h.query_text(), want));
    }
    for (program, q, want) in cases {
        let mut env = RefusingEnv::default();
        let t = engine::solve(&program, &query(&q), &mut env, Limits::default()).map_err(|e| format!("{q}: {e}"))?;
        ensure!(env.asked.is_empty(), "{q}: environment consulted at {:?}", env.asked);
        ensure!(t.outcome.is_success() == want, "{q}: {:?}", t.outcome);
    }
    // fact(5, Z) must also produce the value
    let mut env = RefusingEnv::default();
    let t = engine::solve(&corpus("factorial.taskcl"), &query("fact(5, Z)"), &mut env, Limits::default())
        .map_err(|e| e.to_string())?;
    ensure!(t.outcome.binding("Z") == Some(&Term::int(120)), "{:?}", t.outcome);
    Ok(())
}

/// Successful plays need exactly their step count and are unchanged by a
/// larger budget.
pub fn budget_monotonicity() -> Check {
    for (label, p) in corpus_plays() {
        let base = run_play(&p, Limits::default())?;
        if !base.outcome.is_success() {
            continue;
        }
        let n = base.steps;
        for m in [n, n + 1, 2 * n, 10 * n + 7] {
            let t = run_play(&p, Limits::with_max_steps(m))?;
            ensure!(t == base, "{label}: budget {m} changed the play (needs {n})");
        }
        let short = run_play(&p, Limits::with_max_steps(n - 1))?;
        ensure!(short.outcome == Outcome::BudgetExhausted, "{label}: succeeded with {} < {n} steps", n - 1);
    }
    Ok(())
}

/// The formula node a site path names, and whether it sits on the goal side.
fn site_node(program: &[AgentDecl], goal: &Formula, site: &str) -> Result<(Formula, bool, String), String> {
    let mut parts = site.split('/');
    let root = parts.next().ok_or("empty site")?;
    let (mut node, mut goal_side) = if root == "goal" {
        (goal.clone(), true)
    } else {
        let i: usize = root
            .strip_prefix("res[")
            .and_then(|r| r.strip_suffix(']'))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| format!("bad root in {site}"))?;
        ((*program.get(i).ok_or_else(|| format!("no declaration {i}"))?.formula).clone(), false)
    };
    let rest: Vec<&str> = parts.collect();
    let (tag, path) = rest.split_last().ok_or_else(|| format!("untagged site {site}"))?;
    for step in path {
        let k: usize = step.parse().map_err(|_| format!("bad step `{step}` in {site}"))?;
        if k == 0 && matches!(node, Formula::Impl(..)) {
            goal_side = !goal_side;
        }
        let next = node.children().get(k).map(|c| Formula::clone(c)).ok_or_else(|| format!("no child {k} in {site}"))?;
        node = next;
    }
    Ok((node, goal_side, tag.to_string()))
}

/// Every move is made by the player the operator and side assign.
pub fn role_sound(program: &[AgentDecl], goal: &Formula, moves: &[Move]) -> Check {
    for m in moves {
        let (node, goal_side, tag) = site_node(program, goal, &m.site)?;
        ensure!(node.tag() == tag, "{}: site names a {} node", m.site, node.tag());
        let machine = match tag.as_str() {
            "bang" => {
                ensure!(!goal_side, "{}: copy on the goal side", m.site);
                true
            }
            "cor" | "cex" => goal_side,
            "cand" | "call" => !goal_side,
            other => return Err(format!("{}: no player owns a `{other}` move", m.site)),
        };
        let want = if machine { Player::Machine } else { Player::Env };
        ensure!(m.who == want, "{}: made by {}, owned by {want}", m.site, m.who);
        let kind_ok = match (&m.kind, tag.as_str()) {
            (MoveKind::CopyBang, "bang") => true,
            (MoveKind::Pick(k), "cor" | "cand") => *k < 2,
            (MoveKind::Witness(_), "cex" | "call") => true,
            _ => false,
        };
        ensure!(kind_ok, "{}: {} does not fit", m.site, m.describe());
    }
    Ok(())
}

pub fn role_soundness() -> Check {
    for (label, p) in corpus_plays() {
        let t = run_play(&p, Limits::default())?;
        role_sound(&corpus(p.program), &query(p.query), &t.moves).map_err(|e| format!("{label}: {e}"))?;
    }
    let t = run_play(
        &Play { program: "factorial_literal.taskcl", query: FACT_QUERY, moves: script("moves/y5.json") },
        Limits::with_max_steps(5_000),
    )?;
    role_sound(&corpus("factorial_literal.taskcl"), &query(FACT_QUERY), &t.moves).map_err(|e| format!("literal: {e}"))
}

/// The machine moves recorded when the environment was asked survive
/// unchanged into the final transcript.
pub fn barrier() -> Check {
    for (label, p) in corpus_plays() {
        let full = run_play(&p, Limits::default())?;
        for k in 0..p.moves.len() {
            let short = Play { program: p.program, query: p.query, moves: p.moves[..k].to_vec() };
            match solve_with(&corpus(p.program), short.query, short.moves, Limits::default()) {
                Err(SolveError::EnvExhausted { moves, .. }) => {
                    ensure!(full.moves.starts_with(&moves), "{label}: prefix before env move {k} was revised");
                }
                other => return Err(format!("{label}: expected a request after {k} moves, got {other:?}")),
            }
        }
    }
    Ok(())
}

pub fn roundtrip_corpus() -> Check {
    for name in ["factorial.taskcl", "factorial_literal.taskcl", "lottery.taskcl", "fastfood.taskcl", "horn_interp.taskcl"] {
        let prog = corpus(name);
        let text = taskcl::syntax::pretty_program(&prog);
        let again = parse_program(&text).map_err(|e| format!("{name}: {e}\n{text}"))?;
        ensure!(again == prog, "{name}: round trip changed the program\n{text}");
    }
    for q in [FACT_QUERY, LOTTERY_QUERY, FASTFOOD_QUERY, HORN_QUERY] {
        let f = query(q);
        ensure!(query(&taskcl::syntax::pretty(&f)) == f, "{q}: round trip changed the query");
    }
    Ok(())
}

pub fn property_suites() -> Check {
    roundtrip_corpus()?;
    props::roundtrip(500).map_err(|e| format!("round trip: {e}"))?;
    props::unification_sound(500).map_err(|e| format!("unification: {e}"))?;
    props::normalization_idempotent(500).map_err(|e| format!("normalization: {e}"))?;
    replay_determinism().map_err(|e| format!("replay: {e}"))?;
    environment_freedom().map_err(|e| format!("environment freedom: {e}"))?;
    budget_monotonicity().map_err(|e| format!("budget: {e}"))?;
    role_soundness().map_err(|e| format!("roles: {e}"))?;
    barrier().map_err(|e| format!("barrier: {e}"))?;
    Ok(())
}

// ---- protocol driver ----

pub struct Client {
    app: axum::Router,
}

impl Client {
    pub fn new() -> Self {
        Client { app: router(Arc::new(SessionRegistry::default()), None) }
    }

    pub fn with_router(app: axum::Router) -> Self {
        Client { app }
    }

    pub async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        self.call_raw(method, uri, body.map(|b| b.to_string())).await
    }

    pub async fn call_raw(&self, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, Body::from))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, v)
    }
}

pub fn entry_json(e: &MoveEntry) -> Value {
    match &e.payload {
        MovePayload::Pick { pick } => json!({ "pick": pick }),
        MovePayload::Term { term } => json!({ "term": term }),
    }
}

/// Drives a play through the HTTP protocol one move at a time and returns
/// the final state.
pub async fn drive(client: &Client, program: &str, q: &str, moves: &[MoveEntry]) -> Result<Value, String> {
    let (st, created) = client.call("POST", "/sessions", Some(json!({"program": program, "query": q}))).await;
    ensure!(st == StatusCode::CREATED, "create: {st} {created}");
    let id = created["id"].as_str().ok_or("no id")?.to_string();
    let mut state = created["state"].clone();
    for (i, m) in moves.iter().enumerate() {
        ensure!(state["status"] == "awaiting_env", "move {i}: session is {}", state["status"]);
        let (st, body) = client.call("POST", &format!("/sessions/{id}/moves"), Some(entry_json(m))).await;
        ensure!(st == StatusCode::OK, "move {i}: {st} {body}");
        state = body["state"].clone();
    }
    let (st, body) = client.call("GET", &format!("/sessions/{id}"), None).await;
    ensure!(st == StatusCode::OK, "get: {st}");
    ensure!(body["state"] == state, "GET disagrees with the last move response");
    let (st, _) = client.call("DELETE", &format!("/sessions/{id}"), None).await;
    ensure!(st == StatusCode::NO_CONTENT, "delete: {st}");
    Ok(state)
}

pub fn batch_transcript_json(t: &Transcript) -> String {
    Value::Array(t.moves.iter().map(Move::to_json).collect()).to_string()
}

pub fn protocol_equivalence() -> Check {
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    let client = Client::new();
    for (label, p) in corpus_plays() {
        let batch = run_play(&p, Limits::default())?;
        let state = rt.block_on(drive(&client, &example_text(p.program), p.query, &p.moves))?;
        ensure!(state["status"] == batch.outcome.label(), "{label}: status {} vs {}", state["status"], batch.outcome.label());
        let a = state["transcript"].to_string();
        let b = batch_transcript_json(&batch);
        ensure!(a == b, "{label}: transcripts differ\nprotocol {a}\nbatch    {b}");
        if let Outcome::Success(bs) = &batch.outcome {
            for (k, v) in bs {
                ensure!(state["bindings"][k] == v.to_string(), "{label}: binding {k}");
            }
        }
    }
    Ok(())
}

/// (name, check) for every acceptance criterion of the core.
pub fn criteria() -> Vec<Criterion> {
    vec![
        ("factorial reproduction (Y=5 gives Z=120)", factorial_reproduction),
        ("factorial oracle sweep (n in 0..7)", factorial_sweep),
        ("lottery dialogues and winnability", lottery_dialogues),
        ("fast-food run and linearity", fastfood_run),
        ("Horn interpreter corpus and object cases", horn_corpus),
        ("Horn conservativity against SLD (100 programs)", horn_conservativity),
        ("property suites", property_suites),
        ("protocol/script transcript equivalence", protocol_equivalence),
    ]
}
