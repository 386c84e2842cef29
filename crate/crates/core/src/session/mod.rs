//! Interactive plays. A [`Session`] suspends the engine at each environment
//! request; a submitted move is appended to the session's script and the
//! play is re-run from the start, which is exact because plays are
//! deterministic.

pub mod http;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{
    self, check_witness, EnvRequest, Limits, Move, Outcome, PolarityError, RequestKind, ScriptEnv,
    SolveError,
};
use crate::syntax::{parse_program, parse_query, parse_term, AgentDecl, Formula, MoveEntry, MovePayload, ParseError};
use crate::term::Term;

pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("parse error in {what}: {error}")]
    Parse { what: &'static str, error: ParseError },
    #[error(transparent)]
    Polarity(#[from] PolarityError),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("illegal state: {0}")]
    IllegalState(String),
    #[error("pick {pick} out of range (arity {arity})")]
    OutOfRange { pick: usize, arity: usize },
    #[error("bad term: {0}")]
    BadTerm(String),
    #[error("engine error: {0}")]
    Engine(SolveError),
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Parse { .. } => "parse_error",
            SessionError::Polarity(_) => "polarity_error",
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::IllegalState(_) => "illegal_state",
            SessionError::OutOfRange { .. } => "out_of_range",
            SessionError::BadTerm(_) => "bad_term",
            SessionError::Engine(_) => "engine_error",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": self.kind(), "message": self.to_string()})
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    AwaitingEnv(EnvRequest),
    Succeeded(Vec<(String, Term)>),
    Failed,
    BudgetExhausted,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::AwaitingEnv(_) => "awaiting_env",
            Status::Succeeded(_) => "succeeded",
            Status::Failed => "failed",
            Status::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Status::AwaitingEnv(_))
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    program: Arc<Vec<AgentDecl>>,
    query: Arc<Formula>,
    limits: Limits,
    script: Vec<MoveEntry>,
    status: Status,
    moves: Vec<Move>,
}

impl Session {
    pub fn create(program_text: &str, query_text: &str, limits: Limits) -> Result<Session, SessionError> {
        let program = parse_program(program_text).map_err(|error| SessionError::Parse {
            what: "program",
            error,
        })?;
        let query = parse_query(query_text).map_err(|error| SessionError::Parse { what: "query", error })?;
        Session::from_parts(program, query, limits)
    }

    pub fn from_parts(program: Vec<AgentDecl>, query: Formula, limits: Limits) -> Result<Session, SessionError> {
        engine::check_polarity(&program, &query)?;
        let mut s = Session {
            program: Arc::new(program),
            query: Arc::new(query),
            limits,
            script: Vec::new(),
            status: Status::Failed,
            moves: Vec::new(),
        };
        s.advance()?;
        Ok(s)
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    /// The environment moves accepted so far.
    pub fn script(&self) -> &[MoveEntry] {
        &self.script
    }

    fn advance(&mut self) -> Result<(), SessionError> {
        let mut env = ScriptEnv::from_entries(self.script.clone());
        match engine::solve(&self.program, &self.query, &mut env, self.limits) {
            Ok(t) => {
                self.status = match t.outcome {
                    Outcome::Success(b) => Status::Succeeded(b),
                    Outcome::Failure => Status::Failed,
                    Outcome::BudgetExhausted => Status::BudgetExhausted,
                };
                self.moves = t.moves;
                Ok(())
            }
            Err(SolveError::EnvExhausted { request, moves }) => {
                self.status = Status::AwaitingEnv(request);
                self.moves = moves;
                Ok(())
            }
            Err(e) => Err(SessionError::Engine(e)),
        }
    }

    /// Validates `entry` against the pending request, then resumes the play.
    /// On error the session is unchanged.
    pub fn submit(&mut self, entry: MoveEntry) -> Result<(), SessionError> {
        let Status::AwaitingEnv(request) = &self.status else {
            return Err(SessionError::IllegalState(format!(
                "session is {}, not awaiting a move",
                self.status.label()
            )));
        };
        if let Some(expected) = &entry.expected_site {
            if expected != &request.site {
                return Err(SessionError::IllegalState(format!(
                    "move for `{expected}` but the pending request is at `{}`",
                    request.site
                )));
            }
        }
        match (&request.kind, &entry.payload) {
            (RequestKind::ChooseBranch { arity, .. }, MovePayload::Pick { pick }) => {
                if pick >= arity {
                    return Err(SessionError::OutOfRange {
                        pick: *pick,
                        arity: *arity,
                    });
                }
            }
            (RequestKind::ChooseTerm { .. }, MovePayload::Term { term }) => {
                let t = parse_term(term).map_err(|e| SessionError::BadTerm(e.to_string()))?;
                check_witness(&t, self.limits.term_fuel).map_err(SessionError::BadTerm)?;
            }
            (RequestKind::ChooseBranch { .. }, MovePayload::Term { .. }) => {
                return Err(SessionError::BadTerm("a branch pick is required here".into()))
            }
            (RequestKind::ChooseTerm { .. }, MovePayload::Pick { .. }) => {
                return Err(SessionError::BadTerm("a witness term is required here".into()))
            }
        }
        let saved = (self.status.clone(), self.moves.clone());
        self.script.push(entry);
        if let Err(e) = self.advance() {
            self.script.pop();
            (self.status, self.moves) = saved;
            return Err(e);
        }
        Ok(())
    }

    /// The protocol `State` object.
    pub fn state_json(&self) -> Value {
        let mut state = json!({
            "status": self.status.label(),
            "transcript": self.moves.iter().map(Move::to_json).collect::<Vec<_>>(),
        });
        match &self.status {
            Status::AwaitingEnv(r) => state["pending"] = r.to_json(),
            Status::Succeeded(bs) => {
                let map: serde_json::Map<String, Value> =
                    bs.iter().map(|(k, v)| (k.clone(), Value::String(v.to_string()))).collect();
                state["bindings"] = Value::Object(map);
            }
            _ => {}
        }
        state
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    touched: Instant,
}

/// Live sessions by id. Registry access is brief; each session has its own
/// lock held while its play runs.
pub struct SessionRegistry {
    sessions: Mutex<HashMap<String, Entry>>,
    ttl: Duration,
}

impl Default for SessionRegistry {
    fn default() -> Self {
        Self::new(DEFAULT_TTL)
    }
}

impl SessionRegistry {
    pub fn new(ttl: Duration) -> Self {
        SessionRegistry {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Entry>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Returns the new id and the initial state.
    pub fn create(&self, program: &str, query: &str, limits: Limits) -> Result<(String, Value), SessionError> {
        self.purge_expired();
        let session = Session::create(program, query, limits)?;
        let state = session.state_json();
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.lock().insert(
            id.clone(),
            Entry {
                session: Arc::new(Mutex::new(session)),
                touched: Instant::now(),
            },
        );
        Ok((id, state))
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        let mut map = self.lock();
        let entry = map
            .get_mut(id)
            .filter(|e| e.touched.elapsed() <= self.ttl)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        entry.touched = Instant::now();
        Ok(entry.session.clone())
    }

    pub fn get(&self, id: &str) -> Result<Value, SessionError> {
        let s = self.handle(id)?;
        let s = s.lock().unwrap_or_else(|p| p.into_inner());
        Ok(s.state_json())
    }

    pub fn submit(&self, id: &str, entry: MoveEntry) -> Result<Value, SessionError> {
        let s = self.handle(id)?;
        let mut s = s.lock().unwrap_or_else(|p| p.into_inner());
        s.submit(entry)?;
        Ok(s.state_json())
    }

    pub fn close(&self, id: &str) -> Result<(), SessionError> {
        self.lock()
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn purge_expired(&self) -> usize {
        let mut map = self.lock();
        let before = map.len();
        map.retain(|_, e| e.touched.elapsed() <= self.ttl);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
