use thiserror::Error;

use crate::syntax::{MoveEntry, MovePayload, MoveScript};
use crate::term::Term;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequestKind {
    /// `options` are the printed branches, for display.
    ChooseBranch { arity: usize, options: Vec<String> },
    ChooseTerm { binder: String },
}

/// A pending environment choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvRequest {
    pub site: String,
    pub kind: RequestKind,
}

impl EnvRequest {
    pub fn to_json(&self) -> serde_json::Value {
        match &self.kind {
            RequestKind::ChooseBranch { arity, options } => serde_json::json!({
                "site": self.site,
                "kind": "choose_branch",
                "arity": arity,
                "options": options,
            }),
            RequestKind::ChooseTerm { binder } => serde_json::json!({
                "site": self.site,
                "kind": "choose_term",
                "binder": binder,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvResponse {
    Pick(usize),
    Witness(Term),
    /// Witness given as surface text; parsed and checked by the engine.
    TermText(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("no environment move available")]
    Exhausted,
    #[error("move expected at `{expected}` but the request is at `{actual}`")]
    SiteMismatch { expected: String, actual: String },
}

/// The environment player. Responses are validated by the engine.
pub trait EnvStrategy {
    fn respond(&mut self, request: &EnvRequest) -> Result<EnvResponse, EnvError>;
}

/// Plays a move script in order.
#[derive(Clone, Debug, Default)]
pub struct ScriptEnv {
    entries: Vec<MoveEntry>,
    next: usize,
}

impl ScriptEnv {
    pub fn new(script: &MoveScript) -> Self {
        Self::from_entries(script.moves.clone())
    }

    pub fn from_entries(entries: Vec<MoveEntry>) -> Self {
        Self { entries, next: 0 }
    }

    pub fn used(&self) -> usize {
        self.next
    }
}

impl EnvStrategy for ScriptEnv {
    fn respond(&mut self, request: &EnvRequest) -> Result<EnvResponse, EnvError> {
        let entry = self.entries.get(self.next).ok_or(EnvError::Exhausted)?;
        if let Some(expected) = &entry.expected_site {
            if expected != &request.site {
                return Err(EnvError::SiteMismatch {
                    expected: expected.clone(),
                    actual: request.site.clone(),
                });
            }
        }
        self.next += 1;
        Ok(match &entry.payload {
            MovePayload::Pick { pick } => EnvResponse::Pick(*pick),
            MovePayload::Term { term } => EnvResponse::TermText(term.clone()),
        })
    }
}

/// Refuses every request. Plays that never consult the environment are
/// unaffected by it.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoEnv;

impl EnvStrategy for NoEnv {
    fn respond(&mut self, _: &EnvRequest) -> Result<EnvResponse, EnvError> {
        Err(EnvError::Exhausted)
    }
}
