use std::fmt;

use serde::Serialize;

use crate::term::Term;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Machine,
    Env,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Machine => "machine",
            Player::Env => "env",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Pick(usize),
    Witness(Term),
    /// A copy taken from a banked `!` resource; the site names the bang.
    CopyBang,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub who: Player,
    pub site: String,
    pub kind: MoveKind,
}

impl Move {
    /// `pick k`, `witness t` or `copy`.
    pub fn describe(&self) -> String {
        match &self.kind {
            MoveKind::Pick(k) => format!("pick {k}"),
            MoveKind::Witness(t) => format!("witness {t}"),
            MoveKind::CopyBang => "copy".to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "who": self.who,
            "site": self.site,
            "move": self.describe(),
        })
    }
}

/// One linear resource used up by the play.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Consumption {
    pub id: u32,
    pub site: String,
    pub atom: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Answer bindings for query-level existential variables, in
    /// introduction order.
    Success(Vec<(String, Term)>),
    Failure,
    BudgetExhausted,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Success(_) => "succeeded",
            Outcome::Failure => "failed",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn binding(&self, name: &str) -> Option<&Term> {
        match self {
            Outcome::Success(bs) => bs.iter().find(|(n, _)| n == name).map(|(_, t)| t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub moves: Vec<Move>,
    pub consumed: Vec<Consumption>,
    pub outcome: Outcome,
    pub steps: u64,
    pub diagnostics: Vec<String>,
}

impl Transcript {
    pub fn trace_lines(&self) -> Vec<String> {
        trace_lines(&self.moves)
    }

    pub fn env_moves(&self) -> impl Iterator<Item = &Move> {
        self.moves.iter().filter(|m| m.who == Player::Env)
    }
}

pub fn trace_lines(moves: &[Move]) -> Vec<String> {
    moves
        .iter()
        .enumerate()
        .map(|(i, m)| format!("{}. {} @ {}: {}", i + 1, m.who, m.site, m.describe()))
        .collect()
}
