//! Game-semantic proof search. The machine plays against an
//! [`EnvStrategy`]; a play yields a [`Transcript`].
//!
//! Choice ownership:
//!
//! | operator | goal side   | resource side |
//! |----------|-------------|---------------|
//! | `&`, `forall` | environment | machine |
//! | `+`, `exists` | machine     | environment |
//! | `!` copy      | (rejected)  | machine |

mod env;
mod machine;
mod polarity;
mod transcript;
mod verify;

use thiserror::Error;

pub use env::{EnvError, EnvRequest, EnvResponse, EnvStrategy, NoEnv, RequestKind, ScriptEnv};
pub use polarity::{check_polarity, PolarityError};
pub use transcript::{trace_lines, Consumption, Move, MoveKind, Outcome, Player, Transcript};
pub use verify::{verify_winnable, Domains, VerifyError, WinReport};

use crate::syntax::{AgentDecl, Formula};
use crate::term::DEFAULT_FUEL;

pub const DEFAULT_MAX_STEPS: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Work items the machine may execute.
    pub max_steps: u64,
    /// Beta steps per normalization.
    pub term_fuel: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: DEFAULT_MAX_STEPS,
            term_fuel: DEFAULT_FUEL,
        }
    }
}

impl Limits {
    pub fn with_max_steps(max_steps: u64) -> Self {
        Limits {
            max_steps,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Polarity(#[from] PolarityError),
    /// The environment had no move. `moves` is the play so far.
    #[error("environment move required at {}", .request.site)]
    EnvExhausted { request: EnvRequest, moves: Vec<Move> },
    #[error("pick {pick} at {site} is out of range (arity {arity})")]
    OutOfRange { site: String, pick: usize, arity: usize },
    #[error("bad witness at {site}: {message}")]
    BadTerm { site: String, message: String },
    #[error("move expected at `{expected}` but the request is at `{actual}`")]
    SiteMismatch { expected: String, actual: String },
}

/// Plays `query` against the agents of `program`.
pub fn solve(
    program: &[AgentDecl],
    query: &Formula,
    env: &mut dyn EnvStrategy,
    limits: Limits,
) -> Result<Transcript, SolveError> {
    check_polarity(program, query)?;
    machine::Machine::new(program, query, env, limits).run()
}

pub(crate) use machine::check_witness;
