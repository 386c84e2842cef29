//! Surface syntax: lexer, parser, printer and move scripts.

mod formula;
mod lexer;
mod moves;
mod parser;
mod pretty;

use thiserror::Error;

pub use formula::{AgentDecl, Formula};
pub use moves::{parse_moves, MoveEntry, MovePayload, MoveScript};
pub use parser::{is_var_name, parse_program, parse_query, parse_term};
pub use pretty::{pretty, pretty_decl, pretty_program, pretty_term};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}{}", fmt_expected(.expected))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Token descriptions that would have been accepted here.
    pub expected: Vec<String>,
}

fn fmt_expected(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}
