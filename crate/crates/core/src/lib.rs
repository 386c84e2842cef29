//! Interpreter for task-logical agent programs: agents are computability
//! logic formulas, queries are games between a backtracking machine and an
//! environment.

pub mod builtins;
pub mod syntax;
pub mod term;
pub mod unify;
pub mod engine;
pub mod session;
pub mod cli;
