use thiserror::Error;

use crate::syntax::{AgentDecl, Formula};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("polarity error at {site}: {message}")]
pub struct PolarityError {
    pub site: String,
    pub message: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Goal,
    Resource,
}

fn check(f: &Formula, side: Side, site: &str) -> Result<(), PolarityError> {
    let err = |message: &str| PolarityError {
        site: site.to_string(),
        message: message.to_string(),
    };
    match (f, side) {
        (Formula::Bang(_), Side::Goal) => return Err(err("`!` is only allowed on the resource side")),
        (Formula::POr(..), Side::Resource) => {
            return Err(err("parallel disjunction `|` is only supported on the goal side"))
        }
        _ => {}
    }
    for (i, c) in f.children().into_iter().enumerate() {
        let flip = matches!(f, Formula::Impl(..)) && i == 0;
        let child_side = match (side, flip) {
            (s, false) => s,
            (Side::Goal, true) => Side::Resource,
            (Side::Resource, true) => Side::Goal,
        };
        check(c, child_side, &format!("{site}/{i}"))?;
    }
    Ok(())
}

/// Rejects `!` in goal position and `|` in resource position. Implication
/// bodies swap sides.
pub fn check_polarity(program: &[AgentDecl], query: &Formula) -> Result<(), PolarityError> {
    for (i, d) in program.iter().enumerate() {
        check(&d.formula, Side::Resource, &format!("res[{i}]"))?;
    }
    check(query, Side::Goal, "goal")
}
