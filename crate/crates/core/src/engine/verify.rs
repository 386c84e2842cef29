use std::collections::BTreeMap;

use thiserror::Error;

use super::env::{RequestKind, ScriptEnv};
use super::transcript::Transcript;
use super::{solve, Limits, SolveError};
use crate::syntax::{AgentDecl, Formula, MoveEntry};

/// Finite witness domains for environment term choices, keyed by request
/// site or, failing that, by binder name.
pub type Domains = BTreeMap<String, Vec<String>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WinReport {
    pub winnable: bool,
    pub plays: usize,
    /// First play the machine did not win, with the script that drives it.
    pub losing_play: Option<(Vec<MoveEntry>, Transcript)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("no domain for the term choice at {site} (binder {binder})")]
    DomainMissing { site: String, binder: String },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Runs every environment behaviour over the given domains and reports
/// whether the machine wins all of them.
pub fn verify_winnable(
    program: &[AgentDecl],
    query: &Formula,
    domains: &Domains,
    limits: Limits,
) -> Result<WinReport, VerifyError> {
    let mut report = WinReport {
        winnable: true,
        plays: 0,
        losing_play: None,
    };
    let mut pending: Vec<Vec<MoveEntry>> = vec![Vec::new()];
    while let Some(script) = pending.pop() {
        let mut env = ScriptEnv::from_entries(script.clone());
        match solve(program, query, &mut env, limits) {
            Ok(t) => {
                report.plays += 1;
                if !t.outcome.is_success() {
                    report.winnable = false;
                    if report.losing_play.is_none() {
                        report.losing_play = Some((script, t));
                    }
                }
            }
            Err(SolveError::EnvExhausted { request, .. }) => {
                let next: Vec<MoveEntry> = match &request.kind {
                    RequestKind::ChooseBranch { arity, .. } => (0..*arity).map(MoveEntry::pick).collect(),
                    RequestKind::ChooseTerm { binder } => domains
                        .get(&request.site)
                        .or_else(|| domains.get(binder))
                        .ok_or_else(|| VerifyError::DomainMissing {
                            site: request.site.clone(),
                            binder: binder.clone(),
                        })?
                        .iter()
                        .map(|t| MoveEntry::term(t))
                        .collect(),
                };
                // Reversed so plays are explored in lexicographic order.
                for e in next.into_iter().rev() {
                    let mut s = script.clone();
                    s.push(e);
                    pending.push(s);
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}
