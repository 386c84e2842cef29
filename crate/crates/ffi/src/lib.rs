//! C interface. Sessions are opaque handles; strings returned to the caller
//! are owned by the caller and released with `taskcl_string_free`. After a
//! call returns a non-OK status, `taskcl_last_error` describes the failure
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde_json::{json, Value};
use taskcl::engine::{self, Limits, NoEnv, Outcome, ScriptEnv, SolveError, Transcript};
use taskcl::session::{Session as Inner, SessionError};
use taskcl::syntax::{parse_moves, parse_program, parse_query, MoveEntry};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskclStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    PolarityError = 4,
    IllegalState = 5,
    OutOfRange = 6,
    BadTerm = 7,
    EnvRequired = 8,
    EngineError = 9,
    Panic = 10,
}

/// An interactive play. Create with `taskcl_session_new`, release with
/// `taskcl_session_free`.
pub struct Session(Inner);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(TaskclStatus, String);

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::Parse { .. } => TaskclStatus::ParseError,
            SessionError::Polarity(_) => TaskclStatus::PolarityError,
            SessionError::IllegalState(_) | SessionError::UnknownSession(_) => TaskclStatus::IllegalState,
            SessionError::OutOfRange { .. } => TaskclStatus::OutOfRange,
            SessionError::BadTerm(_) => TaskclStatus::BadTerm,
            SessionError::Engine(_) => TaskclStatus::EngineError,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TaskclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TaskclStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TaskclStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(TaskclStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TaskclStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn limits(max_steps: u64) -> Limits {
    if max_steps == 0 {
        Limits::default()
    } else {
        Limits::with_max_steps(max_steps)
    }
}

fn into_c(v: &Value) -> *mut c_char {
    CString::new(v.to_string()).expect("JSON has no nul").into_raw()
}

/// Parses `program` and `query` and runs the play up to the first
/// environment request. `max_steps` of 0 selects the default budget.
///
/// # Safety
/// `program` and `query` must be nul-terminated strings; `out` must be a
/// valid pointer to write the new handle to.
#[no_mangle]
pub unsafe extern "C" fn taskcl_session_new(
    program: *const c_char,
    query: *const c_char,
    max_steps: u64,
    out: *mut *mut Session,
) -> TaskclStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(TaskclStatus::NullArgument, "out is null".into()));
        }
        let s = Inner::create(text(program, "program")?, text(query, "query")?, limits(max_steps))?;
        *out = Box::into_raw(Box::new(Session(s)));
        Ok(())
    })
}

/// The session state as protocol JSON, or null if `session` is null.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn taskcl_session_state_json(session: *const Session) -> *mut c_char {
    match session.as_ref() {
        Some(s) => into_c(&s.0.state_json()),
        None => {
            set_error("session is null".into());
            ptr::null_mut()
        }
    }
}

/// Answers a pending branch choice.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn taskcl_session_submit_pick(session: *mut Session, pick: usize) -> TaskclStatus {
    guard(|| {
        let s = session
            .as_mut()
            .ok_or_else(|| Failure(TaskclStatus::NullArgument, "session is null".into()))?;
        Ok(s.0.submit(MoveEntry::pick(pick))?)
    })
}

/// Answers a pending term choice with the text of a closed term.
///
/// # Safety
/// `session` must be null or a live handle; `term` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn taskcl_session_submit_term(session: *mut Session, term: *const c_char) -> TaskclStatus {
    guard(|| {
        let s = session
            .as_mut()
            .ok_or_else(|| Failure(TaskclStatus::NullArgument, "session is null".into()))?;
        let term = text(term, "term")?;
        Ok(s.0.submit(MoveEntry::term(term))?)
    })
}

/// # Safety
/// `session` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn taskcl_session_free(session: *mut Session) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

fn transcript_json(t: &Transcript) -> Value {
    let mut v = json!({
        "outcome": t.outcome.label(),
        "steps": t.steps,
        "transcript": t.moves.iter().map(|m| m.to_json()).collect::<Vec<_>>(),
        "consumed": t.consumed.iter().map(|c| json!({"id": c.id, "site": c.site, "atom": c.atom.to_string()})).collect::<Vec<_>>(),
        "diagnostics": t.diagnostics,
    });
    if let Outcome::Success(bs) = &t.outcome {
        v["bindings"] = bs.iter().map(|(k, t)| (k.clone(), Value::String(t.to_string()))).collect();
    }
    v
}

/// Runs a whole play in batch mode. `moves_json` is a move script or null
/// for none. On OK, `*out_json` receives the outcome, bindings and
/// transcript as JSON.
///
/// # Safety
/// String arguments must be nul-terminated (`moves_json` may be null);
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taskcl_run(
    program: *const c_char,
    query: *const c_char,
    moves_json: *const c_char,
    max_steps: u64,
    out_json: *mut *mut c_char,
) -> TaskclStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(Failure(TaskclStatus::NullArgument, "out_json is null".into()));
        }
        let parse_failure = |e: taskcl::syntax::ParseError| Failure(TaskclStatus::ParseError, e.to_string());
        let program = parse_program(text(program, "program")?).map_err(parse_failure)?;
        let query = parse_query(text(query, "query")?).map_err(parse_failure)?;
        let result = if moves_json.is_null() {
            engine::solve(&program, &query, &mut NoEnv, limits(max_steps))
        } else {
            let script = parse_moves(text(moves_json, "moves_json")?).map_err(parse_failure)?;
            engine::solve(&program, &query, &mut ScriptEnv::new(&script), limits(max_steps))
        };
        let t = result.map_err(|e| {
            let status = match e {
                SolveError::Polarity(_) => TaskclStatus::PolarityError,
                SolveError::EnvExhausted { .. } => TaskclStatus::EnvRequired,
                SolveError::OutOfRange { .. } => TaskclStatus::OutOfRange,
                SolveError::BadTerm { .. } => TaskclStatus::BadTerm,
                SolveError::SiteMismatch { .. } => TaskclStatus::IllegalState,
            };
            Failure(status, e.to_string())
        })?;
        *out_json = into_c(&transcript_json(&t));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn taskcl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn taskcl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
