//! Command-line front end: batch runs, winnability checks, the terminal
//! REPL, and the protocol server.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::{
    self, check_witness, verify_winnable, Domains, EnvError, EnvRequest, EnvResponse, EnvStrategy, Limits,
    RequestKind, ScriptEnv, SolveError, Transcript, VerifyError, DEFAULT_MAX_STEPS,
};
use crate::syntax::{parse_moves, parse_program, parse_query, parse_term, AgentDecl, Formula};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_ENV_REQUIRED: i32 = 4;
pub const EXIT_SERVICE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "taskcl", version, about = "Run task-logical agent programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one query against a program.
    Run {
        program: PathBuf,
        #[arg(short, long)]
        query: String,
        /// JSON move script answering the environment's requests.
        #[arg(long)]
        moves: Option<PathBuf>,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Check that the machine wins under every environment behaviour.
    Verify {
        program: PathBuf,
        #[arg(short, long)]
        query: String,
        /// JSON object mapping term-choice sites (or binder names) to term lists.
        #[arg(long)]
        domains: Option<PathBuf>,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Read queries interactively, playing the environment from the terminal.
    Repl {
        program: PathBuf,
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Serve the session protocol over HTTP.
    Serve {
        #[arg(long, default_value_t = 7117)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory of web console assets.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

/// Process streams, injectable for tests.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    /// Whether `input` is a terminal a human can answer from.
    pub interactive: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit code.
pub fn run_cli<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.err, "{text}");
                return EXIT_INPUT;
            }
            let _ = write!(io.out, "{text}");
            return EXIT_SUCCESS;
        }
    };
    match execute(cli.command, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {}", e.message);
            e.code
        }
    }
}

struct Fatal {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> Fatal {
    Fatal {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, Fatal> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Vec<AgentDecl>, Fatal> {
    parse_program(&read_file(path)?).map_err(|e| input_error(format!("{}:{e}", path.display())))
}

fn load_query(text: &str) -> Result<Formula, Fatal> {
    parse_query(text).map_err(|e| input_error(format!("query:{e}")))
}

fn execute(command: Command, io: &mut Io) -> Result<i32, Fatal> {
    match command {
        Command::Run {
            program,
            query,
            moves,
            trace,
            max_steps,
        } => {
            let program = load_program(&program)?;
            let query = load_query(&query)?;
            let limits = Limits::with_max_steps(max_steps);
            let result = match moves {
                Some(path) => {
                    let script = parse_moves(&read_file(&path)?)
                        .map_err(|e| input_error(format!("{}:{e}", path.display())))?;
                    engine::solve(&program, &query, &mut ScriptEnv::new(&script), limits)
                }
                None if io.interactive => {
                    let mut env = PromptEnv::new(io.input, io.out, limits.term_fuel);
                    engine::solve(&program, &query, &mut env, limits)
                }
                None => engine::solve(&program, &query, &mut engine::NoEnv, limits),
            };
            finish_play(result, trace, io)
        }
        Command::Verify {
            program,
            query,
            domains,
            trace,
            max_steps,
        } => {
            let program = load_program(&program)?;
            let query = load_query(&query)?;
            let domains: Domains = match domains {
                Some(path) => serde_json::from_str(&read_file(&path)?)
                    .map_err(|e| input_error(format!("{}: {e}", path.display())))?,
                None => Domains::new(),
            };
            let report = verify_winnable(&program, &query, &domains, Limits::with_max_steps(max_steps))
                .map_err(|e| match e {
                    VerifyError::DomainMissing { .. } => input_error(e.to_string()),
                    VerifyError::Solve(s) => input_error(s.to_string()),
                })?;
            let out = &mut *io.out;
            let plural = if report.plays == 1 { "" } else { "s" };
            if report.winnable {
                writeln!(out, "winnable ({} play{plural})", report.plays).ok();
                return Ok(EXIT_SUCCESS);
            }
            writeln!(out, "not winnable ({} play{plural})", report.plays).ok();
            if let Some((script, t)) = report.losing_play {
                writeln!(out, "counterexample:").ok();
                for e in &script {
                    writeln!(out, "  env {}", serde_json::to_string(e).expect("move entry")).ok();
                }
                if trace {
                    for line in t.trace_lines() {
                        writeln!(out, "  {line}").ok();
                    }
                }
                writeln!(out, "  {}", t.outcome.label()).ok();
            }
            Ok(EXIT_FAILURE)
        }
        Command::Repl {
            program,
            trace,
            max_steps,
        } => {
            let program = load_program(&program)?;
            repl(&program, Limits::with_max_steps(max_steps), trace, io);
            Ok(EXIT_SUCCESS)
        }
        Command::Serve { port, host, static_dir } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Fatal {
                code: EXIT_SERVICE,
                message: e.to_string(),
            })?;
            rt.block_on(crate::session::http::serve(SocketAddr::new(host, port), static_dir))
                .map_err(|e| Fatal {
                    code: EXIT_SERVICE,
                    message: format!("cannot serve on {host}:{port}: {e}"),
                })?;
            Ok(EXIT_SUCCESS)
        }
    }
}

fn print_transcript(t: &Transcript, trace: bool, out: &mut dyn Write) {
    if trace {
        for line in t.trace_lines() {
            writeln!(out, "{line}").ok();
        }
        for c in &t.consumed {
            writeln!(out, "consumed #{} @ {}: {}", c.id, c.site, c.atom).ok();
        }
    }
    writeln!(out, "{}", t.outcome.label()).ok();
    if let engine::Outcome::Success(bindings) = &t.outcome {
        for (name, value) in bindings {
            writeln!(out, "{name} = {value}").ok();
        }
    }
}

fn finish_play(result: Result<Transcript, SolveError>, trace: bool, io: &mut Io) -> Result<i32, Fatal> {
    match result {
        Ok(t) => {
            print_transcript(&t, trace, io.out);
            for d in &t.diagnostics {
                writeln!(io.err, "note: {d}").ok();
            }
            Ok(match t.outcome {
                engine::Outcome::Success(_) => EXIT_SUCCESS,
                engine::Outcome::Failure => EXIT_FAILURE,
                engine::Outcome::BudgetExhausted => EXIT_BUDGET,
            })
        }
        Err(SolveError::EnvExhausted { request, moves }) => {
            if trace {
                for line in engine::trace_lines(&moves) {
                    writeln!(io.out, "{line}").ok();
                }
            }
            Err(Fatal {
                code: EXIT_ENV_REQUIRED,
                message: format!("environment move required: {}", describe_request(&request)),
            })
        }
        Err(e) => Err(input_error(e.to_string())),
    }
}

fn describe_request(r: &EnvRequest) -> String {
    match &r.kind {
        RequestKind::ChooseBranch { arity, .. } => format!("choose one of {arity} branches at {}", r.site),
        RequestKind::ChooseTerm { binder } => format!("choose a term for {binder} at {}", r.site),
    }
}

/// Plays the environment from a line-oriented terminal, re-asking until the
/// answer is legal. End of input or `:quit` abandons the play.
pub struct PromptEnv<'a> {
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    fuel: u64,
}

impl<'a> PromptEnv<'a> {
    pub fn new(input: &'a mut dyn BufRead, out: &'a mut dyn Write, fuel: u64) -> Self {
        PromptEnv { input, out, fuel }
    }

    fn read_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim().to_string()),
        }
    }
}

impl EnvStrategy for PromptEnv<'_> {
    fn respond(&mut self, request: &EnvRequest) -> Result<EnvResponse, EnvError> {
        writeln!(self.out, "{}", describe_request(request)).ok();
        if let RequestKind::ChooseBranch { options, .. } = &request.kind {
            for (i, o) in options.iter().enumerate() {
                writeln!(self.out, "  {i}: {o}").ok();
            }
        }
        loop {
            let prompt = match request.kind {
                RequestKind::ChooseBranch { .. } => "pick> ",
                RequestKind::ChooseTerm { .. } => "term> ",
            };
            write!(self.out, "{prompt}").ok();
            self.out.flush().ok();
            let line = self.read_line().ok_or(EnvError::Exhausted)?;
            if line == ":quit" {
                return Err(EnvError::Exhausted);
            }
            match &request.kind {
                RequestKind::ChooseBranch { arity, .. } => match line.parse::<usize>() {
                    Ok(k) if k < *arity => return Ok(EnvResponse::Pick(k)),
                    _ => writeln!(self.out, "enter a number from 0 to {}", arity - 1).ok(),
                },
                RequestKind::ChooseTerm { .. } => {
                    match parse_term(&line)
                        .map_err(|e| e.to_string())
                        .and_then(|t| check_witness(&t, self.fuel))
                    {
                        Ok(t) => return Ok(EnvResponse::Witness(t)),
                        Err(e) => writeln!(self.out, "not a closed term: {e}").ok(),
                    }
                }
            };
        }
    }
}

fn repl(program: &[AgentDecl], limits: Limits, mut trace: bool, io: &mut Io) {
    loop {
        write!(io.out, "?- ").ok();
        io.out.flush().ok();
        let mut line = String::new();
        match io.input.read_line(&mut line) {
            Ok(0) | Err(_) => return,
            Ok(_) => {}
        }
        let line = line.trim();
        match line {
            "" => continue,
            ":quit" | ":q" => return,
            ":trace on" => trace = true,
            ":trace off" => trace = false,
            _ if line.starts_with(':') => {
                writeln!(io.out, "commands: :trace on, :trace off, :quit").ok();
            }
            _ => {
                let query = match parse_query(line) {
                    Ok(q) => q,
                    Err(e) => {
                        writeln!(io.out, "error: {e}").ok();
                        continue;
                    }
                };
                let result = {
                    let mut env = PromptEnv::new(io.input, io.out, limits.term_fuel);
                    engine::solve(program, &query, &mut env, limits)
                };
                match result {
                    Ok(t) => print_transcript(&t, trace, io.out),
                    Err(SolveError::EnvExhausted { .. }) => {
                        writeln!(io.out, "play abandoned").ok();
                    }
                    Err(e) => {
                        writeln!(io.out, "error: {e}").ok();
                    }
                }
            }
        }
    }
}
