use std::io::IsTerminal;

use taskcl::cli::{run_cli, Io};

fn main() {
    let stdin = std::io::stdin();
    let interactive = stdin.is_terminal();
    let mut input = stdin.lock();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = run_cli(
        std::env::args_os(),
        &mut Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
            interactive,
        },
    );
    std::process::exit(code);
}
