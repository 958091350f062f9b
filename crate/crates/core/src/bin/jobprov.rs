use std::io;

use jobprov::cli::run_cli;
use jobprov::JobEnvironment;

fn main() {
    let env = JobEnvironment::default();
    let code = run_cli(std::env::args_os(), &env, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
