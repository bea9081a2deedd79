use std::io;
use std::process::ExitCode;

use metaparadox::cli::{run, SEED_ENV};

fn main() -> ExitCode {
    let seed = std::env::var(SEED_ENV).ok();
    let code = run(
        std::env::args_os(),
        seed.as_deref(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
