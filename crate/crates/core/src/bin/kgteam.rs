use std::io::{stderr, stdout};

fn main() {
    let verbose = std::env::args().any(|a| a == "-v" || a == "--verbose");
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if verbose { tracing::Level::DEBUG } else { tracing::Level::WARN })
        .init();
    let code = kgteam::cli::main_with_args(std::env::args_os(), &mut stdout(), &mut stderr());
    std::process::exit(code);
}
