use clap::Parser;

use autkc::cli::{run, Cli};

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&argv);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(failure) = run(&cli, &argv) {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
