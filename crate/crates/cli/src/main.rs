use clap::Parser;
use epshock_cli::{commands, configure_threads, Cli, EXIT_INVALID_CONFIG};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(w) = configure_threads() {
        eprintln!("warning: {w}");
    }
    std::process::exit(commands::run(&cli));
}
