use clap::Parser;

use levqe::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LEVQE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("levqe: {e}");
        std::process::exit(e.exit_code());
    }
}
