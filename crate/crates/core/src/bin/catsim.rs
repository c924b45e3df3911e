use clap::Parser;
use catsim::cli::{ run, Cli, EXIT_CONFIG };

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            // help and version go to stdout, usage errors to stderr
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = run(cli);
    if outcome.code != 0 {
        eprintln!("{}", outcome.summary);
    }
    println!("{}", outcome.summary);
    std::process::exit(outcome.code);
}
