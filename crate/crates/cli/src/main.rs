use clap::Parser;

use sysid_cli::{exit, run_command, Cli};

fn main() {
    // SYSID_THREADS caps rayon's worker count; unset means rayon's default.
    if let Ok(threads) = std::env::var("SYSID_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("rayon pool not yet initialized");
            }
            _ => {
                eprintln!("error: SYSID_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(exit::USAGE);
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage/help text; help and version requests
            // are successes, everything else is a usage error
            let _ = e.print();
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            std::process::exit(code);
        }
    };
    std::process::exit(run_command(cli));
}
