use std::process::ExitCode;

use clap::Parser;

use bsel::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 1 {
        // Size the global worker pool once, before any parallel work starts.
        // Failure here means the pool was already built, which only happens
        // if this line moved after a parallel call; treat it as fatal.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("bsel: failed to size worker pool: {e}");
            return ExitCode::from(5);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bsel: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
