use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use bblab_cli::{run, Cli, EXIT_CHECK_FAILED, EXIT_USAGE};
use clap::Parser;

fn write_output(path: &Path, body: &str) -> std::io::Result<()> {
    if path == Path::new("-") {
        std::io::stdout().write_all(body.as_bytes())
    } else {
        std::fs::write(path, body)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_USAGE as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }

    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };

    let (json, csv) = cli.command.outputs();
    if json != Some(Path::new("-")) {
        print!("{}", outcome.text);
    }
    let writes = [(json, Some(&outcome.json)), (csv, outcome.csv.as_ref())];
    for (path, body) in writes {
        if let (Some(path), Some(body)) = (path, body) {
            if let Err(e) = write_output(path, body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE as u8);
            }
        }
    }

    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED as u8)
    }
}
