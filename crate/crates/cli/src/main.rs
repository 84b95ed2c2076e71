use std::io::Write;
use std::process::ExitCode;

use sketchgrad_cli::{command, init_threads, run_matches};

fn main() -> ExitCode {
    let matches = command().get_matches();
    let result = init_threads()
        .and_then(|()| run_matches(&matches))
        .and_then(|outcome| {
            outcome.write_files()?;
            Ok(outcome)
        });
    match result {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(outcome.stdout.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("sketchgrad: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
