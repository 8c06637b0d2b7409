use std::process::ExitCode;

use riskbn_cli::{run_from, CliError, EXIT_INTERNAL};

fn main() -> ExitCode {
    let outcome = std::panic::catch_unwind(|| run_from(std::env::args_os()));
    match outcome {
        Ok(Ok(_)) => ExitCode::SUCCESS,
        Ok(Err(CliError::Help(text))) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {}", e.to_string().trim_end());
            ExitCode::from(e.exit_code())
        }
        // the panic hook has already printed the message
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
