use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match ttnborn_cli::run(std::env::args(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(ttnborn_cli::CliError::Usage(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
