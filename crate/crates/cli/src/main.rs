use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(message) = rareweak_cli::configure_threads() {
        let _ = writeln!(std::io::stderr(), "error: {message}");
        return ExitCode::from(1);
    }
    let code = rareweak_cli::run_with(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
