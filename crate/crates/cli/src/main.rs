use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let threads = std::env::var(switchrep::THREADS_ENV).ok();
    let code = switchrep::run(
        std::env::args_os(),
        threads.as_deref(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
