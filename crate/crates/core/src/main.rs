use std::io::{self, Write};
use std::process::ExitCode;

use relaycoop::cli::{execute, parse_args};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let result = parse_args(&argv).and_then(|config| {
        for w in &config.warnings {
            eprintln!("warning: {w}");
        }
        let stdout = io::stdout();
        let mut out = stdout.lock();
        execute(&config, &mut out)?;
        out.flush()?;
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().trim_end());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
