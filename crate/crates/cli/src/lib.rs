//! Command-line front end: `solve`, `vsi`, `phasing` and `multi`.
//!
//! [`run`] parses arguments, executes one command and returns the exit code
//! with the rendered report, so the binary only prints.

mod args;
mod commands;
mod report;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use pmu_core::{cases, parse_case, Error, Network};

pub use args::Cli;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// Unreadable or malformed input, bad arguments.
    BadInput = 1,
    /// No feasible placement, or the base power flow diverged.
    Infeasible = 2,
    /// A search ran out of its node budget; the best found is still reported.
    BudgetExhausted = 3,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: ExitCode,
    /// Report text for stdout (empty when `--out` was given).
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
pub(crate) struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: ExitCode::BadInput, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::NotConverged(_) => ExitCode::Infeasible,
            _ => ExitCode::BadInput,
        };
        Self { code, message: e.to_string() }
    }
}

/// What a command produced before output routing.
pub(crate) struct Rendered {
    pub text: String,
    pub code: ExitCode,
    pub note: Option<String>,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: ExitCode::BadInput, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: ExitCode::Ok, stdout: text, stderr: String::new() }
            };
        }
    };
    match commands::execute(&cli.command) {
        Ok((rendered, out)) => {
            let stderr = rendered.note.map(|n| format!("{n}\n")).unwrap_or_default();
            match out {
                Some(path) => match std::fs::write(path, &rendered.text) {
                    Ok(()) => Outcome { code: rendered.code, stdout: String::new(), stderr },
                    Err(e) => Outcome {
                        code: ExitCode::BadInput,
                        stdout: String::new(),
                        stderr: format!("error: cannot write {}: {e}\n", path.display()),
                    },
                },
                None => Outcome { code: rendered.code, stdout: rendered.text, stderr },
            }
        }
        Err(f) => Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) },
    }
}

/// Resolves a bundled alias or reads a case file.
pub(crate) fn load_case(case: &str) -> Result<Network, Failure> {
    if let Some(net) = cases::load_bundled(case) {
        return net.map_err(Failure::from);
    }
    let text =
        std::fs::read_to_string(Path::new(case)).map_err(|e| Failure::input(format!("cannot read {case}: {e}")))?;
    parse_case(&text).map_err(Failure::from)
}
