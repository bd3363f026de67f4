//! Command-line front-end for `bk-core`.
//!
//! Exit codes: 0 for trusted results, 1 for input errors, 2 for untrusted tails or a
//! non-converged iteration (the report is still written).

pub mod config;
pub mod run;

use std::ffi::OsString;

use clap::Parser;

use config::{Cli, RunConfig, PRECISION_ENV};

/// Parse `args`, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { run::EXIT_INPUT } else { run::EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::resolve(cli.command, cli.flags, std::env::var(PRECISION_ENV).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return run::EXIT_INPUT;
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return run::EXIT_INPUT;
        }
    }
    run::run(&cfg)
}
