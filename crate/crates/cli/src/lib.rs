//! The `cvdiscord` command line: configuration, atomic outputs, the run
//! manifest and plot-ready data files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plotdata;

use std::ffi::OsString;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use crate::commands::{dispatch, Timer};
use crate::config::{resolve, Cli, EnvOverrides, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};
use crate::output::{write_atomic, Manifest, MANIFEST_NAME};

fn configure_threads(cfg: &RunConfig) {
    if let Some(n) = cfg.threads {
        // Fails only if the pool was already built in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args`, runs the command and writes the manifest. Returns the
/// process exit code.
pub fn run<I, T>(args: I, env: &EnvOverrides) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
        }
    };
    let cfg = match resolve(&cli, env) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    configure_threads(&cfg);

    let start = Instant::now();
    let mut timer = Timer::default();
    let result = dispatch(&cfg, &mut timer);
    let (code, error, outputs) = match result {
        Ok(ran) => {
            println!("{}", ran.summary);
            (EXIT_OK, None, ran.outputs)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()), Vec::new())
        }
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: serde_json::to_value(cfg.command).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        status: if code == EXIT_OK { "ok" } else { "error" },
        exit_code: code,
        error,
        seed: Some(cfg.seed),
        threads: rayon::current_num_threads(),
        config: serde_json::to_value(&cfg).unwrap_or_default(),
        timings: timer.stages,
        total_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(CliError::from)
        .and_then(|s| write_atomic(&cfg.out_dir.join(MANIFEST_NAME), s.as_bytes()));
    match written {
        Ok(()) => code,
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            if code == EXIT_OK {
                EXIT_RUNTIME
            } else {
                code
            }
        }
    }
}
