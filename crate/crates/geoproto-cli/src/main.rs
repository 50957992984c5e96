//! `geoproto`: cluster mixed numerical/categorical/geospatial portfolios,
//! choose k by the gap statistic, and report per-cluster actual-to-expected
//! mortality. All randomness flows from one master seed; reruns with the
//! same config and seed produce byte-identical outputs.

mod args;
mod config;
mod output;
mod run;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Failures split by exit code: 1 for rejected inputs, 2 for errors during
/// computation or output.
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        match verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn init_threads(flag: Option<usize>) {
    let from_env = || {
        std::env::var("GEOPROTO_THREADS")
            .ok()
            .and_then(|raw| raw.parse::<usize>().ok())
            .filter(|&n| n > 0)
    };
    if let Some(threads) = flag.or_else(from_env) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Inspect(args) => run::inspect(args),
        Command::Lambda(args) => run::lambda_cmd(args),
        Command::Cluster(args) => run::cluster(args),
        Command::SelectK(args) => run::select_k(args),
        Command::Experience(args) => run::experience(args),
        Command::Dist(args) => run::dist(args),
        Command::Synth(args) => run::synth_cmd(args),
    }
}

/// Dying quietly when a pipe closes (`geoproto lambda ... | head`) is the
/// conventional behavior for line-oriented tools; Rust disables it by
/// default, turning early reader exits into panics.
#[cfg(unix)]
fn restore_default_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_default_sigpipe() {}

fn main() {
    restore_default_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging(cli.verbose, cli.quiet);
    init_threads(cli.threads);
    match dispatch(&cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            std::process::exit(failure.code());
        }
    }
}
