//! Command-line front end for the `rscn` toolkit.
//!
//! `rscn <gen|train|eval|online|bench|esp-check> [flags]`. Every command can
//! also be driven by a JSON run manifest (`--manifest`); flags win over the
//! manifest, which wins over defaults. Data outputs are written atomically and
//! each data-producing command leaves a `run.json` that replays it.

pub mod args;
mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::Parser;

pub use args::{Cli, Command, ModelKind};
pub use manifest::{Resolved, RunManifest};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Numeric => EXIT_NUMERIC,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    /// One line: `error kind=<usage|data|numeric> code=<n> message="..."`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(
            f,
            "error kind={} code={} message={:?}",
            self.kind.label(),
            self.kind.exit_code(),
            flat
        )
    }
}

impl From<rscn::Error> for CliError {
    fn from(e: rscn::Error) -> Self {
        let kind = if e.is_numeric() {
            ErrorKind::Numeric
        } else if matches!(e, rscn::Error::InvalidConfig(_)) {
            ErrorKind::Usage
        } else {
            ErrorKind::Data
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Errors are reported as a single line on stderr.
pub fn cmd_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first));
            return EXIT_USAGE;
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.kind.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Resolves settings and runs the command. Only `bench` uses the global
/// thread pool; everything else runs on a single worker.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let resolved = manifest::resolve(cli)?;
    if resolved.command == Command::Bench {
        return commands::bench(cli, &resolved);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::data(e.to_string()))?;
    pool.install(|| match resolved.command {
        Command::Gen => commands::gen(&resolved),
        Command::Train => commands::train(&resolved),
        Command::Eval => commands::eval(&resolved),
        Command::Online => commands::online(&resolved),
        Command::EspCheck => commands::esp_check(cli, &resolved),
        Command::Bench => unreachable!("handled above"),
    })
}
