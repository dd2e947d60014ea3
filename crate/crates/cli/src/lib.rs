//! The `mteval` command line: scoring, correlation, judgment export,
//! tokenization and the annotation server.

pub mod args;
pub mod commands;
pub mod service;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use args::{Cli, Command};

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing, unreadable or malformed input, or an invalid option.
    #[error("{0}")]
    Input(String),
    /// Inputs are valid but do not overlap enough to compute a result.
    #[error("{0}")]
    Insufficient(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Insufficient(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(a) => commands::score(&a),
        Command::Correlate(a) => commands::correlate(&a),
        Command::AnnotateExport(a) => commands::annotate_export(&a),
        Command::Serve(a) => service::serve(&a),
        Command::Tokenize(a) => commands::tokenize(&a),
    }
}

/// `sha256:<hex>` of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
pub fn write_atomically(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Internal(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Input(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(fail)
}
