use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use coda_core::CodaError;

#[derive(Debug)]
pub enum CliError {
    /// Invalid flag combination. Exit code 2.
    Usage(String),
    /// Input or numerical failure. Exit code 1.
    Coda(CodaError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Coda(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => {
                write!(f, "error: {msg}\n\nFor more information, try '--help'.")
            }
            CliError::Coda(e) => write!(f, "error[{}]: {e}", e.kind()),
        }
    }
}

impl From<CodaError> for CliError {
    fn from(e: CodaError) -> Self {
        CliError::Coda(e)
    }
}

pub fn io_error(path: &str, source: io::Error) -> CliError {
    CliError::Coda(CodaError::Io {
        path: path.into(),
        source,
    })
}

impl From<io::Error> for CliError {
    fn from(source: io::Error) -> Self {
        io_error("<output>", source)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        io_error("<output>", io::Error::other(e.to_string()))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        io_error("<output>", io::Error::other(e.to_string()))
    }
}

/// `--out` file, or buffered stdout.
pub fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(&path.display().to_string(), e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}
