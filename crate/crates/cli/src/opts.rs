//! Argument helpers shared by the subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use attn2d_core::{MaskSpec, Precision};
use clap::ValueEnum;

use crate::error::CliError;

pub const PRECISION_VAR: &str = "ATTN2D_PRECISION";

/// Working precision: double unless `ATTN2D_PRECISION` says otherwise.
pub fn precision() -> Result<Precision, CliError> {
    match std::env::var(PRECISION_VAR) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|e: String| CliError::Config(format!("{PRECISION_VAR}: {e}"))),
        _ => Ok(Precision::Double),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    None,
    Causal,
}

impl MaskArg {
    pub fn spec(self) -> MaskSpec {
        match self {
            MaskArg::None => MaskSpec::None,
            MaskArg::Causal => MaskSpec::Causal,
        }
    }
}

/// Comma-separated list; an empty string is an empty list.
pub fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| CliError::Config(format!("bad {what} '{s}': {e}")))
        })
        .collect()
}

/// Writes `content` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Output {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}
