//! Scenario runner behind the `plan` binary: parses TOML configs, runs the
//! cruise, regulator and trajectory studies, and writes CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod mission;
pub mod output;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 config error, 3 infeasible optimization, 4 numerical failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io { .. } => 1,
        }
    }
}

/// Command-line options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Recorded in summaries; every study is deterministic.
    pub seed: u64,
}

impl RunContext {
    pub const DEFAULT_OUT: &'static str = "out";

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(Self::DEFAULT_OUT))
    }

    /// Directory that relative paths inside the config resolve against.
    pub fn base_dir(&self) -> PathBuf {
        self.config
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }
}
