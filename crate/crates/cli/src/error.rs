use thiserror::Error;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", format_config(.message, *.line))]
    Config {
        message: String,
        line: Option<usize>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn format_config(message: &str, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("config error at line {l}: {message}"),
        None => format!("config error: {message}"),
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
            CliError::Budget(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

impl From<spinbath::Error> for CliError {
    fn from(e: spinbath::Error) -> Self {
        use spinbath::Error as E;
        match e {
            E::Budget(m) => CliError::Budget(m),
            E::InvalidInput(m) => CliError::Config {
                message: m,
                line: None,
            },
            other => CliError::Numerical(other.to_string()),
        }
    }
}
