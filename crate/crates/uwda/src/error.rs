use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] uwda_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Format { path: path.into(), msg: msg.to_string() }
    }

    /// Coarse category, printed with the message and mapped to the exit code.
    pub fn category(&self) -> &'static str {
        use uwda_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Format { .. } => "format",
            CliError::Core(e) => match e {
                E::MissingModel(_) | E::Checkpoint(_) | E::WrongCriticVariant { .. } | E::NonDifferentiableCritic => "model",
                E::NonFinite(_) | E::Diverged { .. } => "training",
                E::EmptyDataset(_) | E::EmptySplit { .. } | E::InvalidImage(_) => "data",
                _ => "input",
            },
        }
    }

    /// 2 is left to clap for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "io" => 4,
            "format" => 5,
            "model" => 6,
            "training" => 7,
            "data" => 8,
            _ => 9,
        }
    }
}
