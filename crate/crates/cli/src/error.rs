use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rareweak_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 usage, 2 configuration, 3 numerical or I/O failure.
    pub fn exit_code(&self) -> i32 {
        use rareweak_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(E::Config { .. } | E::Domain(_)) => 2,
            CliError::Core(E::Numerical(_) | E::Quadrature { .. }) => 3,
            CliError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
