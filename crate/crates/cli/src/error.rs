use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: trigreg::Error,
    },

    #[error(transparent)]
    Core(#[from] trigreg::Error),
}

impl CliError {
    pub fn file(path: impl Into<PathBuf>) -> impl FnOnce(trigreg::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }

    /// 1 usage, 2 data or config, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        use trigreg::Error as E;
        let core = match self {
            CliError::Usage(_) => return 1,
            CliError::File { source, .. } => source,
            CliError::Core(e) => e,
        };
        match core {
            E::Numeric(_) | E::RankDeficient { .. } | E::Degenerate(_) | E::OutsideRange { .. } => {
                3
            }
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
